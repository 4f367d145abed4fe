"""Quantizer bank modeling and truncated-Gaussian cell moments.

Quantizer cells are axis-aligned boxes in R^p with the closed-below /
open-above boundary convention: x lies in a cell iff lo <= x_d < hi for
every dimension d. Codebook values are never needed numerically; the
decoder only uses per-cell conditional means, which are precomputed here
by deterministic tensor-product Gauss-Legendre quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IndexOutOfRange,
    NoCellFound,
    PartitionInvalid,
    QuadratureNotConverged,
    UnknownCell,
    UnsupportedDimension,
)
from .innovation import InnovationStatistics
from .model import symmetrize

PARTITION_TOL = 1e-6
MAX_DIM = 3


@dataclass(frozen=True, eq=False)
class QuantizerSpec:
    """One quantizer: a box partition of R^p with a per-use price.

    cells: tuple of boxes; each box is a tuple of (lo, hi) per dimension,
    bounds may be +-inf. index is the original position in the input bank
    (before delay sorting), kept for reporting.
    """

    cells: tuple
    price: float
    index: int

    @property
    def levels(self):
        return len(self.cells)

    @property
    def dim(self):
        return len(self.cells[0])


@dataclass(frozen=True, eq=False)
class QuantizerBank:
    """M quantizers sorted by delay, plus the channel bit-rate.

    delays[i] = ceil(bits_i / bit_rate) with bits_i = ceil(log2 levels_i);
    a single-cell (null) quantizer has delay 0.
    """

    quantizers: tuple
    bit_rate: int
    delays: np.ndarray

    @property
    def M(self):
        return len(self.quantizers)

    @property
    def dim(self):
        return self.quantizers[0].dim

    @property
    def prices(self):
        return np.array([q.price for q in self.quantizers])


def delay_of(levels: int, bit_rate: int) -> int:
    """Transmissions needed for ceil(log2 levels) bits at the given rate."""
    if levels <= 1:
        return 0
    bits = (levels - 1).bit_length()
    return -(-bits // bit_rate)


def compute_delays(quantizers, bit_rate: int) -> QuantizerBank:
    """Assemble a bank: compute delays and sort stably by delay.

    Original indices are preserved on each QuantizerSpec for reporting.
    """
    if bit_rate < 1:
        raise ValueError("bit_rate must be a positive integer")
    dims = {q.dim for q in quantizers}
    if len(dims) != 1:
        raise ValueError("all quantizers must share the same dimension")
    order = sorted(range(len(quantizers)), key=lambda i: delay_of(quantizers[i].levels, bit_rate))
    qs = tuple(quantizers[i] for i in order)
    delays = np.array([delay_of(q.levels, bit_rate) for q in qs], dtype=int)
    return QuantizerBank(quantizers=qs, bit_rate=int(bit_rate), delays=delays)


def _parse_bound(v):
    if isinstance(v, str):
        if v in ("inf", "+inf", "Infinity"):
            return math.inf
        if v == "-inf":
            return -math.inf
        raise ValueError(f"unrecognized bound {v!r}")
    return float(v)


def load_bank(path_or_dict) -> QuantizerBank:
    """Load a quantizer bank from JSON.

    Schema: {"bit_rate": int, "quantizers": [{"price": float,
    "cells": [[[lo, hi], ...per-dim], ...]}, ...]}; bounds accept the
    "inf"/"-inf" sentinels.
    """
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    specs = []
    for idx, q in enumerate(doc["quantizers"]):
        cells = tuple(
            tuple((_parse_bound(lo), _parse_bound(hi)) for lo, hi in cell)
            for cell in q["cells"]
        )
        specs.append(QuantizerSpec(cells=cells, price=float(q["price"]), index=idx))
    return compute_delays(specs, int(doc["bit_rate"]))


def quantize(spec: QuantizerSpec, xi) -> int:
    """Cell index (0-based) containing xi; lo <= x < hi per dimension."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    for j, cell in enumerate(spec.cells):
        if all(lo <= x < hi for x, (lo, hi) in zip(xi, cell)):
            return j
    raise NoCellFound(f"no cell of quantizer {spec.index} contains {xi}")


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-9
    start_nodes: int = 16
    max_nodes: int = 1024
    clip_sigmas: float = 10.0


def _tensor_gl(points_weights, Minv, norm):
    """Probability mass and first moment over one box from per-dim rules."""
    grids = np.meshgrid(*[pw[0] for pw in points_weights], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = points_weights[0][1]
    for pw in points_weights[1:]:
        wts = np.multiply.outer(wts, pw[1])
    wts = wts.ravel()
    dens = norm * np.exp(-0.5 * np.einsum("ij,jk,ik->i", pts, Minv, pts))
    wd = wts * dens
    return float(wd.sum()), pts.T @ wd


def cell_moments(M, cells, config: QuadratureConfig = QuadratureConfig()):
    """Probabilities and conditional means of N(0, M) restricted to boxes.

    Returns (probs, means) with probs shape (J,) and means shape (J, p).
    Infinite bounds are clipped at +-clip_sigmas * sqrt(max diag M); node
    counts double per dimension until successive estimates agree to
    rel_tol. Deterministic for a fixed config.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    p = M.shape[0]
    if p > MAX_DIM:
        raise UnsupportedDimension(f"cell moments support p <= {MAX_DIM}, got p={p}")
    Minv = np.linalg.inv(M)
    norm = 1.0 / math.sqrt((2.0 * math.pi) ** p * np.linalg.det(M))
    clip = config.clip_sigmas * math.sqrt(float(np.max(np.diag(M))))
    sigma_scale = math.sqrt(float(np.max(np.diag(M))))

    probs = np.zeros(len(cells))
    means = np.zeros((len(cells), p))
    for j, cell in enumerate(cells):
        box = [(max(lo, -clip), min(hi, clip)) for lo, hi in cell]
        if any(lo >= hi for lo, hi in box):
            # cell lies entirely beyond the clipping radius
            probs[j] = 0.0
            continue
        prev = None
        nodes = config.start_nodes
        achieved = math.inf
        while nodes <= config.max_nodes:
            rules = []
            gx, gw = np.polynomial.legendre.leggauss(nodes)
            for lo, hi in box:
                half = 0.5 * (hi - lo)
                rules.append((0.5 * (hi + lo) + half * gx, half * gw))
            prob, m1 = _tensor_gl(rules, Minv, norm)
            if prev is not None:
                dp = abs(prob - prev[0])
                dm = float(np.max(np.abs(m1 - prev[1]))) if p else 0.0
                achieved = max(dp, dm / max(sigma_scale, 1e-300))
                if achieved < config.rel_tol * max(1.0, abs(prob)):
                    break
            prev = (prob, m1)
            nodes *= 2
        else:
            raise QuadratureNotConverged(achieved, context=f"cell {j}")
        probs[j] = prob
        means[j] = m1 / prob if prob > 1e-12 else np.zeros(p)
    return probs, means


def reduction_covariance(probs, means):
    """Covariance of the cell-conditional means: sum_j p_j m_j m_j'."""
    means = np.atleast_2d(means)
    return symmetrize(np.einsum("j,ja,jb->ab", np.asarray(probs), means, means))


@dataclass(frozen=True, eq=False)
class CellMomentTable:
    """Offline per-(t, quantizer, cell) probabilities and conditional means.

    probs[t][i] is a (J_i,) array, means[t][i] a (J_i, p) array;
    F has shape (T, M, p, p) and M_cov copies the innovation covariances.
    """

    probs: tuple
    means: tuple
    F: np.ndarray
    M_cov: np.ndarray

    @property
    def T(self):
        return self.F.shape[0]

    @property
    def n_quantizers(self):
        return self.F.shape[1]

    def xi_bar(self, t: int, i: int, j: int):
        """Decoded conditional mean for cell j of quantizer i at time t."""
        if not (0 <= t < self.T and 0 <= i < self.n_quantizers):
            raise UnknownCell(f"no table entry for (t={t}, i={i})")
        if not (0 <= j < len(self.means[t][i])):
            raise UnknownCell(f"quantizer {i} has no cell {j}")
        return self.means[t][i][j]

    def F_of(self, t: int, i: int):
        return self.F[t, i]

    def residual_covariance(self, t: int, i: int):
        """M_t - F_t^i: innovation uncertainty left after decoding."""
        return self.M_cov[t] - self.F[t, i]


def build_moment_tables(
    bank: QuantizerBank,
    stats: InnovationStatistics,
    config: QuadratureConfig = QuadratureConfig(),
) -> CellMomentTable:
    """Full offline table over t x quantizer x cell.

    Validates the partition invariant (cell probabilities sum to 1 within
    1e-6 for every (t, i)) and tags quadrature failures with (t, i).
    """
    if bank.dim != stats.model.p:
        raise UnsupportedDimension(
            f"bank dimension {bank.dim} does not match output dimension {stats.model.p}"
        )
    T = stats.T
    probs_all, means_all = [], []
    F = np.zeros((T, bank.M, bank.dim, bank.dim))
    for t in range(T):
        row_p, row_m = [], []
        for i, spec in enumerate(bank.quantizers):
            try:
                probs, means = cell_moments(stats.M[t], spec.cells, config)
            except QuadratureNotConverged as exc:
                raise QuadratureNotConverged(
                    exc.achieved, context=f"(t={t}, i={i})"
                ) from exc
            if abs(probs.sum() - 1.0) > PARTITION_TOL:
                raise PartitionInvalid(
                    f"quantizer {i} cells sum to {probs.sum():.8f} at t={t}"
                )
            row_p.append(probs)
            row_m.append(means)
            F[t, i] = reduction_covariance(probs, means)
        probs_all.append(tuple(row_p))
        means_all.append(tuple(row_m))
    return CellMomentTable(
        probs=tuple(probs_all), means=tuple(means_all), F=F, M_cov=stats.M.copy()
    )
