"""Shared generators and fixtures for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from qflqg import (
    build_moment_tables,
    demo_bank,
    demo_scenario,
    load_bank,
    propagate_statistics,
    solve_riccati,
    validate_scenario,
)


def random_psd(rng, n, scale=1.0, min_eig=0.0):
    m = rng.standard_normal((n, n))
    return scale * (m @ m.T / n) + min_eig * np.eye(n)


def random_scenario(rng, n=None, m=None, p=None, T=None):
    """Well-posed random scenario with moderate spectral radius."""
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    p = p or int(rng.integers(1, 4))
    T = T or int(rng.integers(2, 16))
    A = rng.standard_normal((n, n))
    A = A / max(1.0, np.max(np.abs(np.linalg.eigvals(A)))) * rng.uniform(0.5, 1.2)
    return validate_scenario({
        "A": A.tolist(),
        "B": rng.standard_normal((n, m)).tolist(),
        "C": rng.standard_normal((p, n)).tolist(),
        "W": random_psd(rng, n, min_eig=0.05).tolist(),
        "V": random_psd(rng, p, min_eig=0.05).tolist(),
        "Sigma_x": random_psd(rng, n, min_eig=0.05).tolist(),
        "mu0": rng.standard_normal(n).tolist(),
        "Q1": random_psd(rng, n, min_eig=0.01).tolist(),
        "Q2": random_psd(rng, n, min_eig=0.01).tolist(),
        "R": random_psd(rng, m, min_eig=0.1).tolist(),
        "T": T,
    })


def _box_partition_1d(thresholds):
    """Non-overlapping 1-D cells covering R from sorted thresholds."""
    pts = [-np.inf] + [float(v) for v in thresholds] + [np.inf]
    return [[[lo if np.isfinite(lo) else "-inf", hi if np.isfinite(hi) else "inf"]]
            for lo, hi in zip(pts[:-1], pts[1:])]


def random_bank_1d(rng, M=3, bit_rate=None, max_levels=4, prices=None,
                   allow_null=False):
    """Bank of M random 1-D threshold quantizers."""
    bit_rate = bit_rate or int(rng.integers(1, 4))
    quantizers = []
    for i in range(M):
        lo_levels = 1 if allow_null else 2
        levels = int(rng.integers(lo_levels, max_levels + 1))
        thresholds = np.sort(rng.normal(0.0, 1.0, size=levels - 1))
        price = float(prices[i]) if prices is not None else float(rng.uniform(0.1, 5.0))
        quantizers.append({"price": price, "cells": _box_partition_1d(thresholds)})
    return load_bank({"bit_rate": bit_rate, "quantizers": quantizers})


@pytest.fixture(scope="session")
def benchmark_setup():
    """Benchmark scenario at T=20 with its full offline artifact set."""
    model = demo_scenario(T=20)
    bank = demo_bank(bit_rate=1)
    riccati = solve_riccati(model)
    stats = propagate_statistics(model)
    moments = build_moment_tables(bank, stats)
    return model, bank, riccati, stats, moments
