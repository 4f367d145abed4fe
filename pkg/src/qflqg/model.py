"""Plant, noise, and cost description shared by every downstream module.

A scenario is the discrete-time system

    X_{t+1} = A X_t + B U_t + W_t,      W_t ~ N(0, W_cov)
    Y_t     = C X_t + v_t,              v_t ~ N(0, V_cov)

with X_0 ~ N(mu0, Sigma_x) and the finite-horizon quadratic criterion
sum_t (x'Q1 x + u'R u + price_t) + x_T' Q2 x_T.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NonpositiveHorizon,
    NotPSD,
    ScenarioValidationError,
)

SYM_TOL = 1e-12
PSD_TOL = 1e-10


def symmetrize(mat):
    return 0.5 * (mat + mat.T)


def psd_sqrt(mat):
    """Symmetric PSD square root via eigendecomposition.

    Negative eigenvalues within roundoff are clamped to zero, so the
    result is usable for degenerate (rank-deficient) covariances.
    """
    w, v = np.linalg.eigh(symmetrize(np.asarray(mat, dtype=float)))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def _clamp_psd(mat):
    w, v = np.linalg.eigh(mat)
    if w.min() >= 0.0:
        return mat
    w = np.clip(w, 0.0, None)
    return symmetrize((v * w) @ v.T)


@dataclass(frozen=True, eq=False)
class ScenarioModel:
    """Validated, immutable scenario parameters.

    Construct through :func:`validate_scenario`; direct construction skips
    the invariant checks.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W_cov: np.ndarray
    V_cov: np.ndarray
    Sigma_x: np.ndarray
    mu0: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    R: np.ndarray
    T: int

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def with_horizon(self, T):
        """Copy of this model with a different horizon."""
        return ScenarioModel(
            self.A, self.B, self.C, self.W_cov, self.V_cov,
            self.Sigma_x, self.mu0, self.Q1, self.Q2, self.R, int(T),
        )

    def to_dict(self):
        return {
            "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(),
            "W": self.W_cov.tolist(), "V": self.V_cov.tolist(),
            "Sigma_x": self.Sigma_x.tolist(), "mu0": self.mu0.tolist(),
            "Q1": self.Q1.tolist(), "Q2": self.Q2.tolist(), "R": self.R.tolist(),
            "T": self.T,
        }


_MATRIX_KEYS = ("A", "B", "C", "W", "V", "Sigma_x", "Q1", "Q2", "R")


def _check_sym_psd(name, mat, violations, strict=False):
    """Symmetry to SYM_TOL; min eigenvalue >= -PSD_TOL (or > 0 if strict).

    Returns the symmetrized, eigenvalue-clamped matrix.
    """
    if mat.shape[0] != mat.shape[1]:
        violations.append(DimensionMismatch(f"{name} must be square, got {mat.shape}"))
        return mat
    scale = max(1.0, np.abs(mat).max())
    if np.abs(mat - mat.T).max() > SYM_TOL * scale:
        violations.append(NotPSD(name, "not symmetric"))
        return mat
    mat = symmetrize(mat)
    min_eig = np.linalg.eigvalsh(mat).min()
    if strict:
        if min_eig <= 0.0:
            violations.append(NotPSD(name, f"min eigenvalue {min_eig:.3e} not > 0"))
            return mat
        return mat
    if min_eig < -PSD_TOL:
        violations.append(NotPSD(name, f"min eigenvalue {min_eig:.3e}"))
        return mat
    return _clamp_psd(mat)


def validate_scenario(raw) -> ScenarioModel:
    """Validate a scenario description (dict or ScenarioModel).

    Raises ScenarioValidationError listing every violated invariant.
    Validation is idempotent: a validated model passes through unchanged.
    """
    if isinstance(raw, ScenarioModel):
        raw = raw.to_dict()

    violations = []
    missing = [k for k in _MATRIX_KEYS + ("mu0", "T") if k not in raw]
    if missing:
        raise ScenarioValidationError(
            [DimensionMismatch(f"missing field {k!r}") for k in missing]
        )

    mats = {}
    for key in _MATRIX_KEYS:
        mats[key] = np.atleast_2d(np.asarray(raw[key], dtype=float))
    mu0 = np.asarray(raw["mu0"], dtype=float).reshape(-1)
    T = raw["T"]

    A, B, C = mats["A"], mats["B"], mats["C"]
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]

    def shape_check(name, mat, expect):
        if mat.shape != expect:
            violations.append(
                DimensionMismatch(f"{name} has shape {mat.shape}, expected {expect}")
            )
            return False
        return True

    shape_check("A", A, (n, n))
    shape_check("B", B, (n, m))
    shape_check("C", C, (p, n))
    ok_w = shape_check("W", mats["W"], (n, n))
    ok_v = shape_check("V", mats["V"], (p, p))
    ok_sx = shape_check("Sigma_x", mats["Sigma_x"], (n, n))
    ok_q1 = shape_check("Q1", mats["Q1"], (n, n))
    ok_q2 = shape_check("Q2", mats["Q2"], (n, n))
    ok_r = shape_check("R", mats["R"], (m, m))
    if mu0.shape != (n,):
        violations.append(DimensionMismatch(f"mu0 has shape {mu0.shape}, expected ({n},)"))

    if ok_w:
        mats["W"] = _check_sym_psd("W", mats["W"], violations)
    if ok_v:
        mats["V"] = _check_sym_psd("V", mats["V"], violations)
    if ok_sx:
        mats["Sigma_x"] = _check_sym_psd("Sigma_x", mats["Sigma_x"], violations)
    if ok_q1:
        mats["Q1"] = _check_sym_psd("Q1", mats["Q1"], violations)
    if ok_q2:
        mats["Q2"] = _check_sym_psd("Q2", mats["Q2"], violations)
    if ok_r:
        mats["R"] = _check_sym_psd("R", mats["R"], violations, strict=True)

    if not (isinstance(T, (int, np.integer)) and T >= 1):
        violations.append(NonpositiveHorizon(f"T must be an integer >= 1, got {T!r}"))

    if violations:
        raise ScenarioValidationError(violations)

    return ScenarioModel(
        A=A, B=B, C=C,
        W_cov=mats["W"], V_cov=mats["V"], Sigma_x=mats["Sigma_x"],
        mu0=mu0, Q1=mats["Q1"], Q2=mats["Q2"], R=mats["R"], T=int(T),
    )


def load_scenario(path) -> ScenarioModel:
    """Load and validate a scenario from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return validate_scenario(json.load(fh))


def stage_cost(model: ScenarioModel, x, u, theta_price: float) -> float:
    """Per-stage cost x'Q1 x + u'R u + theta_price."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape != (model.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({model.n},)")
    if u.shape != (model.m,):
        raise DimensionMismatch(f"u has shape {u.shape}, expected ({model.m},)")
    return float(x @ model.Q1 @ x + u @ model.R @ u + theta_price)


@dataclass
class TrajectoryRecord:
    """One simulated closed-loop trajectory.

    states has length T+1, all other sequences length T. selections hold
    bank indices (0-based, delay-sorted order); estimates are the
    controller-side state estimates used to compute each input.
    """

    states: np.ndarray       # (T+1, n)
    inputs: np.ndarray       # (T, m)
    outputs: np.ndarray      # (T, p)
    innovations: np.ndarray  # (T, p)
    selections: np.ndarray   # (T,) int
    realized_cost: float
    estimates: np.ndarray = field(default=None)  # (T, n), diagnostic

    def check_consistency(self, model: ScenarioModel, prices, rel_tol=1e-9):
        """Verify lengths and that realized_cost re-evaluates from the data."""
        T = model.T
        if (len(self.states) != T + 1 or len(self.inputs) != T
                or len(self.outputs) != T or len(self.innovations) != T
                or len(self.selections) != T):
            raise DimensionMismatch("trajectory lengths do not match the horizon")
        total = sum(
            stage_cost(model, self.states[t], self.inputs[t], prices[self.selections[t]])
            for t in range(T)
        )
        xT = self.states[T]
        total += float(xT @ model.Q2 @ xT)
        if abs(total - self.realized_cost) > rel_tol * max(1.0, abs(total)):
            raise ValueError(
                f"realized_cost {self.realized_cost!r} inconsistent with re-evaluation {total!r}"
            )
        return total
