"""Backward Riccati recursion for the certainty-equivalence controller.

The gains are independent of the quantizer bank; only the plant and cost
weights enter. Alongside the gains, the recursion produces the error
weights N_k and the scalar noise bookkeeping r_k used by the scheduling
and cost-evaluation paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularInnerMatrix
from .model import ScenarioModel, symmetrize

COND_CAP = 1e12


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Backward-recursion outputs.

    P: (T+1, n, n) with P[T] = Q2; L: (T, m, n); N: (T, n, n);
    r: (T+1,) with r[T] = 0.
    """

    P: np.ndarray
    L: np.ndarray
    N: np.ndarray
    r: np.ndarray


def solve_riccati(model: ScenarioModel) -> RiccatiSolution:
    """Run the backward recursion from P_T = Q2.

        L_k = (R + B'P_{k+1}B)^{-1} B'P_{k+1}A
        P_k = Q1 + A'P_{k+1}A - L_k'(R + B'P_{k+1}B)L_k
        N_k = L_k'(R + B'P_{k+1}B)L_k
        r_k = r_{k+1} + tr(P_{k+1} W)

    Raises SingularInnerMatrix when R + B'P_{k+1}B is ill conditioned.
    """
    A, B = model.A, model.B
    n, m, T = model.n, model.m, model.T

    P = np.zeros((T + 1, n, n))
    L = np.zeros((T, m, n))
    N = np.zeros((T, n, n))
    r = np.zeros(T + 1)

    P[T] = model.Q2
    for k in range(T - 1, -1, -1):
        inner = symmetrize(model.R + B.T @ P[k + 1] @ B)
        if np.linalg.cond(inner) > COND_CAP:
            raise SingularInnerMatrix(
                f"R + B'P B at stage {k} has condition number > {COND_CAP:.0e}"
            )
        cho = scipy.linalg.cho_factor(inner)
        L[k] = scipy.linalg.cho_solve(cho, B.T @ P[k + 1] @ A)
        N[k] = symmetrize(L[k].T @ inner @ L[k])
        P[k] = symmetrize(model.Q1 + A.T @ P[k + 1] @ A - N[k])
        r[k] = r[k + 1] + np.trace(P[k + 1] @ model.W_cov)

    return RiccatiSolution(P=P, L=L, N=N, r=r)


def control_gain_apply(L_k, xbar):
    """Optimal input -L_k @ xbar."""
    return -np.asarray(L_k) @ np.asarray(xbar, dtype=float)


def upsilon_recursion(N, A):
    """Backward accumulation U_t = A'U_{t+1}A + N_t with U_T = 0.

    Fast path for the full-observation scheduling shortcut; returns an
    array of shape (T+1, n, n).
    """
    N = np.asarray(N)
    A = np.asarray(A)
    T, n = N.shape[0], A.shape[0]
    ups = np.zeros((T + 1, n, n))
    for t in range(T - 1, -1, -1):
        ups[t] = symmetrize(A.T @ ups[t + 1] @ A + N[t])
    return ups
