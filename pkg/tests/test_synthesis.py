"""Backward Riccati recursion against an independent value-iteration oracle."""

import numpy as np
import pytest

from conftest import random_scenario
from qflqg import demo_scenario, solve_riccati, control_gain_apply, upsilon_recursion
from qflqg.errors import SingularInnerMatrix
from qflqg.model import validate_scenario


def value_iteration_oracle(model):
    """Bellman value iteration evaluated pointwise, no Riccati algebra.

    At each stage the value function is the quadratic x'P x + const.
    P is recovered by polarization: evaluating the minimized one-step
    value at basis vectors and their sums. L is recovered by solving the
    stationarity system of the minimized quadratic numerically per basis
    state. Shares no code path with solve_riccati.
    """
    n, m, T = model.n, model.m, model.T
    A, B, Q1, R = model.A, model.B, model.Q1, model.R

    P_next = model.Q2.copy()
    Ps = [None] * (T + 1)
    Ls = [None] * T
    Ps[T] = P_next

    def min_value_and_arg(x, P):
        # minimize x'Q1 x + u'R u + (Ax+Bu)'P(Ax+Bu) over u via numpy solve
        H = R + B.T @ P @ B
        g = B.T @ P @ A @ x
        u = -np.linalg.solve(H, g)
        val = x @ Q1 @ x + u @ R @ u + (A @ x + B @ u) @ P @ (A @ x + B @ u)
        return val, u

    for k in range(T - 1, -1, -1):
        P_k = np.zeros((n, n))
        basis = np.eye(n)
        vals = np.array([min_value_and_arg(basis[i], P_next)[0] for i in range(n)])
        for i in range(n):
            P_k[i, i] = vals[i]
        for i in range(n):
            for j in range(i + 1, n):
                v, _ = min_value_and_arg(basis[i] + basis[j], P_next)
                P_k[i, j] = P_k[j, i] = 0.5 * (v - vals[i] - vals[j])
        L_k = np.zeros((m, n))
        for i in range(n):
            _, u = min_value_and_arg(basis[i], P_next)
            L_k[:, i] = -u
        Ps[k], Ls[k] = P_k, L_k
        P_next = P_k
    return np.array(Ps), np.array(Ls)


def test_riccati_scalar_hand_values():
    model = validate_scenario({
        "A": [[1.0]], "B": [[1.0]], "C": [[1.0]],
        "W": [[1.0]], "V": [[1.0]], "Sigma_x": [[1.0]], "mu0": [0.0],
        "Q1": [[1.0]], "Q2": [[1.0]], "R": [[1.0]], "T": 2,
    })
    sol = solve_riccati(model)
    assert sol.P[:, 0, 0] == pytest.approx([1.6, 1.5, 1.0])
    assert sol.L[:, 0, 0] == pytest.approx([0.6, 0.5])
    # r_k = r_{k+1} + tr(P_{k+1} W)
    assert sol.r[2] == 0.0
    assert sol.r[1] == pytest.approx(1.0)
    assert sol.r[0] == pytest.approx(2.5)


def test_riccati_matches_value_iteration_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        model = random_scenario(rng, n=int(rng.integers(1, 4)),
                                m=int(rng.integers(1, 4)),
                                T=int(rng.integers(2, 16)))
        sol = solve_riccati(model)
        P_ref, L_ref = value_iteration_oracle(model)
        assert np.max(np.abs(sol.P - P_ref)) < 1e-10
        assert np.max(np.abs(sol.L - L_ref)) < 1e-10


def test_n_matrix_definition():
    rng = np.random.default_rng(5)
    model = random_scenario(rng, T=6)
    sol = solve_riccati(model)
    for k in range(model.T):
        H = model.R + model.B.T @ sol.P[k + 1] @ model.B
        assert np.allclose(sol.N[k], sol.L[k].T @ H @ sol.L[k], atol=1e-12)


def test_gains_independent_of_noise_and_prior():
    """Certainty equivalence: L depends only on (A, B, Q1, Q2, R, T)."""
    rng = np.random.default_rng(7)
    model = random_scenario(rng, T=8)
    raw = model.to_dict()
    raw["W"] = (10.0 * np.asarray(raw["W"])).tolist()
    raw["V"] = (0.3 * np.asarray(raw["V"])).tolist()
    raw["Sigma_x"] = (2.0 * np.asarray(raw["Sigma_x"])).tolist()
    other = validate_scenario(raw)
    assert np.allclose(solve_riccati(model).L, solve_riccati(other).L, atol=1e-14)


def test_control_gain_apply():
    rng = np.random.default_rng(11)
    L = rng.standard_normal((2, 3))
    x = rng.standard_normal(3)
    assert np.allclose(control_gain_apply(L, x), -L @ x)


def test_singular_inner_matrix_raised():
    with pytest.raises(SingularInnerMatrix):
        # Bypass validation: R = 0 with B = 0 makes R + B'PB singular.
        from qflqg.model import ScenarioModel
        model = ScenarioModel(
            A=np.eye(1), B=np.zeros((1, 1)), C=np.eye(1),
            W_cov=np.eye(1), V_cov=np.eye(1), Sigma_x=np.eye(1),
            mu0=np.zeros(1), Q1=np.eye(1), Q2=np.eye(1),
            R=np.zeros((1, 1)), T=3,
        )
        solve_riccati(model)


def test_upsilon_recursion_terminal_and_step():
    rng = np.random.default_rng(13)
    model = random_scenario(rng, T=5)
    sol = solve_riccati(model)
    ups = upsilon_recursion(sol.N, model.A)
    assert np.allclose(ups[model.T], 0.0)
    for t in range(model.T):
        assert np.allclose(ups[t], model.A.T @ ups[t + 1] @ model.A + sol.N[t], atol=1e-12)
