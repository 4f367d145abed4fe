"""Forward Kalman recursions and the sensor-side innovation generator.

The innovation sequence is white, zero mean with covariance M_t, and does
not depend on the applied inputs; its statistics are therefore computable
offline. The online sensor step performs no matrix inversion: gains are
taken from the precomputed statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, SingularInnovationCovariance, TimeDesync
from .model import ScenarioModel, symmetrize

COND_CAP = 1e12


@dataclass(frozen=True, eq=False)
class InnovationStatistics:
    """Offline forward-sweep outputs for t = 0..T-1.

    M: (T, p, p) innovation covariances; Sigma_pred: (T, n, n) one-step
    prediction covariances (Sigma_pred[0] = Sigma_x); Sigma_filt: (T, n, n)
    filtered covariances; K: (T, n, p) Kalman gains. A_pows caches powers
    of A up to T for the propagation factors.
    """

    model: ScenarioModel
    M: np.ndarray
    Sigma_pred: np.ndarray
    Sigma_filt: np.ndarray
    K: np.ndarray
    A_pows: np.ndarray = field(repr=False)

    @property
    def T(self):
        return self.M.shape[0]


def propagate_statistics(model: ScenarioModel) -> InnovationStatistics:
    """Forward sweep of the covariance recursions plus Kalman gains.

        M_t         = C Sigma_{t|t-1} C' + V
        Sigma_t     = Sigma_{t|t-1} - Sigma_{t|t-1} C' M_t^{-1} C Sigma_{t|t-1}
        Sigma_{t+1|t} = A Sigma_t A' + W

    with Sigma_{0|-1} = Sigma_x. Raises SingularInnovationCovariance when
    some M_t is ill conditioned (e.g. V = 0 with rank-deficient C Sigma C').
    """
    A, C = model.A, model.C
    n, p, T = model.n, model.p, model.T

    M = np.zeros((T, p, p))
    Sp = np.zeros((T, n, n))
    Sf = np.zeros((T, n, n))
    K = np.zeros((T, n, p))

    pred = model.Sigma_x
    for t in range(T):
        Sp[t] = symmetrize(pred)
        M[t] = symmetrize(C @ Sp[t] @ C.T + model.V_cov)
        if np.linalg.cond(M[t]) > COND_CAP:
            raise SingularInnovationCovariance(
                f"M_{t} has condition number > {COND_CAP:.0e}"
            )
        Minv = np.linalg.inv(M[t])
        K[t] = Sp[t] @ C.T @ Minv
        Sf[t] = symmetrize(Sp[t] - Sp[t] @ C.T @ Minv @ C @ Sp[t])
        pred = A @ Sf[t] @ A.T + model.W_cov

    A_pows = np.zeros((T + 1, n, n))
    A_pows[0] = np.eye(n)
    for j in range(1, T + 1):
        A_pows[j] = A @ A_pows[j - 1]

    return InnovationStatistics(
        model=model, M=M, Sigma_pred=Sp, Sigma_filt=Sf, K=K, A_pows=A_pows
    )


def psi_factor(stats: InnovationStatistics, t: int, k: int):
    """Propagation factor A^{t-k} K_k (an n x p matrix), t >= k."""
    if not (0 <= k <= t <= stats.T):
        raise IndexOutOfRange(f"psi_factor requires 0 <= k <= t <= T, got t={t}, k={k}")
    if k >= stats.T:
        raise IndexOutOfRange(f"k={k} has no gain for horizon {stats.T}")
    return stats.A_pows[t - k] @ stats.K[k]


@dataclass
class SensorFilterState:
    """Running sensor-side filtered estimate of the control-adjusted state.

    Single-owner mutable; advanced by exactly one simulation thread.
    """

    model: ScenarioModel
    xhat: np.ndarray
    t: int = 0


def make_sensor(model: ScenarioModel) -> SensorFilterState:
    return SensorFilterState(model=model, xhat=model.mu0.copy(), t=0)


def sensor_innovation_step(state: SensorFilterState, y, u_prev, stats: InnovationStatistics):
    """One measurement update: returns (xi_t, state).

    At t = 0 no input has been applied yet, so u_prev must be None;
    afterwards it must be the input applied at t-1. The prediction is
    x_pred = A xhat + B u_prev (mu0 at t = 0), the innovation is
    y - C x_pred, and the estimate advances with the precomputed gain.
    """
    t = state.t
    if t >= stats.T:
        raise TimeDesync(f"sensor at t={t} but statistics cover T={stats.T}")
    if (u_prev is None) != (t == 0):
        raise TimeDesync(f"u_prev must be supplied exactly when t > 0 (t={t})")

    model = state.model
    if t == 0:
        x_pred = model.mu0
    else:
        x_pred = model.A @ state.xhat + model.B @ np.asarray(u_prev, dtype=float)
    xi = np.asarray(y, dtype=float) - model.C @ x_pred
    state.xhat = x_pred + stats.K[t] @ xi
    state.t = t + 1
    return xi, state
