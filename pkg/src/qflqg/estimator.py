"""Controller-side state estimator under delayed, out-of-order arrivals.

The estimate propagates open-loop through the plant model and folds in
the decoded conditional mean of each quantized innovation the instant its
message arrives, scaled by the propagation factor A^{t-k} K_k. Zero-delay
messages are applied before the control input at the same tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateArrival, FutureOrigin
from .innovation import InnovationStatistics, psi_factor
from .model import ScenarioModel
from .quantizer import CellMomentTable


@dataclass(frozen=True, eq=False)
class ChannelMessage:
    """One quantized innovation in flight.

    arrival_time = origin_time + delay of the sending quantizer.
    """

    quantizer_index: int
    cell_index: int
    origin_time: int
    arrival_time: int


def decode_message(msg: ChannelMessage, moments: CellMomentTable):
    """Conditional mean of the innovation given the received cell."""
    return moments.xi_bar(msg.origin_time, msg.quantizer_index, msg.cell_index)


@dataclass
class EstimatorState:
    """Controller-side running estimate; single-owner mutable.

    t = -1 before the first step. arrived[k] is the realized arrival
    indicator for origin time k; it never reverts to False.
    """

    model: ScenarioModel
    xbar: np.ndarray
    t: int
    arrived: np.ndarray
    xi_bar_cache: dict = field(default_factory=dict)


def make_estimator(model: ScenarioModel) -> EstimatorState:
    return EstimatorState(
        model=model,
        xbar=np.zeros(model.n),
        t=-1,
        arrived=np.zeros(model.T, dtype=bool),
    )


def estimator_step(
    state: EstimatorState,
    u_prev,
    arrivals,
    stats: InnovationStatistics,
    moments: CellMomentTable,
) -> EstimatorState:
    """Advance the estimate one tick and fold in newly arrived messages.

    X_bar_t = A X_bar_{t-1} + B u_prev + sum_{new k} A^{t-k} K_k xi_bar_k,
    with X_bar_0 = mu0 plus any zero-delay term. Arrivals must carry
    arrival_time equal to the new t and origin times <= t.
    """
    model = state.model
    t = state.t + 1
    if t == 0:
        xbar = model.mu0.copy()
    else:
        xbar = model.A @ state.xbar + model.B @ np.asarray(u_prev, dtype=float)

    for msg in arrivals:
        k = msg.origin_time
        if k > t:
            raise FutureOrigin(f"message with origin {k} delivered at t={t}")
        if state.arrived[k]:
            raise DuplicateArrival(f"origin time {k} delivered twice")
        xi_bar = decode_message(msg, moments)
        xbar = xbar + psi_factor(stats, t, k) @ xi_bar
        state.arrived[k] = True
        state.xi_bar_cache[k] = xi_bar

    state.xbar = xbar
    state.t = t
    return state


def batch_estimate(
    arrivals_by_origin: dict,
    inputs,
    stats: InnovationStatistics,
    moments: CellMomentTable,
    t: int,
) -> np.ndarray:
    """Direct (non-incremental) evaluation of the estimate at time t.

    arrivals_by_origin maps origin time k to a ChannelMessage for every
    message that has arrived by t (arrival_time <= t); inputs holds
    U_0..U_{t-1}. Oracle for estimator_step.
    """
    model = stats.model
    xbar = stats.A_pows[t] @ model.mu0
    for k, msg in arrivals_by_origin.items():
        if msg.arrival_time <= t:
            xbar = xbar + psi_factor(stats, t, k) @ decode_message(msg, moments)
    for k in range(t):
        xbar = xbar + stats.A_pows[t - 1 - k] @ model.B @ np.asarray(inputs[k], dtype=float)
    return xbar
