"""Seeded closed-loop Monte Carlo: plant, sensor, channel, controller.

Trials are independent and deterministically seeded from
(master_seed, trial index), so results do not depend on execution order.
The empirical mean cost is compared against the closed-form optimum
tr(P0 (Sigma_x + mu0 mu0')) + r0 + C0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import ChannelMessage, estimator_step, make_estimator
from .innovation import InnovationStatistics, make_sensor, sensor_innovation_step
from .model import ScenarioModel, TrajectoryRecord, psd_sqrt
from .quantizer import CellMomentTable, QuantizerBank, quantize
from .selection import evaluate_C0
from .synthesis import RiccatiSolution


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo run parameters.

    schedule holds bank indices per stage (delay-sorted order); when None
    the optimal schedule is computed inline.
    """

    trials: int
    master_seed: int
    schedule: tuple = None
    record_trajectories: bool = False


@dataclass(frozen=True, eq=False)
class CostReport:
    """Empirical versus theoretical cost for one schedule.

    empirical_stderr is None for a single trial. breakdown splits the
    empirical mean into state, input, terminal, and quantization-price
    components.
    """

    empirical_mean: float
    empirical_stderr: float | None
    theoretical: float
    breakdown: dict
    trials: int
    per_trial_costs: np.ndarray = None


def channel_deliver(queue: list, t: int) -> list:
    """Remove and return messages due at t, sorted by origin time."""
    due = sorted(
        (m for m in queue if m.arrival_time == t), key=lambda m: m.origin_time
    )
    queue[:] = [m for m in queue if m.arrival_time != t]
    return due


def run_trial(
    model: ScenarioModel,
    bank: QuantizerBank,
    riccati: RiccatiSolution,
    stats: InnovationStatistics,
    moments: CellMomentTable,
    schedule,
    seed,
    gain_override=None,
) -> TrajectoryRecord:
    """One seeded closed-loop trajectory under a fixed selection schedule.

    Per tick: emit Y_t, form the innovation, quantize and enqueue with the
    quantizer's delay, deliver due messages to the estimator, apply
    U_t = -L_t X_bar_t, then advance the plant. Noise is drawn through
    symmetric PSD factor of each covariance. gain_override substitutes
    the control gains (innovation invariance checks) without touching
    the recorded schedule cost.
    """
    rng = np.random.default_rng(seed)
    T, n, m, p = model.T, model.n, model.m, model.p
    A, B, C = model.A, model.B, model.C
    L = riccati.L if gain_override is None else gain_override
    sqrt_w = psd_sqrt(model.W_cov)
    sqrt_v = psd_sqrt(model.V_cov)
    sqrt_x = psd_sqrt(model.Sigma_x)
    prices = bank.prices

    states = np.zeros((T + 1, n))
    inputs = np.zeros((T, m))
    outputs = np.zeros((T, p))
    innovations = np.zeros((T, p))
    estimates = np.zeros((T, n))
    selections = np.asarray(schedule, dtype=int)

    sensor = make_sensor(model)
    est = make_estimator(model)
    queue: list[ChannelMessage] = []

    x = model.mu0 + sqrt_x @ rng.standard_normal(n)
    states[0] = x
    y = C @ x + sqrt_v @ rng.standard_normal(p)
    u_prev = None
    cost = 0.0

    for t in range(T):
        outputs[t] = y
        xi, _ = sensor_innovation_step(sensor, y, u_prev, stats)
        innovations[t] = xi

        i = int(selections[t])
        j = quantize(bank.quantizers[i], xi)
        queue.append(ChannelMessage(
            quantizer_index=i, cell_index=j,
            origin_time=t, arrival_time=t + int(bank.delays[i]),
        ))

        arrivals = channel_deliver(queue, t)
        estimator_step(est, u_prev, arrivals, stats, moments)
        estimates[t] = est.xbar

        u = -L[t] @ est.xbar
        inputs[t] = u
        cost += float(x @ model.Q1 @ x) + float(u @ model.R @ u) + float(prices[i])

        x = A @ x + B @ u + sqrt_w @ rng.standard_normal(n)
        states[t + 1] = x
        y = C @ x + sqrt_v @ rng.standard_normal(p)
        u_prev = u

    cost += float(x @ model.Q2 @ x)

    return TrajectoryRecord(
        states=states, inputs=inputs, outputs=outputs,
        innovations=innovations, selections=selections,
        realized_cost=cost, estimates=estimates,
    )


def cost_breakdown(model: ScenarioModel, prices, rec: TrajectoryRecord) -> dict:
    """Split a realized cost into state, input, terminal, and price parts."""
    xs = rec.states[:-1]
    return {
        "state": float(np.einsum("ti,ij,tj->", xs, model.Q1, xs)),
        "input": float(np.einsum("ti,ij,tj->", rec.inputs, model.R, rec.inputs)),
        "terminal": float(rec.states[-1] @ model.Q2 @ rec.states[-1]),
        "price": float(np.sum(np.asarray(prices)[rec.selections])),
    }


def trial_seed(master_seed: int, trial: int):
    """Deterministic per-trial seed, independent of execution order."""
    return [int(master_seed), int(trial)]


def monte_carlo(
    model: ScenarioModel,
    bank: QuantizerBank,
    config: SimulationConfig,
    riccati: RiccatiSolution = None,
    stats: InnovationStatistics = None,
    moments: CellMomentTable = None,
):
    """Run config.trials independent trials and report empirical vs theory.

    Returns (CostReport, trajectories) where trajectories is a list of
    TrajectoryRecord when config.record_trajectories is set, else None.
    Offline artifacts are computed inline when not supplied.
    """
    from .quantizer import build_moment_tables
    from .selection import compute_schedule
    from .innovation import propagate_statistics
    from .synthesis import solve_riccati

    if riccati is None:
        riccati = solve_riccati(model)
    if stats is None:
        stats = propagate_statistics(model)
    if moments is None:
        moments = build_moment_tables(bank, stats)

    if config.schedule is None:
        schedule = compute_schedule(model, riccati, stats, bank, moments).theta_star
    else:
        schedule = np.asarray(config.schedule, dtype=int)

    theoretical = float(
        np.trace(riccati.P[0] @ (model.Sigma_x + np.outer(model.mu0, model.mu0)))
        + riccati.r[0]
        + evaluate_C0(schedule, stats, riccati, moments, bank.delays, bank.prices)
    )

    N = config.trials
    costs = np.zeros(N)
    breakdown_acc = {"state": 0.0, "input": 0.0, "terminal": 0.0, "price": 0.0}
    trajectories = [] if config.record_trajectories else None
    for trial in range(N):
        rec = run_trial(
            model, bank, riccati, stats, moments, schedule,
            trial_seed(config.master_seed, trial),
        )
        costs[trial] = rec.realized_cost
        parts = cost_breakdown(model, bank.prices, rec)
        for key in breakdown_acc:
            breakdown_acc[key] += parts[key]
        if trajectories is not None:
            trajectories.append(rec)

    mean = float(np.mean(costs))
    stderr = float(np.std(costs, ddof=1) / np.sqrt(N)) if N > 1 else None
    breakdown = {k: v / N for k, v in breakdown_acc.items()}
    report = CostReport(
        empirical_mean=mean, empirical_stderr=stderr, theoretical=theoretical,
        breakdown=breakdown, trials=N, per_trial_costs=costs,
    )
    return report, trajectories
