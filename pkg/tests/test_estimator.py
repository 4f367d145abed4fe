"""Controller-side estimator: incremental vs batch, out-of-order arrivals."""

import numpy as np
import pytest

from conftest import random_bank_1d, random_scenario
from qflqg import (
    ChannelMessage,
    batch_estimate,
    build_moment_tables,
    decode_message,
    demo_bank,
    demo_scenario,
    estimator_step,
    make_estimator,
    propagate_statistics,
    quantize,
    run_trial,
    solve_riccati,
    trial_seed,
)
from qflqg.errors import DuplicateArrival, FutureOrigin


def _offline(model, bank):
    riccati = solve_riccati(model)
    stats = propagate_statistics(model)
    moments = build_moment_tables(bank, stats)
    return riccati, stats, moments


def _replay(model, bank, stats, moments, rec, schedule):
    """Step the estimator through a recorded trajectory's arrival stream.

    Yields (t, incremental_estimate, arrivals_by_origin_so_far).
    """
    est = make_estimator(model)
    arrivals_by_origin = {}
    u_prev = None
    for t in range(model.T):
        due = []
        for k in range(t + 1):
            i = int(schedule[k])
            if k + int(bank.delays[i]) == t:
                j = quantize(bank.quantizers[i], rec.innovations[k])
                msg = ChannelMessage(quantizer_index=i, cell_index=j,
                                     origin_time=k, arrival_time=t)
                due.append(msg)
                arrivals_by_origin[k] = msg
        estimator_step(est, u_prev, due, stats, moments)
        u_prev = rec.inputs[t]
        yield t, est.xbar.copy(), dict(arrivals_by_origin)


def test_incremental_equals_batch_randomized():
    rng = np.random.default_rng(1234)
    trials = 0
    while trials < 100:
        model = random_scenario(rng, p=1, T=int(rng.integers(3, 9)))
        bank = random_bank_1d(rng, M=3, allow_null=True, max_levels=8)
        riccati, stats, moments = _offline(model, bank)
        schedule = rng.integers(0, bank.M, size=model.T)
        rec = run_trial(model, bank, riccati, stats, moments, schedule,
                        trial_seed(99, trials))
        for t, xbar, arrived in _replay(model, bank, stats, moments, rec, schedule):
            ref = batch_estimate(arrived, rec.inputs[:t], stats, moments, t)
            assert np.max(np.abs(xbar - ref)) < 1e-12
        trials += 1


def test_out_of_order_arrival_pattern():
    """Delays (3, 1) with alternating selections: nothing at t=0..1, the
    origin-1 message at t=2, then origins 0 and 2 together at t=3."""
    model = demo_scenario(T=4)
    bank = demo_bank(bit_rate=1)          # delays (1, 2, 3)
    riccati, stats, moments = _offline(model, bank)
    schedule = np.array([2, 0, 0, 0])     # d = 3, 1, 1, 1
    arrivals_at = {t: [] for t in range(model.T)}
    for k in range(model.T):
        arr = k + int(bank.delays[schedule[k]])
        if arr < model.T:
            arrivals_at[arr].append(k)
    assert arrivals_at[0] == [] and arrivals_at[1] == []
    assert arrivals_at[2] == [1]
    assert arrivals_at[3] == [0, 2]

    rec = run_trial(model, bank, riccati, stats, moments, schedule, trial_seed(5, 0))
    for t, xbar, arrived in _replay(model, bank, stats, moments, rec, schedule):
        assert sorted(arrived) == sorted(
            k for s in range(t + 1) for k in arrivals_at[s])
        ref = batch_estimate(arrived, rec.inputs[:t], stats, moments, t)
        assert np.max(np.abs(xbar - ref)) < 1e-12


def test_zero_delay_applied_same_tick():
    from qflqg import demo_bank_dict, load_bank

    model = demo_scenario(T=3)
    bank = load_bank(demo_bank_dict(bit_rate=1, with_null=True))
    null_idx = int(np.flatnonzero(bank.delays == 0)[0])
    riccati, stats, moments = _offline(model, bank)

    est = make_estimator(model)
    msg = ChannelMessage(quantizer_index=null_idx, cell_index=0,
                         origin_time=0, arrival_time=0)
    estimator_step(est, None, [msg], stats, moments)
    # null quantizer decodes to the zero mean: estimate stays at mu0
    assert np.allclose(est.xbar, model.mu0)
    assert est.arrived[0]


def test_future_origin_and_duplicate_rejected():
    model = demo_scenario(T=4)
    bank = demo_bank(bit_rate=1)
    riccati, stats, moments = _offline(model, bank)
    est = make_estimator(model)
    bad = ChannelMessage(quantizer_index=0, cell_index=0,
                         origin_time=2, arrival_time=0)
    with pytest.raises(FutureOrigin):
        estimator_step(est, None, [bad], stats, moments)

    est = make_estimator(model)
    msg = ChannelMessage(quantizer_index=0, cell_index=0,
                         origin_time=0, arrival_time=1)
    estimator_step(est, None, [], stats, moments)
    estimator_step(est, np.zeros(model.m), [msg], stats, moments)
    dup = ChannelMessage(quantizer_index=0, cell_index=1,
                         origin_time=0, arrival_time=2)
    with pytest.raises(DuplicateArrival):
        estimator_step(est, np.zeros(model.m), [dup], stats, moments)


def test_decode_message_is_cell_mean():
    model = demo_scenario(T=2)
    bank = demo_bank(bit_rate=1)
    _, stats, moments = _offline(model, bank)
    msg = ChannelMessage(quantizer_index=1, cell_index=2,
                         origin_time=1, arrival_time=1)
    assert np.array_equal(decode_message(msg, moments), moments.means[1][1][2])
