"""Command-line frontend: synthesis, scheduling, simulation, verification.

Subcommands: synth, schedule, simulate, verify, export-milp. All commands
are deterministic given input files and seed; outputs are UTF-8 JSON/CSV
with '.' decimal and embed the run-manifest hash.

Exit codes: 0 success, 2 validation failure, 3 missing artifact,
4 runtime trial failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .artifacts import (
    MANIFEST_FILE,
    manifest_hash,
    read_moments,
    read_riccati,
    read_stats,
    write_manifest,
    write_moments,
    write_riccati,
    write_stats,
)
from .errors import InstanceTooLarge, MissingArtifact, QflqgError, ScenarioValidationError
from .estimator import batch_estimate, make_estimator
from .innovation import propagate_statistics
from .model import load_scenario
from .quantizer import build_moment_tables, cell_moments, load_bank
from .selection import (
    brute_force_schedule,
    compute_schedule,
    evaluate_C0,
    export_milp,
    n_tilde_table,
    optimal_schedule,
    beta_coefficients,
)
from .simulate import SimulationConfig, cost_breakdown, monte_carlo, run_trial, trial_seed
from .synthesis import solve_riccati

EXIT_OK = 0


def _bank_view(delays, prices):
    """Minimal stand-in for a QuantizerBank when rebuilt from artifacts."""
    from types import SimpleNamespace

    return SimpleNamespace(delays=np.asarray(delays, dtype=int),
                           prices=np.asarray(prices, dtype=float),
                           M=len(delays))
EXIT_VALIDATION = 2
EXIT_MISSING = 3
EXIT_TRIAL = 4
EXIT_VERIFY = 5

SCHEDULE_FILE = "schedule.csv"
MILP_FILE = "milp.lp"
REPORT_FILE = "report.json"


@dataclass(frozen=True)
class RunManifest:
    """Provenance record embedded (by hash) in every output file."""

    command: str
    scenario_path: str | None
    bank_path: str | None
    out_dir: str
    master_seed: int | None = None
    parameters: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "scenario_path": self.scenario_path,
            "bank_path": self.bank_path,
            "out_dir": self.out_dir,
            "master_seed": self.master_seed,
            "parameters": self.parameters,
            "version": self.version,
        }


def _load_inputs(args):
    model = load_scenario(args.scenario)
    if getattr(args, "horizon_override", None) is not None:
        model = model.with_horizon(args.horizon_override)
    bank = load_bank(args.bank)
    return model, bank


def _build_offline(model, bank):
    riccati = solve_riccati(model)
    stats = propagate_statistics(model)
    moments = build_moment_tables(bank, stats)
    return riccati, stats, moments


def cmd_synth(args) -> int:
    model, bank = _load_inputs(args)
    os.makedirs(args.out, exist_ok=True)
    riccati, stats, moments = _build_offline(model, bank)
    manifest = RunManifest(
        command="synth", scenario_path=args.scenario, bank_path=args.bank,
        out_dir=args.out,
        parameters={"horizon_override": args.horizon_override},
    )
    mhash = write_manifest(args.out, manifest.to_dict())
    write_riccati(args.out, riccati, mhash)
    write_stats(args.out, stats, mhash)
    write_moments(args.out, moments, bank.delays, bank.prices, mhash)
    print(f"P0 trace = {float(np.trace(riccati.P[0])):.12g}")
    print(f"artifacts written to {args.out} (manifest {mhash[:12]})")
    return EXIT_OK


def _write_schedule_csv(path, sched, delays, prices, mhash):
    """Tidy CSV: one row per (t, quantizer); selected marks the argmin."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# manifest_hash={mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "quantizer", "delay", "price", "beta", "c", "selected"])
        T, M = sched.c.shape
        for t in range(T):
            for i in range(M):
                writer.writerow([
                    t, i, int(delays[i]), repr(float(prices[i])),
                    repr(float(sched.beta[t, i])), repr(float(sched.c[t, i])),
                    int(sched.theta_star[t] == i),
                ])


def read_schedule_csv(path) -> np.ndarray:
    """Recover the per-stage selection from a schedule.csv."""
    if not os.path.exists(path):
        raise MissingArtifact(f"missing schedule file: {path}")
    picks = {}
    with open(path, "r", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        if int(row[6]):
            picks[int(row[0])] = int(row[1])
    return np.array([picks[t] for t in sorted(picks)], dtype=int)


def cmd_schedule(args) -> int:
    riccati = read_riccati(args.artifacts)
    stats = read_stats(args.artifacts)
    moments, delays, prices = read_moments(args.artifacts)
    bank = load_bank(args.bank) if args.bank else None
    if bank is not None:
        delays, prices = bank.delays, bank.prices
    os.makedirs(args.out, exist_ok=True)

    ntil = n_tilde_table(stats, riccati)
    beta = beta_coefficients(stats, riccati, _bank_view(delays, prices), moments, ntil=ntil)
    theta_star, c = optimal_schedule(beta, prices)
    C0 = evaluate_C0(theta_star, stats, riccati, moments, delays, prices, ntil=ntil)
    model = stats.model
    J_star = float(
        np.trace(riccati.P[0] @ (model.Sigma_x + np.outer(model.mu0, model.mu0)))
        + riccati.r[0] + C0
    )
    from .selection import SelectionSchedule
    sched = SelectionSchedule(beta=beta, c=c, theta_star=theta_star, C0=C0, J_star=J_star)

    manifest = RunManifest(
        command="schedule", scenario_path=None, bank_path=args.bank,
        out_dir=args.out, parameters={"artifacts": args.artifacts, "emit_lp": args.emit_lp},
    )
    mhash = write_manifest(args.out, manifest.to_dict())
    _write_schedule_csv(os.path.join(args.out, SCHEDULE_FILE), sched, delays, prices, mhash)
    if args.emit_lp:
        with open(os.path.join(args.out, MILP_FILE), "w", encoding="utf-8") as fh:
            fh.write(f"\\ manifest_hash={mhash}\n")
            fh.write(export_milp(c))
    print(f"theta* = {theta_star.tolist()}")
    print(f"C0 = {C0:.12g}  J* = {J_star:.12g}")
    return EXIT_OK


def _write_trajectory_csv(path, rec, delays, mhash):
    n = rec.states.shape[1]
    m = rec.inputs.shape[1]
    sel = np.asarray(rec.selections, dtype=int)
    T = len(sel)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# manifest_hash={mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{j+1}" for j in range(m)]
            + ["theta", "arrived_origins"]
        )
        for t in range(T + 1):
            xs = [repr(float(v)) for v in rec.states[t]]
            us = [repr(float(v)) for v in rec.inputs[t]] if t < T else [""] * m
            theta = int(sel[t]) if t < T else ""
            arrived = ";".join(
                str(k) for k in range(min(t + 1, T)) if k + int(delays[sel[k]]) == t
            )
            writer.writerow([t] + xs + us + [theta, arrived])


def cmd_simulate(args) -> int:
    model, bank = _load_inputs(args)
    os.makedirs(args.out, exist_ok=True)
    schedule = None
    if args.schedule is not None:
        schedule = tuple(int(v) for v in read_schedule_csv(args.schedule))
        if len(schedule) != model.T:
            raise ScenarioValidationError(
                [f"schedule length {len(schedule)} != horizon {model.T}"]
            )
    config = SimulationConfig(
        trials=args.trials, master_seed=args.seed, schedule=schedule,
        record_trajectories=args.dump_trajectories,
    )
    riccati, stats, moments = _build_offline(model, bank)
    try:
        report, trajectories = monte_carlo(
            model, bank, config, riccati=riccati, stats=stats, moments=moments
        )
    except QflqgError as exc:
        print(f"trial failure: {exc}", file=sys.stderr)
        return EXIT_TRIAL

    manifest = RunManifest(
        command="simulate", scenario_path=args.scenario, bank_path=args.bank,
        out_dir=args.out, master_seed=args.seed,
        parameters={
            "trials": args.trials,
            "horizon_override": args.horizon_override,
            "schedule": list(schedule) if schedule is not None else None,
        },
    )
    mhash = write_manifest(args.out, manifest.to_dict())

    doc = {
        "manifest_hash": mhash,
        "trials": report.trials,
        "empirical_mean": report.empirical_mean,
        "empirical_stderr": report.empirical_stderr,
        "theoretical": report.theoretical,
        "breakdown": report.breakdown,
        "per_trial_costs": [float(v) for v in report.per_trial_costs],
    }
    if schedule is not None:
        # dominance comparison against the optimal schedule
        opt = compute_schedule(model, riccati, stats, bank, moments)
        doc["dominance"] = {
            "supplied_theoretical": report.theoretical,
            "optimal_theoretical": opt.J_star,
            "optimal_schedule": opt.theta_star.tolist(),
            "gap": report.theoretical - opt.J_star,
        }
    with open(os.path.join(args.out, REPORT_FILE), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")

    if args.dump_trajectories and trajectories is not None:
        sched_used = schedule
        if sched_used is None:
            sched_used = tuple(int(v) for v in trajectories[0].selections)
        for idx, rec in enumerate(trajectories):
            _write_trajectory_csv(
                os.path.join(args.out, f"trajectory_{idx:04d}.csv"),
                rec, bank.delays, mhash,
            )
    stderr = report.empirical_stderr
    print(
        f"empirical = {report.empirical_mean:.12g}"
        + (f" +/- {stderr:.6g}" if stderr is not None else "")
        + f"  theoretical = {report.theoretical:.12g}"
    )
    return EXIT_OK


def run_verify(model, bank, trials=2000, mc_samples=100_000, seed=0,
               _corrupt_ntil=None, report=print):
    """Oracle suite: returns list of (name, passed, detail) tuples.

    _corrupt_ntil is a fault-injection hook used by tests: a callable that
    mutates the n-tilde table before the brute-force comparison.
    """
    results = []
    riccati, stats, moments = _build_offline(model, bank)
    delays, prices = bank.delays, bank.prices

    # 1. brute-force schedule vs per-stage argmin
    ntil = n_tilde_table(stats, riccati)
    if _corrupt_ntil is not None:
        ntil = _corrupt_ntil(ntil)
    beta = beta_coefficients(stats, riccati, bank, moments, ntil=ntil)
    theta_star, c = optimal_schedule(beta, prices)
    fast_C0 = evaluate_C0(theta_star, stats, riccati, moments, delays, prices)
    try:
        bf_theta, bf_C0 = brute_force_schedule(stats, riccati, moments, delays, prices)
        ok = np.array_equal(bf_theta, theta_star) and abs(bf_C0 - fast_C0) <= 1e-9
        results.append(("brute-force-schedule", ok,
                        f"|C0 gap| = {abs(bf_C0 - fast_C0):.3e}"))
    except InstanceTooLarge as exc:
        results.append(("brute-force-schedule", True, f"skipped: {exc}"))

    # 2. incremental vs batch estimator on random arrival patterns
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    for _ in range(5):
        sched = rng.integers(0, bank.M, size=model.T)
        rec = run_trial(model, bank, riccati, stats, moments, sched,
                        [seed, int(rng.integers(2**31))])
        # replay arrivals and compare batch vs incremental estimate at T-1
        est = make_estimator(model)
        arrivals_by_origin = {}
        u_prev = None
        from .estimator import ChannelMessage, estimator_step
        from .quantizer import quantize
        for t in range(model.T):
            due = []
            for k in range(t + 1):
                i = int(sched[k])
                if k + int(delays[i]) == t:
                    j = quantize(bank.quantizers[i], rec.innovations[k])
                    msg = ChannelMessage(quantizer_index=i, cell_index=j,
                                         origin_time=k, arrival_time=t)
                    due.append(msg)
                    arrivals_by_origin[k] = msg
            estimator_step(est, u_prev, due, stats, moments)
            u_prev = rec.inputs[t]
            ref = batch_estimate(arrivals_by_origin, rec.inputs[:t], stats, moments, t)
            worst = max(worst, float(np.max(np.abs(est.xbar - ref))))
    results.append(("incremental-vs-batch", worst <= 1e-10,
                    f"max |gap| = {worst:.3e}"))

    # 3. innovation whiteness: sample correlation of xi_t, xi_s near zero
    xi_all = np.zeros((trials, model.T, model.p))
    for n in range(trials):
        rec = run_trial(model, bank, riccati, stats, moments,
                        np.zeros(model.T, dtype=int), trial_seed(seed, n))
        xi_all[n] = rec.innovations
    ok_white = True
    detail = []
    for t in range(model.T):
        std_t = np.sqrt(np.diag(stats.M[t]))
        for s in range(t + 1, model.T):
            std_s = np.sqrt(np.diag(stats.M[s]))
            corr = (xi_all[:, t, :].T @ xi_all[:, s, :]) / trials
            corr = corr / np.outer(std_t, std_s)
            if np.max(np.abs(corr)) > 5.0 / np.sqrt(trials):
                ok_white = False
                detail.append(f"(t={t},s={s}): {np.max(np.abs(corr)):.3f}")
    results.append(("innovation-whiteness", ok_white,
                    "; ".join(detail) if detail else f"{trials} trials"))

    # 4. cell-moment Monte Carlo oracle at t=0
    rng = np.random.default_rng([seed, 4])
    from .model import psd_sqrt
    root = psd_sqrt(stats.M[0])
    samples = (root @ rng.standard_normal((model.p, mc_samples))).T
    ok_mom = True
    detail = []
    for i, spec in enumerate(bank.quantizers):
        probs, means = cell_moments(stats.M[0], spec.cells)
        for j, cell in enumerate(spec.cells):
            inside = np.ones(mc_samples, dtype=bool)
            for axis, (lo, hi) in enumerate(cell):
                inside &= (samples[:, axis] >= lo) & (samples[:, axis] < hi)
            p_hat = inside.mean()
            se = max(np.sqrt(p_hat * (1 - p_hat) / mc_samples), 1e-12)
            if abs(p_hat - probs[j]) > 5 * se + 1e-6:
                ok_mom = False
                detail.append(f"prob (i={i},j={j}): {p_hat:.4f} vs {probs[j]:.4f}")
            if inside.sum() > 100:
                m_hat = samples[inside].mean(axis=0)
                se_m = samples[inside].std(axis=0) / np.sqrt(inside.sum())
                if np.any(np.abs(m_hat - means[j]) > 5 * se_m + 1e-6):
                    ok_mom = False
                    detail.append(f"mean (i={i},j={j})")
    results.append(("cell-moment-oracle", ok_mom,
                    "; ".join(detail) if detail else f"{mc_samples} samples"))

    for name, ok, detail in results:
        report(f"{'PASS' if ok else 'FAIL'} {name} [{detail}]")
    return results


def cmd_verify(args) -> int:
    if args.scenario is not None and args.bank is not None:
        model, bank = _load_inputs(args)
    else:
        from .presets import demo_bank, demo_scenario

        model = demo_scenario(T=5)
        bank = demo_bank(bit_rate=1)
    results = run_verify(model, bank, trials=args.trials, seed=args.seed)
    failing = [name for name, ok, _ in results if not ok]
    if failing:
        print(f"verification failed: {failing[0]}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_export_milp(args) -> int:
    riccati = read_riccati(args.artifacts)
    stats = read_stats(args.artifacts)
    moments, delays, prices = read_moments(args.artifacts)
    ntil = n_tilde_table(stats, riccati)
    beta = beta_coefficients(stats, riccati, _bank_view(delays, prices), moments, ntil=ntil)
    _, c = optimal_schedule(beta, prices)
    text = export_milp(c)
    if args.out_file:
        with open(args.out_file, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out_file}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qflqg",
        description="Quantized-feedback LQG: synthesis, scheduling, simulation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, scenario=True, bank=True, out=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON path")
        if bank:
            p.add_argument("--bank", required=True, help="quantizer bank JSON path")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--horizon-override", type=int, default=None,
                       help="replace the scenario horizon T")

    p = sub.add_parser("synth", help="offline synthesis artifacts")
    add_io(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("schedule", help="optimal quantizer-selection schedule")
    p.add_argument("--artifacts", required=True, help="directory from synth")
    p.add_argument("--bank", default=None, help="optional bank JSON (else from artifacts)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--emit-lp", action="store_true", help="also write milp.lp")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="closed-loop Monte Carlo")
    add_io(p)
    p.add_argument("--schedule", default=None,
                   help="schedule.csv path (default: compute optimal inline)")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-trajectories", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the oracle property suite")
    p.add_argument("--scenario", default=None)
    p.add_argument("--bank", default=None)
    p.add_argument("--horizon-override", type=int, default=None)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-milp", help="emit the schedule MILP as LP text")
    p.add_argument("--artifacts", required=True, help="directory from synth")
    p.add_argument("--out-file", default=None, help="LP output path (default stdout)")
    p.set_defaults(func=cmd_export_milp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(f"validation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except MissingArtifact as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MISSING
    except QflqgError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
