"""Batch command-line front end: seeded runs, axis sweeps, self-verification.

Every invocation is deterministic: output files carry no timestamps, run ids
are derived from the scenario content and seed, and repeating a command
reproduces its CSVs byte for byte.  Floats are serialized with 9 significant
digits.  Exit codes: 0 success, 1 configuration or usage error, 2 runtime
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import io
import os
import sys
import time
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import config as cfglib
from . import engine, pomdp
from .channel import RbMarkov
from .config import ConfigError
from .controller import ControllerParams, closed_loop_reference
from .engine import ScenarioConfig, SWEEP_AXES, run_simulation
from .pomdp import ObservationModel, PomdpModel

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3

OUT_ENV = "M2MSIM_OUT"

PERIOD_HEADER = ["period", "slice", "C_l", "Q_l", "xi_l", "xi_star_l", "e_l",
                 "delta_R_raw", "delta_R_applied", "R_l"]
SUMMARY_HEADER = ["run_id", "seed", "axis_value",
                  "mean_discounted_reward", "final_max_abs_gap"]
SLOT_HEADER = ["period", "slot", "slice", "device", "action", "rb_global",
               "rb_state", "observation", "rate", "reward"]
AGG_HEADER = ["axis_value", "mean", "stderr"]


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _run_id(cfg: ScenarioConfig, label: str) -> str:
    digest = hashlib.sha1(cfglib.serialize(cfg).encode()).hexdigest()[:10]
    return f"{label}-s{cfg.seed}-{digest}"


def _label(source: str) -> str:
    return Path(str(source)).stem.replace("_", "-")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _period_rows(summary: engine.RunSummary) -> List[List]:
    return [[r.period, r.slice_id, _fmt(r.obtained_rate), _fmt(r.filtered_rate),
             _fmt(r.xi), _fmt(r.xi_star), _fmt(r.gap), _fmt(r.delta_raw),
             r.delta_applied, r.access_rbs] for r in summary.period_rows]


def _slot_rows(summary: engine.RunSummary) -> List[List]:
    return [[r.period, r.slot, r.slice_id, r.device, r.action, r.rb_global,
             r.rb_state, r.observation, _fmt(r.rate), _fmt(r.reward)]
            for r in summary.slot_records]


# -- run ----------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = cfglib.load_config(args.config, args.overrides, seed=args.seed)
    summary = run_simulation(cfg, record_slots=args.slots)
    out = _out_dir(args)
    rid = _run_id(cfg, _label(args.config))
    _write_csv(out / "periods.csv", PERIOD_HEADER, _period_rows(summary))
    _write_csv(out / "summary.csv", SUMMARY_HEADER,
               [[rid, cfg.seed, "", _fmt(summary.mean_discounted_reward),
                 _fmt(summary.final_max_abs_gap)]])
    if args.slots:
        _write_csv(out / "slots.csv", SLOT_HEADER, _slot_rows(summary))
    print(f"{rid}: mean_discounted_reward={_fmt(summary.mean_discounted_reward)} "
          f"final_max_abs_gap={_fmt(summary.final_max_abs_gap)} -> {out}")
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

def _parse_values(axis: str, text: str) -> List[float]:
    text = text.strip()
    if ".." in text:
        span, _, step_text = text.partition(":")
        lo_text, _, hi_text = span.partition("..")
        try:
            lo, hi = float(lo_text), float(hi_text)
            step = float(step_text) if step_text else 1.0
        except ValueError:
            raise ConfigError("values",
                              f"bad range {text!r}; use start..stop:step") from None
        if step <= 0 or hi < lo:
            raise ConfigError("values", f"empty range {text!r}")
        count = int(round((hi - lo) / step))
        values = [round(lo + i * step, 12) for i in range(count + 1)
                  if lo + i * step <= hi + 1e-12]
    else:
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError("values",
                              f"bad value list {text!r}; use v1,v2,...") from None
    if not values:
        raise ConfigError("values", "no sweep values given")
    if axis in ("rbs", "devices"):
        if any(v != int(v) for v in values):
            raise ConfigError("values", f"axis {axis!r} takes integer values")
        values = [int(v) for v in values]
    return values


def _sweep_one(job: Tuple[str, float, ScenarioConfig]) -> engine.SweepRow:
    axis, value, cfg = job
    return engine.SweepRow(axis=axis, axis_value=float(value), seed=cfg.seed,
                           summary=run_simulation(cfg))


def _run_jobs(jobs: List[Tuple[str, float, ScenarioConfig]]) -> List[engine.SweepRow]:
    workers = min(len(jobs), os.cpu_count() or 1, 8)
    if workers > 1:
        try:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(_sweep_one, jobs, chunksize=1))
        except (OSError, concurrent.futures.process.BrokenProcessPool):
            pass  # no subprocess support here; fall back to in-process
    return [_sweep_one(job) for job in jobs]


def cmd_sweep(args) -> int:
    cfg = cfglib.load_config(args.config, args.overrides, seed=args.seed)
    values = _parse_values(args.axis, args.values)
    if args.seeds < 1:
        raise ConfigError("seeds", "at least one seed is required")
    seeds = [cfg.seed + i for i in range(args.seeds)]

    import dataclasses
    jobs = []
    for value in values:
        variant = engine.with_axis_value(cfg, args.axis, value)
        for seed in seeds:
            jobs.append((args.axis, value, dataclasses.replace(variant, seed=seed)))
    rows = _run_jobs(jobs)

    out = _out_dir(args)
    label = _label(args.config)
    table = []
    for (axis, value, job_cfg), row in zip(jobs, rows):
        rid = _run_id(job_cfg, f"{label}-{axis}{_fmt(value)}")
        table.append([rid, row.seed, _fmt(row.axis_value),
                      _fmt(row.summary.mean_discounted_reward),
                      _fmt(row.summary.final_max_abs_gap)])
    _write_csv(out / "sweep.csv", SUMMARY_HEADER, table)
    agg = engine.aggregate_sweep(rows)
    _write_csv(out / "sweep_agg.csv", AGG_HEADER,
               [[_fmt(v), _fmt(mean), _fmt(err)] for v, mean, err in agg])
    print(f"{label}: axis={args.axis} values={len(values)} seeds={len(seeds)} "
          f"rows={len(table)} -> {out}")
    return EXIT_OK


# -- verify ---------------------------------------------------------------------

def _check_deadbeat() -> Tuple[bool, str]:
    worst = 0.0
    periods, step_at = 12, 3
    for n in (2, 5):
        for omega in (0.5, 0.8):
            for mu in (1.0, 2.0):
                params = ControllerParams(omega=omega, mu=mu)
                before = np.full(n, 1.0 / n)
                after = np.arange(1, n + 1, dtype=float)
                after /= after.sum()
                targets = np.vstack([np.tile(before, (step_at, 1)),
                                     np.tile(after, (periods - step_at, 1))])
                initial = 1.0 + np.arange(n, dtype=float)
                ref = closed_loop_reference(params, initial, targets)
                worst = max(worst, float(np.max(np.abs(ref["gap"][step_at + 1:]))))
    return worst < 1e-9, f"max residual gap {worst:.3e} (bound 1e-9)"


def _check_pomdp_oracle() -> Tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for n_rbs in (1, 2):
        for horizon in (2, 3):
            for eps in (0.1, 0.4):
                for beta in (0.5, 1.0):
                    model = PomdpModel(
                        markov=RbMarkov(0.9, 0.1, 0.95, 0.05),
                        obs=ObservationModel.symmetric(eps),
                        horizon=horizon, discount=beta,
                        rate_idle=np.linspace(1.0, 1.5, n_rbs),
                        rate_busy=np.linspace(0.2, 0.3, n_rbs))
                    beliefs = rng.random((5, n_rbs))
                    reference = pomdp.exhaustive_value(model, beliefs)
                    policy = pomdp.solve_exact(model)
                    got = np.array([policy.value(b) for b in beliefs])
                    worst = max(worst, float(np.max(np.abs(got - reference))))
    return worst < 1e-9, f"max |solver - enumeration| {worst:.3e} (bound 1e-9)"


def _check_belief() -> Tuple[bool, str]:
    markov = RbMarkov(0.9, 0.1, 0.95, 0.05)
    post = pomdp.belief_update(np.array([0.6]), 1, np.array([0]),
                               markov, ObservationModel.symmetric(0.5))
    if abs(post[0] - 0.92) > 1e-12:
        return False, f"chance-level update gave {post[0]!r}, want 0.92"
    rng = np.random.default_rng(11)
    belief = rng.random(4)
    for _ in range(500):
        obs = rng.integers(0, 2, size=4)
        updated = pomdp.belief_update(belief, 2, obs, markov,
                                      ObservationModel.symmetric(0.5))
        propagated = pomdp.belief_propagate(belief, markov)
        if not np.array_equal(updated, propagated):
            return False, "chance-level update differs from pure propagation"
        belief = updated
        if np.any(belief < 0) or np.any(belief > 1):
            return False, f"belief left [0, 1]: {belief}"
    return True, "0.92 example, 500-step propagation equality, bounds"


def _check_discount() -> Tuple[bool, str]:
    cases = [((5.0, 7.0, 9.0), 0.0, 9.0),
             ((4.0, 4.0, 4.0), 0.5, 7.0),
             ((5.0, 7.0, 9.0), 1.0, 21.0)]
    for rewards, beta, want in cases:
        got = pomdp.total_discounted_reward(rewards, beta)
        if got != want:
            return False, f"weights at discount {beta}: got {got}, want {want}"
    return True, "late-slot weighting examples match"


def _check_determinism() -> Tuple[bool, str]:
    cfg = cfglib.load_config("two-slice", ["timebase.periods=6"], seed=5)
    first = run_simulation(cfg)
    second = run_simulation(cfg)

    def render(summary):
        buf = io.StringIO()
        csv.writer(buf).writerows(_period_rows(summary))
        return buf.getvalue()

    if render(first) != render(second):
        return False, "repeated seeded runs differ"
    gaps = {}
    for row in first.period_rows:
        gaps.setdefault(row.period, []).append(row.gap)
    worst = max(abs(sum(v)) for v in gaps.values())
    if worst > 1e-9:
        return False, f"share errors do not cancel: max |sum e_l| {worst:.3e}"
    topo = cfg.topology
    if topo.access_rbs + topo.data_rbs != topo.total_rbs:
        return False, "access + data pools do not cover the cell total"
    return True, f"byte-identical rerun, max |sum e_l| {worst:.3e}"


VERIFY_CHECKS = {
    "deadbeat": _check_deadbeat,
    "pomdp-oracle": _check_pomdp_oracle,
    "belief": _check_belief,
    "discount": _check_discount,
    "determinism": _check_determinism,
}


def cmd_verify(args) -> int:
    names = [args.only] if args.only else list(VERIFY_CHECKS)
    failures = 0
    for name in names:
        start = time.perf_counter()
        ok, detail = VERIFY_CHECKS[name]()
        took = time.perf_counter() - start
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail} [{took:.2f}s]")
        failures += 0 if ok else 1
    return EXIT_OK if failures == 0 else EXIT_VERIFY


# -- entry point ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default="five-slice",
                     help="scenario file path or shipped profile name")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config key (repeatable)")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    sub.add_argument("--out", default=None,
                     help=f"output directory (default ${OUT_ENV} or ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="m2msim",
                     description="Sliced-cell random access simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[], help="one seeded scenario run")
    _add_common(run)
    run.add_argument("--slots", action="store_true",
                     help="also write the per-device slot records")
    run.set_defaults(func=cmd_run)

    sweep = commands.add_parser("sweep", help="run a scenario across an axis")
    _add_common(sweep)
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--values", required=True,
                       help="comma list (1,2,3) or range (0.1..0.8:0.1)")
    sweep.add_argument("--seeds", type=int, default=10,
                       help="number of consecutive seeds per value")
    sweep.set_defaults(func=cmd_sweep)

    verify = commands.add_parser("verify", help="run the built-in self-checks")
    verify.add_argument("--only", choices=sorted(VERIFY_CHECKS), default=None)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"m2msim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"m2msim: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
