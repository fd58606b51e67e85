"""Batch front-end: seeded campaigns, payload checks, traces, benchmark.

Subcommands:

* ``run``    executes a multi-trial search campaign for either problem and
  writes per-trial artifacts plus a summary report (CSV and table);
* ``check``  classifies a mechanism or bound-checks a transmission design;
* ``trace``  writes the coupler path or the simulated trajectory of one
  payload;
* ``bench``  times the compiled kernels against the pure-Python twins.

A campaign is configured by a JSON document, command-line flags, or both
(flags win).  Trial i runs with seed ``seed + i``, so campaigns reproduce
across machines; report files carry no timestamps and rerunning an
identical configuration rewrites byte-identical artifacts.

Exit codes: 0 success, 1 infeasible payload or validation failure,
2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
import time
import timeit
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import fourbar, hydraulic, kernels
from ._fmt import format_float, write_csv
from .search import SearchConfig, search

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2

# per-problem defaults when neither config nor flag sets a budget
DEFAULT_BUDGET = {"fourbar": 5000, "hydraulic": 1500}

_CONFIG_KEYS = ("problem", "trials", "seed", "budget", "out", "target",
                "plant", "pairing", "search")
_SEARCH_KEYS = tuple(
    f.name for f in fields(SearchConfig) if f.name not in ("budget", "seed")
)


class ConfigError(ValueError):
    """Bad run configuration or unreadable input file (exit code 2)."""


class InfeasibleError(ValueError):
    """Payload fails a domain check (exit code 1)."""


def bundled(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(resources.files("tabukit") / "data" / name)


@dataclass
class RunConfig:
    """One campaign: problem, trial count, seeding, and payload sources.

    `target` (CSV path) and `pairing` apply to fourbar runs; `plant`
    (JSON path) applies to hydraulic runs.  `search` holds SearchConfig
    overrides by field name; budget and seed live at the top level.
    """

    problem: str
    trials: int = 5
    seed: int = 0
    budget: int | None = None
    out: str | None = None
    target: str | None = None
    plant: str | None = None
    pairing: str = "cyclic"
    search: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in ("fourbar", "hydraulic"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.pairing not in ("fixed", "cyclic"):
            raise ConfigError("pairing must be 'fixed' or 'cyclic'")
        bad = set(self.search) - set(_SEARCH_KEYS)
        if bad:
            raise ConfigError(
                "unknown search overrides: " + ", ".join(sorted(bad))
                + " (budget and seed are top-level keys)"
            )

    @classmethod
    def load(cls, path=None, overrides=None) -> "RunConfig":
        doc = {}
        if path is None and (overrides or {}).get("problem") is not None:
            # no config file: fall back to the campaign shipped for the
            # requested problem, with flags still applied on top
            path = bundled(f"{overrides['problem']}_campaign.json")
        if path is not None:
            try:
                with open(path) as fh:
                    doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config must be a JSON object")
            unknown = set(doc) - set(_CONFIG_KEYS)
            if unknown:
                raise ConfigError("unknown config keys: "
                                  + ", ".join(sorted(unknown)))
        for key, value in (overrides or {}).items():
            if value is not None:
                doc[key] = value
        if "problem" not in doc:
            raise ConfigError("no problem given (config key or --problem)")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class TrialRow:
    """Report line for one trial; `error` is set when the trial aborted."""

    trial: int
    design: tuple | None
    obfn: float | None
    n_evals: int
    error: str | None = None


# human-readable report headers, in the classical results-table order
_TABLE_HEADER = {
    "fourbar": ("RUN", "A12", "A23", "A34", "A41", "A25", "ALPHA",
                "OBFN", "NO. EVALS"),
    "hydraulic": ("RUN", "PUMP SIZE", "MOTOR SIZE", "INTEGRAL GAIN",
                  "OBFN", "NO. EVALS"),
}


@dataclass
class RunReport:
    """Per-trial best designs plus the campaign summary."""

    problem: str
    columns: tuple
    rows: list

    def successes(self) -> list:
        return [r for r in self.rows if r.error is None]

    def best_row(self):
        ok = self.successes()
        return min(ok, key=lambda r: r.obfn) if ok else None

    def median_obfn(self):
        ok = self.successes()
        return statistics.median(r.obfn for r in ok) if ok else None

    def write_csv(self, path) -> None:
        rows = []
        for r in self.rows:
            if r.error is None:
                cells = [str(r.trial),
                         *(format_float(x) for x in r.design),
                         format_float(r.obfn), str(r.n_evals)]
            else:
                cells = [str(r.trial), *([""] * len(self.columns)),
                         "", str(r.n_evals)]
            rows.append(cells)
        write_csv(path, ["trial", *self.columns, "obfn", "n_evals"], rows)

    def table(self) -> str:
        header = _TABLE_HEADER[self.problem]
        body = []
        for r in self.rows:
            if r.error is None:
                body.append((str(r.trial + 1),
                             *(format_float(x) for x in r.design),
                             format_float(r.obfn), str(r.n_evals)))
            else:
                body.append((str(r.trial + 1),
                             *(["-"] * (len(header) - 3)),
                             f"FAILED: {r.error}", str(r.n_evals)))
        widths = [max(len(row[i]) for row in (header, *body))
                  for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                 for row in (header, *body)]
        best = self.best_row()
        if best is not None:
            lines.append(f"best: run {best.trial + 1} "
                         f"(obfn {format_float(best.obfn)}); "
                         f"median obfn {format_float(self.median_obfn())}")
        else:
            lines.append("best: none (all trials failed)")
        return "\n".join(lines) + "\n"


def _objective_value(objective, design):
    out = objective(design)
    return float(out[0]) if isinstance(out, tuple) else float(out)


def _fourbar_setup(cfg: RunConfig):
    if cfg.target is not None:
        target = fourbar.load_target_csv(cfg.target)
    else:
        target = fourbar.reference_target(12)
    objective = fourbar.synthesis_objective(target, cfg.pairing)
    space = fourbar.synthesis_space()

    def save(design, out_dir, tag):
        m = fourbar.FourBarMechanism.from_array(design)
        m.to_json(out_dir / f"{tag}_best.json")
        try:
            fourbar.write_path_csv(m, 360, out_dir / f"{tag}_path.csv")
        except fourbar.AssemblyError:
            pass  # infeasible best (exhausted budget on the penalty plateau)

    return space, objective, ("a12", "a23", "a34", "a41", "a25", "alpha_deg"), save


def _hydraulic_setup(cfg: RunConfig):
    if cfg.plant is not None:
        plant = hydraulic.PlantParams.from_json(cfg.plant)
    else:
        plant = hydraulic.PlantParams()
    objective = hydraulic.transmission_objective(plant)
    space = hydraulic.transmission_space()

    def save(design, out_dir, tag):
        d = hydraulic.TransmissionDesign.from_array(design)
        d.to_json(out_dir / f"{tag}_best.json")
        traj = hydraulic.simulate(d, plant)
        if not traj.failed:
            traj.to_csv(out_dir / f"{tag}_trajectory.csv")

    return space, objective, ("Dp_cc", "Dm_cc", "Ki"), save


def run_campaign(cfg: RunConfig, log=None) -> RunReport:
    """Run `cfg.trials` seeded searches and write all campaign artifacts.

    Per trial: ``trial<i>_convergence.csv``, ``trial<i>_best.json`` and a
    ``trial<i>_path.csv`` (fourbar) or ``trial<i>_trajectory.csv``
    (hydraulic).  The campaign writes ``report.csv`` and ``report.txt``.
    A failing trial is recorded in the report (empty design cells) and
    does not abort the remaining trials.  Each successful row's obfn is
    re-evaluated from the reported design before the report is written.
    """
    try:
        setup = {"fourbar": _fourbar_setup, "hydraulic": _hydraulic_setup}
        space, objective, columns, save = setup[cfg.problem](cfg)
    except (OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    budget = cfg.budget if cfg.budget is not None else DEFAULT_BUDGET[cfg.problem]
    out_dir = Path(cfg.out) if cfg.out is not None else Path("runs") / cfg.problem
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        base = SearchConfig(budget=budget, seed=cfg.seed, **cfg.search)
        base.validate(space)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    rows = []
    for trial in range(cfg.trials):
        tag = f"trial{trial}"
        try:
            started = time.perf_counter()
            result = search(objective, space,
                            replace(base, seed=cfg.seed + trial))
            elapsed = time.perf_counter() - started
            design = tuple(float(x) for x in result.best)
            check = _objective_value(objective, result.best)
            if check != result.best_value:
                raise RuntimeError(
                    f"report round-trip failed: {check!r} != {result.best_value!r}"
                )
            result.write_convergence_csv(out_dir / f"{tag}_convergence.csv")
            save(design, out_dir, tag)
            rows.append(TrialRow(trial, design, result.best_value,
                                 result.n_evaluations))
            if log is not None:
                print(f"trial {trial}: obfn {format_float(result.best_value)} "
                      f"in {result.n_evaluations} evals ({elapsed:.1f}s)",
                      file=log)
        except (RuntimeError, ValueError) as exc:
            rows.append(TrialRow(trial, None, None, 0, error=str(exc)))
            if log is not None:
                print(f"trial {trial}: FAILED: {exc}", file=log)

    report = RunReport(cfg.problem, columns, rows)
    report.write_csv(out_dir / "report.csv")
    with open(out_dir / "report.txt", "w") as fh:
        fh.write(report.table())
    return report


def _load_payload(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read payload {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("payload must be a JSON object")
    return doc


def _payload_problem(doc: dict, explicit) -> str:
    if explicit:
        return explicit
    if "a12" in doc:
        return "fourbar"
    if any(k in doc for k in ("pump_cc", "Dp_cc", "Dp")):
        return "hydraulic"
    raise ConfigError("cannot infer problem from payload keys; pass --problem")


def cmd_check(args) -> int:
    doc = _load_payload(args.payload)
    problem = _payload_problem(doc, args.problem)
    if problem == "fourbar":
        try:
            m = fourbar.FourBarMechanism.from_json(args.payload)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cls = fourbar.grashof_class(m.a12, m.a23, m.a34, m.a41)
        print(cls.value)
        return EXIT_OK if cls is fourbar.GrashofClass.CRANK_ROCKER else EXIT_INFEASIBLE
    try:
        design = hydraulic.TransmissionDesign.from_json(args.payload)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    violations = design.bound_violations()
    if violations:
        for v in violations:
            print(v)
        return EXIT_INFEASIBLE
    print("within bounds")
    return EXIT_OK


def cmd_trace(args) -> int:
    doc = _load_payload(args.payload)
    problem = _payload_problem(doc, args.problem)
    if problem == "fourbar":
        try:
            m = fourbar.FourBarMechanism.from_json(args.payload)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        n = int(args.resolution) if args.resolution is not None else 360
        if n < 1 or (args.resolution is not None and args.resolution != n):
            raise ConfigError("fourbar resolution must be a positive integer "
                              "(samples per revolution)")
        try:
            fourbar.write_path_csv(m, n, args.out)
        except fourbar.AssemblyError as exc:
            raise InfeasibleError(str(exc)) from exc
        print(f"wrote {args.out} ({n} samples)")
        return EXIT_OK
    try:
        design = hydraulic.TransmissionDesign.from_json(args.payload)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    violations = design.bound_violations()
    if violations:
        raise InfeasibleError("; ".join(violations))
    plant = (hydraulic.PlantParams.from_json(args.plant)
             if args.plant is not None else hydraulic.PlantParams())
    dt = args.resolution if args.resolution is not None else 1e-3
    if not dt > 0:
        raise ConfigError("hydraulic resolution must be a positive dt in seconds")
    traj = hydraulic.simulate(design, plant, dt=dt)
    if traj.failed:
        raise InfeasibleError("simulation diverged; no trajectory written")
    traj.to_csv(args.out)
    print(f"wrote {args.out} ({traj.n_samples} rows)")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("problem", "trials", "seed", "budget", "out",
                  "target", "plant", "pairing")}
    cfg = RunConfig.load(args.config, overrides)
    report = run_campaign(cfg, log=sys.stderr)
    sys.stdout.write(report.table())
    return EXIT_OK if report.successes() else EXIT_INFEASIBLE


def _bench_cases():
    """(label, callable-factory) pairs; factory takes a kernel module."""
    m = fourbar.REFERENCE_MECHANISM
    theta2 = 2.0 * np.pi * np.arange(360) / 360
    cx, cy = np.empty(360), np.empty(360)
    target = fourbar.reference_target(12)
    tx = np.ascontiguousarray(target[:, 0])
    ty = np.ascontiguousarray(target[:, 1])
    alpha = math.radians(m.alpha_deg)

    def coupler(impl):
        def run():
            impl.trace_coupler(m.a12, m.a23, m.a34, m.a41, m.a25, alpha,
                               theta2, cx, cy)
            impl.path_sse(cx[:12].copy(), cy[:12].copy(), tx, ty, True)
        return run

    p = hydraulic.PlantParams().as_array()
    out = np.empty((4001, 10))

    def transmission(impl):
        def run():
            impl.hydraulic_trajectory(150e-6, 740e-6, 50.0, p, 1e-3, 4000,
                                      40, out)
        return run

    return [("coupler trace + path sse (n=360)", coupler),
            ("transmission simulation (4 s)", transmission)]


def cmd_bench(args) -> int:
    from . import _purekernels
    try:
        from . import _speedups
    except ImportError:
        _speedups = None

    print(f"active implementation: {'compiled' if kernels.COMPILED else 'pure'}")
    header = f"{'kernel':38}  {'compiled':>12}  {'pure':>12}  {'speedup':>8}"
    print(header)
    for label, factory in _bench_cases():
        pure = min(timeit.repeat(factory(_purekernels), number=1,
                                 repeat=args.repeats))
        if _speedups is not None:
            comp = min(timeit.repeat(factory(_speedups), number=1,
                                     repeat=args.repeats))
            print(f"{label:38}  {comp:>11.6f}s  {pure:>11.6f}s  "
                  f"{pure / comp:>7.1f}x")
        else:
            print(f"{label:38}  {'(not built)':>12}  {pure:>11.6f}s  {'-':>8}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabukit",
        description="Tabu-guided pattern search campaigns for four-bar "
                    "synthesis and hydrostatic transmission tuning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a seeded multi-trial campaign")
    run.add_argument("config", nargs="?", default=None,
                     help="campaign JSON (default: the bundled campaign for "
                          "--problem); flags override its values")
    run.add_argument("--problem", choices=("fourbar", "hydraulic"))
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--budget", type=int)
    run.add_argument("--out", help="artifact directory (default runs/<problem>)")
    run.add_argument("--target", help="precision-point CSV (fourbar)")
    run.add_argument("--plant", help="plant-constant overrides JSON (hydraulic)")
    run.add_argument("--pairing", choices=("fixed", "cyclic"))
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="classify or bound-check a payload")
    check.add_argument("payload", help="mechanism or design JSON")
    check.add_argument("--problem", choices=("fourbar", "hydraulic"))
    check.set_defaults(func=cmd_check)

    trace = sub.add_parser("trace", help="write a coupler path or trajectory CSV")
    trace.add_argument("payload", help="mechanism or design JSON")
    trace.add_argument("--out", required=True, help="output CSV path")
    trace.add_argument("--resolution", type=float,
                       help="samples per revolution (fourbar, default 360) "
                            "or dt seconds (hydraulic, default 0.001)")
    trace.add_argument("--plant", help="plant-constant overrides JSON")
    trace.add_argument("--problem", choices=("fourbar", "hydraulic"))
    trace.set_defaults(func=cmd_trace)

    bench = sub.add_parser("bench", help="time compiled kernels vs pure Python")
    bench.add_argument("--repeats", type=int, default=3,
                       help="timing repeats per kernel (best is reported)")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
