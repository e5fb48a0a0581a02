"""Command-line front end.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .conditional import transfer_matrix
from .config import ConfigError, RunConfig
from .dyson import (
    DysonSingularError,
    KernelGrid,
    TimeGrid,
    dyson_residual,
    dyson_solve,
    kernel_P,
    propagator_D,
    spectral_radius,
    transfer_from_dyson,
)
from .experiments import (
    SweepPlan,
    atomic_write,
    convergence_to_csv,
    phase_sweep_summary,
    reports_to_csv,
    run_dyson_convergence,
    run_factorization,
    run_phase_sweep,
    run_scaling,
    to_json,
)

log = logging.getLogger("photon_nogo")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photon-nogo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [
        ("simulate", "exact two-photon run versus the factorized prediction"),
        ("dyson-check", "Dyson-equation transfer versus exact single-photon evolution"),
        ("scaling", "nonlinear deviation versus atom number"),
        ("phase-sweep", "conditional phase across a parameter sweep"),
        ("convergence", "Dyson transfer error on a ladder of time grids"),
        ("validate-config", "parse, apply overrides, validate and echo the config"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="YAML configuration file")
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override a config entry, e.g. --set model.n_atoms=4 (repeatable)",
        )
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers (default 1)")
        p.add_argument("--timing", action="store_true", help="fill the wall_ms CSV column")
        if name == "dyson-check":
            p.add_argument("--dump-kernels", action="store_true", help="write P, D and Pi as CSV")
    return parser


def _snapshot(cfg: RunConfig) -> dict:
    return cfgmod.config_to_dict(cfg)


def _kernel_csv(k: KernelGrid) -> str:
    labels = [f"t={float(t)!r}|k={m}" for t in k.grid.nodes for m in range(k.n_modes)]
    lines = [",".join(["row\\col"] + labels)]
    for label, row in zip(labels, k.matrix):
        lines.append(",".join([label] + [repr(complex(z)) for z in row]))
    return "\n".join(lines) + "\n"


def cmd_validate(cfg: RunConfig, args) -> int:
    sys.stdout.write(cfgmod.dump_config(cfg))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    report = run_factorization(cfg.spec, *cfg.input.as_args())
    out = Path(args.out)
    summary = {
        "config": _snapshot(cfg),
        "ground_probability": report.ground_probability,
        **report.report.as_record(),
        "wall_ms": report.wall_ms,
    }
    atomic_write(out / "simulate.csv", reports_to_csv([report], args.timing))
    atomic_write(out / "simulate.json", to_json(summary))
    print(
        f"deviation={report.report.deviation:.3e} "
        f"conditional_phase={report.report.conditional_phase:.3e} "
        f"ground_probability={report.ground_probability:.6f}"
    )
    return EXIT_OK


def cmd_dyson_check(cfg: RunConfig, args) -> int:
    spec = cfg.spec
    grid = TimeGrid.for_spec(spec, int(cfg.dyson["n_steps"]))
    P = kernel_P(spec, grid)
    D = propagator_D(grid, spec)
    try:
        Pi = dyson_solve(P, D)
    except DysonSingularError as exc:
        raise NumericalFailure(str(exc)) from exc
    t_dyson = np.stack([transfer_from_dyson(Pi, D, grid, k) for k in range(spec.n_modes)], axis=1)
    t_exact = transfer_matrix(spec)
    out = Path(args.out)
    summary = {
        "config": _snapshot(cfg),
        "n_steps": grid.n_steps,
        "dt": grid.dt,
        "residual": dyson_residual(Pi, P, D),
        "spectral_radius": spectral_radius(P, D),
        "transfer_error": float(np.linalg.norm(t_dyson - t_exact)),
    }
    if args.dump_kernels:
        for name, k in (("P", P), ("D", D), ("Pi", Pi)):
            atomic_write(out / f"kernel_{name}.csv", _kernel_csv(k))
    atomic_write(out / "dyson_check.json", to_json(summary))
    print(f"residual={summary['residual']:.3e} transfer_error={summary['transfer_error']:.3e}")
    return EXIT_OK


def cmd_scaling(cfg: RunConfig, args) -> int:
    values = cfg.sweep["values"] if cfg.sweep["parameter"] == "n_atoms" else [1, 2, 4, 8, 16]
    plan = SweepPlan(cfg.spec, (("n_atoms", tuple(values)),), "scaling", cfg.input)
    result = run_scaling(plan, jobs=args.jobs)
    out = Path(args.out)
    summary = {"config": _snapshot(cfg), **result.summary()}
    atomic_write(out / "scaling.csv", reports_to_csv(result.reports + result.controls, args.timing))
    atomic_write(out / "scaling.json", to_json(summary))
    print(f"slope={result.slope} {result.flag}".rstrip())
    if result.slope is None and not cfg.spec.species.is_bosonic:
        raise NumericalFailure(result.flag)
    return EXIT_OK


def cmd_phase_sweep(cfg: RunConfig, args) -> int:
    axis = (cfg.sweep["parameter"], tuple(cfg.sweep["values"]))
    plan = SweepPlan(cfg.spec, (axis,), "phase_sweep", cfg.input)
    reports = run_phase_sweep(plan, jobs=args.jobs)
    out = Path(args.out)
    summary = {"config": _snapshot(cfg), **phase_sweep_summary(reports)}
    atomic_write(out / "phase_sweep.csv", reports_to_csv(reports, args.timing))
    atomic_write(out / "phase_sweep.json", to_json(summary))
    print(f"points={summary['points']} nonlinear_max_abs_phase={summary['nonlinear_max_abs_phase']}")
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, args) -> int:
    table = run_dyson_convergence(cfg.spec, [int(n) for n in cfg.dyson["ladder"]])
    out = Path(args.out)
    summary = {"config": _snapshot(cfg), **table.summary()}
    atomic_write(out / "convergence.csv", convergence_to_csv(table))
    atomic_write(out / "convergence.json", to_json(summary))
    for r in table.rungs:
        print(f"n_steps={r.n_steps} error={r.error:.3e} residual={r.residual:.3e} {r.status}")
    if any(r.status != "ok" for r in table.rungs):
        raise NumericalFailure("singular Dyson solve on at least one rung")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "dyson-check": cmd_dyson_check,
    "scaling": cmd_scaling,
    "phase-sweep": cmd_phase_sweep,
    "convergence": cmd_convergence,
    "validate-config": cmd_validate,
}


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = cfgmod.load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except (NumericalFailure, DysonSingularError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
