"""Factorization runs, parameter sweeps, N-scaling and Dyson convergence studies."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .conditional import (
    FactorizationReport,
    conditional_amplitudes,
    factorization_report,
    predict_product,
    prepare_initial,
    project_ground,
    transfer_matrix,
)
from .config import InputState
from .dyson import DysonSingularError, dyson_transfer_matrix
from .model import CouplingScaling, ModelSpec, Species

log = logging.getLogger(__name__)

THEOREM_TOL = 1e-9
PHASE_THRESHOLD = 0.01
SLOPE_RANGE = (-1.5, -0.5)
KINDS = ("factorization", "scaling", "phase_sweep", "dyson_convergence")
SWEEP_AXES = ("n_atoms", "coupling", "duration", "rng_seed", "species")
AXIS_COLUMNS = ("species", "n_atoms", "n_modes", "coupling", "duration", "rng_seed")
RESULT_COLUMNS = (
    "ground_probability", "deviation", "conditional_phase", "phase_defined",
    "entropy", "schmidt_1", "schmidt_2", "wall_ms",
)
CSV_COLUMNS = AXIS_COLUMNS + RESULT_COLUMNS


@dataclass(frozen=True)
class RunReport:
    spec: ModelSpec
    ground_probability: float
    report: FactorizationReport
    wall_ms: float
    grid: dict | None = None
    duration: float | None = None  # set when the point has no evolution at all

    def row(self, timing: bool = False) -> dict:
        spec = self.spec
        rec = self.report.as_record()
        return {
            "species": spec.species.value,
            "n_atoms": spec.n_atoms,
            "n_modes": spec.n_modes,
            "coupling": max(spec.couplings),
            "duration": spec.duration if self.duration is None else self.duration,
            "rng_seed": spec.rng_seed,
            "ground_probability": self.ground_probability,
            **{k: rec[k] for k in RESULT_COLUMNS[1:-1]},
            "wall_ms": self.wall_ms if timing else "",
        }


@dataclass(frozen=True)
class SweepPlan:
    base: ModelSpec
    axes: tuple[tuple[str, tuple], ...]
    kind: str
    input: InputState = field(default_factory=lambda: InputState(*_default_input()))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        for name, values in self.axes:
            if name not in SWEEP_AXES:
                raise ValueError(f"unknown sweep axis {name!r}")
            if len(values) == 0:
                raise ValueError(f"axis {name!r} has no values")

    def points(self) -> list[dict]:
        names = [a[0] for a in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(a[1] for a in self.axes))]


def _default_input():
    h = 1 / math.sqrt(2)
    return (h, h, 0, h, h, 1)


def _set_axis(spec: ModelSpec, name: str, value) -> ModelSpec:
    if name == "n_atoms":
        return spec.replace(n_atoms=int(value))
    if name == "coupling":
        return spec.replace(couplings=(float(value),) * spec.n_modes)
    if name == "duration":
        return spec.replace(t1=spec.t0 + float(value))
    if name == "rng_seed":
        return spec.replace(rng_seed=int(value))
    if name == "species":
        return spec.replace(species=Species(value))
    raise ValueError(f"unknown sweep axis {name!r}")


def apply_point(spec: ModelSpec, point: dict) -> ModelSpec:
    for name, value in point.items():
        spec = _set_axis(spec, name, value)
    return spec


def run_factorization(spec: ModelSpec, alpha1, beta1, k1, alpha2, beta2, k2) -> RunReport:
    """Exact two-photon run versus the product of two single-photon runs."""
    start = time.perf_counter()
    exact = conditional_amplitudes(spec, alpha1, beta1, k1, alpha2, beta2, k2)
    t = transfer_matrix(spec)
    predicted = predict_product(t[:, k1], t[:, k2], alpha1, beta1, alpha2, beta2)
    report = factorization_report(exact, predicted, k1, k2)
    wall = (time.perf_counter() - start) * 1e3
    return RunReport(spec, exact.ground_probability, report, wall)


def _zero_duration_report(spec: ModelSpec, inp: InputState) -> RunReport:
    # no evolution at all: the conditional map is the identity
    exact = project_ground(prepare_initial(spec, *inp.as_args()))
    eye = np.eye(spec.n_modes)
    predicted = predict_product(eye[:, inp.k1], eye[:, inp.k2], inp.alpha1, inp.beta1, inp.alpha2, inp.beta2)
    report = factorization_report(exact, predicted, inp.k1, inp.k2)
    return RunReport(spec, exact.ground_probability, report, 0.0, duration=0.0)


def _run_point(args) -> RunReport:
    spec, point, inp = args
    if point.get("duration") == 0:
        return _zero_duration_report(spec, inp)
    return run_factorization(apply_point(spec, point), *inp.as_args())


def _map(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_sweep(plan: SweepPlan, jobs: int = 1) -> list[RunReport]:
    items = [(plan.base, p, plan.input) for p in plan.points()]
    return _map(_run_point, items, jobs)


def _with_control(plan: SweepPlan) -> list[SweepPlan]:
    """The plan itself plus, for nonlinear species, a linear-oscillator control."""
    plans = [plan]
    if not plan.base.species.is_bosonic:
        control = plan.base.replace(species=Species.LINEAR_OSCILLATOR)
        plans.append(SweepPlan(control, plan.axes, plan.kind, plan.input))
    return plans


@dataclass(frozen=True)
class ScalingResult:
    reports: list[RunReport]
    controls: list[RunReport]
    slope: float | None
    flag: str = ""

    @property
    def deviations(self) -> np.ndarray:
        return np.array([r.report.deviation for r in self.reports])

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.deviations) < 0))

    def summary(self) -> dict:
        control_max = max((r.report.deviation for r in self.controls), default=None)
        slope_ok = self.slope is not None and SLOPE_RANGE[0] <= self.slope <= SLOPE_RANGE[1]
        out = {
            "n_atoms": [r.spec.n_atoms for r in self.reports],
            "deviation": self.deviations.tolist(),
            "slope": self.slope,
            "slope_range": list(SLOPE_RANGE),
            "flag": self.flag,
            "criteria": {},
        }
        if self.slope is not None:
            out["criteria"]["strictly_decreasing"] = self.strictly_decreasing
            out["criteria"]["slope_in_range"] = slope_ok
        if self.controls or self.reports[0].spec.species.is_bosonic:
            linear = self.controls or self.reports
            out["control_max_deviation"] = control_max if self.controls else float(self.deviations.max())
            out["criteria"]["control_factorizes"] = all(r.report.deviation <= THEOREM_TOL for r in linear)
        return out


def fit_loglog_slope(n: Sequence[float], deviation: Sequence[float]) -> float:
    return float(np.polyfit(np.log(n), np.log(deviation), 1)[0])


def run_scaling(plan: SweepPlan, jobs: int = 1) -> ScalingResult:
    """Nonlinear deviation versus atom number at fixed collective coupling."""
    if plan.base.coupling_scaling is not CouplingScaling.INVERSE_SQRT_N:
        raise ValueError("scaling runs need coupling_scaling = inverse_sqrt_n")
    if [a[0] for a in plan.axes] != ["n_atoms"]:
        raise ValueError("scaling runs sweep exactly one axis: n_atoms")
    reports, *rest = [run_sweep(p, jobs) for p in _with_control(plan)]
    controls = rest[0] if rest else []
    if plan.base.species.is_bosonic:
        return ScalingResult(reports, [], None, "linear species: no slope claimed")
    good = [r for r in reports if np.isfinite(r.report.deviation) and r.report.deviation > 0]
    if len(good) < 3:
        return ScalingResult(reports, controls, None, "fewer than 3 usable points, no fit")
    slope = fit_loglog_slope([r.spec.n_atoms for r in good], [r.report.deviation for r in good])
    return ScalingResult(reports, controls, slope)


def run_phase_sweep(plan: SweepPlan, jobs: int = 1) -> list[RunReport]:
    """Sweep the plan's axes for the configured species and its linear control."""
    out = []
    for p in _with_control(plan):
        out.extend(run_sweep(p, jobs))
    return out


def phase_sweep_summary(reports: list[RunReport]) -> dict:
    linear = [r for r in reports if r.spec.species.is_bosonic]
    nonlinear = [r for r in reports if not r.spec.species.is_bosonic]
    lin_phase = [abs(r.report.conditional_phase) for r in linear if r.report.phase_defined]
    nl_phase = [abs(r.report.conditional_phase) for r in nonlinear if r.report.phase_defined]
    out = {
        "points": len(reports),
        "undefined_phase_points": sum(not r.report.phase_defined for r in reports),
        "linear_max_abs_phase": max(lin_phase, default=None),
        "linear_max_deviation": max((r.report.deviation for r in linear), default=None),
        "nonlinear_max_abs_phase": max(nl_phase, default=None),
        "criteria": {},
    }
    if linear:
        out["criteria"]["linear_phase_zero"] = all(p <= THEOREM_TOL for p in lin_phase)
    if nonlinear:
        out["criteria"]["nonlinear_phase_present"] = any(p > PHASE_THRESHOLD for p in nl_phase)
    return out


@dataclass(frozen=True)
class ConvergenceRung:
    n_steps: int
    dt: float
    error: float  # nan on a failed rung
    residual: float
    status: str = "ok"


@dataclass(frozen=True)
class ConvergenceTable:
    rungs: list[ConvergenceRung]

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rungs])

    @property
    def ratios(self) -> list[float]:
        e = self.errors
        return [float(a / b) for a, b in zip(e, e[1:])]

    @property
    def observed_order(self) -> list[float]:
        out = []
        for a, b in zip(self.rungs, self.rungs[1:]):
            out.append(float(np.log(a.error / b.error) / np.log(a.dt / b.dt)))
        return out

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    def summary(self) -> dict:
        return {
            "n_steps": [r.n_steps for r in self.rungs],
            "dt": [r.dt for r in self.rungs],
            "error": [r.error for r in self.rungs],
            "residual": [r.residual for r in self.rungs],
            "status": [r.status for r in self.rungs],
            "error_ratios": self.ratios,
            "observed_order": self.observed_order,
            "criteria": {
                "monotone": self.monotone,
                "finest_error_le_1e-3": bool(self.rungs[-1].error <= 1e-3),
                "residual_le_1e-10": bool(all(r.residual <= 1e-10 for r in self.rungs)),
            },
        }


def run_dyson_convergence(spec: ModelSpec, ladder: Sequence[int]) -> ConvergenceTable:
    """Dyson transfer matrix against exact evolution on a ladder of grids."""
    if not spec.species.is_bosonic:
        raise ValueError("Dyson convergence needs the linear_oscillator species")
    exact = transfer_matrix(spec)
    rungs = []
    for n in ladder:
        dt = (spec.t1 - spec.t0) / n
        try:
            t_dyson, residual = dyson_transfer_matrix(spec, int(n))
        except DysonSingularError as exc:
            log.warning("rung n_steps=%d failed: %s", n, exc)
            rungs.append(ConvergenceRung(int(n), dt, math.nan, math.nan, f"singular: {exc}"))
            continue
        rungs.append(ConvergenceRung(int(n), dt, float(np.linalg.norm(t_dyson - exact)), residual))
    return ConvergenceTable(rungs)


# --------------------------------------------------------------------------- #
#                                  output                                     #
# --------------------------------------------------------------------------- #


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def reports_to_csv(reports: Sequence[RunReport], timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        row = r.row(timing)
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def convergence_to_csv(table: ConvergenceTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("n_steps", "dt", "error", "residual", "status"))
    for r in table.rungs:
        writer.writerow([_fmt(r.n_steps), _fmt(r.dt), _fmt(r.error), _fmt(r.residual), r.status])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str | Path, text: str):
    """Write ``text`` via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
