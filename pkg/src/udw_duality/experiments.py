"""Canned sweeps producing deterministic CSV tables.

Rows are computed in parallel (processes) but always emitted in grid order.
All parameters are dimensionless: gaps as Omega*T, times as tau/T,
separations as d/T.
"""

from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import _routes
from .detector import DetectorConfig, constant_gap_dual, evaluate_lij
from .errors import ConfigurationError, InvalidSpecError, NumericalError
from .field import FiniteModeCavity, MinkowskiVacuum
from .harvesting import DetectorPair, duality_residual_pair
from .switching import (
    Kind,
    SwitchingSpec,
    default_grid,
    dual_switching,
    l1_relative_distance,
    phase_linearity_residual,
    theorem1_residual,
)

__all__ = [
    "ExperimentId",
    "SweepSpec",
    "SweepRow",
    "SweepAbortedError",
    "ComparisonReport",
    "run_experiment",
    "write_csv",
    "format_csv",
    "compare_to_reference",
    "load_reference",
    "resolve_jobs",
]

from . import __version__ as VERSION


class ExperimentId(str, enum.Enum):
    FIG1_GAUSSIAN = "Fig1Gaussian"
    FIG2_COMPACT = "Fig2Compact"
    FIG3_COMPACT_SMOOTH = "Fig3CompactSmooth"
    L1_TABLE = "L1Table"
    SINGLE_DUALITY = "SingleDuality"
    PAIR_DUALITY = "PairDuality"
    PHASE_CHECK = "PhaseCheck"


_DEFAULT_OMEGA = {
    ExperimentId.FIG1_GAUSSIAN: (1.0, 5.0, 10.0, 20.0),
    ExperimentId.FIG2_COMPACT: (10.0, 100.0, 1000.0),
    ExperimentId.FIG3_COMPACT_SMOOTH: (10.0, 50.0, 100.0),
    ExperimentId.L1_TABLE: (5.0, 10.0, 20.0, 40.0, 80.0),
    ExperimentId.SINGLE_DUALITY: (5.0, 10.0, 20.0),
    ExperimentId.PAIR_DUALITY: (5.0, 10.0, 20.0),
    ExperimentId.PHASE_CHECK: (1.0, 10.0, 20.0, 40.0, 80.0),
}

_DEFAULT_KIND = {
    ExperimentId.FIG1_GAUSSIAN: Kind.GAUSSIAN,
    ExperimentId.FIG2_COMPACT: Kind.COMPACT_COSINE,
    ExperimentId.FIG3_COMPACT_SMOOTH: Kind.COMPACT_COSINE_SQ,
}

_FIGURES = (ExperimentId.FIG1_GAUSSIAN, ExperimentId.FIG2_COMPACT, ExperimentId.FIG3_COMPACT_SMOOTH)


def _increasing(name, values):
    values = tuple(float(v) for v in values)
    if not values:
        raise InvalidSpecError(f"{name} grid is empty")
    if not all(map(math.isfinite, values)):
        raise InvalidSpecError(f"{name} grid has non-finite entries")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidSpecError(f"{name} grid must be strictly increasing")
    return values


@dataclass(frozen=True)
class SweepSpec:
    """One sweep. ``tau_grid`` is (lo, hi, n) in units of T; None picks the experiment default."""

    experiment: ExperimentId
    omega_T: tuple | None = None
    tau_grid: tuple | None = None
    separations: tuple = (2.0,)
    kind: Kind | None = None
    T: float = 1.0
    field: str = "minkowski"
    cavity_length: float = 2.0
    cavity_modes: int = 5
    cavity_position: float = 0.35
    output: str | None = None

    def __post_init__(self):
        exp = ExperimentId(self.experiment)
        object.__setattr__(self, "experiment", exp)
        omega = _DEFAULT_OMEGA[exp] if self.omega_T is None else self.omega_T
        omega = _increasing("omega_T", omega)
        if omega[0] <= 0:
            raise InvalidSpecError("omega_T values must be positive")
        object.__setattr__(self, "omega_T", omega)
        object.__setattr__(self, "separations", _increasing("separation", self.separations))
        if self.separations[0] <= 0:
            raise InvalidSpecError("separations must be positive")
        kind = self.kind if self.kind is not None else _DEFAULT_KIND.get(exp, Kind.GAUSSIAN)
        object.__setattr__(self, "kind", Kind(kind))
        if self.kind is Kind.TABULATED:
            raise InvalidSpecError("sweeps use analytic switching kinds")
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidSpecError("T must be positive")
        if self.field not in ("minkowski", "cavity"):
            raise InvalidSpecError(f"unknown field {self.field!r}")
        if self.tau_grid is not None:
            lo, hi, n = self.tau_grid
            n = int(n)
            if n < 1 or (n > 1 and not hi > lo):
                raise InvalidSpecError("tau grid must be strictly increasing")
            object.__setattr__(self, "tau_grid", (float(lo), float(hi), n))
        if self.field == "cavity":
            if self.cavity_length <= 0 or self.cavity_modes < 1:
                raise InvalidSpecError("cavity needs a positive length and at least one mode")

    def switching(self):
        return SwitchingSpec(self.kind, T=self.T)

    def grid(self):
        """Sample times (absolute units)."""
        if self.tau_grid is None:
            if self.experiment is ExperimentId.FIG1_GAUSSIAN:
                return np.linspace(-6.0, 6.0, 1201) * self.T
            if self.experiment in _FIGURES:
                return np.linspace(-1.0, 3.0, 4001) * self.T
            return default_grid(self.switching())
        lo, hi, n = self.tau_grid
        return np.linspace(lo, hi, n) * self.T

    def field_model(self):
        if self.field == "cavity":
            return FiniteModeCavity(length=self.cavity_length * self.T, mode_count=self.cavity_modes)
        return MinkowskiVacuum()

    def meta(self):
        g = self.grid()
        eps = _routes.COMPACT_EPS_SCHEDULE if self.switching().is_compact else _routes.EPS_SCHEDULE
        out = [
            ("version", VERSION),
            ("experiment", self.experiment.value),
            ("kind", self.kind.value),
            ("T", _fmt(self.T)),
            ("omegaT", " ".join(_fmt(w) for w in self.omega_T)),
            ("grid", f"{_fmt(g[0] / self.T)}:{_fmt(g[-1] / self.T)}:{g.size}"),
            ("eps_schedule_over_T", " ".join(_fmt(e) for e in eps)),
            ("field", self.field),
        ]
        if self.experiment is ExperimentId.PAIR_DUALITY:
            out.append(("separation_over_T", " ".join(_fmt(d) for d in self.separations)))
        if self.field == "cavity":
            out.append(("cavity", f"length_over_T={_fmt(self.cavity_length)} modes={self.cavity_modes} "
                                  f"position_over_L={_fmt(self.cavity_position)}"))
        return out


@dataclass(frozen=True)
class SweepRow:
    """Ordered (name, value) pairs: input parameters first, then outputs."""

    experiment: str
    params: tuple
    values: tuple

    def __post_init__(self):
        for name, v in self.params + self.values:
            if isinstance(v, float) and not math.isfinite(v):
                raise NumericalError(f"non-finite {name} in {self.experiment} row", v)

    @property
    def header(self):
        return ("experiment",) + tuple(n for n, _ in self.params) + tuple(n for n, _ in self.values)

    def as_dict(self):
        return dict(self.params + self.values)

    def get(self, name):
        return self.as_dict()[name]


class SweepAbortedError(NumericalError):
    """A task failed; ``rows`` holds every row that completed, ``manifest`` describes the run."""

    def __init__(self, message, rows, manifest):
        super().__init__(message)
        self.rows = rows
        self.manifest = manifest


def resolve_jobs(jobs=None):
    """Worker count from the argument, else UDW_JOBS, else 1."""
    if jobs is None:
        raw = os.environ.get("UDW_JOBS", "").strip()
        if not raw:
            return 1
        try:
            jobs = int(raw)
        except ValueError:
            raise ConfigurationError(f"UDW_JOBS must be an integer, got {raw!r}") from None
    if int(jobs) < 1:
        raise ConfigurationError("jobs must be at least 1")
    return int(jobs)


def _figure_task(spec: SweepSpec, omegaT):
    T = spec.T
    sw = spec.switching()
    grid = spec.grid()
    dual = dual_switching(sw, omegaT / T, grid)
    chi = sw(grid)
    om = omegaT / T
    return [
        SweepRow(spec.experiment.value,
                 (("kind", sw.kind.value), ("omegaT", omegaT), ("tau_over_T", float(t / T))),
                 (("chi", float(c)), ("omega_chi_tilde", float(om * ct)), ("theta", float(th))))
        for t, c, ct, th in zip(grid, chi, dual.chi_tilde, dual.theta)
    ]


def _l1_task(spec: SweepSpec, omegaT):
    sw = spec.switching()
    grid = spec.grid()
    om = omegaT / spec.T
    dual = dual_switching(sw, om, grid)
    chi = sw(grid)
    return [SweepRow(spec.experiment.value, (("kind", sw.kind.value), ("omegaT", omegaT)), (
        ("l1_distance", l1_relative_distance(om * dual.chi_tilde, chi, grid, mode="norm")),
        ("l1_pointwise", l1_relative_distance(om * dual.chi_tilde, chi, grid, mode="pointwise")),
        ("sup_distance", float(np.max(np.abs(om * dual.chi_tilde - chi)) / np.max(chi))),
        ("theorem1_residual", theorem1_residual(sw, om, grid)),
    ))]


def _phase_task(spec: SweepSpec, omegaT):
    sw = spec.switching()
    fit = phase_linearity_residual(dual_switching(sw, omegaT / spec.T, spec.grid()))
    offset = math.remainder(fit.offset, 2 * math.pi)
    return [SweepRow(spec.experiment.value, (("kind", sw.kind.value), ("omegaT", omegaT)), (
        ("phase_offset", offset),
        ("phase_residual", fit.residual),
        ("offset_minus_half_pi", abs(abs(offset) - 0.5 * math.pi)),
    ))]


def _position(spec: SweepSpec, shift=0.0):
    if spec.field == "cavity":
        x = spec.cavity_position * spec.cavity_length * spec.T + shift
        if not 0 < x < spec.cavity_length * spec.T:
            raise InvalidSpecError("detector falls outside the cavity; shorten the separation")
        return (x, 0.0, 0.0)
    return (shift, 0.0, 0.0)


def _single_task(spec: SweepSpec, omegaT):
    sw = spec.switching()
    model = spec.field_model()
    amp = DetectorConfig(omegaT / spec.T, sw, position=_position(spec))
    L = evaluate_lij(amp, amp, model, cross_check=False).value.real
    Lt = evaluate_lij(constant_gap_dual(amp), constant_gap_dual(amp), model, cross_check=False).value.real
    return [SweepRow(spec.experiment.value, (("kind", sw.kind.value), ("omegaT", omegaT)), (
        ("L", L), ("L_tilde", Lt), ("residual", abs(L - Lt) / L if L > 0 else math.inf),
    ))]


def _pair_task(spec: SweepSpec, omegaT, sep):
    sw = spec.switching()
    model = spec.field_model()
    om = omegaT / spec.T
    a = DetectorConfig(om, sw, position=_position(spec))
    b = DetectorConfig(om, sw, position=_position(spec, sep * spec.T))
    r = duality_residual_pair(DetectorPair(a, b), model)
    amp, der = r.amplitude, r.derivative
    return [SweepRow(spec.experiment.value, (("kind", sw.kind.value), ("omegaT", omegaT), ("d_over_T", sep)), (
        ("l_aa", amp.l_aa), ("l_aa_tilde", der.l_aa),
        ("m_re", amp.m.real), ("m_im", amp.m.imag),
        ("m_tilde_re", der.m.real), ("m_tilde_im", der.m.imag),
        ("negativity", amp.negativity), ("negativity_tilde", der.negativity),
        ("dL_aa", r.dL_aa), ("dL_bb", r.dL_bb), ("dM", r.dM), ("dNegativity", r.dNegativity),
    ))]


_TASKS = {
    ExperimentId.FIG1_GAUSSIAN: _figure_task,
    ExperimentId.FIG2_COMPACT: _figure_task,
    ExperimentId.FIG3_COMPACT_SMOOTH: _figure_task,
    ExperimentId.L1_TABLE: _l1_task,
    ExperimentId.PHASE_CHECK: _phase_task,
    ExperimentId.SINGLE_DUALITY: _single_task,
    ExperimentId.PAIR_DUALITY: _pair_task,
}


def _task_args(spec: SweepSpec):
    if spec.experiment is ExperimentId.PAIR_DUALITY:
        return [(w, d) for w in spec.omega_T for d in spec.separations]
    return [(w,) for w in spec.omega_T]


def _run_one(spec, args):
    return _TASKS[spec.experiment](spec, *args)


def run_experiment(spec: SweepSpec, jobs=None) -> list:
    """All rows of ``spec`` in grid order.

    On a failed task the remaining tasks still run; a SweepAbortedError then
    carries the completed rows and a manifest (also written next to
    ``spec.output`` when set).
    """
    jobs = resolve_jobs(jobs)
    tasks = _task_args(spec)
    results, failures = [], []
    if jobs == 1 or len(tasks) == 1:
        for args in tasks:
            try:
                results.append(_run_one(spec, args))
            except (ArithmeticError, ValueError, NotImplementedError) as exc:
                results.append(None)
                failures.append((args, exc))
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            futures = [pool.submit(_run_one, spec, args) for args in tasks]
            for args, fut in zip(tasks, futures):
                try:
                    results.append(fut.result())
                except (ArithmeticError, ValueError, NotImplementedError) as exc:
                    results.append(None)
                    failures.append((args, exc))
    rows = [row for chunk in results if chunk is not None for row in chunk]
    if failures:
        manifest = {
            "experiment": spec.experiment.value,
            "completed": [list(a) for a, r in zip(tasks, results) if r is not None],
            "failed": [{"task": list(a), "error": f"{type(e).__name__}: {e}"} for a, e in failures],
            "rows": len(rows),
        }
        if spec.output:
            Path(str(spec.output) + ".partial.json").write_text(json.dumps(manifest, indent=2) + "\n")
            write_csv(rows, spec, spec.output + ".partial.csv")
        first = failures[0]
        raise SweepAbortedError(f"{len(failures)} of {len(tasks)} tasks failed; first {first[0]}: {first[1]}",
                                rows, manifest)
    return rows


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # repr is the shortest string that round-trips the double
        return repr(float(v))
    return str(v)


def format_csv(rows, spec: SweepSpec | None = None, meta=None) -> str:
    if not rows:
        raise ConfigurationError("no rows to write")
    lines = [f"# meta {k}={v}" for k, v in (meta if meta is not None else spec.meta() if spec else [])]
    header = rows[0].header
    lines.append(",".join(header))
    for row in rows:
        if row.header != header:
            raise ConfigurationError("rows with different columns cannot share a table")
        lines.append(",".join([row.experiment] + [_fmt(v) for _, v in row.params + row.values]))
    return "\n".join(lines) + "\n"


def write_csv(rows, spec: SweepSpec, path=None):
    text = format_csv(rows, spec)
    path = path or spec.output
    if path is None or str(path) == "-":
        return text
    Path(path).write_text(text, encoding="utf-8")
    return text


# -- reference comparison -----------------------------------------------------


def load_reference(reference=None):
    """Reference tolerances: a dict, a JSON path, or None for the packaged file."""
    if isinstance(reference, dict):
        data = reference
    elif reference is None:
        data = json.loads(resources.files("udw_duality").joinpath("data/reference_v1.json").read_text())
    else:
        data = json.loads(Path(reference).read_text())
    if "entries" not in data:
        raise ConfigurationError("reference file has no 'entries'")
    return data


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    passed: bool
    detail: str


@dataclass
class ComparisonReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def exit_status(self):
        return 0 if self.passed else 1

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def format(self):
        out = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value!r} ({c.detail})" for c in self.checks]
        out.append(f"{len(self.checks) - len(self.failures)}/{len(self.checks)} checks passed")
        return "\n".join(out)


def _matches(row_dict, where):
    for key, cond in where.items():
        if key not in row_dict:
            return False
        v = row_dict[key]
        if isinstance(cond, list):
            lo, hi = cond
            if not (isinstance(v, (int, float)) and lo < v <= hi):
                return False
        elif isinstance(cond, (int, float)) and not isinstance(cond, bool):
            if not (isinstance(v, (int, float)) and math.isclose(v, cond, rel_tol=1e-12, abs_tol=1e-12)):
                return False
        elif v != cond:
            return False
    return True


def _reduce(values, how):
    if how == "one":
        if len(values) != 1:
            raise ConfigurationError(f"expected exactly one matching row, found {len(values)}")
        return values[0]
    if how == "max":
        return max(values)
    if how == "min":
        return min(values)
    if how == "min_step":
        return min(b - a for a, b in zip(values, values[1:])) if len(values) > 1 else 0.0
    raise ConfigurationError(f"unknown reduction {how!r}")


def _judge(value, entry):
    ok, parts = True, []
    if "target" in entry:
        tol = entry.get("abs_tol", 0.0) + entry.get("rel_tol", 0.0) * abs(entry["target"])
        ok &= abs(value - entry["target"]) <= tol
        parts.append(f"target {entry['target']!r} +- {tol!r}")
    if "upper" in entry:
        ok &= value < entry["upper"]
        parts.append(f"< {entry['upper']!r}")
    if "lower" in entry:
        ok &= value > entry["lower"] if entry.get("strict", True) else value >= entry["lower"]
        parts.append(f"{'>' if entry.get('strict', True) else '>='} {entry['lower']!r}")
    if not parts:
        raise ConfigurationError(f"reference entry {entry.get('name')!r} declares no tolerance")
    return bool(ok), ", ".join(parts)


def _select(dicts, entry, where):
    vals = [d[entry["quantity"]] for exp, d in dicts
            if exp == entry["experiment"] and entry["quantity"] in d and _matches(d, where)]
    if not vals:
        raise ConfigurationError(f"reference entry {entry['name']!r} matches no row")
    return float(_reduce(vals, entry.get("reduce", "one")))


def compare_to_reference(rows, reference=None) -> ComparisonReport:
    """Check ``rows`` against every reference entry for their experiment.

    An entry selects rows with ``where`` (exact values, or [lo, hi] meaning
    lo < x <= hi), reduces them (one, max, min, min_step), optionally divides
    by a second selection ``relative_to``, and tests target/abs_tol,
    upper or lower.
    """
    if not rows:
        raise ConfigurationError("no rows to compare")
    data = load_reference(reference)
    experiments = {r.experiment for r in rows}
    entries = [e for e in data["entries"] if e["experiment"] in experiments]
    missing = experiments - {e["experiment"] for e in entries}
    if missing:
        raise ConfigurationError(f"no reference entries for {', '.join(sorted(missing))}")
    report = ComparisonReport()
    dicts = [(r.experiment, r.as_dict()) for r in rows]
    for entry in entries:
        value = _select(dicts, entry, entry.get("where", {}))
        if "relative_to" in entry:
            value = value / _select(dicts, entry, entry["relative_to"])
        ok, detail = _judge(value, entry)
        report.checks.append(Check(entry["name"], value, ok, detail))
    return report
