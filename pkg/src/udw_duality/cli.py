"""Command-line front end: ``udw {dual,single,harvest,sweep,verify}``.

All physical inputs are dimensionless: gaps as Omega*T, times and lengths
in units of the switching timescale T (T itself defaults to 1).
Exit codes: 0 success, 1 acceptance or reference failure, 2 usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detector import CouplingKind, DetectorConfig, GaussianBall, Pointlike, constant_gap_dual, evaluate_lij
from .errors import ConfigurationError, InvalidSpecError, UDWError
from .experiments import ExperimentId, SweepAbortedError, SweepRow, SweepSpec, compare_to_reference
from .experiments import format_csv, resolve_jobs, run_experiment, write_csv
from .field import FiniteModeCavity, MinkowskiVacuum
from .harvesting import DetectorPair, harvest
from .switching import Kind, SwitchingSpec, dual_switching

EXIT_OK, EXIT_ACCEPTANCE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- value parsers ---------------------------------------------------------------


def positive_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def nonnegative_float(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def grid_spec(text):
    """lo:hi:n -> (lo, hi, n)."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:n, got {text!r}") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise argparse.ArgumentTypeError("grid needs n >= 1 and hi > lo")
    return lo, hi, n


def float_list(text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def eps_list(text):
    vals = float_list(text)
    if len(vals) < 1 or any(not v > 0 for v in vals) or len(set(vals)) != len(vals):
        raise argparse.ArgumentTypeError("epsilon schedule needs distinct positive values")
    return vals


def jobs_count(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("jobs must be at least 1")
    return v


# -- parser ----------------------------------------------------------------------


def _switching_args(p):
    p.add_argument("--kind", choices=[k.value for k in Kind if k is not Kind.TABULATED], default="gaussian",
                   help="switching profile (default: gaussian)")
    p.add_argument("--T", type=positive_float, default=1.0,
                   help="switching timescale T in the caller's time unit; every other time is in units of T "
                        "(default: 1)")
    p.add_argument("--omegaT", type=positive_float, default=10.0,
                   help="dimensionless gap Omega*T (default: 10)")


def _field_args(p):
    p.add_argument("--field", choices=["minkowski", "cavity"], default="minkowski",
                   help="field model: 3+1 Minkowski vacuum or a finite-mode Dirichlet cavity (default: minkowski)")
    p.add_argument("--eps-schedule", type=eps_list, default=None, metavar="E1,E2,...",
                   help="regulator values epsilon/T extrapolated to zero for pointlike Minkowski kernels "
                        "(default: 1e-2,1e-3,1e-4 for Gaussian, 1e-4,1e-5,1e-6 for compact switchings)")
    p.add_argument("--cavity-length", type=positive_float, default=2.0,
                   help="cavity length L in units of T (default: 2)")
    p.add_argument("--cavity-modes", type=int, default=5, help="number of cavity modes kept (default: 5)")
    p.add_argument("--position", type=float, default=None,
                   help="detector (A) position: in units of T along x; inside the cavity, measured from "
                        "the wall (default: 0 in Minkowski, 0.35 L in the cavity)")
    p.add_argument("--coupling", type=float, default=1.0, help="coupling strength lambda, dimensionless (default: 1)")
    smear = p.add_mutually_exclusive_group()
    smear.add_argument("--smearing", type=positive_float, default=None,
                       help="Gaussian smearing width sigma in units of T (Minkowski only)")
    smear.add_argument("--pointlike", action="store_true", help="pointlike detectors (the default)")
    p.add_argument("--cross-check", choices=["auto", "on", "off"], default="auto",
                   help="also evaluate the time-domain route and compare (default: auto, skipped when too costly)")


def _output_args(p):
    p.add_argument("--output", "-o", default="-", help="output CSV path, '-' for stdout (default: -)")


def _config_arg(p):
    p.add_argument("--config", type=Path, default=None,
                   help="UTF-8 file of 'key = value' lines ('#' starts a comment); explicit flags win")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="udw", description="Amplitude/derivative-coupled Unruh-DeWitt detectors and their dual switching.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{dual,single,harvest,sweep,verify}")

    p = sub.add_parser("dual", help="dual switching samples (tau/T, chi, Omega*chi_tilde, theta)",
                       description="Emit the dual switching on a time grid. Columns: tau/T, chi "
                                   "(dimensionless), Omega*chi_tilde (dimensionless), theta (rad).")
    _switching_args(p)
    p.add_argument("--grid", type=grid_spec, default=(-6.0, 6.0, 1201), metavar="LO:HI:N",
                   help="time grid tau/T from LO to HI with N points (default: -6:6:1201)")
    _output_args(p)
    _config_arg(p)

    p = sub.add_parser("single", help="one detector: L, L_tilde and the duality residual",
                       description="Excitation probability of the amplitude detector (chi, Omega) and of its "
                                   "constant-gap derivative dual (chi/Omega, Omega). Probabilities are "
                                   "dimensionless.")
    _switching_args(p)
    _field_args(p)
    _output_args(p)
    _config_arg(p)

    p = sub.add_parser("harvest", help="two identical detectors: L_ij, M, negativity",
                       description="Second-order joint state of two identical static detectors.")
    _switching_args(p)
    _field_args(p)
    p.add_argument("--separation", type=positive_float, default=2.0,
                   help="detector separation d in units of T (default: 2)")
    p.add_argument("--delay", type=float, default=0.0, help="switching delay of B in units of T (default: 0)")
    p.add_argument("--coupling-kind", choices=[c.value for c in CouplingKind], default="amplitude",
                   help="amplitude coupling, or the constant-gap derivative dual of it (default: amplitude)")
    _output_args(p)
    _config_arg(p)

    p = sub.add_parser("sweep", help="run a canned experiment and write its CSV",
                       description="Run an experiment sweep; rows are emitted in grid order.")
    p.add_argument("--experiment", choices=[e.value for e in ExperimentId], required=True,
                   help="experiment to run")
    p.add_argument("--omegaT", type=float_list, default=None, metavar="W1,W2,...",
                   help="gaps Omega*T, strictly increasing (default: per experiment)")
    p.add_argument("--grid", type=grid_spec, default=None, metavar="LO:HI:N",
                   help="time grid tau/T (default: per experiment)")
    p.add_argument("--separations", type=float_list, default=None, metavar="D1,D2,...",
                   help="separations d/T for PairDuality (default: 2)")
    p.add_argument("--kind", choices=[k.value for k in Kind if k is not Kind.TABULATED], default=None,
                   help="switching profile (default: per experiment)")
    p.add_argument("--T", type=positive_float, default=1.0, help="switching timescale T (default: 1)")
    p.add_argument("--field", choices=["minkowski", "cavity"], default="minkowski", help="field model")
    p.add_argument("--cavity-length", type=positive_float, default=2.0, help="cavity length in units of T")
    p.add_argument("--cavity-modes", type=int, default=5, help="number of cavity modes kept")
    p.add_argument("--jobs", type=jobs_count, default=None,
                   help="worker processes (default: $UDW_JOBS, else 1); output order never depends on it")
    p.add_argument("--compare", nargs="?", const="default", default=None, metavar="REFERENCE",
                   help="check rows against a reference tolerance file (default: the packaged one); "
                        "exit 1 on any violation")
    _output_args(p)
    _config_arg(p)

    p = sub.add_parser("verify", help="run the acceptance suite; exit 1 on any failure",
                       description="Run every acceptance criterion and print one line each.")
    p.add_argument("--only", type=float_list, default=None, metavar="N1,N2,...",
                   help="criterion numbers to run (default: all)")
    p.add_argument("--jobs", type=jobs_count, default=None,
                   help="accepted for symmetry with sweep; criteria run sequentially")
    _config_arg(p)
    return parser


# -- config merging ----------------------------------------------------------------


def read_config(path: Path):
    """Parse 'key = value' lines; '#' starts a comment."""
    out = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _config_location(argv):
    """(subcommand, config path) from raw argv, before required flags are checked."""
    command = next((a for a in argv if not a.startswith("-")), None)
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    return command, path


def _apply_config(parser, command, path):
    sub = _subparser(parser, command)
    settings = read_config(Path(path))
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, value in settings.items():
        action = actions.get(key)
        if action is None:
            raise ConfigurationError(f"unknown config key {key!r} for {command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
            continue
        try:
            conv = action.type(value) if action.type else value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigurationError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and conv not in action.choices:
            raise ConfigurationError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[key] = conv
    sub.set_defaults(**defaults)
    # required flags may now come from the file
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _join_negative_values(argv):
    """'--grid -6:6:11' -> '--grid=-6:6:11' so values may start with a minus sign."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse(argv):
    argv = _join_negative_values(list(argv))
    parser = build_parser()
    command, path = _config_location(argv)
    if path is not None and command in COMMANDS:
        _apply_config(parser, command, path)
    return parser.parse_args(argv)


# -- commands ----------------------------------------------------------------------


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _field(ns):
    if ns.field == "cavity":
        return FiniteModeCavity(length=ns.cavity_length * ns.T, mode_count=ns.cavity_modes)
    return MinkowskiVacuum()


def _smearing(ns):
    if ns.smearing is None:
        return Pointlike()
    if ns.field == "cavity":
        raise UsageError("--smearing is only available in the Minkowski vacuum")
    return GaussianBall(ns.smearing * ns.T)


def _position(ns, shift=0.0):
    if ns.field == "cavity":
        x = (0.35 * ns.cavity_length if ns.position is None else ns.position) * ns.T + shift * ns.T
        if not 0 < x < ns.cavity_length * ns.T:
            raise UsageError("detector position falls outside the cavity")
        return (x, 0.0, 0.0)
    return (((ns.position or 0.0) + shift) * ns.T, 0.0, 0.0)


def _cross(ns):
    return {"auto": "auto", "on": True, "off": False}[ns.cross_check]


def _meta(ns, extra=()):
    keys = ("kind", "T", "omegaT", "field", "eps_schedule", "cavity_length", "cavity_modes", "position",
            "coupling", "smearing", "separation", "delay", "coupling_kind", "grid")
    out = [("version", __version__), ("command", ns.command)]
    for k in keys:
        if hasattr(ns, k):
            v = getattr(ns, k)
            if isinstance(v, tuple):
                v = ":".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            out.append((k, "default" if v is None else v))
    return out + list(extra)


def cmd_dual(ns):
    spec = SwitchingSpec(Kind(ns.kind), T=ns.T)
    lo, hi, n = ns.grid
    grid = np.linspace(lo, hi, n) * ns.T
    omega = ns.omegaT / ns.T
    dual = dual_switching(spec, omega, grid)
    rows = [SweepRow("dual", (("tau_over_T", float(t / ns.T)),),
                     (("chi", float(c)), ("omega_chi_tilde", float(omega * ct)), ("theta", float(th))))
            for t, c, ct, th in zip(grid, spec(grid), dual.chi_tilde, dual.theta)]
    _emit(format_csv(rows, meta=_meta(ns)), ns.output)
    return EXIT_OK


def _eps(ns):
    return None if ns.eps_schedule is None else tuple(ns.eps_schedule)


def cmd_single(ns):
    spec = SwitchingSpec(Kind(ns.kind), T=ns.T)
    model = _field(ns)
    amp = DetectorConfig(ns.omegaT / ns.T, spec, ns.coupling, _smearing(ns), _position(ns))
    ev = evaluate_lij(amp, amp, model, _cross(ns), _eps(ns))
    evt = evaluate_lij(constant_gap_dual(amp), constant_gap_dual(amp), model, _cross(ns), _eps(ns))
    L, Lt = ev.value.real, evt.value.real
    residual = abs(L - Lt) / L if L > 0 else math.nan
    values = [("L", L), ("L_tilde", Lt), ("residual", residual)]
    for name, e in (("L", ev), ("L_tilde", evt)):
        if e.relative_gap is not None:
            values.append((f"{name}_route_gap", e.relative_gap))
    row = SweepRow("single", (("kind", ns.kind), ("omegaT", ns.omegaT)), tuple(values))
    _emit(format_csv([row], meta=_meta(ns)), ns.output)
    return EXIT_OK


def cmd_harvest(ns):
    spec = SwitchingSpec(Kind(ns.kind), T=ns.T)
    model = _field(ns)
    sm = _smearing(ns)
    om = ns.omegaT / ns.T
    a = DetectorConfig(om, spec, ns.coupling, sm, _position(ns))
    b = DetectorConfig(om, spec.shifted(ns.delay * ns.T), ns.coupling, sm, _position(ns, ns.separation))
    pair = DetectorPair(a, b)
    if ns.coupling_kind == CouplingKind.DERIVATIVE.value:
        pair = pair.dual()
    res = harvest(pair, model, cross_check=_cross(ns), eps_schedule=_eps(ns))
    values = list(res.as_row().items())
    if res.m_detail is not None:
        d = res.m_detail
        values += [("m_by_parts_re", d.by_parts.real), ("m_by_parts_im", d.by_parts.imag),
                   ("m_remnant_re", complex(d.remnant).real), ("m_remnant_im", complex(d.remnant).imag)]
    row = SweepRow("harvest", (("kind", ns.kind), ("omegaT", ns.omegaT), ("d_over_T", ns.separation),
                               ("coupling_kind", ns.coupling_kind)), tuple(values))
    _emit(format_csv([row], meta=_meta(ns)), ns.output)
    return EXIT_OK


def cmd_sweep(ns):
    kw = dict(experiment=ns.experiment, omega_T=ns.omegaT, tau_grid=ns.grid, kind=ns.kind, T=ns.T,
              field=ns.field, cavity_length=ns.cavity_length, cavity_modes=ns.cavity_modes,
              output=None if ns.output == "-" else ns.output)
    if ns.separations is not None:
        kw["separations"] = ns.separations
    spec = SweepSpec(**kw)
    rows = run_experiment(spec, jobs=resolve_jobs(ns.jobs))
    text = write_csv(rows, spec)
    if spec.output is None:
        sys.stdout.write(text)
    if ns.compare is not None:
        report = compare_to_reference(rows, None if ns.compare == "default" else ns.compare)
        print(report.format(), file=sys.stderr)
        return EXIT_OK if report.passed else EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_verify(ns):
    from .acceptance import CRITERIA, run_all

    only = None
    if ns.only is not None:
        only = [int(v) for v in ns.only]
        bad = [n for n in only if n not in CRITERIA]
        if bad:
            raise UsageError(f"unknown criterion {bad[0]}")
    results = run_all(only, echo=lambda line: print(line, flush=True))
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


COMMANDS = {"dual": cmd_dual, "single": cmd_single, "harvest": cmd_harvest, "sweep": cmd_sweep,
            "verify": cmd_verify}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except ConfigurationError as exc:
        print(f"udw: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[ns.command](ns)
    except (UsageError, ConfigurationError, InvalidSpecError) as exc:
        print(f"udw {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SweepAbortedError as exc:
        print(f"udw {ns.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArithmeticError, UDWError, NotImplementedError) as exc:
        print(f"udw {ns.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
