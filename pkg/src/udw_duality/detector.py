"""Single static Unruh-DeWitt detectors at second order in the coupling.

An amplitude-coupled detector couples lambda chi(t) mu(t) to the field; a
derivative-coupled detector couples lambda chi_tilde(t) mu(t) to the time
derivative of the field, with the monopole phase exp(i theta(t)). A
constant-gap derivative detector uses theta(t) = Omega t + phase and the
switching it is given (callers pass chi / Omega for the large-gap dual).
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _lag, _routes
from .errors import (
    CrossValidationError,
    DegenerateProbabilityError,
    InvalidSpecError,
    PerturbativeValidityError,
)
from .field import FiniteModeCavity, MinkowskiVacuum
from .switching import DualSwitching, SwitchingSpec

__all__ = [
    "Pointlike",
    "GaussianBall",
    "CouplingKind",
    "DetectorConfig",
    "DetectorState",
    "Evaluation",
    "PerturbativeWarning",
    "excitation_probability",
    "excitation_probability_derivative",
    "evaluate_lij",
    "final_state",
    "duality_residual_single",
    "constant_gap_dual",
]

log = logging.getLogger(__name__)

ROUTE_RTOL = 1e-6
ROUTE_FAIL = 1e-4
DEFAULT_PHASE = -0.5 * math.pi


class PerturbativeWarning(UserWarning):
    """Excitation probability large enough that fourth-order terms matter."""


@dataclass(frozen=True)
class Pointlike:
    @property
    def sigma2(self):
        return 0.0

    @property
    def extent(self):
        return 0.0


@dataclass(frozen=True)
class GaussianBall:
    """Normalised Gaussian smearing exp(-r^2 / (2 width^2)) / (2 pi width^2)^(3/2)."""

    width: float

    def __post_init__(self):
        if not (math.isfinite(self.width) and self.width > 0):
            raise InvalidSpecError("smearing width must be positive")

    @property
    def sigma2(self):
        return self.width**2

    @property
    def extent(self):
        return self.width

    def form_factor(self, k):
        return np.exp(-0.5 * self.width**2 * np.asarray(k, dtype=float) ** 2)


class CouplingKind(str, enum.Enum):
    AMPLITUDE = "amplitude"
    DERIVATIVE = "derivative"


@dataclass(frozen=True)
class DetectorConfig:
    """Static detector with gap ``gap`` at ``position``.

    ``phase`` is the constant c in theta(t) = gap * t + c for derivative
    detectors with a plain switching; it drops out of every probability and,
    with the default -pi/2, makes the pair term match amplitude coupling.
    """

    gap: float
    switching: SwitchingSpec | DualSwitching
    coupling: float = 1.0
    smearing: Pointlike | GaussianBall = field(default_factory=Pointlike)
    position: tuple = (0.0, 0.0, 0.0)
    coupling_kind: CouplingKind = CouplingKind.AMPLITUDE
    phase: float = DEFAULT_PHASE

    def __post_init__(self):
        object.__setattr__(self, "coupling_kind", CouplingKind(self.coupling_kind))
        pos = tuple(float(v) for v in np.ravel(self.position))
        if len(pos) == 1:
            pos = (pos[0], 0.0, 0.0)
        if len(pos) != 3 or not all(map(math.isfinite, pos)):
            raise InvalidSpecError("position must be a finite 3-vector")
        object.__setattr__(self, "position", pos)
        if not (math.isfinite(self.gap) and self.gap > 0):
            raise InvalidSpecError(f"gap must be positive, got {self.gap}")
        if not math.isfinite(self.coupling):
            raise InvalidSpecError("coupling must be finite")
        if isinstance(self.switching, DualSwitching):
            if self.coupling_kind is not CouplingKind.DERIVATIVE:
                raise InvalidSpecError("a dual switching drives a derivative-coupled detector")
            if not math.isclose(self.switching.gap, self.gap, rel_tol=1e-12):
                raise InvalidSpecError("dual switching was built for a different gap")
        elif not isinstance(self.switching, SwitchingSpec):
            raise InvalidSpecError("switching must be a SwitchingSpec or DualSwitching")

    @property
    def is_exact_dual(self):
        return isinstance(self.switching, DualSwitching)

    def gap_profile(self, tau=None):
        """Instantaneous gap d theta / d tau (on the dual grid, or at ``tau``)."""
        if self.is_exact_dual:
            g = self.switching.gap_profile()
            return g if tau is None else np.interp(tau, self.switching.grid, g)
        shape = () if tau is None else np.shape(tau)
        return np.full(shape, self.gap)

    def slot(self):
        sw = self.switching
        if self.is_exact_dual:
            spec = sw.spec
            timescale = spec.T if spec is not None else float(sw.grid[-1] - sw.grid[0])
            center = spec.center if spec is not None else float(np.mean(sw.grid))
            return _routes.SlotInfo("dual", None, sw, self.gap, complex(self.coupling), timescale, center)
        factor = complex(self.coupling)
        if self.coupling_kind is CouplingKind.DERIVATIVE:
            factor *= np.exp(-1j * self.phase)
        if sw.kind.value == "tabulated":
            lo, hi = sw.support()
            return _routes.SlotInfo("spec", sw, None, self.gap, factor, hi - lo, 0.5 * (lo + hi))
        return _routes.SlotInfo("spec", sw, None, self.gap, factor, sw.T, sw.center)

    @property
    def kernel_order(self):
        return 2 if self.coupling_kind is CouplingKind.DERIVATIVE else 0


def constant_gap_dual(det: DetectorConfig) -> DetectorConfig:
    """Derivative-coupled partner of an amplitude detector: switching chi / Omega."""
    if det.coupling_kind is not CouplingKind.AMPLITUDE or det.is_exact_dual:
        raise InvalidSpecError("expected an amplitude-coupled detector")
    return replace(det, switching=det.switching.scaled(1.0 / det.gap), coupling_kind=CouplingKind.DERIVATIVE)


@dataclass(frozen=True)
class DetectorState:
    p_excited: float
    matrix: np.ndarray


@dataclass(frozen=True)
class Evaluation:
    """Both routes of a second-order entry. ``time_domain`` is None when skipped."""

    value: complex
    spectral: complex
    time_domain: complex | None
    relative_gap: float | None


def _geometry(di: DetectorConfig, dj: DetectorConfig, model):
    if isinstance(model, FiniteModeCavity):
        if not (isinstance(di.smearing, Pointlike) and isinstance(dj.smearing, Pointlike)):
            raise InvalidSpecError("the cavity oracle supports pointlike detectors only")
        return dict(xa=di.position[0], xb=dj.position[0])
    if not isinstance(model, MinkowskiVacuum):
        raise InvalidSpecError(f"unsupported field model {type(model).__name__}")
    d = math.dist(di.position, dj.position)
    return dict(d=d, sigma2=0.5 * (di.smearing.sigma2 + dj.smearing.sigma2))


def _check_uv(di, dj, model, order):
    """Pointlike derivative coupling needs switching transforms decaying faster than 1/k^2."""
    if order != 2 or not isinstance(model, MinkowskiVacuum):
        return
    if di.smearing.sigma2 + dj.smearing.sigma2 > 0:
        return
    for det in (di, dj):
        sw = det.switching if not det.is_exact_dual else det.switching.spec
        if sw is not None and sw.kind.value in ("compact_cosine", "tabulated"):
            raise InvalidSpecError(
                f"pointlike derivative coupling with {sw.kind.value} switching is ultraviolet divergent; "
                "use GaussianBall smearing")


def evaluate_lij(di: DetectorConfig, dj: DetectorConfig, model, cross_check="auto",
                 eps_schedule=None) -> Evaluation:
    """lambda_i lambda_j int int p_i(t) conj(p_j(t')) K(t - t') by both routes.

    ``cross_check``: True forces the time-domain route, False skips it,
    "auto" runs it when a closed-form correlation exists and the precision
    budget allows.
    """
    if di.coupling_kind is not dj.coupling_kind:
        raise InvalidSpecError("both detectors must share the coupling kind")
    order = di.kernel_order
    _check_uv(di, dj, model, order)
    geo = _geometry(di, dj, model)
    si, sj = di.slot(), dj.slot()
    if di.coupling == 0 or dj.coupling == 0:
        return Evaluation(0j, 0j, 0j, 0.0)
    spectral = _routes.spectral_pair(si, sj, model, order, **geo)
    time_value = None
    if cross_check:
        p, q = _routes.lag_profile(si, False), _routes.lag_profile(sj, True)
        corr = _lag.correlation(p, q) if p is not None and q is not None else None
        if corr is not None:
            T_ref = min(si.timescale, sj.timescale)
            if eps_schedule is None:
                eps_schedule = _routes.default_schedule(si, sj)
            tr = _routes.time_route(corr, model, order, target=spectral, eps_schedule=eps_schedule,
                                    T_ref=T_ref, force=cross_check is True, **geo)
            time_value = None if tr is None else tr.value
        elif cross_check is True:
            raise InvalidSpecError("no closed-form correlation for this switching pair")
    rel = None
    if time_value is not None:
        rel = abs(time_value - spectral) / max(abs(spectral), 1e-300)
        if rel > ROUTE_FAIL:
            raise CrossValidationError(
                f"spectral and time-domain routes disagree (relative {rel:.3g})", spectral, time_value)
        if rel > ROUTE_RTOL:
            log.warning("routes agree only to %.3g relative", rel)
    return Evaluation(spectral, spectral, time_value, rel)


def _probability(det, model, cross_check, eps_schedule):
    ev = evaluate_lij(det, det, model, cross_check, eps_schedule)
    value = ev.value
    if abs(value.imag) > 1e-10 * abs(value.real) + 1e-300:
        raise CrossValidationError("excitation probability has an imaginary part", value, None)
    p = value.real
    if p < 0:
        if p < -1e-12 * max(abs(p), 1e-300) - 1e-300:
            raise CrossValidationError("negative excitation probability", p, None)
        p = 0.0
    if p > 0.1:
        warnings.warn(f"excitation probability {p:.3g} exceeds 0.1; fourth-order terms are not negligible",
                      PerturbativeWarning, stacklevel=3)
    return p


def excitation_probability(det: DetectorConfig, field, *, cross_check="auto",
                           eps_schedule=None) -> float:
    """Leading-order excitation probability of an amplitude-coupled detector."""
    if det.coupling_kind is not CouplingKind.AMPLITUDE:
        raise InvalidSpecError("excitation_probability expects an amplitude-coupled detector")
    return _probability(det, field, cross_check, eps_schedule)


def excitation_probability_derivative(det: DetectorConfig, field, *, cross_check="auto",
                                      eps_schedule=None) -> float:
    """Leading-order excitation probability of a derivative-coupled detector."""
    if det.coupling_kind is not CouplingKind.DERIVATIVE:
        raise InvalidSpecError("excitation_probability_derivative expects a derivative-coupled detector")
    return _probability(det, field, cross_check, eps_schedule)


def final_state(p: float) -> DetectorState:
    """Reduced detector state diag(1 - p, p) in the (ground, excited) basis."""
    if not (-1e-10 <= p <= 1 + 1e-10) or not math.isfinite(p):
        raise PerturbativeValidityError(f"probability {p} is outside [0, 1]")
    p = min(max(float(p), 0.0), 1.0)
    return DetectorState(p, np.diag([1.0 - p, p]))


def duality_residual_single(spec: SwitchingSpec, Omega: float, field, *, coupling=1.0,
                            smearing=None, position=(0.0, 0.0, 0.0), cross_check=False) -> float:
    """|L - L_tilde| / L for the amplitude detector (chi, Omega) and the
    constant-gap derivative detector (chi / Omega, Omega)."""
    if not Omega > 0:
        raise InvalidSpecError("Omega must be positive")
    amp = DetectorConfig(Omega, spec, coupling, smearing or Pointlike(), position)
    L = excitation_probability(amp, field, cross_check=cross_check)
    if L < 1e-300:
        raise DegenerateProbabilityError(f"excitation probability {L:.3g} is too small to compare")
    Lt = excitation_probability_derivative(constant_gap_dual(amp), field, cross_check=cross_check)
    return abs(L - Lt) / L
