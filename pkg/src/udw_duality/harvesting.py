"""Two static detectors: joint state, non-local term and negativity.

The joint state to second order in the basis (gg, ge, eg, ee), first label
for detector A, is

    [[1 - L_AA - L_BB, 0,      0,    conj(M)],
     [0,               L_BB,   L_AB, 0      ],
     [0,               L_BA,   L_AA, 0      ],
     [M,               0,      0,    0      ]]

with L_BA = conj(L_AB).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from . import _lag, _routes
from .detector import (
    CouplingKind,
    DetectorConfig,
    Evaluation,
    Pointlike,
    _geometry,
    constant_gap_dual,
    evaluate_lij,
)
from .errors import AppendixConsistencyError, InvalidSpecError, NumericalError
from .field import FiniteModeCavity, MinkowskiVacuum
from .switching import Kind, SwitchingSpec

__all__ = [
    "DetectorPair",
    "HarvestResult",
    "MTildeResult",
    "PairResidual",
    "CausalCheck",
    "symmetric_pair",
    "lij",
    "m_term",
    "m_term_derivative",
    "negativity",
    "negativity_bruteforce",
    "partial_transpose_negativity",
    "density_matrix",
    "harvest",
    "duality_residual_pair",
    "causal_check",
    "commutator_remnant",
    "CommutatorRemnant",
]

DISJOINT_FACTOR = 5.0
APPENDIX_RTOL_CAVITY = 1e-6
APPENDIX_RTOL_MINKOWSKI = 1e-4


@dataclass(frozen=True)
class DetectorPair:
    det_a: DetectorConfig
    det_b: DetectorConfig

    def __post_init__(self):
        a, b = self.det_a, self.det_b
        if a.coupling_kind is not b.coupling_kind:
            raise InvalidSpecError("both detectors must use the same coupling kind")
        d = self.separation
        if isinstance(a.smearing, Pointlike) and isinstance(b.smearing, Pointlike):
            if d <= 0:
                raise InvalidSpecError("pointlike detectors must sit at distinct positions")
        elif d <= DISJOINT_FACTOR * (a.smearing.extent + b.smearing.extent):
            raise InvalidSpecError("smearing profiles overlap: need |x_A - x_B| > 5 (sigma_A + sigma_B)")

    @property
    def separation(self):
        return math.dist(self.det_a.position, self.det_b.position)

    @property
    def coupling_kind(self):
        return self.det_a.coupling_kind

    def detector(self, label):
        if label in ("A", "a", 0):
            return self.det_a
        if label in ("B", "b", 1):
            return self.det_b
        raise InvalidSpecError(f"unknown detector label {label!r}")

    def swapped(self):
        return DetectorPair(self.det_b, self.det_a)

    def dual(self):
        """Constant-gap derivative partner (switchings chi_j / Omega_j)."""
        return DetectorPair(constant_gap_dual(self.det_a), constant_gap_dual(self.det_b))


def symmetric_pair(spec: SwitchingSpec, Omega: float, separation: float, *, coupling=1.0,
                   smearing=None, delay=0.0, kind=CouplingKind.AMPLITUDE) -> DetectorPair:
    """Identical detectors at the origin and at (separation, 0, 0); B switched ``delay`` later."""
    smearing = smearing or Pointlike()
    a = DetectorConfig(Omega, spec, coupling, smearing, (0.0, 0.0, 0.0), kind)
    b = DetectorConfig(Omega, spec.shifted(delay), coupling, smearing, (separation, 0.0, 0.0), kind)
    return DetectorPair(a, b)


@dataclass(frozen=True)
class CausalCheck:
    spacelike: bool
    margin: float
    truncation_error: float


def _causal_support(det):
    sw = det.switching if not det.is_exact_dual else det.switching.spec
    if sw is None:
        return float(det.switching.grid[0]), float(det.switching.grid[-1]), 0.0
    lo, hi = sw.causal_support()
    trunc = float(erfc(6 / math.sqrt(2))) if sw.kind is Kind.GAUSSIAN else 0.0
    if det.is_exact_dual:
        # the exact dual never switches off
        hi = math.inf
    return lo, hi, trunc


def causal_check(pair: DetectorPair) -> CausalCheck:
    """Whether the interaction regions cannot signal to each other.

    Gaussian switchings are cut at 6 T; ``truncation_error`` is the switching
    weight outside that window.
    """
    la, ha, ea = _causal_support(pair.det_a)
    lb, hb, eb = _causal_support(pair.det_b)
    reach = max(ha - lb, hb - la)
    extent = DISJOINT_FACTOR * (pair.det_a.smearing.extent + pair.det_b.smearing.extent)
    margin = pair.separation - extent - reach
    return CausalCheck(bool(margin > 0), float(margin), max(ea, eb))


def lij(pair: DetectorPair, i, j, field, *, cross_check="auto") -> complex:
    """L_ij with detector i at the unprimed and j at the primed event."""
    return evaluate_lij(pair.detector(i), pair.detector(j), field, cross_check).value


def _ordered_setup(pair: DetectorPair, field, eps_schedule=None):
    a, b = pair.det_a, pair.det_b
    if a.is_exact_dual or b.is_exact_dual:
        raise NotImplementedError(
            "the non-local term for exact dual switchings diverges: the dual profile never switches off")
    sa, sb = a.slot(), b.slot()
    corr = _lag.correlation(_routes.lag_profile(sa, True), _routes.lag_profile(sb, True))
    if corr is None:
        raise NotImplementedError("the non-local term needs two Gaussian or two compact analytic switchings")
    geo = _geometry(a, b, field)
    T_ref = min(sa.timescale, sb.timescale)
    return corr, geo, T_ref, eps_schedule or _routes.default_schedule(sa, sb)


def _adaptive(corr, field, order, geo, T_ref, schedule, cderiv=0):
    """Ordered lag integral, repeated with the precision implied by its own size."""
    target = None
    for _ in range(4):
        try:
            tr = _routes.time_route(corr, field, order, ordered=True, cderiv=cderiv, target=target,
                                    eps_schedule=schedule, T_ref=T_ref, force=True, **geo)
            break
        except NumericalError as exc:
            # the value is far below the integrand scale: ask for more digits
            target = 1e-6 * (exc.estimate if target is None else target)
    else:
        raise NumericalError("ordered lag integral failed at every precision tried", target)
    for _ in range(3):
        target = abs(tr.value)
        if target == 0:
            return tr.value
        tr2 = _routes.time_route(corr, field, order, ordered=True, cderiv=cderiv, target=target,
                                 eps_schedule=schedule, T_ref=T_ref, force=True, **geo)
        if abs(tr2.value - tr.value) <= 1e-9 * abs(tr2.value):
            return tr2.value
        tr = tr2
    raise NumericalError("ordered lag integral did not stabilise under increasing precision", abs(tr.value))


def m_term(pair: DetectorPair, field, *, eps_schedule=None) -> complex:
    """M = -lambda_A lambda_B int int exp(i(Omega_A t + Omega_B t')) chi_A chi_B G_F."""
    if pair.coupling_kind is not CouplingKind.AMPLITUDE:
        raise InvalidSpecError("m_term expects amplitude-coupled detectors")
    if pair.det_a.coupling == 0 or pair.det_b.coupling == 0:
        return 0j
    corr, geo, T_ref, schedule = _ordered_setup(pair, field, eps_schedule)
    return -_adaptive(corr, field, 0, geo, T_ref, schedule)


@dataclass(frozen=True)
class MTildeResult:
    """Derivative-coupled non-local term.

    ``direct`` integrates the derivative Feynman kernel; ``by_parts`` moves
    both derivatives onto the switching profiles. They differ by
    ``remnant``, the contact term -2 C(0) dG/ds(0+) fed by the equal-time
    commutator, which vanishes when the field is microcausal.
    """

    value: complex
    direct: complex
    by_parts: complex
    remnant: complex


def m_term_derivative(pair: DetectorPair, field, *, rtol=None, eps_schedule=None) -> MTildeResult:
    if pair.coupling_kind is not CouplingKind.DERIVATIVE:
        raise InvalidSpecError("m_term_derivative expects derivative-coupled detectors")
    if pair.det_a.coupling == 0 or pair.det_b.coupling == 0:
        return MTildeResult(0j, 0j, 0j, 0j)
    corr, geo, T_ref, schedule = _ordered_setup(pair, field, eps_schedule)
    direct = -_adaptive(corr, field, 2, geo, T_ref, schedule)
    by_parts = _adaptive(corr, field, 0, geo, T_ref, schedule, cderiv=2)
    g1 = -1j * _routes.kernel_at_zero(field, 1, eps_schedule=schedule, T_ref=T_ref, **geo)
    with_c0 = corr(np.array([0.0]))[0]
    remnant = -2 * with_c0 * g1
    if rtol is None:
        rtol = APPENDIX_RTOL_CAVITY if isinstance(field, FiniteModeCavity) else APPENDIX_RTOL_MINKOWSKI
    scale = max(abs(direct), abs(by_parts))
    if abs(direct - by_parts - remnant) > rtol * scale:
        raise AppendixConsistencyError(
            "direct and integrated-by-parts derivative terms disagree beyond the contact term",
            direct, by_parts, remnant)
    if isinstance(field, MinkowskiVacuum) and abs(direct - by_parts) > rtol * scale:
        raise AppendixConsistencyError(
            "microcausal field but the direct and integrated-by-parts terms differ", direct, by_parts, remnant)
    return MTildeResult(direct, direct, by_parts, remnant)


def negativity(l_aa: float, l_bb: float, m: complex):
    """Leading-order (v_score, negativity) of the two-detector state."""
    if not (l_aa >= 0 and l_bb >= 0):
        raise InvalidSpecError("excitation probabilities must be non-negative")
    v = math.hypot(abs(m), 0.5 * (l_aa - l_bb)) - 0.5 * (l_aa + l_bb)
    return v, max(0.0, v)


def density_matrix(l_aa, l_bb, l_ab, m):
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1 - l_aa - l_bb
    rho[1, 1] = l_bb
    rho[2, 2] = l_aa
    rho[1, 2] = l_ab
    rho[2, 1] = np.conj(l_ab)
    rho[3, 0] = m
    rho[0, 3] = np.conj(m)
    return rho


def partial_transpose_negativity(rho):
    """Sum of |negative eigenvalues| of the partial transpose on the second qubit."""
    pt = np.asarray(rho).reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(-ev[ev < 0].sum())


def negativity_bruteforce(l_aa, l_bb, m, l_ab=0.0):
    return partial_transpose_negativity(density_matrix(l_aa, l_bb, l_ab, m))


@dataclass(frozen=True)
class HarvestResult:
    l_aa: float
    l_bb: float
    l_ab: complex
    m: complex
    v_score: float
    negativity: float
    rho_4x4: np.ndarray
    kind: CouplingKind = CouplingKind.AMPLITUDE
    spacelike: bool = False
    m_detail: MTildeResult | None = None
    evaluations: dict = field(default_factory=dict, repr=False)

    def as_row(self):
        return {
            "l_aa": self.l_aa, "l_bb": self.l_bb,
            "l_ab_re": self.l_ab.real, "l_ab_im": self.l_ab.imag,
            "m_re": self.m.real, "m_im": self.m.imag,
            "v_score": self.v_score, "negativity": self.negativity,
            "spacelike": int(self.spacelike),
        }


def _real_probability(ev: Evaluation):
    v = ev.value
    if abs(v.imag) > 1e-10 * abs(v.real) + 1e-300:
        raise NumericalError("diagonal entry has an imaginary part", abs(v.imag))
    return max(v.real, 0.0)


def harvest(pair: DetectorPair, field, kind=None, *, cross_check="auto", eps_schedule=None) -> HarvestResult:
    """Assemble L_ij, M (or their derivative-coupling versions) and the negativity."""
    kind = pair.coupling_kind if kind is None else CouplingKind(kind)
    if kind is not pair.coupling_kind:
        raise InvalidSpecError(f"pair is {pair.coupling_kind.value}-coupled, not {kind.value}")
    a, b = pair.det_a, pair.det_b
    evs = {
        "aa": evaluate_lij(a, a, field, cross_check, eps_schedule),
        "bb": evaluate_lij(b, b, field, cross_check, eps_schedule),
        "ab": evaluate_lij(a, b, field, cross_check, eps_schedule),
    }
    l_aa, l_bb = _real_probability(evs["aa"]), _real_probability(evs["bb"])
    l_ab = evs["ab"].value
    detail = None
    if kind is CouplingKind.AMPLITUDE:
        m = m_term(pair, field, eps_schedule=eps_schedule)
    else:
        detail = m_term_derivative(pair, field, eps_schedule=eps_schedule)
        m = detail.value
    v, n = negativity(l_aa, l_bb, m)
    rho = density_matrix(l_aa, l_bb, l_ab, m)
    return HarvestResult(l_aa, l_bb, complex(l_ab), complex(m), v, n, rho, kind,
                         causal_check(pair).spacelike, detail, evs)


@dataclass(frozen=True)
class PairResidual:
    dL_aa: float
    dL_bb: float
    dM: float
    dNegativity: float
    amplitude: HarvestResult = field(repr=False, default=None)
    derivative: HarvestResult = field(repr=False, default=None)


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / (abs(a) if a != 0 else scale)


def duality_residual_pair(pair: DetectorPair, field, *, cross_check=False, eps_schedule=None) -> PairResidual:
    """Relative differences between an amplitude pair and its constant-gap derivative dual."""
    if pair.coupling_kind is not CouplingKind.AMPLITUDE:
        raise InvalidSpecError("pass the amplitude-coupled pair; its dual is built here")
    amp = harvest(pair, field, cross_check=cross_check, eps_schedule=eps_schedule)
    der = harvest(pair.dual(), field, cross_check=cross_check, eps_schedule=eps_schedule)
    return PairResidual(_rel(amp.l_aa, der.l_aa), _rel(amp.l_bb, der.l_bb), _rel(amp.m, der.m),
                        _rel(amp.negativity, der.negativity), amp, der)


def with_coupling(pair: DetectorPair, coupling: float) -> DetectorPair:
    return DetectorPair(replace(pair.det_a, coupling=coupling), replace(pair.det_b, coupling=coupling))


@dataclass(frozen=True)
class CommutatorRemnant:
    """Equal-time commutator pieces at separation d after removing the regulator.

    ``field_field`` is |Im W| at equal times; ``field_momentum`` is
    |dW/ds(0+)|, which sets the contact term between the two forms of the
    derivative non-local term.
    """

    field_field: float
    field_momentum: float


def commutator_remnant(field, d=None, *, xa=None, xb=None, eps_schedule=_routes.EPS_SCHEDULE,
                       T_ref=1.0) -> CommutatorRemnant:
    if isinstance(field, FiniteModeCavity):
        geo = dict(xa=xa, xb=xb)
    else:
        if d is None or not d > 0:
            raise InvalidSpecError("separation must be positive")
        geo = dict(d=d, sigma2=0.0)
    w0 = _routes.kernel_at_zero(field, 0, eps_schedule=eps_schedule, T_ref=T_ref, **geo)
    w1 = _routes.kernel_at_zero(field, 1, eps_schedule=eps_schedule, T_ref=T_ref, **geo)
    return CommutatorRemnant(abs(w0.imag), abs(w1))
