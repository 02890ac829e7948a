"""Two independent evaluation routes for second-order detector integrals.

Spectral route (double precision): one integral over field frequencies of
products of switching transforms. Time-domain route (mpmath): the lag
integral of a closed-form correlation against the position-space kernel,
with the i*epsilon regulator removed by Richardson extrapolation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import _lag
from .errors import InvalidSpecError, NumericalError
from .field import FiniteModeCavity, MinkowskiVacuum, lag_kernel, mp_lag_kernel
from .switching import DualSwitching, SwitchingSpec, fourier_transform, lower_incomplete_fourier

log = logging.getLogger(__name__)

EPS_SCHEDULE = (1e-2, 1e-3, 1e-4)
# compact switchings have power-law spectra, so epsilon^2 log(epsilon) terms
# spoil the quadratic fit unless epsilon is pushed further down
COMPACT_EPS_SCHEDULE = (1e-4, 1e-5, 1e-6)
MAX_DPS = 160
# rough cap on (pieces x dps) before the time route is skipped in "auto" mode
MAX_COST = 60000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class SlotInfo:
    """What a detector contributes to one slot of a double integral."""

    kind: str          # "spec" or "dual"
    spec: SwitchingSpec | None
    dual: DualSwitching | None
    gap: float
    factor: complex    # lambda times the constant phase
    timescale: float
    center: float


@dataclass
class TimeRoute:
    value: complex
    error: float
    dps: int
    per_epsilon: tuple = ()


# -- spectral route -------------------------------------------------------------

def dual_fourier(dual: DualSwitching, omegas):
    """F(w) = int f(t) exp(-i w t) dt for the dual profile f = chi_tilde exp(-i theta), w > 0.

    The constant late-time value of f is integrated with an Abel factor.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if np.any(omegas <= 0):
        raise ValueError("dual transforms are only defined for positive frequencies")
    if dual.spec is not None:
        a, b = dual.spec.support()
        T = dual.spec.T
        if dual.spec.kind.value == "gaussian":
            # f(t) - f(inf) ~ chi(t) / Omega must be negligible beyond b
            a, b = dual.spec.center - 12 * T, dual.spec.center + 12 * T
    else:
        a, b = float(dual.grid[0]), float(dual.grid[-1])
        T = b - a
    top = dual.gap + omegas.max()
    h = min(T / 8, math.pi / (2 * top))
    n = max(1, math.ceil((b - a) / h))
    edges = np.linspace(a, b, n + 1)
    half = 0.5 * np.diff(edges)
    nodes = (edges[:-1, None] + half[:, None] * (1 + _GL_NODES[None, :])).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    fw = np.asarray(dual.profile(nodes)) * weights
    f_end = complex(dual.profile(np.array([b]))[0])
    out = np.empty(omegas.shape, dtype=complex)
    chunk = max(1, 4_000_000 // nodes.size)
    for i in range(0, omegas.size, chunk):
        w = omegas[i:i + chunk]
        out[i:i + chunk] = np.exp(-1j * np.outer(w, nodes)) @ fw + f_end * np.exp(-1j * w * b) / (1j * w)
    return out


def slot_transform(slot: SlotInfo, omegas):
    """Transform of the unprimed-slot profile at field frequency ``omegas``."""
    if slot.kind == "dual":
        return slot.factor * dual_fourier(slot.dual, omegas)
    return slot.factor * fourier_transform(slot.spec, slot.gap + np.asarray(omegas, dtype=float))


def _block_integral(g, lo, hi, h):
    n = max(1, math.ceil((hi - lo) / h))
    edges = np.linspace(lo, hi, n + 1)
    total = 0j
    step = 10_000
    for i in range(0, n, step):
        e = edges[i:i + step + 1]
        half = 0.5 * np.diff(e)
        nodes = (e[:-1, None] + half[:, None] * (1 + _GL_NODES[None, :])).ravel()
        weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        total += complex(np.sum(g(nodes) * weights))
    return total


def frequency_integral(g, first_width, osc_scale, cap, rtol=1e-11):
    """int_0^inf g(w) dw over doubling blocks [W, 2W] with a geometric tail estimate.

    The block ratio r gives the remainder blk * r / (1 - r); integration stops
    once that tail-corrected estimate is stable. Blocks that stop shrinking
    signal an ultraviolet divergence.
    """
    h0 = min(first_width / 8, 1.0 / osc_scale)
    total = _block_integral(g, 0.0, first_width, h0)
    lo, prev, prev_est = first_width, None, None
    while True:
        hi = 2 * lo
        h = min(h0 * max(1.0, lo / first_width) ** 0.5, 1.0 / osc_scale)
        blk = _block_integral(g, lo, hi, h)
        total += blk
        lo = hi
        if blk == 0 and (prev is None or prev == 0):
            return total
        est, r = None, None
        if prev not in (None, 0):
            r = abs(blk) / abs(prev)
            if r < 0.9:
                est = total + blk * r / (1 - r)
                if abs(est - total) <= 1e-14 * abs(total):
                    return est
                if prev_est is not None and abs(est - prev_est) <= rtol * abs(est):
                    return est
        if lo >= cap:
            if r is None or r >= 0.9:
                raise NumericalError("frequency integral does not converge (ultraviolet divergence)", abs(blk))
            if est is not None and prev_est is not None and abs(est - prev_est) <= 1e-7 * abs(est):
                return est
            raise NumericalError("frequency integral converges too slowly",
                                 None if est is None else abs(est - total))
        prev, prev_est = blk, est


def spectral_pair(si: SlotInfo, sj: SlotInfo, model, order, d=0.0, sigma2=0.0, xa=None, xb=None):
    """sum/int rho(w) w^order F_i(w) conj(F_j(w)): the epsilon -> 0 value."""
    if isinstance(model, FiniteModeCavity):
        w = model.frequencies
        c = model.mode_weights(xa, xb)
        return complex(np.sum(c * w**order * slot_transform(si, w) * np.conj(slot_transform(sj, w))))

    def g(w):
        rho = np.sin(w * d) / d if d > 0 else w
        return (rho / (4 * math.pi**2) * np.exp(-sigma2 * w * w) * w**order
                * slot_transform(si, w) * np.conj(slot_transform(sj, w)))

    tmax = max(si.timescale, sj.timescale)
    gap = max(si.gap, sj.gap)
    first = 1.0 / (tmax * (1 + gap * tmax))
    osc = d + abs(si.center - sj.center) + si.timescale + sj.timescale
    cap = 2e4 * (1 + gap * tmax) / tmax
    return frequency_integral(g, first, osc, cap)


# -- time-domain route ------------------------------------------------------------

def lag_profile(slot: SlotInfo, conjugate: bool):
    """Profile for the lag reduction, or None when no closed form exists."""
    if slot.kind != "spec":
        return None
    if conjugate:
        return _lag.modulated(slot.spec, slot.gap, np.conj(slot.factor))
    return _lag.modulated(slot.spec, -slot.gap, slot.factor)


def _peak_abs(corr, lo, hi):
    if isinstance(corr, _lag.GaussianCorrelation):
        return math.exp(corr.log_peak())
    s = np.linspace(lo, hi, 2001)
    return float(np.max(np.abs(corr(s))))


def plan_time_route(corr, model, order, d, sigma2, target, eps_min, ordered):
    """Integration range, singular points and working precision.

    Returns None when the required precision or cost is out of reach.
    """
    tau = corr.timescale
    kf = float(model.frequencies.max()) if isinstance(model, FiniteModeCavity) else 0.0
    if isinstance(corr, _lag.GaussianCorrelation):
        k_typ = _kernel_scale(model, order, d, sigma2, tau)
        peak = math.exp(corr.log_peak())
        ref = abs(target) if target else peak * k_typ * tau
        if ref == 0:
            return None
        delta = math.log(max(peak * k_typ * tau / (1e-13 * ref), 10.0))
        lo, hi = corr.window(delta)
    else:
        lo, hi = corr.support()
        peak = _peak_abs(corr, lo, hi)
        k_typ = _kernel_scale(model, order, d, sigma2, tau)
        ref = abs(target) if target else peak * k_typ * tau
        if ref == 0:
            return None
    singular = []
    if isinstance(model, MinkowskiVacuum):
        singular = sorted({-d, d} | ({0.0} if d == 0 else set()))
    if ordered:
        singular = sorted(set(singular) | {0.0})
    lost = math.log10(max(peak * k_typ * (hi - lo) / ref, 1.0))
    if isinstance(model, MinkowskiVacuum) and sigma2 == 0:
        lost += (order + 1) * math.log10(max(tau / eps_min, 1.0))
    dps = int(20 + lost)
    max_len = min(0.5 * tau, math.pi / max(corr.osc_freq + kf, 1e-300))
    refine = eps_min if sigma2 == 0 else math.sqrt(sigma2) / 10
    pts = _lag.pieces(lo, hi, singular, refine, max_len, keep=corr.breakpoints())
    return dict(points=pts, dps=dps, cost=len(pts) * dps, range=(lo, hi), scale=max(peak * k_typ, 1e-300))


def _kernel_scale(model, order, d, sigma2, tau):
    """Typical |K| at a distance ``tau`` from the light cone."""
    if isinstance(model, FiniteModeCavity):
        w = model.frequencies
        return float(np.sum(w**order / (w * model.length)))
    eps = 0.0 if sigma2 > 0 else model.epsilon
    return abs(complex(lag_kernel(model, d, sigma2, order, epsilon=eps)(d + tau)))


def time_route(corr, model, order, *, d=0.0, sigma2=0.0, xa=None, xb=None, target=None,
               cderiv=0, ordered=False, eps_schedule=EPS_SCHEDULE, T_ref=1.0, force=False):
    """int C^(cderiv)(s) K(s) ds (``ordered`` uses K(|s|)) in mpmath.

    Minkowski pointlike kernels are evaluated on the epsilon schedule (in
    units of ``T_ref``) and extrapolated; smeared or cavity kernels need no
    regulator. Returns None if the plan exceeds the precision or cost budget
    and ``force`` is False.
    """
    pointlike_mink = isinstance(model, MinkowskiVacuum) and sigma2 == 0
    eps_list = [e * T_ref for e in eps_schedule] if pointlike_mink else [0.0]
    plan = plan_time_route(corr, model, order, d, sigma2, target, min(e for e in eps_list if e > 0)
                           if pointlike_mink else 1.0, ordered)
    if plan is None:
        return None
    if not force and (plan["dps"] > MAX_DPS or plan["cost"] > MAX_COST):
        log.info("time-domain route skipped: dps=%d cost=%d", plan["dps"], plan["cost"])
        return None
    dps = min(plan["dps"], 400)
    values, err = [], 0.0
    for eps in eps_list:
        with mp.workdps(dps):
            kern = mp_lag_kernel(model, d, sigma2, order, epsilon=eps, xa=xa, xb=xb)
            if ordered:
                f = lambda s: corr.mp_eval(s, cderiv) * kern(abs(s))  # noqa: E731
            else:
                f = lambda s: corr.mp_eval(s, cderiv) * kern(s)  # noqa: E731
            v, e = _lag.mp_lag_integral(f, plan["points"], dps, plan["scale"])
        values.append(v)
        err = max(err, e)
    value = _lag.richardson(eps_list, values) if len(values) > 1 else values[0]
    scale = abs(target) if target else abs(value)
    if not math.isfinite(abs(value)) or err > 1e-6 * max(scale, 1e-300):
        raise NumericalError(f"time-domain quadrature error {err:.3g} exceeds tolerance", err)
    return TimeRoute(value, err, dps, tuple(values))


def kernel_at_zero(model, order, d=0.0, sigma2=0.0, xa=None, xb=None, eps_schedule=EPS_SCHEDULE, T_ref=1.0):
    """K_order(0+), extrapolated to epsilon -> 0 for pointlike Minkowski kernels."""
    if isinstance(model, FiniteModeCavity):
        return complex(lag_kernel(model, order=order, xa=xa, xb=xb)(0.0))
    if sigma2 > 0:
        return complex(lag_kernel(model, d, sigma2, order, epsilon=0.0)(0.0))
    eps_list = [e * T_ref for e in eps_schedule]
    vals = [complex(lag_kernel(model, d, 0.0, order, epsilon=e)(0.0)) for e in eps_list]
    return _lag.richardson(eps_list, vals)


def default_schedule(*slots):
    compact = any(s.kind != "spec" or s.spec.is_compact for s in slots)
    return COMPACT_EPS_SCHEDULE if compact else EPS_SCHEDULE


def check_slot(slot: SlotInfo):
    if slot.kind == "spec" and not isinstance(slot.spec, SwitchingSpec):
        raise InvalidSpecError("expected a SwitchingSpec")
    return slot


def boundary_value(slot: SlotInfo):
    """|f(+inf)| for exact duals (zero otherwise)."""
    if slot.kind != "dual":
        return 0.0
    if slot.dual.spec is not None:
        return abs(lower_incomplete_fourier(slot.dual.spec, slot.gap, np.inf))
    return slot.dual.boundary_value
