"""Lag reduction of double time integrals for static detectors.

For profiles p, q and a kernel depending only on s = t - t',

    int int p(t) q(t') K(t - t') dt dt' = int C(s) K(s) ds,   C(s) = int p(u + s) q(u) du.

C is known in closed form for Gaussian and finite exponential-sum profiles,
together with its first two s-derivatives. The s-integral is done in mpmath
because amplitude-coupled probabilities of smooth switchings are
exponentially small compared with the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .errors import NumericalError
from .switching import Kind, SwitchingSpec

SQRT2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class GaussianProfile:
    """amp * exp(-(t - center)^2 / (2 T^2)) * exp(i freq t)."""

    amp: complex
    T: float
    center: float
    freq: float


@dataclass(frozen=True)
class ExpSumProfile:
    """sum_j coef_j exp(i k_j t) on [lo, hi], zero elsewhere."""

    terms: tuple
    lo: float
    hi: float


def modulated(spec: SwitchingSpec, freq: float, factor: complex = 1.0):
    """Profile factor * chi(t) * exp(i freq t), or None if no closed form exists."""
    if spec.kind is Kind.GAUSSIAN:
        return GaussianProfile(complex(factor * spec.scale / SQRT2PI), spec.T, spec.center, freq)
    if spec.kind in (Kind.COMPACT_COSINE, Kind.COMPACT_COSINE_SQ):
        lo, hi = spec.support()
        terms = tuple((complex(factor * c), k + freq) for c, k in spec.exp_terms())
        return ExpSumProfile(terms, lo, hi)
    return None


class GaussianCorrelation:
    def __init__(self, p: GaussianProfile, q: GaussianProfile):
        self.p, self.q = p, q
        self.A = 0.5 / p.T**2 + 0.5 / q.T**2
        self.b1 = -1.0 / p.T**2
        self.b0 = p.center / p.T**2 + q.center / q.T**2 + 1j * (p.freq + q.freq)
        self.pref = p.amp * q.amp

    @property
    def osc_freq(self):
        return abs(self.b1 * (self.p.freq + self.q.freq) / (2 * self.A) + self.p.freq)

    @property
    def timescale(self):
        return math.sqrt(self.p.T**2 + self.q.T**2)

    def breakpoints(self):
        return [self.p.center - self.q.center]

    def _re_q_coeffs(self):
        p, q, A, b1 = self.p, self.q, self.A, self.b1
        br = self.b0.real
        a2 = b1 * b1 / (4 * A) - 0.5 / p.T**2
        a1 = 2 * b1 * br / (4 * A) + p.center / p.T**2
        a0 = (br * br - self.b0.imag**2) / (4 * A) - p.center**2 / (2 * p.T**2) - q.center**2 / (2 * q.T**2)
        return a2, a1, a0

    def log_peak(self):
        """log of max_s |C(s)|."""
        a2, a1, a0 = self._re_q_coeffs()
        return math.log(abs(self.pref) * math.sqrt(math.pi / self.A)) + a0 - a1 * a1 / (4 * a2)

    def window(self, delta):
        """Interval where |C| stays within exp(-delta) of its peak."""
        a2, a1, _ = self._re_q_coeffs()
        s0 = -a1 / (2 * a2)
        h = math.sqrt(max(delta, 0.0) / -a2)
        return s0 - h, s0 + h

    def __call__(self, s, deriv=0):
        A, b1 = self.A, self.b1
        p, q = self.p, self.q
        b = b1 * s + self.b0
        Q = b * b / (4 * A) - (s - p.center) ** 2 / (2 * p.T**2) - q.center**2 / (2 * q.T**2) + 1j * p.freq * s
        C = self.pref * np.sqrt(np.pi / A) * np.exp(Q)
        if deriv == 0:
            return C
        dQ = b1 * b / (2 * A) - (s - p.center) / p.T**2 + 1j * p.freq
        if deriv == 1:
            return dQ * C
        d2Q = b1 * b1 / (2 * A) - 1.0 / p.T**2
        return (dQ * dQ + d2Q) * C

    def _mp_coeffs(self):
        """Q(s) = q2 s^2 + q1 s + q0 and the prefactor at the current precision."""
        key = mp.mp.prec
        cache = self.__dict__.setdefault("_mp_cache", {})
        if key not in cache:
            p, q = self.p, self.q
            A, b1 = mp.mpf(self.A), mp.mpf(self.b1)
            b0 = mp.mpc(self.b0.real, self.b0.imag)
            Tp2, Tq2 = mp.mpf(p.T) ** 2, mp.mpf(q.T) ** 2
            cp, cq = mp.mpf(p.center), mp.mpf(q.center)
            q2 = b1 * b1 / (4 * A) - 1 / (2 * Tp2)
            q1 = 2 * b1 * b0 / (4 * A) + cp / Tp2 + 1j * mp.mpf(p.freq)
            q0 = b0 * b0 / (4 * A) - cp * cp / (2 * Tp2) - cq * cq / (2 * Tq2)
            pref = mp.mpc(p.amp) * mp.mpc(q.amp) * mp.sqrt(mp.pi / A)
            cache[key] = (q2, q1, q0, pref)
        return cache[key]

    def mp_eval(self, s, deriv=0):
        q2, q1, q0, pref = self._mp_coeffs()
        s = mp.mpf(s)
        C = pref * mp.exp((q2 * s + q1) * s + q0)
        if deriv == 0:
            return C
        dQ = 2 * q2 * s + q1
        if deriv == 1:
            return dQ * C
        return (dQ * dQ + 2 * q2) * C


class ExpSumCorrelation:
    def __init__(self, p: ExpSumProfile, q: ExpSumProfile):
        self.p, self.q = p, q

    @property
    def osc_freq(self):
        return max(abs(k) for _, k in self.p.terms)

    @property
    def timescale(self):
        return min(self.p.hi - self.p.lo, self.q.hi - self.q.lo)

    def support(self):
        return self.p.lo - self.q.hi, self.p.hi - self.q.lo

    def breakpoints(self):
        p, q = self.p, self.q
        return sorted({p.lo - q.hi, p.hi - q.lo, p.hi - q.hi, p.lo - q.lo})

    def __call__(self, s, deriv=0):
        s = np.asarray(s, dtype=float)
        p, q = self.p, self.q
        lo = np.maximum(q.lo, p.lo - s)
        hi = np.minimum(q.hi, p.hi - s)
        live = hi > lo
        dlo = np.where(p.lo - s > q.lo, -1.0, 0.0)
        dhi = np.where(p.hi - s < q.hi, -1.0, 0.0)
        hi = np.where(live, hi, lo)
        out = np.zeros(s.shape, dtype=complex)
        for a, mu in p.terms:
            e = np.exp(1j * mu * s)
            for b, nu in q.terms:
                kap = mu + nu
                width = hi - lo
                E = width * np.exp(0.5j * kap * (hi + lo)) * np.sinc(kap * width / (2 * np.pi))
                if deriv == 0:
                    out = out + a * b * e * E
                    continue
                eh, el = np.exp(1j * kap * hi), np.exp(1j * kap * lo)
                dE = eh * dhi - el * dlo
                if deriv == 1:
                    out = out + a * b * e * (1j * mu * E + dE)
                else:
                    d2E = 1j * kap * (eh * dhi * dhi - el * dlo * dlo)
                    out = out + a * b * e * (-(mu * mu) * E + 2j * mu * dE + d2E)
        return np.where(live, out, 0.0)

    def mp_eval(self, s, deriv=0):
        p, q = self.p, self.q
        s = mp.mpf(s)
        lo = max(mp.mpf(q.lo), p.lo - s)
        hi = min(mp.mpf(q.hi), p.hi - s)
        if hi <= lo:
            return mp.mpc(0)
        dlo = -1 if p.lo - s > q.lo else 0
        dhi = -1 if p.hi - s < q.hi else 0
        out = mp.mpc(0)
        for a, mu in p.terms:
            mu = mp.mpf(mu)
            e = mp.expj(mu * s)
            for b, nu in q.terms:
                kap = mu + mp.mpf(nu)
                width = hi - lo
                E = width * mp.expj(kap * (hi + lo) / 2) * mp.sinc(kap * width / 2)
                ab = mp.mpc(a) * mp.mpc(b)
                if deriv == 0:
                    out += ab * e * E
                    continue
                eh, el = mp.expj(kap * hi), mp.expj(kap * lo)
                dE = eh * dhi - el * dlo
                if deriv == 1:
                    out += ab * e * (1j * mu * E + dE)
                else:
                    d2E = 1j * kap * (eh * dhi * dhi - el * dlo * dlo)
                    out += ab * e * (-(mu * mu) * E + 2j * mu * dE + d2E)
        return out


def correlation(p, q):
    """Closed-form correlation of two profiles, or None for unsupported pairs."""
    if isinstance(p, GaussianProfile) and isinstance(q, GaussianProfile):
        return GaussianCorrelation(p, q)
    if isinstance(p, ExpSumProfile) and isinstance(q, ExpSumProfile):
        return ExpSumCorrelation(p, q)
    return None


def pieces(lo, hi, singular, eps, max_len, keep=()):
    """Breakpoints on [lo, hi]: geometric clustering around ``singular`` points plus a length cap."""
    pts = {lo, hi}
    pts.update(x for x in keep if lo < x < hi)
    for c in singular:
        if not lo - max_len < c < hi + max_len:
            continue
        if lo < c < hi:
            pts.add(c)
        step = eps
        while step < max_len:
            for x in (c - step, c + step):
                if lo < x < hi:
                    pts.add(x)
            step *= 10
    pts = sorted(pts)
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil((b - a) / max_len))
        out.extend(a + (b - a) * k / n for k in range(1, n + 1))
    return out


def mp_lag_integral(integrand, points, dps, scale=1.0):
    """Sum of Gauss-Legendre integrals of ``integrand`` over consecutive ``points``.

    mpmath's convergence test assumes values of order one, so the integrand
    is divided by ``scale`` (its typical size) first. Returns (value, error
    estimate) as Python complex / float.
    """
    with mp.workdps(dps):
        inv = 1 / mp.mpf(scale)
        total = mp.mpc(0)
        err = mp.mpf(0)
        for a, b in zip(points[:-1], points[1:]):
            val, e = mp.quad(lambda s: integrand(s) * inv, [mp.mpf(a), mp.mpf(b)],
                             method="gauss-legendre", error=True)
            total += val
            err += e
        return complex(total * scale), float(err * scale)


def richardson(eps_values, values):
    """Polynomial (Neville) extrapolation of ``values(eps)`` to eps = 0."""
    x = [float(e) for e in eps_values]
    p = [complex(v) for v in values]
    n = len(x)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
    return p[0]


def check_error(value, err, scale, what):
    if not math.isfinite(abs(value)) or err > 1e-3 * max(abs(value), scale):
        raise NumericalError(f"{what}: quadrature error estimate {err:.3g} too large", err)
