"""Switching functions and their dual (derivative-coupling) counterparts.

The dual of a switching chi at gap Omega is built from the lower-incomplete
Fourier transform

    f(tau) = int_{-inf}^{tau} chi(xi) exp(-i Omega xi) dxi  =  chi_tilde(tau) exp(-i theta(tau)),

with chi_tilde = |f| and theta the (negated, unwrapped) phase of f.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import InvalidSpecError, NumericalError
from .special import faddeeva

__all__ = [
    "Kind",
    "SwitchingSpec",
    "DualSwitching",
    "PhaseFit",
    "eval_switching",
    "lower_incomplete_fourier",
    "fourier_transform",
    "dual_switching",
    "theorem1_residual",
    "l1_relative_distance",
    "phase_linearity_residual",
    "default_grid",
    "DualSwitchingTransformer",
]

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
# |f| below this fraction of T leaves the phase undefined
MODULUS_FLOOR = 1e-14
# gaussian half-width (in units of T) where exp(-x^2/2) < 1e-16
GAUSSIAN_QUADRATURE_HALFWIDTH = 8.6
# gaussian half-width used for causal bookkeeping
GAUSSIAN_CAUSAL_HALFWIDTH = 6.0


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    COMPACT_COSINE = "compact_cosine"
    COMPACT_COSINE_SQ = "compact_cosine_sq"
    TABULATED = "tabulated"


def _exp_integral(mu, lo, hi):
    """int_lo^hi exp(i mu u) du, stable as mu -> 0."""
    mu = np.asarray(mu, dtype=float)
    width = np.asarray(hi, dtype=float) - lo
    mid = 0.5 * (np.asarray(hi, dtype=float) + lo)
    return width * np.exp(1j * mu * mid) * np.sinc(mu * width / (2 * np.pi))


@dataclass(frozen=True)
class SwitchingSpec:
    """A switching profile chi(tau) with timescale ``T``.

    The three analytic kinds integrate to ``scale * T``. ``center`` shifts
    the profile in time and ``scale`` multiplies it (the constant-gap dual
    chi/Omega is ``spec.scaled(1/Omega)``). Tabulated profiles are linearly
    interpolated between ``samples = (taus, values)`` and vanish outside.
    """

    kind: Kind
    T: float = 1.0
    center: float = 0.0
    scale: float = 1.0
    samples: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError as exc:
            raise InvalidSpecError(f"unknown switching kind {self.kind!r}") from exc
        object.__setattr__(self, "kind", kind)
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidSpecError(f"timescale T must be positive, got {self.T}")
        if not (math.isfinite(self.center) and math.isfinite(self.scale)):
            raise InvalidSpecError("center and scale must be finite")
        if kind is Kind.TABULATED:
            if self.samples is None:
                raise InvalidSpecError("tabulated switching needs samples")
            taus, vals = (np.asarray(a, dtype=float) for a in self.samples)
            if taus.ndim != 1 or taus.shape != vals.shape or taus.size < 2:
                raise InvalidSpecError("samples must be two equal-length 1-d sequences")
            if np.any(np.diff(taus) <= 0):
                raise InvalidSpecError("sample times must be strictly increasing")
            if not (np.all(np.isfinite(taus)) and np.all(np.isfinite(vals))):
                raise InvalidSpecError("samples must be finite")
            object.__setattr__(self, "samples", (tuple(taus), tuple(vals)))

    # -- construction helpers -------------------------------------------
    @classmethod
    def gaussian(cls, T=1.0, **kw):
        return cls(Kind.GAUSSIAN, T, **kw)

    @classmethod
    def compact_cosine(cls, T=1.0, **kw):
        return cls(Kind.COMPACT_COSINE, T, **kw)

    @classmethod
    def compact_cosine_sq(cls, T=1.0, **kw):
        return cls(Kind.COMPACT_COSINE_SQ, T, **kw)

    @classmethod
    def tabulated(cls, taus, values, T=1.0, scale=1.0):
        return cls(Kind.TABULATED, T, scale=scale, samples=(taus, values))

    def scaled(self, factor):
        return SwitchingSpec(self.kind, self.T, self.center, self.scale * factor, self.samples)

    def shifted(self, delay):
        if self.kind is Kind.TABULATED:
            taus, vals = self.samples
            return SwitchingSpec.tabulated(np.add(taus, delay), vals, self.T, self.scale)
        return SwitchingSpec(self.kind, self.T, self.center + delay, self.scale)

    @property
    def is_compact(self):
        return self.kind in (Kind.COMPACT_COSINE, Kind.COMPACT_COSINE_SQ, Kind.TABULATED)

    @property
    def is_differentiable(self):
        return self.kind is not Kind.COMPACT_COSINE

    # -- evaluation ------------------------------------------------------
    def _arrays(self):
        taus, vals = self.samples
        return np.asarray(taus), np.asarray(vals) * self.scale

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind is Kind.GAUSSIAN:
            v = (tau - self.center) / self.T
            return self.scale * np.exp(-0.5 * v * v) / SQRT2PI
        if self.kind is Kind.TABULATED:
            taus, vals = self._arrays()
            return np.interp(tau, taus, vals, left=0.0, right=0.0)
        v = tau - self.center
        inside = np.abs(v) < 0.5 * self.T
        c = np.cos(np.pi * v / self.T)
        if self.kind is Kind.COMPACT_COSINE:
            val = 0.5 * np.pi * c
        else:
            val = 2.0 * c * c
        return np.where(inside, self.scale * val, 0.0)

    def derivative(self, tau):
        """d chi / d tau (one-sided value at compact support edges is dropped)."""
        tau = np.asarray(tau, dtype=float)
        if self.kind is Kind.GAUSSIAN:
            return -(tau - self.center) / self.T**2 * self(tau)
        if self.kind is Kind.TABULATED:
            taus, vals = self._arrays()
            slopes = np.diff(vals) / np.diff(taus)
            idx = np.searchsorted(taus, tau, side="right") - 1
            ok = (idx >= 0) & (idx < slopes.size)
            return np.where(ok, slopes[np.clip(idx, 0, slopes.size - 1)], 0.0)
        v = tau - self.center
        inside = np.abs(v) < 0.5 * self.T
        a = np.pi / self.T
        if self.kind is Kind.COMPACT_COSINE:
            val = -0.5 * np.pi * a * np.sin(a * v)
        else:
            val = -2.0 * a * np.sin(2 * a * v)
        return np.where(inside, self.scale * val, 0.0)

    def support(self):
        """Interval outside of which chi is (numerically) zero."""
        if self.kind is Kind.GAUSSIAN:
            h = GAUSSIAN_QUADRATURE_HALFWIDTH * self.T
            return self.center - h, self.center + h
        if self.kind is Kind.TABULATED:
            taus = self.samples[0]
            return taus[0], taus[-1]
        return self.center - 0.5 * self.T, self.center + 0.5 * self.T

    def causal_support(self):
        """Support used for causal bookkeeping (gaussians cut at 6 T)."""
        if self.kind is Kind.GAUSSIAN:
            h = GAUSSIAN_CAUSAL_HALFWIDTH * self.T
            return self.center - h, self.center + h
        return self.support()

    def exp_terms(self):
        """Compact analytic kinds as sum_j coef_j exp(i k_j t) on ``support()``."""
        a = np.pi / self.T
        if self.kind is Kind.COMPACT_COSINE:
            base = [(0.25 * np.pi, a), (0.25 * np.pi, -a)]
        elif self.kind is Kind.COMPACT_COSINE_SQ:
            base = [(1.0, 0.0), (0.5, 2 * a), (0.5, -2 * a)]
        else:
            raise InvalidSpecError(f"{self.kind.value} switching is not a finite exponential sum")
        return [(self.scale * c * np.exp(-1j * k * self.center), k) for c, k in base]


def eval_switching(spec: SwitchingSpec, tau):
    return spec(tau)


def _gaussian_incomplete(spec, omega, tau):
    T = spec.T
    om = omega * T
    v = np.clip((np.asarray(tau, dtype=float) - spec.center) / T, -40.0, 40.0)
    g = np.exp(-0.5 * v * v - 1j * om * v)
    with np.errstate(over="ignore", invalid="ignore"):
        left = 0.5 * T * g * faddeeva((om - 1j * v) / SQRT2)
        right = T * math.exp(-0.5 * om * om) - 0.5 * T * g * faddeeva((-om + 1j * v) / SQRT2)
    out = np.where(v <= 0, left, right)
    return spec.scale * np.exp(-1j * omega * spec.center) * out


def _tabulated_segments(spec, omega):
    taus, vals = spec._arrays()
    segs = np.empty(taus.size - 1, dtype=complex)
    for i in range(taus.size - 1):
        segs[i] = _linear_piece(taus[i], taus[i + 1], vals[i], vals[i + 1], omega, taus[i + 1])
    return taus, vals, segs


def _linear_piece(t0, t1, v0, v1, omega, t_end):
    """int_t0^t_end of the linear interpolant through (t0,v0),(t1,v1) times exp(-i omega t)."""
    if t_end <= t0:
        return 0.0j
    slope = (v1 - v0) / (t1 - t0)

    def lin(x):
        return v0 + slope * (x - t0)

    scale = max(abs(v0), abs(v1), 1e-300) * (t_end - t0)
    if omega == 0:
        re, err, *_ = integrate.quad(lin, t0, t_end, epsabs=1e-14 * scale, epsrel=1e-13, full_output=1)
        im, err_i = 0.0, 0.0
    else:
        re, err, *_ = integrate.quad(lin, t0, t_end, weight="cos", wvar=omega,
                                     epsabs=1e-14 * scale, epsrel=1e-13, full_output=1)
        im, err_i, *_ = integrate.quad(lin, t0, t_end, weight="sin", wvar=omega,
                                       epsabs=1e-14 * scale, epsrel=1e-13, full_output=1)
        im = -im
    if err + err_i > 1e-10 * scale:
        raise NumericalError("tabulated switching quadrature did not converge", err + err_i)
    return re + 1j * im


def lower_incomplete_fourier(spec: SwitchingSpec, Omega: float, tau):
    """f(tau) = int_{-inf}^{tau} chi(xi) exp(-i Omega xi) dxi (vectorised in ``tau``)."""
    if Omega < 0 or not math.isfinite(Omega):
        raise InvalidSpecError(f"Omega must be a finite non-negative number, got {Omega}")
    tau_arr = np.asarray(tau, dtype=float)
    if spec.kind is Kind.GAUSSIAN:
        out = _gaussian_incomplete(spec, Omega, tau_arr)
    elif spec.kind is Kind.TABULATED:
        taus, vals, segs = _tabulated_segments(spec, Omega)
        cum = np.concatenate([[0.0j], np.cumsum(segs)])
        flat = tau_arr.ravel()
        res = np.empty(flat.size, dtype=complex)
        for n, t in enumerate(flat):
            if t <= taus[0]:
                res[n] = 0.0
            elif t >= taus[-1]:
                res[n] = cum[-1]
            else:
                i = np.searchsorted(taus, t, side="right") - 1
                res[n] = cum[i] + _linear_piece(taus[i], taus[i + 1], vals[i], vals[i + 1], Omega, t)
        out = res.reshape(tau_arr.shape)
    else:
        lo, hi = spec.support()
        upper = np.clip(tau_arr, lo, hi)
        out = np.zeros(tau_arr.shape, dtype=complex)
        for coef, k in spec.exp_terms():
            out = out + coef * _exp_integral(k - Omega, lo, upper)
    return out if out.ndim else complex(out)


def fourier_transform(spec: SwitchingSpec, k):
    """Full transform chi_hat(k) = int chi(t) exp(-i k t) dt."""
    k = np.asarray(k, dtype=float)
    if spec.kind is Kind.GAUSSIAN:
        out = spec.scale * spec.T * np.exp(-0.5 * (k * spec.T) ** 2 - 1j * k * spec.center)
    elif spec.kind is Kind.TABULATED:
        flat = [lower_incomplete_fourier(spec, abs(float(x)), np.inf) for x in k.ravel()]
        flat = [v if x >= 0 else np.conj(v) for v, x in zip(flat, k.ravel())]
        out = np.asarray(flat, dtype=complex).reshape(k.shape)
    else:
        lo, hi = spec.support()
        out = np.zeros(k.shape, dtype=complex)
        for coef, q in spec.exp_terms():
            out = out + coef * _exp_integral(q - k, lo, hi)
    return out if out.ndim else complex(out)


def default_grid(spec: SwitchingSpec):
    """[-8T, 8T] x 3201 for gaussians, [-T, T] x 4001 for compact kinds."""
    if spec.kind is Kind.GAUSSIAN:
        return spec.center + np.linspace(-8 * spec.T, 8 * spec.T, 3201)
    if spec.kind is Kind.TABULATED:
        lo, hi = spec.support()
        pad = 0.5 * (hi - lo)
        return np.linspace(lo - pad, hi + pad, 4001)
    return spec.center + np.linspace(-spec.T, spec.T, 4001)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


@dataclass(frozen=True, eq=False)
class DualSwitching:
    """Sampled dual switching ``chi_tilde`` and unwrapped phase ``theta`` at gap ``gap``.

    When ``spec`` is present the profile can be evaluated exactly off-grid.
    """

    gap: float
    grid: np.ndarray
    chi_tilde: np.ndarray
    theta: np.ndarray
    boundary_value: float
    spec: SwitchingSpec | None = None

    @property
    def T(self):
        return self.spec.T if self.spec is not None else float(self.grid[-1] - self.grid[0])

    def profile(self, tau):
        """chi_tilde(tau) exp(-i theta(tau)) at arbitrary times."""
        if self.spec is not None:
            return lower_incomplete_fourier(self.spec, self.gap, tau)
        tau = np.asarray(tau, dtype=float)
        mod = np.interp(tau, self.grid, self.chi_tilde, left=0.0, right=self.boundary_value)
        ph = np.interp(tau, self.grid, self.theta)
        return mod * np.exp(-1j * ph)

    def gap_profile(self):
        """Time-dependent gap d theta / d tau on the grid."""
        if self.grid.size < 2:
            return np.full(self.grid.shape, float(self.gap))
        return np.gradient(self.theta, self.grid)

    def tail_value(self):
        """Limit of the complex profile at late times."""
        if self.spec is not None:
            return complex(lower_incomplete_fourier(self.spec, self.gap, np.inf))
        return self.boundary_value * np.exp(-1j * self.theta[-1])


def _unwrapped_phase(values, floor):
    ang = np.angle(values)
    good = np.abs(values) >= floor
    if not good.any():
        return np.zeros(values.shape)
    idx = np.where(good, np.arange(values.size), -1)
    # nearest well-defined neighbour, forward then backward
    fwd = np.maximum.accumulate(idx)
    first = int(np.argmax(good))
    fwd[fwd < 0] = first
    ang = ang[fwd]
    return np.unwrap(ang)


def dual_switching(spec: SwitchingSpec, Omega: float, grid=None) -> DualSwitching:
    """Dual switching of ``spec`` at gap ``Omega`` sampled on ``grid``.

    The phase is tracked on a refined grid with steps below pi/(4 Omega) so
    that unwrapping never skips a branch, then subsampled.
    """
    if not Omega > 0:
        raise ValueError(f"Omega must be positive, got {Omega}")
    grid = _check_grid(default_grid(spec) if grid is None else grid)
    floor = MODULUS_FLOOR * spec.T * abs(spec.scale)

    if grid.size == 1:
        f = np.atleast_1d(lower_incomplete_fourier(spec, Omega, grid))
        theta = -_unwrapped_phase(f, floor)
        return DualSwitching(Omega, grid, np.abs(f), theta, float(np.abs(f[-1])), spec)

    max_step = 0.25 * np.pi / Omega
    for _ in range(4):
        steps = np.diff(grid)
        nsub = np.maximum(1, np.ceil(steps / max_step).astype(int))
        offsets = np.concatenate([[0], np.cumsum(nsub)])
        fine = np.concatenate(
            [grid[i] + steps[i] * np.arange(nsub[i]) / nsub[i] for i in range(steps.size)] + [grid[-1:]]
        )
        f_fine = np.atleast_1d(lower_incomplete_fourier(spec, Omega, fine))
        phase = _unwrapped_phase(f_fine, floor)
        if np.all(np.abs(np.diff(phase)) <= 0.5 * np.pi):
            break
        max_step *= 0.25
    else:
        warnings.warn("phase unwrapping still shows jumps above pi/2 after refinement")

    f = f_fine[offsets]
    theta = -phase[offsets]
    chi_tilde = np.abs(f)
    return DualSwitching(float(Omega), grid, chi_tilde, theta, float(chi_tilde[-1]), spec)


def theorem1_residual(spec: SwitchingSpec, Omega: float, grid=None) -> float:
    """sup over the grid of |Omega f(tau) - i chi(tau) exp(-i Omega tau)|."""
    if not spec.is_differentiable:
        warnings.warn("compact cosine switching is not differentiable at its support edges")
    grid = _check_grid(default_grid(spec) if grid is None else grid)
    f = lower_incomplete_fourier(spec, Omega, grid)
    res = Omega * f - 1j * spec(grid) * np.exp(-1j * Omega * grid)
    return float(np.max(np.abs(res)))


def l1_relative_distance(f_samples, g_samples, grid, mode="pointwise") -> float:
    """Relative L1 mismatch of two sampled functions (trapezoidal rule).

    ``mode="pointwise"`` gives int|f-g| / int|g|; ``mode="norm"`` gives
    |int|f| - int|g|| / int|g|, the relative change of the L1 norm.
    """
    f = np.asarray(f_samples, dtype=float)
    g = np.asarray(g_samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if not (f.shape == g.shape == grid.shape):
        raise ValueError("samples and grid must have equal lengths")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing")
    denom = np.trapezoid(np.abs(g), grid)
    if denom == 0:
        raise ZeroDivisionError("reference function has zero L1 norm")
    if mode == "pointwise":
        num = np.trapezoid(np.abs(f - g), grid)
    elif mode == "norm":
        num = abs(np.trapezoid(np.abs(f), grid) - denom)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(num / denom)


class PhaseFit(NamedTuple):
    residual: float
    offset: float


def phase_linearity_residual(dual: DualSwitching) -> PhaseFit:
    """Minimax fit theta(tau) ~ Omega tau + c over the support of chi_tilde.

    Returns the sup deviation and the best offset c wrapped to (-pi, pi].
    """
    if dual.grid.size < 2:
        return PhaseFit(0.0, 0.0)
    mask = dual.chi_tilde > 1e-6 * dual.chi_tilde.max()
    r = dual.theta[mask] - dual.gap * dual.grid[mask]
    hi, lo = r.max(), r.min()
    c = 0.5 * (hi + lo)
    c = math.remainder(c, 2 * math.pi)
    if c == -math.pi:
        c = math.pi
    return PhaseFit(float(0.5 * (hi - lo)), float(c))


class DualSwitchingTransformer(TransformerMixin, BaseEstimator):
    """Map proper times to (chi, Omega*chi_tilde, theta) columns.

    Parameters
    ----------
    kind : str
        Switching family name.
    T : float
        Switching timescale.
    omega : float
        Detector gap in units of 1/time.
    center : float
        Center of the switching.
    """

    def __init__(self, kind="gaussian", T=1.0, omega=10.0, center=0.0):
        self.kind = kind
        self.T = T
        self.omega = omega
        self.center = center

    def fit(self, X=None, y=None):
        if self.kind == Kind.TABULATED.value:
            raise InvalidSpecError("tabulated switchings are not supported by the transformer")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        self.spec_ = SwitchingSpec(self.kind, self.T, center=self.center)
        if X is not None:
            self.n_features_in_ = check_array(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError("expected a single column of proper times")
        taus, inverse = np.unique(X[:, 0], return_inverse=True)
        dual = dual_switching(self.spec_, self.omega, taus)
        out = np.column_stack([self.spec_(taus), self.omega * dual.chi_tilde, dual.theta])
        return out[inverse.ravel()]

    def get_feature_names_out(self, input_features=None):
        return np.asarray(["chi", "omega_chi_tilde", "theta"], dtype=object)
