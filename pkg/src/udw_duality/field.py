"""Field backgrounds: massless Minkowski vacuum and a 1+1 Dirichlet cavity.

All detectors are static, so two-point functions depend only on the time
lag s = t - t' and the spatial separation d. Lag kernels are written as

    K_n(s) = int_0^inf dw rho(w, d) w^n exp(-sigma2 w^2) exp(-i w (s - i eps))

so that W = K_0, dW/ds = -i K_1 and the derivative-coupling kernel
W_tilde = d_t d_t' W = K_2. ``sigma2`` is the combined Gaussian smearing
(sigma_A^2 + sigma_B^2) / 2; zero means pointlike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import mpmath as mp
import numpy as np

from .errors import InvalidRegulatorError, InvalidSpecError
from .special import SQRT_PI, faddeeva_derivatives, mp_faddeeva_derivatives

__all__ = [
    "Event",
    "MinkowskiVacuum",
    "FiniteModeCavity",
    "FieldModel",
    "MinkowskiSpectrum",
    "CavitySpectrum",
    "wightman",
    "wightman_dtau",
    "feynman",
    "feynman_dtau",
    "spectral_weight",
    "lag_kernel",
    "mp_lag_kernel",
]

FOUR_PI2 = 4 * math.pi**2
# |gamma| / (2 sigma) above which the asymptotic series replaces w^(n)
ASYMPTOTIC_Z = 6.0


@dataclass(frozen=True)
class Event:
    t: float
    x: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        x = tuple(float(v) for v in np.ravel(self.x))
        if len(x) == 1:
            x = (x[0], 0.0, 0.0)
        if len(x) != 3:
            raise InvalidSpecError("event position must have 1 or 3 components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class MinkowskiVacuum:
    """Massless scalar vacuum in 3+1 Minkowski with i*epsilon regulator."""

    epsilon: float = 1e-3
    mass: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidRegulatorError(f"epsilon must be positive, got {self.epsilon}")
        if self.mass != 0:
            raise InvalidSpecError("only the massless field is supported")

    def with_epsilon(self, epsilon):
        return MinkowskiVacuum(epsilon, self.mass)


@dataclass(frozen=True)
class FiniteModeCavity:
    """Truncated Dirichlet cavity on [0, length] in 1+1 dimensions.

    Mode n has frequency n*pi/length and profile sin(n pi x / length) / sqrt(w_n length);
    only the first spatial coordinate of an event is used.
    """

    length: float = 1.0
    mode_count: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise InvalidSpecError("cavity length must be positive")
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise InvalidSpecError("mode_count must be a positive integer")
        object.__setattr__(self, "mode_count", int(self.mode_count))

    @property
    def frequencies(self):
        return np.arange(1, self.mode_count + 1) * math.pi / self.length

    def mode_weights(self, xa, xb):
        """c_n = u_n(xa) u_n(xb)^* at equal times."""
        for x in (xa, xb):
            if not 0 <= x <= self.length:
                raise InvalidSpecError(f"position {x} lies outside the cavity")
        w = self.frequencies
        return np.sin(w * xa) * np.sin(w * xb) / (w * self.length)


FieldModel = Union[MinkowskiVacuum, FiniteModeCavity]


def _separation(a: Event, b: Event):
    return math.dist(a.x, b.x)


def _check_model(model):
    if not isinstance(model, (MinkowskiVacuum, FiniteModeCavity)):
        raise InvalidSpecError(f"unsupported field model {type(model).__name__}")


# -- P_n(gamma) = int_0^inf w^n exp(-sigma^2 w^2 - i w gamma) dw ---------------

def _pn_pointlike(gamma, n):
    return math.factorial(n) / (1j * gamma) ** (n + 1)


def _pn_asymptotic(gamma, sigma, n):
    total = np.zeros_like(gamma)
    term_prev = None
    s2 = sigma * sigma
    for j in range(60):
        term = (-s2) ** j / math.factorial(j) * math.factorial(n + 2 * j) / (1j * gamma) ** (n + 2 * j + 1)
        if term_prev is not None and np.all(np.abs(term) >= np.abs(term_prev)):
            break
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
        term_prev = term
    return total


def _pn(gamma, sigma, n):
    gamma = np.asarray(gamma, dtype=complex)
    if sigma == 0:
        return _pn_pointlike(gamma, n)
    z = -gamma / (2 * sigma)
    far = np.abs(z) > ASYMPTOTIC_Z
    out = np.empty(gamma.shape, dtype=complex)
    if np.any(~far):
        wn = faddeeva_derivatives(z[~far], n)[n]
        out[~far] = SQRT_PI / (2 * sigma) * (-1j / (2 * sigma)) ** n * wn
    if np.any(far):
        out[far] = _pn_asymptotic(gamma[far], sigma, n)
    return out


def _mp_pn(gamma, sigma, n):
    gamma = mp.mpc(gamma)
    if sigma == 0:
        return mp.factorial(n) / (1j * gamma) ** (n + 1)
    sigma = mp.mpf(sigma)
    z = -gamma / (2 * sigma)
    # recursion for w^(n) cancels about 2n digits per decade of |z|
    extra = int(2 * n * max(0.0, float(mp.log10(abs(z) + 1)))) + 5
    with mp.extradps(extra):
        wn = mp_faddeeva_derivatives(z, n)[n]
        val = mp.sqrt(mp.pi) / (2 * sigma) * (-1j / (2 * sigma)) ** n * wn
    return +val


# -- Minkowski lag kernels ------------------------------------------------------

def _minkowski_pointlike(gamma, d, order):
    D = gamma * gamma - d * d
    if order == 0:
        return -1 / (FOUR_PI2 * D)
    if order == 1:
        return 2j * gamma / (FOUR_PI2 * D * D)
    if order == 2:
        return (3 * gamma * gamma + d * d) / (2 * math.pi**2 * D**3)
    raise ValueError(f"unsupported kernel order {order}")


def _minkowski_kernel(gamma, d, sigma2, order, pn):
    if sigma2 == 0:
        return _minkowski_pointlike(gamma, d, order)
    sigma = math.sqrt(sigma2)
    if d < 1e-3 * sigma:
        # sin(w d)/d expanded in d
        return (pn(gamma, sigma, order + 1) - d**2 / 6 * pn(gamma, sigma, order + 3)
                + d**4 / 120 * pn(gamma, sigma, order + 5)) / FOUR_PI2
    return (pn(gamma - d, sigma, order) - pn(gamma + d, sigma, order)) / (2j * d * FOUR_PI2)


def lag_kernel(model: FieldModel, d=0.0, sigma2=0.0, order=0, epsilon=None, xa=None, xb=None):
    """Vectorised K_order(s) for static detectors.

    Minkowski needs the separation ``d``; the cavity needs the two positions
    ``xa``, ``xb``. ``epsilon`` overrides the model regulator.
    """
    _check_model(model)
    if isinstance(model, FiniteModeCavity):
        if sigma2:
            raise InvalidSpecError("the cavity oracle supports pointlike detectors only")
        w = model.frequencies
        c = model.mode_weights(xa, xb) * w**order

        def kernel(s):
            s = np.asarray(s, dtype=float)
            return np.exp(-1j * np.multiply.outer(s, w)) @ c

        return kernel
    eps = model.epsilon if epsilon is None else epsilon
    if not eps >= 0:
        raise InvalidRegulatorError("epsilon must be non-negative")
    if eps == 0 and sigma2 == 0:
        raise InvalidRegulatorError("pointlike Minkowski kernels need epsilon > 0")

    def kernel(s):
        gamma = np.asarray(s, dtype=float) - 1j * eps
        return _minkowski_kernel(gamma, d, sigma2, order, _pn)

    return kernel


def mp_lag_kernel(model: FieldModel, d=0.0, sigma2=0.0, order=0, epsilon=None, xa=None, xb=None):
    """Scalar mpmath version of :func:`lag_kernel` at the ambient precision."""
    _check_model(model)
    if isinstance(model, FiniteModeCavity):
        if sigma2:
            raise InvalidSpecError("the cavity oracle supports pointlike detectors only")
        L = model.length

        def kernel(s):
            total = mp.mpc(0)
            for n in range(1, model.mode_count + 1):
                w = n * mp.pi / L
                c = mp.sin(w * xa) * mp.sin(w * xb) / (w * L)
                total += c * w**order * mp.expj(-w * s)
            return total

        return kernel
    eps = model.epsilon if epsilon is None else epsilon
    if eps == 0 and sigma2 == 0:
        raise InvalidRegulatorError("pointlike Minkowski kernels need epsilon > 0")
    d_mp = mp.mpf(d)

    def kernel(s):
        gamma = mp.mpc(s, -eps)
        if sigma2 == 0:
            D = gamma * gamma - d_mp * d_mp
            if order == 0:
                return -1 / (4 * mp.pi**2 * D)
            if order == 1:
                return 2j * gamma / (4 * mp.pi**2 * D * D)
            if order == 2:
                return (3 * gamma * gamma + d_mp * d_mp) / (2 * mp.pi**2 * D**3)
            raise ValueError(f"unsupported kernel order {order}")
        sigma = math.sqrt(sigma2)
        if d < 1e-3 * sigma:
            return (_mp_pn(gamma, sigma, order + 1) - d_mp**2 / 6 * _mp_pn(gamma, sigma, order + 3)
                    + d_mp**4 / 120 * _mp_pn(gamma, sigma, order + 5)) / (4 * mp.pi**2)
        return (_mp_pn(gamma - d_mp, sigma, order) - _mp_pn(gamma + d_mp, sigma, order)) / (
            2j * d_mp * 4 * mp.pi**2)

    return kernel


# -- pointwise two-point functions ----------------------------------------------

def _pointwise(model, a, b, order):
    _check_model(model)
    s = a.t - b.t
    if isinstance(model, FiniteModeCavity):
        k = lag_kernel(model, order=order, xa=a.x[0], xb=b.x[0])
    else:
        k = lag_kernel(model, d=_separation(a, b), order=order)
    return complex(k(s))


def wightman(model: FieldModel, a: Event, b: Event) -> complex:
    """W(a, b) = <0| phi(a) phi(b) |0>."""
    return _pointwise(model, a, b, 0)


def wightman_dtau(model: FieldModel, a: Event, b: Event) -> complex:
    """d_t d_t' W(a, b), the two-point function of the proper-time derivative."""
    return _pointwise(model, a, b, 2)


def feynman(model: FieldModel, a: Event, b: Event) -> complex:
    """Time-ordered two-point function (a first when t_a >= t_b)."""
    return wightman(model, a, b) if a.t >= b.t else wightman(model, b, a)


def feynman_dtau(model: FieldModel, a: Event, b: Event) -> complex:
    """Time-ordered product of the derivative field, without contact terms."""
    return wightman_dtau(model, a, b) if a.t >= b.t else wightman_dtau(model, b, a)


# -- spectral weights --------------------------------------------------------------

@dataclass(frozen=True)
class MinkowskiSpectrum:
    """Continuous density with W(s, d) = int rho(w, d) exp(-w eps) exp(-i w s) dw."""

    epsilon: float

    def density(self, omega, d=0.0):
        omega = np.asarray(omega, dtype=float)
        if d == 0:
            return omega / FOUR_PI2
        return np.sin(omega * d) / (FOUR_PI2 * d)

    def regulator(self, omega):
        return np.exp(-self.epsilon * np.asarray(omega, dtype=float))

    @staticmethod
    def form_factor(omega, sigma2):
        """Product of the two Gaussian-ball form factors, exp(-sigma2 w^2)."""
        return np.exp(-sigma2 * np.asarray(omega, dtype=float) ** 2)


@dataclass(frozen=True)
class CavitySpectrum:
    """Delta weights c_n at the mode frequencies w_n."""

    model: FiniteModeCavity

    @property
    def atom_count(self):
        return self.model.mode_count

    def atoms(self, xa, xb):
        return self.model.frequencies, self.model.mode_weights(xa, xb)


def spectral_weight(model: FieldModel):
    _check_model(model)
    if isinstance(model, MinkowskiVacuum):
        return MinkowskiSpectrum(model.epsilon)
    return CavitySpectrum(model)
