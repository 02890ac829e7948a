"""Faddeeva function w(z) = exp(-z^2) erfc(-iz) and its derivatives.

Double precision goes through :func:`scipy.special.wofz`; the ``mp_*``
variants use mpmath at the ambient ``mp.dps`` and serve the
high-precision time-domain quadrature.
"""

import math

import mpmath as mp
import numpy as np
from scipy.special import wofz

SQRT_PI = math.sqrt(math.pi)


def faddeeva(z):
    return wofz(np.asarray(z, dtype=complex))


def faddeeva_derivatives(z, n):
    """Return ``[w(z), w'(z), ..., w^(n)(z)]``.

    Uses w' = -2 z w + 2i/sqrt(pi) and
    w^(m+2) = -2 z w^(m+1) - 2 (m+1) w^(m).
    """
    z = np.asarray(z, dtype=complex)
    out = [faddeeva(z)]
    if n >= 1:
        out.append(-2 * z * out[0] + 2j / SQRT_PI)
    for m in range(n - 1):
        out.append(-2 * z * out[m + 1] - 2 * (m + 1) * out[m])
    return out


def complex_erf(z):
    """erf for complex arguments, via w: erf(z) = 1 - exp(-z^2) w(iz)."""
    z = np.asarray(z, dtype=complex)
    upper = z.real >= 0
    # reflect into the half plane where w(iz) does not overflow
    zz = np.where(upper, z, -z)
    val = 1 - np.exp(-zz * zz) * faddeeva(1j * zz)
    return np.where(upper, val, -val)


def mp_faddeeva(z):
    z = mp.mpc(z)
    return mp.exp(-z * z) * mp.erfc(-1j * z)


def mp_faddeeva_derivatives(z, n):
    z = mp.mpc(z)
    out = [mp_faddeeva(z)]
    if n >= 1:
        out.append(-2 * z * out[0] + 2j / mp.sqrt(mp.pi))
    for m in range(n - 1):
        out.append(-2 * z * out[m + 1] - 2 * (m + 1) * out[m])
    return out
