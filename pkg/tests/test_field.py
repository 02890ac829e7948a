import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from udw_duality.errors import InvalidRegulatorError, InvalidSpecError
from udw_duality.field import (
    CavitySpectrum,
    Event,
    FiniteModeCavity,
    MinkowskiSpectrum,
    MinkowskiVacuum,
    feynman,
    feynman_dtau,
    lag_kernel,
    mp_lag_kernel,
    spectral_weight,
    wightman,
    wightman_dtau,
)

T = 1.0


def minkowski_closed_form(dt, dx, eps):
    return -1 / (4 * math.pi**2 * ((dt - 1j * eps) ** 2 - dx**2))


def fourier_oracle(d, s, eps=0.0, sigma2=0.0, order=0):
    """int_0^inf rho(w, d) w^order exp(-eps w - sigma2 w^2 - i w s) dw by scipy quad."""
    def rho(w):
        base = w / (4 * math.pi**2) if d == 0 else math.sin(w * d) / (4 * math.pi**2 * d)
        return base * w**order * math.exp(-eps * w - sigma2 * w * w)

    cut = 40.0 / math.sqrt(sigma2) if sigma2 else 60.0 / eps
    re = integrate.quad(lambda w: rho(w) * math.cos(w * s), 0, cut, limit=2000, epsabs=1e-13, epsrel=1e-11)[0]
    im = integrate.quad(lambda w: -rho(w) * math.sin(w * s), 0, cut, limit=2000, epsabs=1e-13, epsrel=1e-11)[0]
    return complex(re, im)


# -- models and events -----------------------------------------------------------

def test_event_accepts_scalar_position():
    assert Event(0.5, 0.3).x == (0.3, 0.0, 0.0)


def test_event_rejects_two_component_position():
    with pytest.raises(InvalidSpecError):
        Event(0.0, (1.0, 2.0))


@pytest.mark.parametrize("eps", [0.0, -1e-3, float("nan")])
def test_minkowski_rejects_nonpositive_regulator(eps):
    with pytest.raises(InvalidRegulatorError):
        MinkowskiVacuum(epsilon=eps)


def test_minkowski_rejects_mass():
    with pytest.raises(InvalidSpecError):
        MinkowskiVacuum(mass=1.0)


@pytest.mark.parametrize("kwargs", [dict(length=0.0), dict(mode_count=0), dict(mode_count=1.5)])
def test_cavity_rejects_bad_parameters(kwargs):
    with pytest.raises(InvalidSpecError):
        FiniteModeCavity(**kwargs)


def test_cavity_rejects_position_outside():
    cav = FiniteModeCavity(1.0, 3)
    with pytest.raises(InvalidSpecError):
        wightman(cav, Event(0.0, 1.5), Event(0.0, 0.5))


def test_unsupported_model_rejected():
    with pytest.raises(InvalidSpecError):
        wightman(object(), Event(0.0), Event(1.0))


# -- wightman -------------------------------------------------------------------

@pytest.mark.parametrize("x", [0.0, 1.0])
def test_single_mode_cavity_vanishes_at_node(x):
    cav = FiniteModeCavity(1.0, 1)
    assert abs(wightman(cav, Event(0.0, x), Event(0.3, x))) < 1e-15


def test_single_mode_cavity_closed_form():
    cav = FiniteModeCavity(2.0, 1)
    w = math.pi / 2.0
    a, b = Event(0.7, 0.4), Event(-0.2, 1.3)
    expected = math.sin(w * 0.4) * math.sin(w * 1.3) / (w * 2.0) * np.exp(-1j * w * 0.9)
    assert abs(wightman(cav, a, b) - expected) < 1e-14


def test_minkowski_timelike_closed_form():
    model = MinkowskiVacuum(epsilon=1e-4 * T)
    got = wightman(model, Event(T), Event(0.0))
    assert abs(got - minkowski_closed_form(T, 0.0, 1e-4 * T)) <= 1e-12 * abs(got)


def test_minkowski_equal_time_imaginary_part_vanishes():
    d = 0.8 * T
    ims = [wightman(MinkowskiVacuum(e), Event(0.0), Event(0.0, d)).imag for e in (1e-2, 1e-3, 1e-4)]
    assert all(abs(v) < 1e-12 for v in ims)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3),
    st.floats(-2, 2), st.floats(-2, 2),
)
def test_wightman_dtau_hermitian(ta, tb, xa, xb):
    model = MinkowskiVacuum(1e-2)
    a, b = Event(ta, (xa, 0.0, 0.0)), Event(tb, (xb, 0.3, 0.0))
    lhs = wightman_dtau(model, a, b)
    rhs = wightman_dtau(model, b, a).conjugate()
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_cavity_wightman_hermitian(ta, tb, xa, xb):
    cav = FiniteModeCavity(2.0, 5)
    a, b = Event(ta, xa), Event(tb, xb)
    assert abs(wightman(cav, a, b) - wightman(cav, b, a).conjugate()) < 1e-14


def test_wightman_dtau_single_mode_ratio_is_omega_squared():
    cav = FiniteModeCavity(1.0, 1)
    a, b = Event(0.4, 0.3), Event(0.0, 0.3)
    assert abs(wightman_dtau(cav, a, b) / wightman(cav, a, b) - math.pi**2) < 1e-12


def test_wightman_dtau_matches_finite_difference():
    model = MinkowskiVacuum(1e-4 * T)
    h = 1e-3 * T

    def w(s):
        return wightman(model, Event(s), Event(0.0))

    second = (-w(T + 2 * h) + 16 * w(T + h) - 30 * w(T) + 16 * w(T - h) - w(T - 2 * h)) / (12 * h * h)
    got = wightman_dtau(model, Event(T), Event(0.0))
    assert abs(got + second) <= 1e-6 * abs(got)


def test_feynman_orders_by_time():
    model = MinkowskiVacuum(1e-3)
    early, late = Event(0.0, 0.2), Event(1.0, 0.5)
    assert feynman(model, late, early) == wightman(model, late, early)
    assert feynman(model, early, late) == wightman(model, late, early)


@pytest.mark.parametrize("fn", [feynman, feynman_dtau])
def test_feynman_symmetric(fn):
    cav = FiniteModeCavity(2.0, 4)
    a, b = Event(0.3, 0.6), Event(-0.9, 1.1)
    assert fn(cav, a, b) == fn(cav, b, a)


# -- lag kernels ---------------------------------------------------------------------

@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("order", [0, 1, 2])
@pytest.mark.parametrize("d", [0.0, 0.5])
def test_pointlike_kernel_matches_spectral_integral(order, d):
    eps = 0.2
    k = lag_kernel(MinkowskiVacuum(eps), d=d, order=order)
    for s in (-0.7, 0.0, 1.3):
        got = complex(k(s))
        assert abs(got - fourier_oracle(d, s, eps=eps, order=order)) <= 1e-9 * max(abs(got), 1e-3)


@pytest.mark.parametrize("order", [0, 1, 2])
@pytest.mark.parametrize("d", [1e-5, 0.3, 1.5])
def test_smeared_kernel_matches_spectral_integral(order, d):
    sigma2 = 0.05
    k = lag_kernel(MinkowskiVacuum(), d=d, sigma2=sigma2, order=order, epsilon=0.0)
    for s in (-1.0, 0.0, 0.4, 3.0):
        got = complex(k(s))
        assert abs(got - fourier_oracle(d, s, sigma2=sigma2, order=order)) <= 1e-8 * max(abs(got), 1e-2)


@pytest.mark.parametrize("order", [0, 1, 2])
def test_mp_kernel_matches_double_kernel(order):
    model = MinkowskiVacuum(1e-2)
    k = lag_kernel(model, d=0.6, order=order)
    with mp.workdps(30):
        km = mp_lag_kernel(model, d=0.6, order=order)
        for s in (-0.5, 0.1, 0.6, 2.0):
            got = complex(km(mp.mpf(s)))
            assert abs(got - complex(k(s))) <= 1e-12 * abs(got)


def test_smeared_mp_kernel_matches_double_kernel():
    model = MinkowskiVacuum()
    k = lag_kernel(model, d=0.4, sigma2=0.02, order=2, epsilon=0.0)
    with mp.workdps(30):
        km = mp_lag_kernel(model, d=0.4, sigma2=0.02, order=2, epsilon=0.0)
        for s in (-0.3, 0.0, 0.4, 1.0):
            got = complex(km(mp.mpf(s)))
            assert abs(got - complex(k(s))) <= 1e-10 * abs(got)


def test_cavity_kernel_rejects_smearing():
    with pytest.raises(InvalidSpecError):
        lag_kernel(FiniteModeCavity(), sigma2=0.1, xa=0.2, xb=0.3)


def test_pointlike_kernel_requires_regulator():
    with pytest.raises(InvalidRegulatorError):
        lag_kernel(MinkowskiVacuum(), d=0.5, epsilon=0.0)


# -- spectral weights -----------------------------------------------------------------

def test_minkowski_density_coincident_limit():
    spec = spectral_weight(MinkowskiVacuum(1e-3))
    assert isinstance(spec, MinkowskiSpectrum)
    w = np.array([0.5, 2.0, 7.0])
    np.testing.assert_allclose(spec.density(w, 1e-9), w / (4 * math.pi**2), rtol=1e-12)
    np.testing.assert_allclose(spec.density(w, 0.0), w / (4 * math.pi**2), rtol=0)


def test_minkowski_density_node():
    spec = spectral_weight(MinkowskiVacuum(1e-3))
    assert abs(spec.density(math.pi / T, T)) < 1e-17


def test_cavity_spectrum_has_mode_count_atoms():
    cav = FiniteModeCavity(2.0, 7)
    spec = spectral_weight(cav)
    assert isinstance(spec, CavitySpectrum)
    assert spec.atom_count == 7
    freqs, weights = spec.atoms(0.3, 1.1)
    assert freqs.shape == weights.shape == (7,)


def test_spectral_weight_reproduces_time_domain():
    eps = 0.1
    model = MinkowskiVacuum(eps)
    for d, s in ((0.0, 0.7), (0.5, -0.4), (1.2, 1.2)):
        got = wightman(model, Event(s), Event(0.0, d))
        assert abs(fourier_oracle(d, s, eps=eps) - got) <= 1e-6 * abs(got)


def test_form_factor_is_gaussian():
    np.testing.assert_allclose(MinkowskiSpectrum.form_factor([0.0, 2.0], 0.25), [1.0, math.exp(-1.0)])
