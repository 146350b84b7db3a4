import math

import numpy as np
import pytest

from ddnoise.errors import InputError
from ddnoise.forward import (SPECTRAL_OVERLAP_PREFACTOR,
                             decay_exponent_finite, decay_rate_asymptotic,
                             decay_rate_cpmg_series, predict_dd_performance,
                             sequence_family)
from ddnoise.sequences import free_evolution, make_cpmg, make_udd
from ddnoise.spectrum import CallableSpectrum, LorentzianTerm, SpectralDensity


def test_flat_spectrum_cpmg_rate():
    s0 = 37.5
    flat = CallableSpectrum(lambda om: np.full_like(np.asarray(om, float), s0))
    rate = decay_rate_asymptotic(flat, make_cpmg(0.004), k_max=10001)
    np.testing.assert_allclose(rate, s0 / 2.0, rtol=1e-4)


def test_asymptotic_matches_cpmg_series(two_term_spectrum):
    for tau in (0.003, 0.02, 0.08):
        a = decay_rate_asymptotic(two_term_spectrum, make_cpmg(tau),
                                  k_max=2001)
        b = decay_rate_cpmg_series(two_term_spectrum, tau, l_max=1000)
        np.testing.assert_allclose(a, b, rtol=1e-10)


def test_cpmg_series_vectorized(two_term_spectrum):
    taus = np.array([0.004, 0.01, 0.05])
    rates = decay_rate_cpmg_series(two_term_spectrum, taus)
    singles = [decay_rate_cpmg_series(two_term_spectrum, t) for t in taus]
    np.testing.assert_allclose(rates, singles, rtol=1e-14)
    with pytest.raises(InputError):
        decay_rate_cpmg_series(two_term_spectrum, -0.01)


def test_finite_exponent_approaches_rate(two_term_spectrum):
    seq = make_cpmg(0.01)
    rate = decay_rate_asymptotic(two_term_spectrum, seq)
    chi = decay_exponent_finite(two_term_spectrum, seq, 256)
    np.testing.assert_allclose(chi / (256 * seq.cycle), rate, rtol=0.02)


def test_finite_exponent_transient_is_constant(two_term_spectrum):
    # chi(n) = rate * t + const for large n, so increments are purely linear
    seq = make_cpmg(0.01)
    rate = decay_rate_asymptotic(two_term_spectrum, seq)
    chi64 = decay_exponent_finite(two_term_spectrum, seq, 64)
    chi256 = decay_exponent_finite(two_term_spectrum, seq, 256)
    np.testing.assert_allclose(chi256 - chi64, rate * 192 * seq.cycle,
                               rtol=1e-6)


def test_free_evolution_ou_closed_form():
    # chi(t) = (g0/lam^2) (lam t - 1 + exp(-lam t)) for a centered Lorentzian
    lam, w = 120.0, 900.0
    s = SpectralDensity((LorentzianTerm(0.0, lam, w),))
    g0 = math.pi * w / (2.0 * math.pi)  # autocovariance at zero lag
    seq = free_evolution(0.005)
    for n in (1, 4, 20):
        t = n * seq.cycle
        expect = (g0 / lam**2) * (lam * t - 1.0 + math.exp(-lam * t))
        chi = decay_exponent_finite(s, seq, n)
        np.testing.assert_allclose(chi, expect, rtol=1e-6)
    rate = decay_rate_asymptotic(s, seq)
    np.testing.assert_allclose(rate, 0.5 * s.evaluate(0.0), rtol=1e-12)


def test_white_background_closed_form():
    s0 = 12.0
    flat = CallableSpectrum(lambda om: np.full_like(np.asarray(om, float), s0))
    seq = make_cpmg(0.002)
    chi = decay_exponent_finite(flat, seq, 8, s_infinity=s0)
    np.testing.assert_allclose(chi, 0.5 * s0 * 8 * seq.cycle, rtol=1e-12)


def test_zero_spectrum_paths():
    z = SpectralDensity.zero()
    seq = make_cpmg(0.01)
    assert decay_exponent_finite(z, seq, 16) == 0.0
    assert decay_rate_asymptotic(z, seq) == 0.0
    pred = predict_dd_performance(z, "cpmg", [0.01, 0.02])
    assert np.all(np.isinf(pred.t2s))


def test_predict_udd1_equals_cpmg(two_term_spectrum):
    cycles = np.geomspace(0.01, 0.3, 7)
    u = predict_dd_performance(two_term_spectrum, "udd-1", cycles)
    c = predict_dd_performance(two_term_spectrum, "cpmg", 2.0 * cycles)
    assert np.array_equal(u.rates, c.rates)


def test_sequence_family_validation():
    assert sequence_family("udd-5")(0.1).n_pulses == 5
    assert sequence_family("cpmg")(0.08).cycle == 0.08
    with pytest.raises(InputError):
        sequence_family("xy8")
    with pytest.raises(InputError):
        predict_dd_performance(SpectralDensity.zero(), "cpmg", [-1.0])


def test_beyond_cutoff_warning():
    far = SpectralDensity((LorentzianTerm(1e7, 10.0, 1.0),))
    with pytest.warns(UserWarning, match="harmonic sum"):
        decay_rate_asymptotic(far, make_cpmg(0.01), k_max=101)


def test_finite_exponent_validation(two_term_spectrum):
    with pytest.raises(InputError):
        decay_exponent_finite(two_term_spectrum, make_cpmg(0.01), 0)


def test_prefactor_consistency():
    # the chi integral of a narrow line equals S(omega_k) A_k^2 * t with the
    # frozen prefactor; a wrong constant shifts every rate by the same factor
    assert SPECTRAL_OVERLAP_PREFACTOR == 1.0 / (4.0 * math.pi)
