import math

import numpy as np
import pytest

from ddnoise.errors import InputError, OracleFitError
from ddnoise.forward import decay_rate_asymptotic
from ddnoise.sequences import free_evolution, make_cpmg, modulation_profile
from ddnoise.simulate import (WIENER_KHINCHIN_NORM, CoherenceTrace,
                              NoiseSynthesisSpec, extract_t2,
                              measure_coherence, synthesize_trajectories)
from ddnoise.spectrum import (CallableSpectrum, LorentzianTerm,
                              SpectralDensity, autocorrelation_of)


def make_spec(**kw):
    # width 40 keeps dt * max_significant_omega = 0.08, inside the 0.1 bound
    base = dict(spectrum=SpectralDensity((LorentzianTerm(0.0, 40.0, 10.0),)),
                duration=0.02, dt=2e-4, n_trajectories=8, master_seed=1)
    base.update(kw)
    return NoiseSynthesisSpec(**base)


def test_spec_validation():
    with pytest.raises(InputError, match="need dt <"):
        make_spec(dt=0.01)
    with pytest.raises(InputError):
        make_spec(n_trajectories=0)
    with pytest.raises(InputError):
        make_spec(master_seed=-1)
    with pytest.raises(InputError):
        make_spec(duration=1e-5)
    flat = CallableSpectrum(lambda om: np.ones_like(np.asarray(om, float)))
    with pytest.raises(InputError):
        make_spec(spectrum=flat)
    one_sided = SpectralDensity((LorentzianTerm(0.0, 50.0, 1.0),),
                                symmetrized=False)
    with pytest.raises(InputError):
        make_spec(spectrum=one_sided)


def test_n_samples():
    spec = make_spec(duration=0.02, dt=2e-4)
    assert spec.n_samples == 101


def test_same_seed_bit_identical():
    a = synthesize_trajectories(make_spec()).realize(0, 8)
    b = synthesize_trajectories(make_spec()).realize(0, 8)
    assert np.array_equal(a, b)
    c = synthesize_trajectories(make_spec(master_seed=2)).realize(0, 8)
    assert not np.array_equal(a, c)


def test_realize_chunk_invariant():
    ens = synthesize_trajectories(make_spec())
    whole = ens.realize(0, 8)
    parts = np.concatenate([ens.realize(0, 3), ens.realize(3, 8)])
    assert np.array_equal(whole, parts)
    with pytest.raises(InputError):
        ens.realize(0, 9)


def test_zero_spectrum_keeps_full_coherence():
    spec = make_spec(spectrum=SpectralDensity.zero(), n_trajectories=16)
    ens = synthesize_trajectories(spec)
    prof = modulation_profile(make_cpmg(0.001))
    trace = measure_coherence(ens, prof, 5)
    assert np.all(trace.coherence == 1.0)
    assert np.all(trace.stderr == 0.0)


def test_threads_do_not_change_results():
    spec = make_spec(duration=0.04, n_trajectories=300, master_seed=9)
    ens = synthesize_trajectories(spec)
    prof = modulation_profile(make_cpmg(0.002))
    one = measure_coherence(ens, prof, 5, threads=1)
    three = measure_coherence(ens, prof, 5, threads=3)
    assert np.array_equal(one.coherence, three.coherence)
    assert np.array_equal(one.stderr, three.stderr)


def test_ou_autocovariance_recovery():
    # ensemble/time-averaged autocovariance vs the closed form, and the
    # relaxation rate from its log-slope within 5 percent
    lam = 50.0
    s = SpectralDensity((LorentzianTerm(0.0, lam, 10.0),))
    spec = NoiseSynthesisSpec(spectrum=s, duration=0.4, dt=1.9e-4,
                              n_trajectories=10000, master_seed=42)
    ens = synthesize_trajectories(spec)
    n_lags = 106
    ac = ens.sample_autocorrelation(n_lags)
    lags = np.arange(n_lags) * spec.dt
    g = autocorrelation_of(s)
    np.testing.assert_allclose(ac, WIENER_KHINCHIN_NORM * g(lags), rtol=0.05)
    lam_est = -np.polyfit(lags, np.log(ac / ac[0]), 1)[0]
    np.testing.assert_allclose(lam_est, lam, rtol=0.05)


def test_free_evolution_rate_matches_prediction():
    s = SpectralDensity((LorentzianTerm(0.0, 2000.0, 400000.0),))
    seq = free_evolution(0.001)
    rate = decay_rate_asymptotic(s, seq)
    spec = NoiseSynthesisSpec(spectrum=s, duration=0.1, dt=0.001 / 205,
                              n_trajectories=4000, master_seed=43)
    trace = measure_coherence(synthesize_trajectories(spec),
                              modulation_profile(seq), 100)
    t2, _ = extract_t2(trace)
    np.testing.assert_allclose(1.0 / t2, rate, rtol=0.10)


def test_cpmg_suppresses_slow_noise():
    # pulses far above the spectral support: the accumulated exponent drops
    # by far more than 10x against free evolution over the same total time
    s = SpectralDensity((LorentzianTerm(0.0, 20.0, 1610.0),))
    free_spec = NoiseSynthesisSpec(spectrum=s, duration=0.12, dt=4.8e-4,
                                   n_trajectories=10000, master_seed=44)
    tr_free = measure_coherence(synthesize_trajectories(free_spec),
                                modulation_profile(free_evolution(0.012)), 10)
    cpmg_spec = NoiseSynthesisSpec(spectrum=s, duration=0.12, dt=4e-4,
                                   n_trajectories=10000, master_seed=45)
    tr_cpmg = measure_coherence(synthesize_trajectories(cpmg_spec),
                                modulation_profile(make_cpmg(0.010)), 3)
    chi_free = -math.log(tr_free.coherence[-1])
    chi_cpmg = -math.log(tr_cpmg.coherence[-1])
    assert chi_cpmg > 3.0 * tr_cpmg.stderr[-1]  # resolved, not noise
    assert chi_free / chi_cpmg > 10.0


def test_oracle_matches_forward_model_single_case():
    lam, tau = 10.0, 0.005
    seq = make_cpmg(tau)
    prof = modulation_profile(seq)
    unit = SpectralDensity((LorentzianTerm(0.0, lam, 1.0),))
    w = 2.5 / (64 * prof.cell) / decay_rate_asymptotic(unit, seq)
    s = SpectralDensity((LorentzianTerm(0.0, lam, w),))
    rate = decay_rate_asymptotic(s, seq)
    dt = tau / math.ceil(tau / min(0.099 / (10.0 * lam), tau / 16.0))
    spec = NoiseSynthesisSpec(spectrum=s, duration=64 * prof.cell, dt=dt,
                              n_trajectories=10000, master_seed=770)
    trace = measure_coherence(synthesize_trajectories(spec), prof, 64)
    t2, _ = extract_t2(trace)
    np.testing.assert_allclose(1.0 / t2, rate, rtol=0.05)
    assert np.all(np.abs(trace.imag_mean) < 0.05)


def test_measure_coherence_validation():
    ens = synthesize_trajectories(make_spec())
    prof = modulation_profile(make_cpmg(0.001))
    with pytest.raises(InputError):
        measure_coherence(ens, prof, 0)
    with pytest.raises(InputError, match="shorter"):
        measure_coherence(ens, prof, 100)
    tiny = modulation_profile(make_cpmg(1.25e-5))
    with pytest.raises(InputError, match="too coarse"):
        measure_coherence(ens, tiny, 1)


def trace_from(times, coherence, stderr):
    t = np.asarray(times, float)
    w = np.asarray(coherence, float)
    e = np.asarray(stderr, float)
    return CoherenceTrace(times=t, coherence=w, stderr=e,
                          imag_mean=np.zeros_like(w), n_trajectories=1000)


def test_extract_t2_exact_curve():
    t = np.linspace(0.0, 2.0, 41)
    tr = trace_from(t, np.exp(-t / 0.4), np.full_like(t, 1e-3))
    t2, err = extract_t2(tr)
    np.testing.assert_allclose(t2, 0.4, rtol=1e-9)
    assert err > 0.0
    # unweighted path: zero reported errors fall back to residual scaling
    tr0 = trace_from(t, np.exp(-t / 0.4), np.zeros_like(t))
    t2u, _ = extract_t2(tr0)
    np.testing.assert_allclose(t2u, 0.4, rtol=1e-9)


def test_extract_t2_failure_modes():
    t = np.linspace(0.0, 1.0, 9)
    with pytest.raises(OracleFitError, match="no decay"):
        extract_t2(trace_from(t, np.full_like(t, 0.99), np.full_like(t, 1e-3)))
    with pytest.raises(OracleFitError, match="too few"):
        extract_t2(trace_from(t, np.where(t < 0.5, 1.0, 0.01),
                              np.full_like(t, 1e-3)))
    with pytest.raises(OracleFitError, match="does not decay"):
        extract_t2(trace_from(t, np.linspace(0.5, 0.9, 9),
                              np.full_like(t, 1e-3)))
    shallow = trace_from(np.linspace(0.1, 0.5, 5),
                         np.linspace(0.94, 0.90, 5), np.full(5, 0.05))
    with pytest.raises(OracleFitError, match="poorly"):
        extract_t2(shallow)
