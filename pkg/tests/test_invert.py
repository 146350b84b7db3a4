import math

import numpy as np
import pytest

from conftest import synthetic_cpmg_measurements, write_measurement_csv
from ddnoise.errors import InputError
from ddnoise.invert import (DecayMeasurement, bootstrap_band,
                            extrapolation_mask, fit_lorentzian_model,
                            read_measurements, zeroth_order_spectrum)
from ddnoise.spectrum import LorentzianTerm, SpectralDensity


def test_measurement_validation():
    with pytest.raises(InputError):
        DecayMeasurement(tau=0.0, t2=1.0, t2_err=0.1)
    with pytest.raises(InputError):
        DecayMeasurement(tau=0.01, t2=-1.0, t2_err=0.1)
    with pytest.raises(InputError):
        DecayMeasurement(tau=0.01, t2=1.0, t2_err=-0.1)
    assert DecayMeasurement(tau=0.01, t2=1.0, t2_err=0.0).label == "cpmg"


def test_read_measurements_units(tmp_path):
    meas = [DecayMeasurement(tau=0.004, t2=0.5, t2_err=0.01),
            DecayMeasurement(tau=0.02, t2=1.25, t2_err=0.02)]
    p_s = tmp_path / "data_s.csv"
    p_ms = tmp_path / "data_ms.csv"
    write_measurement_csv(p_s, meas, unit="s")
    write_measurement_csv(p_ms, meas, unit="ms")
    back_s = read_measurements(p_s, "s")
    back_ms = read_measurements(p_ms, "ms")
    assert [m.tau for m in back_s] == [0.004, 0.02]
    np.testing.assert_allclose([m.tau for m in back_ms], [0.004, 0.02],
                               rtol=1e-15)
    np.testing.assert_allclose([m.t2_err for m in back_ms], [0.01, 0.02],
                               rtol=1e-15)


def test_read_measurements_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("tau_s,t2_s,t2_err_s\n0.01,1.0,0.1\n", encoding="utf-8")
    with pytest.raises(InputError, match="bad.csv:1"):
        read_measurements(p, "s")
    p.write_text("tau_s,t2_s,t2_err_s,label\n0.01,oops,0.1,cpmg\n",
                 encoding="utf-8")
    with pytest.raises(InputError, match="bad.csv:2"):
        read_measurements(p, "s")
    p.write_text("tau_s,t2_s,t2_err_s,label\n0.01,1.0,0.1\n",
                 encoding="utf-8")
    with pytest.raises(InputError, match="bad.csv:2"):
        read_measurements(p, "s")
    p.write_text("tau_ms,t2_ms,t2_err_ms,label\n1.0,10.0,0.5,cpmg\n",
                 encoding="utf-8")
    with pytest.raises(InputError, match="tau_s"):
        read_measurements(p, "s")
    with pytest.raises(InputError):
        read_measurements(tmp_path / "missing.csv", "s")


def test_read_measurements_skips_comments(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("# provenance line\ntau_s,t2_s,t2_err_s,label\n"
                 "# another comment\n0.01,1.0,0.1,cpmg\n", encoding="utf-8")
    assert len(read_measurements(p, "s")) == 1


def test_zeroth_order_formulas():
    meas = [DecayMeasurement(tau=0.02, t2=2.0, t2_err=0.2),
            DecayMeasurement(tau=0.004, t2=0.5, t2_err=0.05)]
    est = zeroth_order_spectrum(meas)
    # sorted by omega: tau = 20 ms maps to the lower frequency
    np.testing.assert_allclose(est.omegas,
                               [math.pi / 0.04, math.pi / 0.008], rtol=1e-15)
    np.testing.assert_allclose(est.s_values,
                               [math.pi**2 / (4 * 2.0),
                                math.pi**2 / (4 * 0.5)], rtol=1e-15)
    np.testing.assert_allclose(est.s_errs[0],
                               math.pi**2 / 4 * 0.2 / 2.0**2, rtol=1e-15)


def test_fit_recovers_single_term():
    truth = SpectralDensity((LorentzianTerm(60.0, 25.0, 40.0),))
    meas = synthetic_cpmg_measurements(truth, np.geomspace(0.002, 0.5, 30),
                                       noise=0.0, seed=0)
    meas = [DecayMeasurement(m.tau, m.t2, 0.01 * m.t2) for m in meas]
    fit = fit_lorentzian_model(meas, n_terms=1, seed=3)
    assert fit.converged
    term = fit.spectrum.terms[0]
    np.testing.assert_allclose(term.center, 60.0, rtol=1e-3, atol=0.05)
    np.testing.assert_allclose(term.width, 25.0, rtol=1e-3)
    np.testing.assert_allclose(term.weight, 40.0, rtol=1e-3)
    assert fit.chi2 < 1e-8


def test_auto_selection_stops_at_one_term():
    truth = SpectralDensity((LorentzianTerm(60.0, 25.0, 40.0),))
    meas = synthetic_cpmg_measurements(truth, np.geomspace(0.002, 0.5, 30),
                                       noise=0.015, seed=0)
    fit = fit_lorentzian_model(meas, n_terms="auto", max_terms=3, seed=7)
    assert fit.n_terms == 1


def test_fit_validation():
    truth = SpectralDensity((LorentzianTerm(60.0, 25.0, 40.0),))
    meas = synthetic_cpmg_measurements(truth, np.geomspace(0.002, 0.5, 5),
                                       noise=0.01, seed=1)
    with pytest.raises(InputError):
        fit_lorentzian_model(meas, n_terms=2)  # needs >= 3 points per term
    with pytest.raises(InputError):
        fit_lorentzian_model(meas, n_terms=0)
    with pytest.raises(InputError):
        fit_lorentzian_model(meas, n_terms="five")
    with pytest.raises(InputError):
        fit_lorentzian_model([], n_terms=1)


def test_extrapolation_mask_band_edges():
    meas = [DecayMeasurement(tau=0.002, t2=1.0, t2_err=0.01),
            DecayMeasurement(tau=0.2, t2=2.0, t2_err=0.02)]
    lo = math.pi / (2 * 0.2)
    hi = math.pi / (2 * 0.002)
    om = np.array([0.999 * lo, 1.001 * lo, 0.999 * hi, 1.001 * hi])
    np.testing.assert_array_equal(extrapolation_mask(om, meas),
                                  [True, False, False, True])


def test_bootstrap_band_envelope_and_validation():
    truth = SpectralDensity((LorentzianTerm(0.0, 40.0, 30.0),))
    meas = synthetic_cpmg_measurements(truth, np.geomspace(0.003, 0.3, 16),
                                       noise=0.02, seed=4)
    fit = fit_lorentzian_model(meas, n_terms=1, seed=5, n_starts=4)
    grid = np.geomspace(3.0, 1000.0, 40)
    band = bootstrap_band(meas, fit, grid, n_boot=100, seed=6)
    assert band.n_ok + band.n_failed == 100
    assert np.all(band.s_lo <= band.s_fit + 1e-300)
    assert np.all(band.s_fit <= band.s_hi + 1e-300)
    with pytest.raises(InputError):
        bootstrap_band(meas, fit, grid, n_boot=50, seed=6)


def test_bootstrap_band_collapses_without_errors():
    truth = SpectralDensity((LorentzianTerm(0.0, 40.0, 30.0),))
    meas = synthetic_cpmg_measurements(truth, np.geomspace(0.003, 0.3, 16),
                                       noise=0.0, seed=4)
    meas = [DecayMeasurement(m.tau, m.t2, 0.0) for m in meas]
    fit = fit_lorentzian_model(meas, n_terms=1, seed=5, n_starts=4)
    grid = np.geomspace(3.0, 1000.0, 25)
    band = bootstrap_band(meas, fit, grid, n_boot=100, seed=6)
    assert np.array_equal(band.s_lo, band.s_fit)
    assert np.array_equal(band.s_hi, band.s_fit)
