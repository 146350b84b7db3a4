import numpy as np
import pytest

from ddnoise.errors import InputError
from ddnoise.scaling import (StarSystem, fit_quadratic_scaling, gamma_ratio,
                             read_scaling_data)


def test_noiseless_quadratic_recovery():
    ls = np.linspace(-6.0, 6.0, 11)
    s = 0.06 * ls**2 + 3.37
    fit = fit_quadratic_scaling(ls, s)
    np.testing.assert_allclose(fit.curvature, 0.06, rtol=1e-10)
    np.testing.assert_allclose(fit.offset, 3.37, rtol=1e-10)


def test_weighted_fit_and_prediction():
    rng = np.random.default_rng(12)
    ls = np.linspace(-8.0, 8.0, 15)
    err = np.full_like(ls, 0.05)
    s = 0.06 * ls**2 + 3.37 + 0.05 * rng.standard_normal(ls.shape)
    fit = fit_quadratic_scaling(ls, s, err)
    np.testing.assert_allclose(fit.curvature, 0.06, atol=0.01)
    np.testing.assert_allclose(fit.offset, 3.37, atol=0.1)
    assert fit.curvature_err > 0 and fit.offset_err > 0
    value, verr = fit.predict(2.0)
    np.testing.assert_allclose(value, fit.curvature * 4.0 + fit.offset,
                               rtol=1e-12)
    assert verr > 0
    with pytest.warns(UserWarning, match="extrapolated"):
        fit.predict(9.5)


def test_fit_validation():
    with pytest.raises(InputError):
        fit_quadratic_scaling([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(InputError):
        fit_quadratic_scaling([1.0, -1.0, 1.0], [1.0, 1.0, 1.0])


def test_gamma_ratio_value():
    # 17.235 MHz/T over 42.576 MHz/T
    np.testing.assert_allclose(gamma_ratio("31P", "1H"), 0.40481, atol=2e-4)
    assert gamma_ratio("1H", "1H") == 1.0
    with pytest.raises(InputError):
        gamma_ratio("42X", "1H")


def test_lopsidedness_pairing_and_bounds():
    sys10 = StarSystem(n_spins=10, memory="31P", ancilla="1H")
    ratio = gamma_ratio("31P", "1H")
    ls = [sys10.lopsidedness(k) for k in range(10)]
    assert len(ls) == 10
    # symmetric flip pairing around the gyromagnetic offset
    for k in range(10):
        np.testing.assert_allclose(ls[k] + ls[9 - k], 2.0 * ratio, rtol=1e-12)
    # extreme branches: all satellites aligned one way or the other
    np.testing.assert_allclose(max(ls), ratio + 9.0, rtol=1e-12)
    np.testing.assert_allclose(min(ls), ratio - 9.0, rtol=1e-12)
    with pytest.raises(InputError):
        sys10.lopsidedness(10)
    with pytest.raises(InputError):
        StarSystem(n_spins=0)


def test_read_scaling_data(tmp_path):
    p = tmp_path / "scale.csv"
    p.write_text("l,s_low,s_err\n-2.0,3.61,0.05\n0.0,3.37,0.05\n"
                 "2.0,3.61,0.05\n", encoding="utf-8")
    ls, s_low, s_err = read_scaling_data(p)
    np.testing.assert_array_equal(ls, [-2.0, 0.0, 2.0])
    np.testing.assert_array_equal(s_err, [0.05, 0.05, 0.05])
    p.write_text("l,s_low\n1.0,2.0\n", encoding="utf-8")
    with pytest.raises(InputError, match="scale.csv:1"):
        read_scaling_data(p)
    p.write_text("l,s_low,s_err\n1.0,nope,0.05\n", encoding="utf-8")
    with pytest.raises(InputError, match="scale.csv:2"):
        read_scaling_data(p)
