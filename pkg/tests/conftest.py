import numpy as np
import pytest

from ddnoise.forward import decay_rate_asymptotic
from ddnoise.sequences import make_cpmg
from ddnoise.spectrum import LorentzianTerm, SpectralDensity


@pytest.fixture
def two_term_spectrum():
    return SpectralDensity((LorentzianTerm(0.0, 30.0, 25.0),
                            LorentzianTerm(90.0, 25.0, 12.0)))


def synthetic_cpmg_measurements(spectrum, taus, noise, seed):
    """T2 points from the forward model with multiplicative Gaussian noise."""
    from ddnoise.invert import DecayMeasurement

    rng = np.random.default_rng(seed)
    out = []
    for tau in np.asarray(taus, dtype=float):
        rate = decay_rate_asymptotic(spectrum, make_cpmg(float(tau)))
        t2 = float((1.0 / rate) * (1.0 + noise * rng.standard_normal()))
        out.append(DecayMeasurement(tau=float(tau), t2=t2,
                                    t2_err=noise * t2))
    return out


def write_measurement_csv(path, measurements, unit="s"):
    scale = {"s": 1.0, "ms": 1e3}[unit]
    lines = [f"tau_{unit},t2_{unit},t2_err_{unit},label"]
    for m in measurements:
        lines.append(f"{float(m.tau * scale)!r},{float(m.t2 * scale)!r},"
                     f"{float(m.t2_err * scale)!r},{m.label}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
