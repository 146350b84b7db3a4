"""Noise spectroscopy and coherence prediction for dynamically decoupled spins.

The package turns T2 measurements taken under pulse sequences into a noise
spectral density (zeroth-order sampling plus a Lorentzian-mixture fit), and
turns a spectral density back into coherence predictions for arbitrary
sequences.  A Monte-Carlo dephasing simulator with exactly known input
statistics closes the loop for validation.
"""

from .errors import (ConvergenceError, DDNoiseError, InputError,
                     OracleFitError, QuadratureError)
from .forward import (DecayPrediction, SPECTRAL_OVERLAP_PREFACTOR,
                      decay_exponent_finite, decay_rate_asymptotic,
                      decay_rate_cpmg_series, predict_dd_performance)
from .invert import (DecayMeasurement, FitResult, SpectrumBand,
                     ZerothOrderEstimate, bootstrap_band, extrapolation_mask,
                     fit_lorentzian_model, read_measurements,
                     zeroth_order_spectrum)
from .scaling import (GYROMAGNETIC_MHZ_PER_T, ScalingFit, StarSystem,
                      fit_quadratic_scaling, gamma_ratio, read_scaling_data)
from .sequences import (HarmonicWeights, ModulationProfile, PulseSequence,
                        cpmg_weight_closed_form, filter_function_sq,
                        free_evolution, harmonic_weights, make_cpmg, make_udd,
                        modulation_profile, parse_sequence_spec)
from .simulate import (CoherenceTrace, NoiseEnsemble, NoiseSynthesisSpec,
                       WIENER_KHINCHIN_NORM, extract_t2, measure_coherence,
                       synthesize_trajectories)
from .spectrum import (AutocorrelationFn, CallableSpectrum, LorentzianTerm,
                       SpectralDensity, autocorrelation_of, eval_spectrum,
                       read_spectrum_file, write_spectrum_file)

__version__ = "0.1.0"

__all__ = [
    "AutocorrelationFn",
    "CallableSpectrum",
    "CoherenceTrace",
    "ConvergenceError",
    "DDNoiseError",
    "DecayMeasurement",
    "DecayPrediction",
    "FitResult",
    "GYROMAGNETIC_MHZ_PER_T",
    "HarmonicWeights",
    "InputError",
    "LorentzianTerm",
    "ModulationProfile",
    "NoiseEnsemble",
    "NoiseSynthesisSpec",
    "OracleFitError",
    "PulseSequence",
    "QuadratureError",
    "SPECTRAL_OVERLAP_PREFACTOR",
    "ScalingFit",
    "SpectralDensity",
    "SpectrumBand",
    "StarSystem",
    "WIENER_KHINCHIN_NORM",
    "ZerothOrderEstimate",
    "autocorrelation_of",
    "bootstrap_band",
    "cpmg_weight_closed_form",
    "decay_exponent_finite",
    "decay_rate_asymptotic",
    "decay_rate_cpmg_series",
    "eval_spectrum",
    "extract_t2",
    "extrapolation_mask",
    "filter_function_sq",
    "fit_lorentzian_model",
    "fit_quadratic_scaling",
    "free_evolution",
    "gamma_ratio",
    "harmonic_weights",
    "make_cpmg",
    "make_udd",
    "measure_coherence",
    "modulation_profile",
    "parse_sequence_spec",
    "predict_dd_performance",
    "read_measurements",
    "read_scaling_data",
    "read_spectrum_file",
    "synthesize_trajectories",
    "write_spectrum_file",
    "zeroth_order_spectrum",
]
