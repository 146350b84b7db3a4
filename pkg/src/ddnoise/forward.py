"""Decay prediction from a noise spectrum: harmonic sums and finite-time integrals.

With the process convention S(omega) = integral gamma(tau) exp(-i omega tau)
dtau (gamma the noise autocovariance) and the plain filter function
F(omega, t) = integral_0^t f(u) exp(-i omega u) du, the coherence is
W(t) = exp(-chi(t)) with

    chi(t) = SPECTRAL_OVERLAP_PREFACTOR * integral S(omega) |F(omega, t)|^2 domega

over the whole real line.  In the many-cycle limit the Dirichlet comb
concentrates the integral on the modulation harmonics and

    chi(t)/t -> sum_{k>=1} S(omega_k) A_k^2  +  0.5 * mean(f)^2 * S(0)

with A_k^2 the squared Fourier coefficients of f (zero-mean pulse trains drop
the DC term).  A flat spectrum S0 under CPMG then decays at exactly S0/2.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError, QuadratureError
from .sequences import (PulseSequence, filter_function_sq, harmonic_weights,
                        make_cpmg, make_udd, modulation_profile)
from .spectrum import SpectralDensity

# Single calibration constant tying the spectrum normalization to the decay
# exponent.  Pinned three ways (regression-tested): the CPMG closed form
# A_k^2 = 4/(pi^2 k^2), the flat-spectrum rate S0/2, and the Monte-Carlo
# dephasing oracle.  Do not change independently of
# ddnoise.simulate.WIENER_KHINCHIN_NORM.
SPECTRAL_OVERLAP_PREFACTOR = 1.0 / (4.0 * math.pi)


def decay_rate_asymptotic(s, seq: PulseSequence, k_max: int = 10001) -> float:
    """Asymptotic decay rate 1/T2 = sum_k S(omega_k) A_k^2 (+ DC term).

    The DC term 0.5*mean(f)^2*S(0) vanishes for every zero-mean pulse train
    (CPMG, UDD, symmetric customs); it is kept so free evolution stays
    consistent with the finite-time integral.
    """
    hw = harmonic_weights(seq, k_max=k_max)
    om = hw.omegas()
    rate = float(np.sum(np.asarray(s.evaluate(om)) * hw.weights))
    if hw.mean_sign != 0.0:
        rate += 0.5 * hw.mean_sign**2 * float(s.evaluate(0.0))
    if isinstance(s, SpectralDensity):
        for t in s.terms:
            if t.center - 3.0 * t.width > om[-1]:
                warnings.warn(
                    f"spectral term at {t.center:.3g} rad/s lies beyond the "
                    f"k_max={k_max} harmonic cutoff ({om[-1]:.3g} rad/s); "
                    "the harmonic sum misses that weight", stacklevel=2)
    return rate


def decay_rate_cpmg_series(s, tau, l_max: int = 1500):
    """CPMG rate via the odd-harmonic series (4/pi^2) sum_l S(omega_l)/(2l+1)^2.

    omega_l = pi (2l+1) / (2 tau); vectorized over tau.
    """
    if l_max < 0:
        raise InputError(f"l_max must be >= 0, got {l_max}")
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(t <= 0):
        raise InputError("tau values must be > 0")
    odd = 2.0 * np.arange(l_max + 1, dtype=float) + 1.0
    om = 0.5 * math.pi * odd[None, :] / t[:, None]
    sv = np.asarray(s.evaluate(om))
    rate = (4.0 / math.pi**2) * np.sum(sv / odd[None, :] ** 2, axis=1)
    return rate if np.ndim(tau) else float(rate[0])


# ---------------------------------------------------------------------------
# Finite-time exponent: comb-aware panel quadrature
# ---------------------------------------------------------------------------

_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


def _gl_panels(fn, lo: np.ndarray, hi: np.ndarray):
    """Gauss-Legendre 8 and 16 point estimates on each [lo_i, hi_i]."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    out = []
    for nodes, wts in (_GL8, _GL16):
        x = mid[:, None] + half[:, None] * nodes[None, :]
        vals = fn(x.ravel()).reshape(x.shape)
        out.append(half * (vals @ wts))
    return out[0], out[1]


def decay_exponent_finite(s, seq: PulseSequence, n_cycles: int,
                          rel_tol: float = 1e-6, omega_max: float | None = None,
                          s_infinity: float = 0.0) -> float:
    """Dimensionless decay exponent chi(n_cycles * cycle) by numerical quadrature.

    The integrand S(omega)*|F|^2 oscillates on the scale 2*pi/(n*cycle), so
    panel boundaries are forced at every zero of the Dirichlet comb factor
    (plus the Lorentzian feature points), with adaptive bisection of panels
    that fail an embedded GL8/GL16 error test.

    ``s_infinity`` subtracts a white background in closed form (Parseval:
    the full-line integral of |F|^2 is 2*pi*t), which keeps flat-like spectra
    tractable; the quadrature then only sees S - s_infinity.

    Raises QuadratureError (with the achieved tolerance attached) if the
    requested relative tolerance cannot be reached.
    """
    if n_cycles < 1:
        raise InputError(f"n_cycles must be >= 1, got {n_cycles}")
    total_time = n_cycles * seq.cycle
    prof = modulation_profile(seq)

    def integrand(om):
        vals = np.asarray(s.evaluate(om)) - s_infinity
        return vals * filter_function_sq(seq, om, n_cycles)

    if isinstance(s, SpectralDensity) and not s.terms and s_infinity == 0.0:
        return 0.0

    # Comb-zero spacing; panel edges at the zeros resolve the oscillation.
    dzero = 2.0 * math.pi / (n_cycles * seq.cycle)
    omega_floor = 30.0 * 2.0 * math.pi / prof.period
    if omega_max is None:
        if isinstance(s, SpectralDensity):
            omega_max = max(s.max_significant_omega, omega_floor)
        else:
            omega_max = omega_floor
    feature_edges = []
    if isinstance(s, SpectralDensity):
        for t in s.terms:
            for mult in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
                for sgn in (-1.0, 1.0):
                    e = t.center + sgn * mult * t.width
                    if 0.0 < e:
                        feature_edges.append(e)

    n_pulses_bound = 2.0 * (seq.n_pulses + 2)

    def tail_estimate(om_hi):
        # Envelope bound: |F1|^2 <= (2(Np+2)/omega)^2, mean Dirichlet gain ~ n.
        grid = om_hi * np.logspace(0.0, 2.0, 33)
        sv = np.abs(np.asarray(s.evaluate(grid)) - s_infinity)
        integ = np.trapezoid(sv / grid**2, grid) + sv[-1] / grid[-1]
        return n_cycles * n_pulses_bound**2 * integ / (2.0 * math.pi)

    # Closed-form white part plus adaptive extension of the integration window.
    chi_white = 0.5 * s_infinity * total_time
    omega_hi = float(omega_max)
    for _ in range(24):
        edges = np.arange(dzero, omega_hi, dzero)
        edges = np.unique(np.concatenate(
            ([0.0], edges, [e for e in feature_edges if e < omega_hi], [omega_hi])))
        lo, hi = edges[:-1].copy(), edges[1:].copy()
        i8, i16 = _gl_panels(integrand, lo, hi)
        total = float(np.sum(i16))
        scale = abs(total) + abs(chi_white) + 1e-300
        if tail_estimate(omega_hi) <= 0.25 * rel_tol * scale:
            break
        omega_hi *= 2.0
    else:
        raise QuadratureError(
            "integration window kept growing without the tail falling below "
            f"tolerance {rel_tol:g}; pass a looser rel_tol or omega_max",
            achieved_tol=tail_estimate(omega_hi) / scale)

    # Bisect the worst panels until the embedded error test passes.
    for _ in range(16):
        err = np.abs(i16 - i8)
        scale = abs(float(np.sum(i16))) + abs(chi_white) + 1e-300
        achieved = float(np.sum(err)) / scale
        if achieved <= rel_tol:
            break
        bad = err > 0.5 * rel_tol * scale / len(err)
        if not np.any(bad) or len(err) > 500_000:
            break
        mid = 0.5 * (lo[bad] + hi[bad])
        a8, a16 = _gl_panels(integrand, np.concatenate([lo[bad], mid]),
                             np.concatenate([mid, hi[bad]]))
        lo = np.concatenate([lo[~bad], lo[bad], mid])
        hi = np.concatenate([hi[~bad], mid, hi[bad]])
        i8 = np.concatenate([i8[~bad], a8])
        i16 = np.concatenate([i16[~bad], a16])
    achieved = float(np.sum(np.abs(i16 - i8))) / (
        abs(float(np.sum(i16))) + abs(chi_white) + 1e-300)
    if achieved > rel_tol:
        raise QuadratureError(
            f"quadrature reached {achieved:.2e} relative error, "
            f"requested {rel_tol:g}", achieved_tol=achieved)
    # Factor 2: the window covers omega >= 0 only and S is taken even.
    return chi_white + 2.0 * SPECTRAL_OVERLAP_PREFACTOR * float(np.sum(i16))


# ---------------------------------------------------------------------------
# Sequence-family predictions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecayPrediction:
    """Asymptotic rates over a grid of cycle durations for one family."""

    family: str
    cycles: np.ndarray
    rates: np.ndarray

    @property
    def t2s(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.rates > 0.0, 1.0 / self.rates, np.inf)


def sequence_family(family: str):
    """Return a builder cycle -> PulseSequence for a family name."""
    fam = family.strip().lower()
    if fam == "cpmg":
        return lambda cycle: make_cpmg(cycle / 4.0)
    m = re.fullmatch(r"udd-(\d+)", fam)
    if m:
        n = int(m.group(1))
        return lambda cycle: make_udd(n, cycle)
    raise InputError(f"unknown sequence family {family!r}; use 'cpmg' or 'udd-N'")


def predict_dd_performance(s, family, cycles, k_max: int = 10001) -> DecayPrediction:
    """Asymptotic decay rates for one sequence family over cycle durations.

    ``family`` is 'cpmg' (cycle = 4*tau), 'udd-N', or a callable
    cycle -> PulseSequence.  Zero spectrum gives zero rates (infinite T2).
    """
    builder = sequence_family(family) if isinstance(family, str) else family
    name = family if isinstance(family, str) else getattr(family, "__name__", "custom")
    cyc = np.atleast_1d(np.asarray(cycles, dtype=float))
    if np.any(cyc <= 0):
        raise InputError("cycle durations must be > 0")
    rates = np.array([decay_rate_asymptotic(s, builder(c), k_max=k_max) for c in cyc])
    return DecayPrediction(family=name, cycles=cyc, rates=rates)
