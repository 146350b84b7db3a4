"""Noise-spectrum reconstruction from dynamical-decoupling T2 measurements.

Two reconstruction layers:

* a zeroth-order estimate that reads each CPMG point as a delta sample of the
  spectrum at the passband center, S(pi/(2 tau)) = pi^2 / (4 T2);
* a parametric Lorentzian-mixture fit of the measured decay rates against the
  full harmonic-comb forward model, with bootstrap confidence bands.

The fit separates linear from nonlinear structure: decay rates are linear in
the term weights, so the optimizer searches only over (center, width) pairs
and solves the weights by non-negative least squares at every step.  That
keeps the search space small and bootstrap refits cheap.

Rates are modeled with the CPMG comb; the ``label`` column in measurement
files is carried through for bookkeeping and does not change the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, nnls

from .errors import ConvergenceError, InputError
from .spectrum import LorentzianTerm, SpectralDensity

_CPMG_L_MAX = 400  # comb harmonics in the fit objective; tail is O(1/l^3)


@dataclass(frozen=True)
class DecayMeasurement:
    """One decoherence point: CPMG pulse spacing tau, fitted T2 and error."""

    tau: float
    t2: float
    t2_err: float
    label: str = "cpmg"

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise InputError(f"tau must be finite and > 0, got {self.tau}")
        if not (math.isfinite(self.t2) and self.t2 > 0.0):
            raise InputError(f"t2 must be finite and > 0, got {self.t2}")
        if not (math.isfinite(self.t2_err) and self.t2_err >= 0.0):
            raise InputError(f"t2_err must be finite and >= 0, got {self.t2_err}")


_UNIT_SCALE = {"s": 1.0, "ms": 1e-3}


def read_measurements(path, tau_unit: str = "s") -> list[DecayMeasurement]:
    """Parse a measurement CSV; every malformed line is reported by number.

    The header must be ``tau_<u>,t2_<u>,t2_err_<u>,label`` with ``<u>`` the
    chosen unit (``s`` or ``ms``).  ``#`` lines and blank lines are skipped.
    Values are converted to seconds on read.
    """
    if tau_unit not in _UNIT_SCALE:
        raise InputError(f"unknown tau unit {tau_unit!r}; expected one of "
                         f"{sorted(_UNIT_SCALE)}")
    scale = _UNIT_SCALE[tau_unit]
    sfx = f"_{tau_unit}"
    expected = [f"tau{sfx}", f"t2{sfx}", f"t2_err{sfx}", "label"]
    rows = []
    header_seen = False
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read measurement file: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if not header_seen:
                if fields != expected:
                    raise InputError(
                        f"{path}:{lineno}: bad header {fields}; expected "
                        f"{expected}")
                header_seen = True
                continue
            if len(fields) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 fields, got "
                                 f"{len(fields)}")
            try:
                tau, t2, t2_err = (float(fields[0]), float(fields[1]),
                                   float(fields[2]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            try:
                rows.append(DecayMeasurement(tau=tau * scale, t2=t2 * scale,
                                             t2_err=t2_err * scale,
                                             label=fields[3]))
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not header_seen:
        raise InputError(f"{path}: no header line found")
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


@dataclass(frozen=True, eq=False)
class ZerothOrderEstimate:
    """Passband-center point estimates S(pi/(2 tau)) = pi^2/(4 T2)."""

    omegas: np.ndarray
    s_values: np.ndarray
    s_errs: np.ndarray


def zeroth_order_spectrum(measurements) -> ZerothOrderEstimate:
    """Delta-filter reading of each measurement, sorted by frequency."""
    measurements = list(measurements)
    if not measurements:
        raise InputError("no measurements given")
    taus = np.array([m.tau for m in measurements])
    t2s = np.array([m.t2 for m in measurements])
    errs = np.array([m.t2_err for m in measurements])
    omegas = np.pi / (2.0 * taus)
    s = np.pi**2 / (4.0 * t2s)
    s_err = np.pi**2 / 4.0 * errs / t2s**2
    order = np.argsort(omegas)
    return ZerothOrderEstimate(omegas=omegas[order], s_values=s[order],
                               s_errs=s_err[order])


def _comb_grid(taus, l_max):
    """CPMG harmonic frequencies and squared weights, shape (n_tau, l_max)."""
    odd = 2 * np.arange(l_max) + 1
    omegas = np.pi * odd[None, :] / (2.0 * np.asarray(taus, dtype=float)[:, None])
    weights = 4.0 / (np.pi**2 * odd.astype(float) ** 2)
    return omegas, weights


def _rate_weights(measurements):
    """Decay rates and chi-square weights from T2 values and their errors.

    sigma(rate) = t2_err / t2^2.  Zero errors fall back to the smallest
    positive error in the set, or to unit weights when none is positive.
    """
    t2s = np.array([m.t2 for m in measurements])
    errs = np.array([m.t2_err for m in measurements])
    rates = 1.0 / t2s
    pos = errs[errs > 0.0]
    if len(pos) == 0:
        return rates, np.ones_like(rates)
    sigma = np.where(errs > 0.0, errs, pos.min()) / t2s**2
    return rates, 1.0 / sigma**2


class _CombObjective:
    """chi-square of comb-model rates, linear weights profiled out by NNLS."""

    def __init__(self, measurements, l_max):
        taus = [m.tau for m in measurements]
        self.rates, self.wts = _rate_weights(measurements)
        self.omegas, self.aw = _comb_grid(taus, l_max)
        self.sq = np.sqrt(self.wts)
        self.b = self.sq * self.rates

    def kernel(self, shape_params):
        """Rate of each tau for unit-weight terms, columns one per term."""
        cols = []
        for i in range(0, len(shape_params), 2):
            c = shape_params[i]
            w = math.exp(shape_params[i + 1])
            unit = 0.5 * w * (1.0 / ((self.omegas - c) ** 2 + w**2)
                              + 1.0 / ((self.omegas + c) ** 2 + w**2))
            cols.append((unit * self.aw).sum(axis=1))
        return np.column_stack(cols)

    def solve_weights(self, shape_params):
        kern = self.kernel(shape_params)
        amp, rnorm = nnls(kern * self.sq[:, None], self.b)
        return amp, rnorm**2

    def __call__(self, shape_params):
        return self.solve_weights(shape_params)[1]


@dataclass(frozen=True, eq=False)
class FitResult:
    """Best Lorentzian mixture for a T2 dataset.

    ``centers``/``widths``/``weights`` keep all ``n_terms`` columns even when
    NNLS zeroed a weight; ``spectrum`` drops zero-weight terms.
    """

    spectrum: SpectralDensity
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    n_terms: int
    chi2: float
    dof: int
    converged: bool

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.inf


def _build_spectrum(centers, widths, weights) -> SpectralDensity:
    terms = [LorentzianTerm(center=max(float(c), 0.0), width=float(w),
                            weight=float(a))
             for c, w, a in zip(centers, widths, weights) if a > 0.0]
    terms.sort(key=lambda t: t.center)
    return SpectralDensity(terms=tuple(terms))


def _shape_bounds(n_terms, om_lo, om_hi):
    bounds = []
    for _ in range(n_terms):
        bounds.extend([(0.0, 30.0 * om_hi),
                       (math.log(1e-4 * om_lo), math.log(30.0 * om_hi))])
    return bounds


def _initial_shapes(measurements, n_terms, rng):
    """Start points: greedy peaks of the zeroth-order curve, then jitter."""
    z = zeroth_order_spectrum(measurements)
    om, sv = z.omegas, z.s_values
    centers, widths = [], []
    avail = sv.astype(float).copy()
    for _ in range(n_terms):
        j = int(np.argmax(avail))
        centers.append(om[j])
        left = om[j - 1] if j > 0 else om[j] / 2.0
        right = om[j + 1] if j + 1 < len(om) else om[j] * 2.0
        widths.append(max(0.5 * (right - left), 0.05 * om[j]))
        avail[max(0, j - 1): j + 2] = -np.inf
        if not np.any(np.isfinite(avail)):
            avail = sv.astype(float).copy()
    base = np.ravel([(c, math.log(w)) for c, w in zip(centers, widths)])
    yield base
    while True:
        p = base.copy()
        p[0::2] *= rng.uniform(0.4, 1.8, size=n_terms)
        p[1::2] += rng.uniform(-1.5, 1.5, size=n_terms)
        yield p


def _fit_fixed_terms(measurements, n_terms, seed, n_starts, l_max):
    taus = [m.tau for m in measurements]
    om_lo = np.pi / (2.0 * max(taus))
    om_hi = np.pi / (2.0 * min(taus))
    obj = _CombObjective(measurements, l_max)
    bounds = _shape_bounds(n_terms, om_lo, om_hi)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((seed, n_terms))))
    guesses = _initial_shapes(measurements, n_terms, rng)
    best = None
    any_ok = False
    for _ in range(n_starts):
        res = minimize(obj, next(guesses), method="Nelder-Mead",
                       bounds=bounds,
                       options={"maxfev": 4000 * n_terms, "xatol": 1e-10,
                                "fatol": 1e-14})
        any_ok = any_ok or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    shape = np.asarray(best.x, dtype=float)
    amp, chi2 = obj.solve_weights(shape)
    centers = shape[0::2]
    widths = np.exp(shape[1::2])
    dof = len(measurements) - 3 * n_terms
    return FitResult(spectrum=_build_spectrum(centers, widths, amp),
                     centers=centers, widths=widths, weights=amp,
                     n_terms=n_terms, chi2=float(chi2), dof=dof,
                     converged=any_ok)


def fit_lorentzian_model(measurements, n_terms="auto", max_terms=4,
                         seed: int = 0, n_starts: int = 8,
                         l_max: int = _CPMG_L_MAX) -> FitResult:
    """Fit a Lorentzian mixture to CPMG decay rates.

    ``n_terms='auto'`` grows the mixture while each extra term improves the
    reduced chi-square by at least 20%, stopping at the first term count that
    does not.  Needs at least 3 data points per term.
    """
    measurements = list(measurements)
    if n_terms == "auto":
        if len(measurements) < 3:
            raise InputError("need at least 3 measurements to fit one term")
        best = _fit_fixed_terms(measurements, 1, seed, n_starts, l_max)
        for n in range(2, max_terms + 1):
            if len(measurements) < 3 * n:
                break
            trial = _fit_fixed_terms(measurements, n, seed, n_starts, l_max)
            improved = (best.reduced_chi2 - trial.reduced_chi2
                        >= 0.20 * best.reduced_chi2)
            if improved:
                best = trial
            else:
                break
        return best
    try:
        n = int(n_terms)
    except (TypeError, ValueError):
        raise InputError(
            f"n_terms must be 'auto' or a positive integer, got {n_terms!r}"
        ) from None
    if n < 1:
        raise InputError(f"n_terms must be >= 1, got {n_terms}")
    if len(measurements) < 3 * n:
        raise InputError(
            f"{len(measurements)} measurements cannot constrain {n} terms "
            f"(need at least {3 * n})")
    return _fit_fixed_terms(measurements, n, seed, n_starts, l_max)


@dataclass(frozen=True, eq=False)
class SpectrumBand:
    """Central fit with bootstrap percentile envelope on a frequency grid."""

    omegas: np.ndarray
    s_fit: np.ndarray
    s_lo: np.ndarray
    s_hi: np.ndarray
    n_ok: int
    n_failed: int


def _mixture_curve(centers, widths, weights, omegas):
    s = np.zeros_like(omegas)
    for c, w, a in zip(centers, widths, weights):
        if a <= 0.0:
            continue
        s += 0.5 * a * w * (1.0 / ((omegas - c) ** 2 + w**2)
                            + 1.0 / ((omegas + c) ** 2 + w**2))
    return s


def bootstrap_band(measurements, result: FitResult, omegas, n_boot: int = 200,
                   seed: int = 0, l_max: int = _CPMG_L_MAX) -> SpectrumBand:
    """(16, 84) percentile band from refits of resampled T2 values.

    Each replicate redraws every T2 from a normal truncated to positive
    values and refits from the incumbent parameters.  The envelope is widened
    to contain the central curve, so lo <= fit <= hi always holds.  With
    all-zero T2 errors the band collapses onto the fit.
    """
    measurements = list(measurements)
    if n_boot < 100:
        raise InputError(f"n_boot must be >= 100 for a stable band, got {n_boot}")
    omegas = np.asarray(omegas, dtype=float)
    s_fit = result.spectrum(omegas)
    if all(m.t2_err == 0.0 for m in measurements):
        return SpectrumBand(omegas=omegas, s_fit=s_fit, s_lo=s_fit.copy(),
                            s_hi=s_fit.copy(), n_ok=n_boot, n_failed=0)
    taus = [m.tau for m in measurements]
    om_lo = np.pi / (2.0 * max(taus))
    om_hi = np.pi / (2.0 * min(taus))
    bounds = _shape_bounds(result.n_terms, om_lo, om_hi)
    incumbent = np.ravel([(c, math.log(w)) for c, w in
                          zip(result.centers, result.widths)])
    curves = []
    n_failed = 0
    for r in range(n_boot):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, r))))
        resampled = []
        ok = True
        for m in measurements:
            t2 = m.t2
            if m.t2_err > 0.0:
                for _ in range(100):
                    t2 = rng.normal(m.t2, m.t2_err)
                    if t2 > 0.0:
                        break
                else:
                    ok = False
                    break
            resampled.append(DecayMeasurement(tau=m.tau, t2=t2,
                                              t2_err=m.t2_err, label=m.label))
        if not ok:
            n_failed += 1
            continue
        obj = _CombObjective(resampled, l_max)
        res = minimize(obj, incumbent, method="Nelder-Mead", bounds=bounds,
                       options={"maxfev": 800 * result.n_terms})
        if not np.all(np.isfinite(res.x)):
            n_failed += 1
            continue
        amp, _ = obj.solve_weights(res.x)
        curves.append(_mixture_curve(res.x[0::2], np.exp(res.x[1::2]), amp,
                                     omegas))
    if n_failed > 0.2 * n_boot:
        raise ConvergenceError(
            f"{n_failed}/{n_boot} bootstrap replicates failed; the fit is "
            f"too fragile for a confidence band")
    stack = np.vstack(curves)
    lo, hi = np.percentile(stack, [16.0, 84.0], axis=0)
    return SpectrumBand(omegas=omegas, s_fit=s_fit,
                        s_lo=np.minimum(lo, s_fit), s_hi=np.maximum(hi, s_fit),
                        n_ok=len(curves), n_failed=n_failed)


def extrapolation_mask(omegas, measurements) -> np.ndarray:
    """True where a grid frequency lies outside the sampled passband range."""
    measurements = list(measurements)
    if not measurements:
        raise InputError("no measurements given")
    taus = np.array([m.tau for m in measurements])
    om_lo = np.pi / (2.0 * taus.max())
    om_hi = np.pi / (2.0 * taus.min())
    omegas = np.asarray(omegas, dtype=float)
    return (omegas < om_lo) | (omegas > om_hi)
