"""Monte-Carlo dephasing oracle: exact Gaussian noise synthesis and coherence.

Each Lorentzian spectral term is the spectrum of a (rotated) Ornstein-
Uhlenbeck process, so a trajectory of the frequency noise b(t) is drawn as a
sum of independent complex AR(1) recursions, one per term:

    z[j+1] = exp((-width + i*center) * dt) * z[j] + innovation,

which samples the grid process exactly: Gaussian, stationary, with the target
autocovariance at every lag for any dt.  The real and imaginary parts of z
are two independent trajectories, so each seeded recursion yields a pair.

The process autocovariance is gamma(tau) = WIENER_KHINCHIN_NORM * g(tau) with
g the cosine transform from :func:`ddnoise.spectrum.autocorrelation_of`; this
is the single calibration constant linking the simulator to the forward model
(S(omega) = integral gamma(tau) exp(-i omega tau) dtau).

Noise samples are float32 and the recursion runs in single-precision complex
(the AR(1) map is contractive, so rounding stays bounded near float32
resolution, far below the Monte-Carlo error floor); phase accumulation is
carried in double precision.  Ensemble statistics are reduced over fixed
128-trajectory chunks combined in index order, so results are bit-identical
for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InputError, OracleFitError
from .parallel import run_chunked
from .sequences import ModulationProfile
from .spectrum import SpectralDensity, autocorrelation_of

# gamma(tau) = WIENER_KHINCHIN_NORM * integral S(omega) cos(omega tau) domega.
# Regression-tested against the flat-spectrum closed form (rate S0/2) and the
# forward model; change only together with SPECTRAL_OVERLAP_PREFACTOR.
WIENER_KHINCHIN_NORM = 1.0 / (2.0 * math.pi)

_CHUNK = 128  # trajectories per reduction chunk; fixed for determinism


@dataclass(frozen=True)
class NoiseSynthesisSpec:
    """Parameters of one synthetic noise ensemble.

    ``dt`` must resolve the spectral support: dt * max(|center| + 10*width)
    < 0.1.  ``n_trajectories`` >= 100 is needed for any statistical claim.
    """

    spectrum: SpectralDensity
    duration: float
    dt: float
    n_trajectories: int
    master_seed: int

    def __post_init__(self):
        if not isinstance(self.spectrum, SpectralDensity):
            raise InputError("noise synthesis needs a Lorentzian SpectralDensity "
                             "(closed-form autocovariance required)")
        autocorrelation_of(self.spectrum)  # rejects non-symmetrized input
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise InputError(f"dt must be finite and > 0, got {self.dt}")
        if not (math.isfinite(self.duration) and self.duration >= self.dt):
            raise InputError(f"duration must be >= dt, got {self.duration}")
        om_sig = self.spectrum.max_significant_omega
        if self.dt * om_sig >= 0.1:
            raise InputError(
                f"dt={self.dt:g} s is too coarse for the spectrum support "
                f"(max significant omega {om_sig:g} rad/s); "
                f"need dt < {0.1 / om_sig:g} s")
        if self.n_trajectories < 1:
            raise InputError("n_trajectories must be >= 1")
        if self.master_seed < 0:
            raise InputError("master_seed must be >= 0")

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1


class NoiseEnsemble:
    """Lazy trajectory ensemble; rows are generated on demand per seed pair."""

    def __init__(self, spec: NoiseSynthesisSpec):
        self.spec = spec
        self.n_samples = spec.n_samples
        self.dt = spec.dt
        terms = spec.spectrum.terms
        # One complex AR(1) component per term.  The complex variance
        # E|z|^2 = 2 * gamma_term(0) = 2 * pi * weight * WIENER_KHINCHIN_NORM
        # makes Re(z) carry exactly the term's autocovariance.
        self._poles = np.array([complex(-t.width, t.center) for t in terms])
        self._poles = np.exp(self._poles * spec.dt)
        cvar = np.array([2.0 * math.pi * t.weight * WIENER_KHINCHIN_NORM
                         for t in terms])
        self._init_scale = np.sqrt(cvar / 2.0)
        self._innov_scale = np.sqrt(cvar * (1.0 - np.abs(self._poles) ** 2)
                                    / 2.0)
        self._num64 = np.ones(1, dtype=np.complex64)
        self._den64 = [np.array([1.0, -p], dtype=np.complex64)
                       for p in self._poles]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def _fill_pair(self, p: int, out: np.ndarray, draw: np.ndarray,
                   zeta: np.ndarray):
        """Write trajectories (2p, 2p+1) into the two float32 rows of out.

        ``draw`` (float64, 2 * n_samples) and ``zeta`` (complex64, n_samples)
        are caller-owned scratch buffers, reused across pairs.
        """
        n = self.n_samples
        if len(self._poles) == 0:
            out[:] = 0.0
            return
        rng = np.random.Generator(np.random.SFC64(
            np.random.SeedSequence((self.spec.master_seed, p))))
        total = None
        for den, s0, si in zip(self._den64, self._init_scale,
                               self._innov_scale):
            rng.standard_normal(out=draw)
            zeta.real = draw[:n]
            zeta.imag = draw[n:]
            zeta *= np.float32(si)
            zeta[0] = complex(draw[0], draw[n]) * s0  # stationary start
            z = lfilter(self._num64, den, zeta)
            total = z if total is None else total + z
        out[0] = total.real
        out[1] = total.imag

    def realize(self, lo: int, hi: int) -> np.ndarray:
        """Trajectories lo..hi-1 as an (hi-lo, n_samples) float32 array.

        A pure function of (master_seed, trajectory index): the same rows come
        back regardless of how the ensemble is chunked across workers.
        """
        if not (0 <= lo <= hi <= self.spec.n_trajectories):
            raise InputError(f"trajectory range [{lo}, {hi}) out of bounds")
        p0, p1 = lo // 2, (hi + 1) // 2
        block = np.empty((2 * (p1 - p0), self.n_samples), dtype=np.float32)
        draw = np.empty(2 * self.n_samples)
        zeta = np.empty(self.n_samples, dtype=np.complex64)
        for i, p in enumerate(range(p0, p1)):
            self._fill_pair(p, block[2 * i: 2 * i + 2], draw, zeta)
        off = lo - 2 * p0
        return block[off: off + (hi - lo)]

    def sample_autocorrelation(self, n_lags: int, max_trajectories: int | None = None):
        """Ensemble/time-averaged autocovariance estimate at lags 0..n_lags-1."""
        n_traj = self.spec.n_trajectories
        if max_trajectories is not None:
            n_traj = min(n_traj, max_trajectories)
        n = self.n_samples
        if n_lags > n:
            raise InputError("n_lags exceeds the trajectory length")
        acc = np.zeros(n_lags)

        def work(lo, hi):
            b = self.realize(lo, hi).astype(np.float64)
            out = np.empty(n_lags)
            for lag in range(n_lags):
                out[lag] = np.sum(b[:, : n - lag] * b[:, lag:]) / (n - lag)
            return out

        for part in run_chunked(work, n_traj, _CHUNK):
            acc += part
        return acc / n_traj


def synthesize_trajectories(spec: NoiseSynthesisSpec) -> NoiseEnsemble:
    """Prepare the ensemble (embedding eigenvalues); rows realize lazily."""
    return NoiseEnsemble(spec)


@dataclass(frozen=True, eq=False)
class CoherenceTrace:
    """Ensemble-averaged coherence at report times (cycle boundaries)."""

    times: np.ndarray
    coherence: np.ndarray
    stderr: np.ndarray
    imag_mean: np.ndarray  # mean sin(phi); sanity statistic, ~0 by symmetry
    n_trajectories: int


def measure_coherence(ensemble: NoiseEnsemble, profile: ModulationProfile,
                      n_cycles: int, threads: int = 1) -> CoherenceTrace:
    """Coherence <cos phi> at every cycle boundary, phi = trapezoid of f*b.

    Report times snap to the ensemble grid.  Statistics are reduced over
    fixed-size chunks in index order, so the result is independent of
    ``threads``.
    """
    if n_cycles < 1:
        raise InputError(f"n_cycles must be >= 1, got {n_cycles}")
    dt = ensemble.dt
    total = n_cycles * profile.cell
    if total > (ensemble.n_samples - 1) * dt * (1.0 + 1e-9):
        raise InputError(
            f"ensemble duration {(ensemble.n_samples - 1) * dt:g} s is shorter "
            f"than {n_cycles} cycles x {profile.cell:g} s")
    idx = np.unique(np.rint(np.arange(n_cycles + 1) * profile.cell / dt).astype(int))
    idx = idx[idx <= ensemble.n_samples - 1]
    if len(idx) < 2 or idx[-1] == 0:
        raise InputError("dt is too coarse to resolve the sequence cycle")
    n_used = int(idx[-1]) + 1
    f_grid = profile.sign_at(np.arange(n_used) * dt).astype(np.float32)
    # A node that coincides with a sign flip takes the midpoint value 0; the
    # node trapezoid then integrates the flip without an O(dt) local error.
    n_periods = int(math.floor((n_used - 1) * dt / profile.period)) + 1
    for m in range(n_periods + 1):
        for ts in profile.switch_times:
            x = (m * profile.period + ts) / dt
            j = int(round(x))
            if 0 <= j < n_used and abs(x - j) < 1e-6:
                f_grid[j] = 0.0
    n_traj = ensemble.spec.n_trajectories

    def work(lo, hi):
        fb = ensemble.realize(lo, hi)[:, :n_used]
        fb *= f_grid
        seg = np.add.reduceat(fb[:, : idx[-1]], idx[:-1], axis=1)
        prefix = np.concatenate(
            [np.zeros((fb.shape[0], 1)), np.cumsum(seg, axis=1, dtype=np.float64)],
            axis=1)
        phi = dt * (prefix + 0.5 * fb[:, idx].astype(np.float64)
                    - 0.5 * fb[:, [0]].astype(np.float64))
        c = np.cos(phi)
        return (np.sum(c, axis=0), np.sum(c * c, axis=0),
                np.sum(np.sin(phi), axis=0))

    sums = np.zeros(len(idx))
    sqs = np.zeros(len(idx))
    sins = np.zeros(len(idx))
    for part in run_chunked(work, n_traj, _CHUNK, threads=threads):
        sums += part[0]
        sqs += part[1]
        sins += part[2]
    mean = sums / n_traj
    if n_traj > 1:
        var = np.maximum(sqs - n_traj * mean**2, 0.0) / (n_traj - 1)
        err = np.sqrt(var / n_traj)
    else:
        err = np.zeros_like(mean)
    return CoherenceTrace(times=idx * dt, coherence=mean, stderr=err,
                          imag_mean=sins / n_traj, n_trajectories=n_traj)


def extract_t2(trace: CoherenceTrace, fit_window=(0.1, 0.95)):
    """T2 and its error from a weighted line fit of log-coherence vs time.

    Only points with coherence inside ``fit_window`` enter the fit (the t = 0
    point never does).  The intercept is free, absorbing the early-time
    transient.  Raises OracleFitError when the trace never leaves the upper
    window edge, has too few usable points, or does not decay.
    """
    lo, hi = fit_window
    w = np.asarray(trace.coherence, dtype=float)
    t = np.asarray(trace.times, dtype=float)
    if np.min(w) > hi:
        raise OracleFitError(
            f"no decay observed: coherence stays above {hi} over the trace window")
    mask = (w >= lo) & (w <= hi) & (t > 0.0)
    if np.count_nonzero(mask) < 3:
        raise OracleFitError(
            f"too few points ({np.count_nonzero(mask)}) with coherence in "
            f"[{lo}, {hi}] to fit a decay rate")
    tt, ww = t[mask], w[mask]
    y = np.log(ww)
    se = np.asarray(trace.stderr, dtype=float)[mask]
    if np.all(se == 0.0):
        wts = np.ones_like(y)
        sigma_known = False
    else:
        sig = np.where(se > 0.0, se, np.min(se[se > 0.0])) / ww
        wts = 1.0 / sig**2
        sigma_known = True
    # Weighted straight line y = a + b t by normal equations.
    sw = np.sum(wts)
    swt = np.sum(wts * tt)
    swtt = np.sum(wts * tt * tt)
    swy = np.sum(wts * y)
    swty = np.sum(wts * tt * y)
    det = sw * swtt - swt**2
    if det <= 0.0:
        raise OracleFitError("degenerate time axis in the fit window")
    slope = (sw * swty - swt * swy) / det
    intercept = (swtt * swy - swt * swty) / det
    if slope >= 0.0:
        raise OracleFitError("coherence does not decay over the fit window")
    var_slope = sw / det
    if not sigma_known:
        resid = y - (intercept + slope * tt)
        dof = max(len(y) - 2, 1)
        var_slope *= np.sum(wts * resid**2) / dof
    t2 = -1.0 / slope
    t2_err = math.sqrt(var_slope) * t2 * t2
    if np.min(ww) > math.exp(-1.0) and t2_err > 0.2 * t2:
        raise OracleFitError(
            "coherence never drops below 1/e and the slope is poorly "
            "determined; extend the trace")
    return t2, t2_err
