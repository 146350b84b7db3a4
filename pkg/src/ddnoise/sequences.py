"""Pulse sequences, modulation profiles, filter functions and harmonic weights.

A sequence is one cell of instantaneous pi pulses inside a cycle of duration
``cycle``.  The modulation function f(t) starts at +1 and flips sign at every
pulse instant.  Repeating a cell with an odd number of pulses inverts the next
cell (f only flips at pulses), so the true period of f is two cells in that
case; :class:`ModulationProfile` carries the full period.  This is what makes
a repeated single-pulse cell (UDD-1) exactly a CPMG train.

The filter function used throughout is the plain Fourier integral of f,

    F(omega, t) = integral_0^t f(u) exp(-i omega u) du

and the harmonic weights are squared Fourier-series coefficients of one full
period, A_k^2 = |F(omega_k, period)|^2 / period^2 with omega_k = 2 pi k/period.
For CPMG this gives the closed form A_k^2 = 4/(pi^2 k^2) for odd k, 0 even.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import InputError

K_MAX_LIMIT = 100_000


@dataclass(frozen=True)
class PulseSequence:
    """One cell: pi-pulse instants strictly inside (0, cycle)."""

    kind: str
    cycle: float
    pulse_times: tuple[float, ...]

    def __post_init__(self):
        if not (math.isfinite(self.cycle) and self.cycle > 0.0):
            raise InputError(f"cycle must be finite and > 0, got {self.cycle}")
        times = tuple(float(t) for t in self.pulse_times)
        object.__setattr__(self, "pulse_times", times)
        prev = 0.0
        for t in times:
            if not (prev < t < self.cycle):
                raise InputError(
                    "pulse times must be strictly increasing and strictly "
                    f"inside (0, cycle={self.cycle}), got {times}"
                )
            prev = t

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_times)


def make_cpmg(tau: float) -> PulseSequence:
    """CPMG cell: pulses at [tau, 3*tau] in a cycle of 4*tau."""
    if not (math.isfinite(tau) and tau > 0.0):
        raise InputError(f"tau must be finite and > 0, got {tau}")
    return PulseSequence(kind="cpmg", cycle=4.0 * tau, pulse_times=(tau, 3.0 * tau))


def make_udd(n: int, cycle: float) -> PulseSequence:
    """UDD-n cell: pulses at cycle * sin^2(pi*j / (2n+2)), j = 1..n.

    n = 1 and n = 2 reduce to exact quarters of the cycle; they are computed
    directly so the CPMG equivalence (UDD-1 == CPMG with tau = cycle/2,
    UDD-2 == CPMG with tau = cycle/4) holds bit-exactly.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InputError(f"UDD order must be an integer >= 1, got {n!r}")
    if not (math.isfinite(cycle) and cycle > 0.0):
        raise InputError(f"cycle must be finite and > 0, got {cycle}")
    if n == 1:
        fracs = [0.5]
    elif n == 2:
        fracs = [0.25, 0.75]
    else:
        fracs = []
        for j in range(1, n + 1):
            if 2 * j == n + 1:
                fracs.append(0.5)  # exact midpoint, avoids cos(pi/2) rounding
            else:
                fracs.append(0.5 * (1.0 - math.cos(math.pi * j / (n + 1))))
    return PulseSequence(kind=f"udd-{n}", cycle=cycle,
                         pulse_times=tuple(cycle * f for f in fracs))


def free_evolution(duration: float) -> PulseSequence:
    """No pulses: f = +1 throughout."""
    return PulseSequence(kind="free", cycle=duration, pulse_times=())


@dataclass(frozen=True)
class ModulationProfile:
    """Piecewise-constant f over one full period.

    ``period`` is ``cell`` for an even pulse count and ``2 * cell`` for an odd
    one (anti-periodic continuation).  ``switch_times`` are the flip instants
    strictly inside (0, period); f(0+) = +1 and f is right-continuous.
    """

    cell: float
    period: float
    switch_times: tuple[float, ...]

    @property
    def cells_per_period(self) -> int:
        return int(round(self.period / self.cell))

    def boundaries(self) -> np.ndarray:
        return np.concatenate(([0.0], np.asarray(self.switch_times), [self.period]))

    def segment_signs(self) -> np.ndarray:
        n_seg = len(self.switch_times) + 1
        signs = np.ones(n_seg)
        signs[1::2] = -1.0
        return signs

    def mean(self) -> float:
        """Time average of f over one period (the Fourier DC coefficient)."""
        b = self.boundaries()
        return float(np.sum(self.segment_signs() * np.diff(b)) / self.period)

    def sign_at(self, t) -> np.ndarray:
        """Evaluate f at times t >= 0 (vectorized, right-continuous)."""
        tt = np.asarray(t, dtype=float)
        folded = np.mod(tt, self.period)
        flips = np.searchsorted(np.asarray(self.switch_times), folded, side="right")
        return np.where(flips % 2 == 0, 1.0, -1.0)


def modulation_profile(seq: PulseSequence) -> ModulationProfile:
    """Build the full-period modulation profile of a repeated cell."""
    if seq.n_pulses % 2 == 0:
        return ModulationProfile(cell=seq.cycle, period=seq.cycle,
                                 switch_times=seq.pulse_times)
    doubled = seq.pulse_times + tuple(seq.cycle + t for t in seq.pulse_times)
    return ModulationProfile(cell=seq.cycle, period=2.0 * seq.cycle,
                             switch_times=doubled)


# ---------------------------------------------------------------------------
# Filter function and harmonic weights
# ---------------------------------------------------------------------------


def _cell_fourier(seq: PulseSequence, omega: np.ndarray) -> np.ndarray:
    """F_1(omega) = integral over one cell of f * exp(-i omega u) du."""
    bounds = np.concatenate(([0.0], np.asarray(seq.pulse_times), [seq.cycle]))
    signs = np.ones(len(bounds) - 1)
    signs[1::2] = -1.0
    om = omega[:, None]
    small = np.abs(om) < 1e-300
    om_safe = np.where(small, 1.0, om)
    expb = np.exp(-1j * om_safe * bounds[None, :])
    seg = (expb[:, :-1] - expb[:, 1:]) / (1j * om_safe)
    seg_dc = np.diff(bounds)[None, :] + 0.0j
    seg = np.where(small, seg_dc, seg)
    return np.sum(signs[None, :] * seg, axis=1)


def _dirichlet_sq(y: np.ndarray, n: int) -> np.ndarray:
    """|sum_{m<n} e^{2 i m y}|^2 = sin^2(n y)/sin^2(y), stable near y = m*pi."""
    s = np.sin(y)
    near = np.abs(s) < 1e-9
    s_safe = np.where(near, 1.0, s)
    ratio = np.sin(n * y) / s_safe
    return np.where(near, float(n) ** 2, ratio**2)


def filter_function_sq(seq: PulseSequence, omega, n_cycles: int = 1) -> np.ndarray:
    """|F(omega, n_cycles * cycle)|^2 for the repeated cell, closed form.

    Handles odd-pulse cells (sign-inverted repeats) through a shifted
    Dirichlet factor.  At omega = 0 this equals the squared time-integral
    of f over the full duration.
    """
    if n_cycles < 1:
        raise InputError(f"n_cycles must be >= 1, got {n_cycles}")
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    f1 = _cell_fourier(seq, om)
    parity_shift = 0.0 if seq.n_pulses % 2 == 0 else 0.5 * math.pi
    y = 0.5 * om * seq.cycle + parity_shift
    out = np.abs(f1) ** 2 * _dirichlet_sq(y, n_cycles)
    return out if np.ndim(omega) else float(out[0])


@dataclass(frozen=True, eq=False)
class HarmonicWeights:
    """Squared Fourier coefficients A_k^2 of the periodic modulation.

    ``weights[k-1]`` is A_k^2 for harmonic omega_k = k * fundamental,
    k = 1..k_max; ``mean_sign`` is the DC coefficient c_0 (time average of f).
    """

    kind: str
    fundamental: float
    weights: np.ndarray
    mean_sign: float

    @property
    def k_max(self) -> int:
        return len(self.weights)

    def omegas(self) -> np.ndarray:
        return self.fundamental * np.arange(1, self.k_max + 1, dtype=float)


def harmonic_weights(seq: PulseSequence, k_max: int = 10001) -> HarmonicWeights:
    """A_k^2 for k = 1..k_max from exact segment integrals of one period.

    Phases are reduced modulo one full turn before exponentiation
    (exp(-2 pi i * frac(k * t_j/period))) so dyadic pulse fractions such as
    CPMG's stay exact at large k.
    """
    if not (1 <= k_max <= K_MAX_LIMIT):
        raise InputError(f"k_max must be in [1, {K_MAX_LIMIT}], got {k_max}")
    prof = modulation_profile(seq)
    bounds = prof.boundaries() / prof.period  # fractions of a period, in [0, 1]
    signs = prof.segment_signs()
    k = np.arange(1, k_max + 1, dtype=float)[:, None]
    phase = np.mod(k * bounds[None, :], 1.0)
    e = np.exp(-2j * math.pi * phase)
    # c_k = sum_i s_i (E_i - E_{i+1}) / (2 pi i k)
    ck = np.sum(signs[None, :] * (e[:, :-1] - e[:, 1:]), axis=1) / (2j * math.pi * k[:, 0])
    return HarmonicWeights(kind=seq.kind,
                           fundamental=2.0 * math.pi / prof.period,
                           weights=np.abs(ck) ** 2,
                           mean_sign=prof.mean())


def cpmg_weight_closed_form(k) -> np.ndarray:
    """A_k^2 for CPMG: 4/(pi^2 k^2) for odd k, 0 for even k."""
    kk = np.asarray(k, dtype=float)
    return np.where(np.asarray(k) % 2 == 1, 4.0 / (math.pi**2 * kk**2), 0.0)


# ---------------------------------------------------------------------------
# Sequence spec strings
# ---------------------------------------------------------------------------

_GRAMMAR = ("accepted forms: 'cpmg:tau=<dur>', 'udd:n=<int>,cycle=<dur>', "
            "'custom:[<dur>,<dur>,...]@<dur>'; durations are seconds unless "
            "suffixed with s/ms/us")

_UNIT_SCALE = {"s": 1.0, "ms": 1e-3, "us": 1e-6}


def _parse_duration(text: str) -> float:
    m = re.fullmatch(r"([-+0-9.eE]+)\s*(s|ms|us)?", text.strip())
    if m is None:
        raise InputError(f"bad duration {text!r}; {_GRAMMAR}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise InputError(f"bad duration {text!r}; {_GRAMMAR}") from None
    return value * _UNIT_SCALE[m.group(2) or "s"]


def parse_sequence_spec(text: str) -> PulseSequence:
    """Parse a sequence spec string like 'cpmg:tau=2ms' or 'udd:n=3,cycle=80ms'."""
    head, sep, rest = text.strip().partition(":")
    if not sep:
        raise InputError(f"unknown sequence spec {text!r}; {_GRAMMAR}")
    head = head.lower()
    if head == "cpmg":
        m = re.fullmatch(r"tau=([^,]+)", rest.strip())
        if m is None:
            raise InputError(f"bad cpmg spec {text!r}; {_GRAMMAR}")
        return make_cpmg(_parse_duration(m.group(1)))
    if head == "udd":
        m = re.fullmatch(r"n=(\d+)\s*,\s*cycle=(.+)", rest.strip())
        if m is None:
            raise InputError(f"bad udd spec {text!r}; {_GRAMMAR}")
        return make_udd(int(m.group(1)), _parse_duration(m.group(2)))
    if head == "custom":
        m = re.fullmatch(r"\[([^\]]*)\]\s*@\s*(.+)", rest.strip())
        if m is None:
            raise InputError(f"bad custom spec {text!r}; {_GRAMMAR}")
        body = m.group(1).strip()
        times = tuple(_parse_duration(p) for p in body.split(",")) if body else ()
        cycle = _parse_duration(m.group(2))
        return PulseSequence(kind="custom", cycle=cycle, pulse_times=times)
    raise InputError(f"unknown sequence family {head!r} in {text!r}; {_GRAMMAR}")
