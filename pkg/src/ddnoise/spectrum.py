"""Lorentzian noise spectral-density models and their closed-form autocorrelation.

Conventions
-----------
``S(omega)`` is a spectral density over angular frequency (rad/s) with values
in 1/s.  The model is a sum of shifted Lorentzian terms

    S_j(omega) = weight_j * width_j / ((omega - center_j)**2 + width_j**2)

optionally evaluated as the even (symmetrized) extension
``0.5 * (S(+omega) + S(-omega))``.  Only symmetrized spectra are valid inputs
for time-domain noise synthesis.

``autocorrelation_of`` returns the plain cosine transform of the symmetrized
spectrum,

    g(tau) = integral S(omega) cos(omega tau) domega
           = sum_j weight_j * pi * exp(-width_j*|tau|) * cos(center_j*tau)

so ``g(0)`` equals the full integral of S.  The stationary-process
autocovariance consistent with ``S(omega) = integral gamma(tau)
exp(-i omega tau) dtau`` is ``gamma = g / (2 pi)``; the simulator applies that
factor (``ddnoise.simulate.WIENER_KHINCHIN_NORM``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import InputError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LorentzianTerm:
    """One Lorentzian component of a noise spectrum.

    Parameters
    ----------
    center : float
        Peak position (rad/s), must be >= 0.  The symmetrized evaluation
        mirrors it to -center.
    width : float
        Half width at half maximum (rad/s), strictly positive.
    weight : float
        Overall scale, strictly positive.  The term's peak value is
        ``weight / width``.
    """

    center: float
    width: float
    weight: float

    def __post_init__(self):
        if not (math.isfinite(self.center) and self.center >= 0.0):
            raise InputError(f"term center must be finite and >= 0, got {self.center}")
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise InputError(f"term width must be finite and > 0, got {self.width}")
        if not (math.isfinite(self.weight) and self.weight > 0.0):
            raise InputError(f"term weight must be finite and > 0, got {self.weight}")


@dataclass(frozen=True)
class SpectralDensity:
    """Sum of Lorentzian terms, optionally symmetrized about omega = 0.

    An empty term tuple represents the identically-zero spectrum (zero noise);
    it is accepted so simulator and forward-model zero-noise paths stay total.
    """

    terms: tuple[LorentzianTerm, ...]
    symmetrized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def zero(cls) -> "SpectralDensity":
        return cls(terms=(), symmetrized=True)

    def _one_sided(self, omega: np.ndarray) -> np.ndarray:
        total = np.zeros_like(omega)
        for t in self.terms:
            total += t.weight * t.width / ((omega - t.center) ** 2 + t.width**2)
        return total

    def evaluate(self, omega) -> np.ndarray:
        """Evaluate S at angular frequencies ``omega`` (scalar or array)."""
        om = np.asarray(omega, dtype=float)
        if not self.symmetrized:
            return self._one_sided(om)
        # Same per-term summation order on both branches keeps the even
        # symmetry S(w) == S(-w) bit-exact.
        return 0.5 * (self._one_sided(om) + self._one_sided(-om))

    def __call__(self, omega) -> np.ndarray:
        return self.evaluate(omega)

    def symmetrize(self) -> "SpectralDensity":
        return self if self.symmetrized else SpectralDensity(self.terms, True)

    @property
    def max_significant_omega(self) -> float:
        """Upper edge of the spectral support: max(|center| + 10*width)."""
        if not self.terms:
            return 0.0
        return max(t.center + 10.0 * t.width for t in self.terms)

    @property
    def min_width(self) -> float:
        if not self.terms:
            return math.inf
        return min(t.width for t in self.terms)


class CallableSpectrum:
    """Adapter wrapping an arbitrary ``f(omega) -> S`` for forward modelling.

    No closed-form autocorrelation exists for it, so it is not a valid
    simulator input; use Lorentzian models there.
    """

    def __init__(self, fn, symmetrized: bool = True):
        self._fn = fn
        self.symmetrized = symmetrized

    def evaluate(self, omega) -> np.ndarray:
        om = np.asarray(omega, dtype=float)
        return np.asarray(self._fn(om), dtype=float)

    def __call__(self, omega) -> np.ndarray:
        return self.evaluate(omega)


def eval_spectrum(s, omega) -> np.ndarray:
    """Functional alias for ``s.evaluate(omega)``."""
    return s.evaluate(omega)


@dataclass(frozen=True)
class AutocorrelationFn:
    """Closed-form cosine transform of a symmetrized Lorentzian spectrum.

    ``variance`` is g(0) = pi * sum(weights), i.e. the full integral of S.
    """

    terms: tuple[LorentzianTerm, ...]
    variance: float

    def __call__(self, tau) -> np.ndarray:
        t = np.abs(np.asarray(tau, dtype=float))
        total = np.zeros_like(t)
        for term in self.terms:
            total += term.weight * math.pi * np.exp(-term.width * t) * np.cos(term.center * t)
        return total


def autocorrelation_of(s: SpectralDensity) -> AutocorrelationFn:
    """Return g(tau) = integral S(omega) cos(omega*tau) domega in closed form.

    Requires a symmetrized spectrum; the Lorentzian/exponential-cosine pair
    below holds only for the even extension.
    """
    if not isinstance(s, SpectralDensity):
        raise InputError(
            "closed-form autocorrelation needs a Lorentzian model "
            f"(SpectralDensity), got {type(s).__name__}"
        )
    if not s.symmetrized:
        raise InputError(
            "autocorrelation_of requires a symmetrized spectrum "
            "(construct SpectralDensity with symmetrized=True)"
        )
    variance = math.pi * sum(t.weight for t in s.terms)
    return AutocorrelationFn(terms=tuple(s.terms), variance=variance)


# ---------------------------------------------------------------------------
# Spectrum parameter files: structured key-value text with per-term blocks.
# ---------------------------------------------------------------------------

_SPECTRUM_FORMAT = "ddnoise-spectrum-v1"


def write_spectrum_file(path, s: SpectralDensity, header_comments=()) -> None:
    """Write spectrum parameters as key-value text with one [term] block each.

    Frequencies are stored in Hz (center_hz, width_hz); weights as-is.
    Floats are written with repr precision so a read-back is exact.
    """
    lines = [f"# {c}" for c in header_comments]
    lines += [f"format = {_SPECTRUM_FORMAT}",
              f"symmetrized = {'true' if s.symmetrized else 'false'}"]
    for t in s.terms:
        lines += ["", "[term]",
                  f"center_hz = {t.center / TWO_PI!r}",
                  f"width_hz = {t.width / TWO_PI!r}",
                  f"weight = {t.weight!r}"]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_file(path) -> SpectralDensity:
    """Parse a spectrum parameter file written by :func:`write_spectrum_file`."""
    symmetrized = True
    terms: list[LorentzianTerm] = []
    block: dict[str, float] | None = None

    def close_block(lineno):
        nonlocal block
        if block is None:
            return
        missing = {"center_hz", "width_hz", "weight"} - set(block)
        if missing:
            raise InputError(f"{path}: term block before line {lineno} missing {sorted(missing)}")
        terms.append(LorentzianTerm(center=block["center_hz"] * TWO_PI,
                                    width=block["width_hz"] * TWO_PI,
                                    weight=block["weight"]))
        block = None

    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read spectrum file: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line == "[term]":
                close_block(lineno)
                block = {}
                continue
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)", line)
            if m is None:
                raise InputError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = m.group(1), m.group(2).strip()
            if block is not None:
                if key not in ("center_hz", "width_hz", "weight"):
                    raise InputError(f"{path}:{lineno}: unknown term key {key!r}")
                try:
                    block[key] = float(value)
                except ValueError:
                    raise InputError(f"{path}:{lineno}: bad float {value!r} for {key}") from None
            elif key == "format":
                if value != _SPECTRUM_FORMAT:
                    raise InputError(f"{path}:{lineno}: unsupported format {value!r}")
            elif key == "symmetrized":
                if value not in ("true", "false"):
                    raise InputError(f"{path}:{lineno}: symmetrized must be true/false")
                symmetrized = value == "true"
            else:
                raise InputError(f"{path}:{lineno}: unknown key {key!r}")
    close_block("eof")
    return SpectralDensity(terms=tuple(terms), symmetrized=symmetrized)
