"""Low-frequency noise scaling with register lopsidedness in star systems.

A star register has one memory spin coupled to N-1 satellite spins of another
species.  Each computational branch with k satellites flipped sees an
effective coupling proportional to the lopsidedness

    l(k) = gamma_M / gamma_A + (N - 1 - 2k),      k = 0 .. N-1,

so branch pairs satisfy l(k) + l(N-1-k) = 2 gamma_M / gamma_A.  Measured
low-frequency noise levels are fit against the quadratic law
s_low = curvature * l^2 + offset by weighted linear least squares.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError

# gamma / 2 pi in MHz per tesla; only ratios enter the analysis.
GYROMAGNETIC_MHZ_PER_T = {
    "1H": 42.576,
    "19F": 40.053,
    "31P": 17.235,
    "13C": 10.708,
    "29Si": -8.465,
    "15N": -4.316,
}


def gamma_ratio(memory: str, ancilla: str) -> float:
    """gamma_M / gamma_A for the two species, sign included."""
    for species in (memory, ancilla):
        if species not in GYROMAGNETIC_MHZ_PER_T:
            raise InputError(
                f"unknown species {species!r}; known: "
                f"{sorted(GYROMAGNETIC_MHZ_PER_T)}")
    return GYROMAGNETIC_MHZ_PER_T[memory] / GYROMAGNETIC_MHZ_PER_T[ancilla]


@dataclass(frozen=True)
class StarSystem:
    """One memory spin plus (n_spins - 1) identical satellite spins."""

    n_spins: int
    memory: str = "31P"
    ancilla: str = "1H"

    def __post_init__(self):
        if self.n_spins < 2:
            raise InputError(f"a star system needs >= 2 spins, got {self.n_spins}")
        gamma_ratio(self.memory, self.ancilla)  # validates both species

    @property
    def gamma_ratio(self) -> float:
        return gamma_ratio(self.memory, self.ancilla)

    def lopsidedness(self, k: int) -> float:
        """l(k) for the branch with k of the n_spins - 1 satellites flipped."""
        if not 0 <= k <= self.n_spins - 1:
            raise InputError(
                f"k must lie in [0, {self.n_spins - 1}], got {k}")
        return self.gamma_ratio + (self.n_spins - 1 - 2 * k)

    def all_lopsidedness(self) -> np.ndarray:
        return np.array([self.lopsidedness(k) for k in range(self.n_spins)])


def read_scaling_data(path):
    """Parse an ``l,s_low,s_err`` CSV; malformed lines are reported by number."""
    expected = ["l", "s_low", "s_err"]
    ls, s_low, s_err = [], [], []
    header_seen = False
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read scaling file: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if not header_seen:
                if fields != expected:
                    raise InputError(f"{path}:{lineno}: bad header {fields}; "
                                     f"expected {expected}")
                header_seen = True
                continue
            if len(fields) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields, got "
                                 f"{len(fields)}")
            try:
                l, s, e = float(fields[0]), float(fields[1]), float(fields[2])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if not all(map(math.isfinite, (l, s, e))) or e < 0.0:
                raise InputError(f"{path}:{lineno}: values must be finite "
                                 f"with s_err >= 0")
            ls.append(l)
            s_low.append(s)
            s_err.append(e)
    if not header_seen:
        raise InputError(f"{path}: no header line found")
    if not ls:
        raise InputError(f"{path}: no data rows")
    return np.array(ls), np.array(s_low), np.array(s_err)


@dataclass(frozen=True, eq=False)
class ScalingFit:
    """Weighted least-squares fit of s_low = curvature * l^2 + offset."""

    curvature: float
    offset: float
    covariance: np.ndarray  # 2x2 over (curvature, offset)
    chi2: float
    dof: int
    l_range: tuple

    @property
    def curvature_err(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def offset_err(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.inf

    def predict(self, l):
        """Noise level and 1-sigma error at lopsidedness l.

        Warns when |l| exceeds the fitted range: the quadratic law is then
        an extrapolation.
        """
        l = np.asarray(l, dtype=float)
        lmax = max(abs(self.l_range[0]), abs(self.l_range[1]))
        if np.any(np.abs(l) > lmax * (1.0 + 1e-12)):
            warnings.warn(
                "predicting outside the fitted lopsidedness range "
                f"(|l| > {lmax:g}); the quadratic law is extrapolated",
                stacklevel=2)
        value = self.curvature * l**2 + self.offset
        var = (l**4 * self.covariance[0, 0] + self.covariance[1, 1]
               + 2.0 * l**2 * self.covariance[0, 1])
        return value, np.sqrt(np.maximum(var, 0.0))


def fit_quadratic_scaling(ls, s_low, s_err=None) -> ScalingFit:
    """Fit s_low = curvature * l^2 + offset, weighting by 1/s_err^2.

    With no errors (or all zero) the fit is unweighted and the parameter
    covariance is scaled by the residual variance instead.
    """
    ls = np.asarray(ls, dtype=float)
    s_low = np.asarray(s_low, dtype=float)
    if ls.ndim != 1 or ls.shape != s_low.shape:
        raise InputError("l and s_low must be 1-d arrays of equal length")
    if len(ls) < 3:
        raise InputError(f"need >= 3 points to fit curvature and offset, "
                         f"got {len(ls)}")
    if len(np.unique(ls**2)) < 2:
        raise InputError("all points share one |l|; curvature is not "
                         "identifiable")
    if s_err is None:
        s_err = np.zeros_like(s_low)
    s_err = np.asarray(s_err, dtype=float)
    weighted = np.any(s_err > 0.0)
    if weighted and np.any(s_err <= 0.0):
        s_err = np.where(s_err > 0.0, s_err, s_err[s_err > 0.0].min())
    w = 1.0 / s_err**2 if weighted else np.ones_like(s_low)
    x = np.column_stack([ls**2, np.ones_like(ls)])
    xtw = x.T * w
    normal = xtw @ x
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        raise InputError("degenerate design matrix; spread the l values") from None
    beta = cov @ (xtw @ s_low)
    resid = s_low - x @ beta
    chi2 = float(np.sum(w * resid**2))
    dof = len(ls) - 2
    if not weighted:
        cov = cov * (chi2 / dof if dof > 0 else chi2)
    return ScalingFit(curvature=float(beta[0]), offset=float(beta[1]),
                      covariance=cov, chi2=chi2, dof=dof,
                      l_range=(float(ls.min()), float(ls.max())))
