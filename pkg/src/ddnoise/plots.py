"""Figure renderers for the command-line reports (Agg, file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Drop the Software tag so identical runs produce identical PNG bytes.
_PNG_META = {"metadata": {"Software": None}}


def _freq_axis(omegas, freq_unit):
    if freq_unit == "hz":
        return np.asarray(omegas) / (2.0 * np.pi), "frequency (Hz)"
    return np.asarray(omegas), "angular frequency (rad/s)"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, **_PNG_META)
    plt.close(fig)
    return path


def plot_zeroth_order(path, estimate, freq_unit="rads"):
    """Passband point estimates on log-log axes."""
    x, xlabel = _freq_axis(estimate.omegas, freq_unit)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(x, estimate.s_values, yerr=estimate.s_errs, fmt="o",
                ms=4, capsize=3, color="tab:blue")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("S (rad$^2$/s$^2$ per rad/s)")
    ax.set_title("zeroth-order spectrum estimate")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_spectrum_fit(path, band, extrapolated, estimate=None,
                      freq_unit="rads"):
    """Fitted spectrum with bootstrap band; extrapolated region shaded."""
    x, xlabel = _freq_axis(band.omegas, freq_unit)
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.fill_between(x, np.maximum(band.s_lo, 1e-300), band.s_hi,
                    color="tab:orange", alpha=0.30, lw=0,
                    label="16-84% band")
    ax.plot(x, band.s_fit, color="tab:red", lw=1.6, label="fit")
    if estimate is not None:
        xe, _ = _freq_axis(estimate.omegas, freq_unit)
        ax.errorbar(xe, estimate.s_values, yerr=estimate.s_errs, fmt="o",
                    ms=4, capsize=3, color="tab:blue", label="zeroth order")
    inside = ~np.asarray(extrapolated, dtype=bool)
    if inside.any() and (~inside).any():
        lo_x = x[inside].min()
        hi_x = x[inside].max()
        ax.axvspan(x.min(), lo_x, color="0.85", zorder=0)
        ax.axvspan(hi_x, x.max(), color="0.85", zorder=0)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("S (rad$^2$/s$^2$ per rad/s)")
    ax.set_title("reconstructed noise spectrum (shaded: extrapolated)")
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_coherence(path, times, coherence, stderr=None, overlays=(),
                   title="coherence decay"):
    """Coherence trace on a log ordinate; overlays are (label, t, w) tuples."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if stderr is not None and np.any(stderr > 0):
        ax.errorbar(times, coherence, yerr=stderr, fmt="o", ms=3,
                    color="tab:blue", label="measured")
    else:
        ax.plot(times, coherence, "o-", ms=3, color="tab:blue",
                label="measured")
    for label, t, w in overlays:
        ax.plot(t, w, "--", lw=1.4, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("coherence")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_filter_function(path, omegas, ff_sq, label, freq_unit="rads"):
    """Squared filter function of one sequence on log-log axes."""
    x, xlabel = _freq_axis(omegas, freq_unit)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(x, np.maximum(ff_sq, 1e-300), color="tab:green", lw=1.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(r"$|\tilde F(\omega)|^2$ (s$^2$)")
    ax.set_title(f"filter function: {label}")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_scaling(path, ls, s_low, s_err, fit):
    """Measured branch noise vs lopsidedness with the fitted parabola."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(ls, s_low, yerr=s_err if np.any(s_err > 0) else None,
                fmt="o", ms=4, capsize=3, color="tab:blue", label="data")
    grid = np.linspace(min(ls), max(ls), 200)
    model = fit.curvature * grid**2 + fit.offset
    ax.plot(grid, model, color="tab:red", lw=1.5,
            label=(f"fit: {fit.curvature:.3g}$\\,l^2$ + {fit.offset:.3g}"))
    ax.set_xlabel("lopsidedness l")
    ax.set_ylabel("low-frequency noise level")
    ax.set_title("noise scaling with register lopsidedness")
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)
