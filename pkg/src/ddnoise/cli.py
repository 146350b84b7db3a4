"""Command-line entry point.

Subcommands
-----------
estimate   zeroth-order spectrum from a T2 measurement CSV
fit        Lorentzian-mixture spectrum fit with bootstrap band
predict    coherence decay of a spectrum under a pulse sequence
simulate   Monte-Carlo dephasing run with T2 extraction
scaling    quadratic lopsidedness fit of low-frequency noise levels
filterfn   squared filter function of a pulse sequence

Every report writes a delimited CSV plus a rendered PNG next to it.  CSV
headers carry ``# key=value`` provenance lines including a sha256 digest of
the resolved inputs (SI units, unit flags and thread counts excluded), so
reruns of the same analysis are byte-identical.

Exit codes: 0 success, 2 bad input or usage, 3 fit/quadrature did not
converge, 4 oracle decay-rate extraction failed.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, InputError, OracleFitError, QuadratureError
from .forward import decay_exponent_finite, decay_rate_asymptotic
from .invert import (bootstrap_band, extrapolation_mask, fit_lorentzian_model,
                     read_measurements, zeroth_order_spectrum)
from .plots import (plot_coherence, plot_filter_function, plot_scaling,
                    plot_spectrum_fit, plot_zeroth_order)
from .scaling import (StarSystem, fit_quadratic_scaling, read_scaling_data)
from .sequences import filter_function_sq, modulation_profile, parse_sequence_spec
from .simulate import (NoiseSynthesisSpec, extract_t2, measure_coherence,
                       synthesize_trajectories)
from .spectrum import read_spectrum_file, write_spectrum_file

TWO_PI = 2.0 * math.pi


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed for every stochastic step")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads; results do not depend on this")
    common.add_argument("--out-dir", default=None,
                        help="output directory (default: $DDNOISE_OUT_DIR or .)")
    common.add_argument("--tau-unit", choices=("s", "ms"), default="s",
                        help="unit of the measurement CSV columns")
    common.add_argument("--freq-unit", choices=("rads", "hz"), default="rads",
                        help="unit of frequency arguments and plot axes")
    common.add_argument("--config", default=None,
                        help="file of 'key = value' option defaults")

    parser = argparse.ArgumentParser(
        prog="ddnoise",
        description="noise spectroscopy and coherence prediction for "
                    "dynamically decoupled spins")
    parser.add_argument("--version", action="version",
                        version=f"ddnoise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common],
                       help="zeroth-order spectrum from T2 data")
    p.add_argument("--data", required=True, help="measurement CSV")

    p = sub.add_parser("fit", parents=[common],
                       help="fit a Lorentzian mixture to T2 data")
    p.add_argument("--data", required=True, help="measurement CSV")
    p.add_argument("--terms", default="auto",
                   help="term count, or 'auto' to grow while chi2/dof "
                        "improves by 20%%")
    p.add_argument("--max-terms", type=int, default=4)
    p.add_argument("--n-starts", type=int, default=8,
                   help="optimizer restarts per term count")
    p.add_argument("--n-boot", type=int, default=200,
                   help="bootstrap replicates for the band (>= 100)")
    p.add_argument("--grid-points", type=int, default=200,
                   help="frequency grid size of the report")

    p = sub.add_parser("predict", parents=[common],
                       help="coherence decay under a pulse sequence")
    p.add_argument("--spectrum", required=True, help="spectrum parameter file")
    p.add_argument("--sequence", required=True,
                   help="e.g. cpmg:tau=2ms | udd:n=3,cycle=80ms | "
                        "custom:[1ms,5ms,9ms]@10ms")
    p.add_argument("--cycles", type=int, default=20,
                   help="evaluate 1..N repetitions of the cycle")
    p.add_argument("--rel-tol", type=float, default=1e-6,
                   help="relative tolerance of the decay exponent")

    p = sub.add_parser("simulate", parents=[common],
                       help="Monte-Carlo dephasing oracle run")
    p.add_argument("--spectrum", required=True, help="spectrum parameter file")
    p.add_argument("--sequence", required=True, help="sequence spec")
    p.add_argument("--cycles", type=int, default=20)
    p.add_argument("--trajectories", type=int, default=2000)
    p.add_argument("--dt", type=float, default=None,
                   help="grid step in seconds (default: auto)")

    p = sub.add_parser("scaling", parents=[common],
                       help="quadratic lopsidedness scaling fit")
    p.add_argument("--data", required=True, help="l,s_low,s_err CSV")
    p.add_argument("--n-spins", type=int, default=None,
                   help="also tabulate model noise for an N-spin star")
    p.add_argument("--memory", default="31P")
    p.add_argument("--ancilla", default="1H")

    p = sub.add_parser("filterfn", parents=[common],
                       help="squared filter function of a sequence")
    p.add_argument("--sequence", required=True, help="sequence spec")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--omega-min", type=float, default=None,
                   help="grid start in --freq-unit units")
    p.add_argument("--omega-max", type=float, default=None,
                   help="grid end in --freq-unit units")
    p.add_argument("--points", type=int, default=400)

    return parser


def _load_config(path):
    """Parse a 'key = value' defaults file into a typed dict."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InputError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip().replace("-", "_")
                val = val.strip()
                if not key or not val:
                    raise InputError(f"{path}:{lineno}: empty key or value")
                for cast in (int, float):
                    try:
                        val = cast(val)
                        break
                    except ValueError:
                        continue
                values[key] = val
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from None
    return values


def _apply_config(parser, argv, args):
    """Second parse pass with config values as defaults; flags still win."""
    values = _load_config(args.config)
    known = set()
    parsers = [parser]
    for action in parser._subparsers._group_actions:
        parsers.extend(action.choices.values())
    for p in parsers:
        dests = {a.dest for a in p._actions if a.dest != "help"}
        known |= dests
        p.set_defaults(**{k: v for k, v in values.items() if k in dests})
    unknown = set(values) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return parser.parse_args(argv)


def _out_dir(args) -> Path:
    root = args.out_dir or os.environ.get("DDNOISE_OUT_DIR") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _validate_common(args):
    if args.seed < 0:
        raise InputError(f"--seed must be >= 0, got {args.seed}")
    if args.threads < 1:
        raise InputError(f"--threads must be >= 1, got {args.threads}")


def _omega_in(value, freq_unit):
    return value * TWO_PI if freq_unit == "hz" else value


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _digest(settings: dict) -> str:
    parts = []
    for key in sorted(settings):
        val = settings[key]
        if isinstance(val, np.ndarray):
            val = val.tolist()
        parts.append(f"{key}={val!r}")
    return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()


def _write_csv(path: Path, meta: dict, columns, rows):
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _meta(command: str, seed: int, settings: dict) -> dict:
    return {
        "generator": f"ddnoise {__version__}",
        "command": command,
        "seed": seed,
        "config_digest": _digest(settings),
    }


def _measurement_settings(meas):
    return {
        "taus": [m.tau for m in meas],
        "t2s": [m.t2 for m in meas],
        "t2_errs": [m.t2_err for m in meas],
        "labels": [m.label for m in meas],
    }


def _spectrum_settings(s):
    return {"terms": [(t.center, t.width, t.weight) for t in s.terms]}


def _auto_dt(spectrum, profile):
    om_sig = spectrum.max_significant_omega
    gap_min = float(np.diff(profile.boundaries()).min())
    # 0.099 keeps the snapped step strictly inside the dt * omega < 0.1 bound.
    dt_spec = 0.099 / om_sig if om_sig > 0 else math.inf
    dt = min(dt_spec, gap_min / 8.0)
    if not math.isfinite(dt) or dt <= 0:
        raise InputError("cannot choose a grid step for a zero spectrum; "
                         "pass --dt explicitly")
    # Snap to an integer divisor of the smallest pulse gap so that sign
    # flips land on grid nodes whenever the gaps are commensurate.
    return gap_min / math.ceil(gap_min / dt)


def _cmd_estimate(args):
    out = _out_dir(args)
    meas = read_measurements(args.data, args.tau_unit)
    est = zeroth_order_spectrum(meas)
    settings = {"command": "estimate", "seed": args.seed,
                **_measurement_settings(meas)}
    meta = _meta("estimate", args.seed, settings)
    rows = [(om, om / TWO_PI, s, e)
            for om, s, e in zip(est.omegas, est.s_values, est.s_errs)]
    _write_csv(out / "zeroth_order.csv", meta,
               ["omega_rad_s", "freq_hz", "s_value", "s_err"], rows)
    plot_zeroth_order(out / "zeroth_order.png", est, args.freq_unit)
    print(f"estimate: {len(meas)} points, omega in "
          f"[{est.omegas.min():.6g}, {est.omegas.max():.6g}] rad/s")
    print(f"wrote {out / 'zeroth_order.csv'} and {out / 'zeroth_order.png'}")
    return 0


def _cmd_fit(args):
    out = _out_dir(args)
    meas = read_measurements(args.data, args.tau_unit)
    result = fit_lorentzian_model(meas, n_terms=args.terms,
                                  max_terms=args.max_terms, seed=args.seed,
                                  n_starts=args.n_starts)
    taus = [m.tau for m in meas]
    om_lo = math.pi / (2.0 * max(taus)) / 10.0
    om_hi = math.pi / (2.0 * min(taus)) * 10.0
    grid = np.geomspace(om_lo, om_hi, args.grid_points)
    band = bootstrap_band(meas, result, grid, n_boot=args.n_boot,
                          seed=args.seed)
    mask = extrapolation_mask(grid, meas)
    settings = {"command": "fit", "seed": args.seed, "terms": str(args.terms),
                "max_terms": args.max_terms, "n_starts": args.n_starts,
                "n_boot": args.n_boot, "grid_points": args.grid_points,
                **_measurement_settings(meas)}
    meta = _meta("fit", args.seed, settings)
    rows = [(om, om / TWO_PI, f, lo, hi, bool(x))
            for om, f, lo, hi, x in zip(grid, band.s_fit, band.s_lo,
                                        band.s_hi, mask)]
    _write_csv(out / "spectrum_fit.csv", meta,
               ["omega_rad_s", "freq_hz", "s_fit", "s_lo", "s_hi",
                "extrapolated"], rows)
    write_spectrum_file(out / "fitted_spectrum.txt", result.spectrum)
    est = zeroth_order_spectrum(meas)
    plot_spectrum_fit(out / "spectrum_fit.png", band, mask, est,
                      args.freq_unit)
    print(f"fit: {result.n_terms} term(s), chi2={result.chi2:.6g}, "
          f"dof={result.dof}, reduced={result.reduced_chi2:.6g}")
    for t in result.spectrum.terms:
        print(f"  term: center={t.center:.6g} rad/s "
              f"width={t.width:.6g} rad/s weight={t.weight:.6g}")
    print(f"band: {band.n_ok} replicates ok, {band.n_failed} failed")
    print(f"wrote {out / 'spectrum_fit.csv'}, {out / 'fitted_spectrum.txt'} "
          f"and {out / 'spectrum_fit.png'}")
    if not result.converged:
        print("ddnoise: warning: optimizer reported no converged start; "
              "treat the fit as unconverged", file=sys.stderr)
        return 3
    return 0


def _cmd_predict(args):
    out = _out_dir(args)
    s = read_spectrum_file(args.spectrum)
    seq = parse_sequence_spec(args.sequence)
    if args.cycles < 1:
        raise InputError(f"--cycles must be >= 1, got {args.cycles}")
    rate = decay_rate_asymptotic(s, seq)
    rows = []
    for n in range(1, args.cycles + 1):
        chi = decay_exponent_finite(s, seq, n, rel_tol=args.rel_tol)
        rows.append((n, n * seq.cycle, chi, math.exp(-chi)))
    settings = {"command": "predict", "seed": args.seed,
                "sequence_cycle": seq.cycle,
                "sequence_pulses": list(seq.pulse_times),
                "cycles": args.cycles, "rel_tol": args.rel_tol,
                **_spectrum_settings(s)}
    meta = _meta("predict", args.seed, settings)
    _write_csv(out / "prediction.csv", meta,
               ["n_cycles", "total_time_s", "chi", "coherence"], rows)
    times = np.array([r[1] for r in rows])
    coh = np.array([r[3] for r in rows])
    overlay_t = np.linspace(0.0, times.max(), 200)
    overlays = [("asymptotic exp(-t/T2)", overlay_t,
                 np.exp(-rate * overlay_t))]
    plot_coherence(out / "prediction.png", times, coh, overlays=overlays,
                   title=f"predicted decay: {args.sequence}")
    t2 = 1.0 / rate if rate > 0 else math.inf
    print(f"predict: asymptotic rate={rate:.6g} 1/s, T2={t2:.6g} s")
    print(f"wrote {out / 'prediction.csv'} and {out / 'prediction.png'}")
    return 0


def _cmd_simulate(args):
    out = _out_dir(args)
    s = read_spectrum_file(args.spectrum)
    seq = parse_sequence_spec(args.sequence)
    if args.cycles < 1:
        raise InputError(f"--cycles must be >= 1, got {args.cycles}")
    if args.trajectories < 2:
        raise InputError("--trajectories must be >= 2")
    profile = modulation_profile(seq)
    dt = args.dt if args.dt is not None else _auto_dt(s, profile)
    # Round the grid up to a whole number of steps covering every cycle
    # (pulse gaps need not divide the cycle, e.g. UDD).
    duration = math.ceil(args.cycles * seq.cycle / dt - 1e-9) * dt
    spec = NoiseSynthesisSpec(spectrum=s, duration=duration, dt=dt,
                              n_trajectories=args.trajectories,
                              master_seed=args.seed)
    ens = synthesize_trajectories(spec)
    trace = measure_coherence(ens, profile, args.cycles,
                              threads=args.threads)
    settings = {"command": "simulate", "seed": args.seed,
                "sequence_cycle": seq.cycle,
                "sequence_pulses": list(seq.pulse_times),
                "cycles": args.cycles, "dt": dt,
                "trajectories": args.trajectories,
                **_spectrum_settings(s)}
    meta = _meta("simulate", args.seed, settings)
    rows = list(zip(trace.times, trace.coherence, trace.stderr))
    _write_csv(out / "coherence_trace.csv", meta,
               ["time_s", "coherence", "stderr"], rows)
    rate = decay_rate_asymptotic(s, seq)
    overlay_t = np.linspace(0.0, trace.times.max(), 200)
    overlays = [("asymptotic exp(-t/T2)", overlay_t,
                 np.exp(-rate * overlay_t))]
    plot_coherence(out / "coherence_trace.png", trace.times, trace.coherence,
                   stderr=trace.stderr, overlays=overlays,
                   title=f"simulated decay: {args.sequence}")
    print(f"simulate: {args.trajectories} trajectories, dt={dt:.6g} s, "
          f"{args.cycles} cycles")
    print(f"wrote {out / 'coherence_trace.csv'} and "
          f"{out / 'coherence_trace.png'}")
    t2, t2_err = extract_t2(trace)
    pred_t2 = 1.0 / rate if rate > 0 else math.inf
    print(f"simulate: T2={t2:.6g} +/- {t2_err:.6g} s "
          f"(asymptotic prediction {pred_t2:.6g} s)")
    return 0


def _cmd_scaling(args):
    out = _out_dir(args)
    ls, s_low, s_err = read_scaling_data(args.data)
    fit = fit_quadratic_scaling(ls, s_low, s_err)
    settings = {"command": "scaling", "seed": args.seed,
                "l": ls.tolist(), "s_low": s_low.tolist(),
                "s_err": s_err.tolist()}
    meta = _meta("scaling", args.seed, settings)
    model = fit.curvature * ls**2 + fit.offset
    rows = list(zip(ls, s_low, s_err, model))
    _write_csv(out / "scaling_fit.csv", meta,
               ["l", "s_low", "s_err", "s_model"], rows)
    plot_scaling(out / "scaling_fit.png", ls, s_low, s_err, fit)
    print(f"scaling: curvature={fit.curvature:.6g} +/- "
          f"{fit.curvature_err:.6g}, offset={fit.offset:.6g} +/- "
          f"{fit.offset_err:.6g}, chi2/dof={fit.reduced_chi2:.6g}")
    print(f"wrote {out / 'scaling_fit.csv'} and {out / 'scaling_fit.png'}")
    if args.n_spins is not None:
        system = StarSystem(n_spins=args.n_spins, memory=args.memory,
                            ancilla=args.ancilla)
        branch_rows = []
        for k in range(system.n_spins):
            l = system.lopsidedness(k)
            value, err = fit.predict(l)
            branch_rows.append((k, l, float(value), float(err)))
        branch_meta = _meta("scaling", args.seed,
                            {**settings, "n_spins": args.n_spins,
                             "memory": args.memory, "ancilla": args.ancilla})
        _write_csv(out / "branch_noise.csv", branch_meta,
                   ["k", "l", "s_model", "s_model_err"], branch_rows)
        print(f"wrote {out / 'branch_noise.csv'} "
              f"({args.memory} memory, {args.ancilla} satellites)")
    return 0


def _cmd_filterfn(args):
    out = _out_dir(args)
    seq = parse_sequence_spec(args.sequence)
    if args.cycles < 1:
        raise InputError(f"--cycles must be >= 1, got {args.cycles}")
    if args.points < 2:
        raise InputError("--points must be >= 2")
    base = TWO_PI / modulation_profile(seq).period
    om_lo = (_omega_in(args.omega_min, args.freq_unit)
             if args.omega_min is not None else 0.01 * base)
    om_hi = (_omega_in(args.omega_max, args.freq_unit)
             if args.omega_max is not None else 200.0 * base)
    if not (0.0 < om_lo < om_hi):
        raise InputError(f"need 0 < omega-min < omega-max, got "
                         f"[{om_lo:g}, {om_hi:g}] rad/s")
    omegas = np.geomspace(om_lo, om_hi, args.points)
    ff = filter_function_sq(seq, omegas, n_cycles=args.cycles)
    settings = {"command": "filterfn", "seed": args.seed,
                "sequence_cycle": seq.cycle,
                "sequence_pulses": list(seq.pulse_times),
                "cycles": args.cycles, "omega_lo": float(om_lo),
                "omega_hi": float(om_hi), "points": args.points}
    meta = _meta("filterfn", args.seed, settings)
    rows = [(om, om / TWO_PI, v) for om, v in zip(omegas, ff)]
    _write_csv(out / "filter_function.csv", meta,
               ["omega_rad_s", "freq_hz", "ff_sq"], rows)
    plot_filter_function(out / "filter_function.png", omegas, ff,
                         args.sequence, args.freq_unit)
    print(f"filterfn: {args.points} points over [{om_lo:.6g}, {om_hi:.6g}] "
          f"rad/s")
    print(f"wrote {out / 'filter_function.csv'} and "
          f"{out / 'filter_function.png'}")
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "scaling": _cmd_scaling,
    "filterfn": _cmd_filterfn,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, args)
        _validate_common(args)
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"ddnoise: error: {exc}", file=sys.stderr)
        return 2
    except OracleFitError as exc:
        print(f"ddnoise: oracle fit failed: {exc}", file=sys.stderr)
        return 4
    except (QuadratureError, ConvergenceError) as exc:
        print(f"ddnoise: did not converge: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"ddnoise: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
