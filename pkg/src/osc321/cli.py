"""Command-line interface: ``osc321 <subcommand> [options]``.

Exit status: 0 success, 2 invalid configuration or arguments, 3 partial
failure of a sweep.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ChannelError, ConfigInvalid, Osc321Error, PartialFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit(data: dict, out: Path | None, name: str) -> None:
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True)
    print(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n", encoding="utf-8")


def _model(args):
    from .model import ChannelSet, FockTruncation, suggest_truncation

    cs = ChannelSet.canonical(args.kappa1, args.kappa3)
    trunc = FockTruncation(args.nmax) if args.nmax else suggest_truncation(cs)
    return cs, trunc


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(x)) if not isinstance(x, (int, np.integer)) else str(x) for x in r) + "\n")


def cmd_steady(args) -> int:
    from .plotting import plot_number_distribution, plot_wigner
    from .steady import steady_state_report, wigner_from_diagonal

    cs, trunc = _model(args)
    rep = steady_state_report(cs, trunc)
    out = Path(args.out) if args.out else None
    _emit(
        {
            "kappa1_over_kappa2": args.kappa1,
            "kappa3_over_kappa2": args.kappa3,
            "n_max": trunc.n_max,
            "mean_n": rep.mean_n,
            "mu2": rep.mu2,
            "class": rep.classification,
            "tail_mass": rep.tail_mass,
        },
        out,
        "steady.json",
    )
    if out is not None:
        p = rep.distribution.p
        _write_rows(out / "distribution.csv", ["n", "P_n"], [(i, x) for i, x in enumerate(p)])
        plot_number_distribution(p, out / "distribution.svg", title=rep.classification)
        plot_wigner(wigner_from_diagonal(rep.distribution), out / "wigner.svg", title=rep.classification)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .spectral import metastability_ratio, phase_diffusion_constant, slowest_timescales

    cs, trunc = _model(args)
    reps = slowest_timescales(cs, trunc, tuple(range(args.kmax + 1)))
    m = metastability_ratio(cs, trunc)
    d = phase_diffusion_constant(cs, trunc)
    _emit(
        {
            "n_max": trunc.n_max,
            "tau": {r.k: r.tau for r in reps},
            "leading_eigs": {r.k: [[z.real, z.imag] for z in r.leading_eigs] for r in reps},
            "M_ratio": m.ratio,
            "lambda": [m.lambda0, m.lambda1, m.lambda2],
            "phase_diffusion": {"numerical": d.numerical, "analytic": d.analytic, "extrapolated": d.extrapolated},
        },
        Path(args.out) if args.out else None,
        "spectrum.json",
    )
    return EXIT_OK


def cmd_meanfield(args) -> int:
    from .meanfield import bistable_window, mf_fixed_points

    s = mf_fixed_points(args.kappa1, 1.0, args.kappa3)
    lo, hi = bistable_window(args.kappa3)
    _emit(
        {
            "n0_stable": s.stable_n0,
            "n_plus": s.n_plus,
            "n_minus": s.n_minus,
            "n_plus_stable": s.stable_n_plus,
            "bistable": s.bistable,
            "bistable_window_kappa1_over_kappa2": [lo, hi],
        },
        Path(args.out) if args.out else None,
        "meanfield.json",
    )
    return EXIT_OK


def cmd_trajectory(args) -> int:
    from .errors import NotBimodal
    from .plotting import plot_activity
    from .trajectories import intermittency_stats, run_trajectory

    cs, trunc = _model(args)
    rec = run_trajectory(cs, trunc, args.t_final, args.seed)
    out = Path(args.out) if args.out else None
    summary = {
        "seed": args.seed,
        "t_final": args.t_final,
        "n_max": trunc.n_max,
        "jump_counts": dict(zip(rec.channel_labels, rec.jump_counts(args.burn_in).tolist())),
        "mean_n_time_avg": rec.time_average_n(args.burn_in),
    }
    stats = None
    try:
        stats = intermittency_stats(rec, args.window, t_start=args.burn_in)
    except NotBimodal as exc:
        stats = exc.stats
    except ValueError:
        pass
    if stats is not None:
        summary.update(
            bimodal=stats.bimodal,
            mean_dwell_high=stats.mean_dwell_high,
            mean_dwell_low=stats.mean_dwell_low,
        )
    _emit(summary, out, "trajectory.json")
    if out is not None:
        rec.write_csv(out / "events.csv")
        if stats is not None:
            plot_activity(stats, out / "activity.svg")
    return EXIT_OK


def cmd_coupled(args) -> int:
    from .coupled import (
        fourier_coefficients,
        oracle_phase_distribution,
        perturbative_blocks,
        phase_distribution,
    )
    from .plotting import plot_phase_distribution

    cs, trunc = _model(args)
    fc = fourier_coefficients(perturbative_blocks(cs, trunc, args.J, check_tail=args.tail_check))
    dist = phase_distribution(fc)
    data = {
        "J_over_kappa2": args.J,
        "n_max": trunc.n_max,
        "F2_over_J2": fc[2] / args.J**2 if args.J else 0.0,
        "F4_over_J4": fc[4] / args.J**4 if args.J else 0.0,
        "periodicity_class": dist.periodicity,
        "peak_to_peak": dist.peak_to_peak,
        "odd_orders_vanish": fc.odd_verified,
    }
    if args.oracle:
        od = oracle_phase_distribution(cs, args.J, trunc)
        data["oracle"] = {"F2": od.fourier.get(2), "F4": od.fourier.get(4), "dim": od.extras["dim"]}
    out = Path(args.out) if args.out else None
    _emit(data, out, "coupled.json")
    if out is not None:
        _write_rows(out / "phase_distribution.csv", ["phi", "P"], zip(dist.phi, dist.density))
        plot_phase_distribution(dist, out / "phase_distribution.svg")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .sweep import SweepConfig, render_sweep_plots, run_sweep

    cfg = SweepConfig.from_json(args.config)
    if args.out:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    status = EXIT_OK
    try:
        result = run_sweep(cfg, jobs=args.jobs, resume=args.resume)
    except PartialFailure as exc:
        result = exc.result
        print(f"partial failure: {exc}", file=sys.stderr)
        for key in result.failed:
            print(f"  {key}: {result.manifest['points'][key].get('error')}", file=sys.stderr)
        status = EXIT_PARTIAL
    if args.plots:
        render_sweep_plots(result)
    print(json.dumps({"computed": result.computed, "failed": len(result.failed),
                      "csv": {k: str(v) for k, v in result.csv_paths.items()}}, indent=2, sort_keys=True))
    return status


def cmd_plot(args) -> int:
    from .plotting import render_heatmap

    path = render_heatmap(args.csv, args.column, args.out, scale=args.scale)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osc321", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p):
        p.add_argument("--kappa1", type=float, required=True, help="kappa1/kappa2")
        p.add_argument("--kappa3", type=float, required=True, help="kappa3/kappa2")
        p.add_argument("--nmax", type=int, default=None, help="Fock cutoff (default: automatic)")
        p.add_argument("--out", default=None, help="directory for JSON, CSV and figures")

    p = sub.add_parser("steady", help="steady-state P_n, moments, class and Wigner plot")
    model_args(p)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("spectrum", help="slow timescales and metastability ratio")
    model_args(p)
    p.add_argument("--kmax", type=int, default=2, help="highest coherence order k")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("meanfield", help="mean-field fixed points and stability")
    p.add_argument("--kappa1", type=float, required=True, help="kappa1/kappa2")
    p.add_argument("--kappa3", type=float, required=True, help="kappa3/kappa2")
    p.add_argument("--out", default=None, help="directory for the JSON result")
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("trajectory", help="one quantum-jump trajectory and its activity statistics")
    model_args(p)
    p.add_argument("--seed", type=int, default=0, help="root seed of the random stream")
    p.add_argument("--t-final", type=float, default=200.0, help="duration in units of 1/kappa2")
    p.add_argument("--burn-in", type=float, default=10.0, help="time discarded before averaging")
    p.add_argument("--window", type=float, default=0.1, help="jump-counting window length")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("coupled", help="relative-phase distribution of two coupled oscillators")
    model_args(p)
    p.add_argument("--J", type=float, required=True, help="J/kappa2")
    p.add_argument("--oracle", action="store_true", help="also solve the exact two-mode problem")
    p.add_argument("--tail-check", action=argparse.BooleanOptionalAction, default=True,
                   help="refuse cutoffs that hold weight in the top level (disable for small --nmax oracle runs)")
    p.set_defaults(func=cmd_coupled)

    p = sub.add_parser("sweep", help="run a parameter-grid sweep from a JSON config")
    p.add_argument("config", help="sweep description (JSON)")
    p.add_argument("--out", default=None, help="override output_dir")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--resume", action=argparse.BooleanOptionalAction, default=True,
                   help="skip points already done in the output manifest")
    p.add_argument("--plots", action=argparse.BooleanOptionalAction, default=True,
                   help="render a heatmap per result column next to the CSVs")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="heatmap of one column of a sweep CSV")
    p.add_argument("csv", help="sweep CSV with kappa1 and kappa3 columns")
    p.add_argument("--column", required=True, help="column to colour by")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--scale", choices=("linear", "log", "symlog"), default="linear")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigInvalid, ChannelError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Osc321Error as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
