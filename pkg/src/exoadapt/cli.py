"""Command-line entry point: EMG processing, surface optimization, and
session replay, all driven by one TOML config and a single root seed."""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import sys
from pathlib import Path

import numpy as np

from . import emg, io, plots, replay, surfaces
from .config import Config, load_config
from .errors import ConvergenceError, ExoAdaptError, InsufficientDataError, SchemaError

ALL_FORMATS = ("csv", "json", "svg")


def _common_flags(parser):
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory")
    parser.add_argument(
        "--format",
        action="append",
        choices=ALL_FORMATS,
        help="restrict emitted output kinds (repeatable; default: all)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exoadapt",
        description="Exoskeleton performance surfaces and adaptive-control replay.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_emg = sub.add_parser("emg", help="process EMG recordings into envelopes and stats")
    _common_flags(p_emg)
    p_emg.add_argument("--signals", type=Path, required=True, help="EMG CSV (time_s,<muscle>,...)")
    p_emg.add_argument("--meta", type=Path, required=True, help="sidecar metadata JSON")
    p_emg.add_argument("--mvc", type=Path, required=True, help="MVC recording CSV (same muscles)")
    p_emg.add_argument("--mvc-meta", type=Path, help="MVC sidecar metadata (default: --meta)")
    p_emg.add_argument("--spans", type=Path, help="lift-cycle spans CSV (start_s,end_s)")
    p_emg.add_argument("--per-cycle", action="store_true", help="average stats per cycle instead of pooling")
    p_emg.set_defaults(func=cmd_emg)

    p_orf = sub.add_parser("orf", help="build surfaces and extract the optimal assistance law")
    _common_flags(p_orf)
    p_orf.add_argument("--samples", type=Path, required=True, help="metric samples CSV")
    p_orf.add_argument("--questionnaires", type=Path, help="discomfort questionnaire JSON")
    p_orf.add_argument("--votes", type=Path, help="preference votes JSON")
    p_orf.add_argument("--payload-slices", type=int, default=9, help="number of payload slices")
    p_orf.set_defaults(func=cmd_orf)

    p_rep = sub.add_parser("replay", help="replay session logs and score the pipeline")
    _common_flags(p_rep)
    p_rep.add_argument("--logs", type=Path, nargs="+", required=True, help="session JSONL file(s)")
    p_rep.set_defaults(func=cmd_replay)

    p_syn = sub.add_parser("synth", help="generate seeded synthetic session logs")
    _common_flags(p_syn)
    p_syn.add_argument("--subjects", type=int, default=12)
    p_syn.add_argument("--flip-prob", type=float, default=0.0)
    p_syn.set_defaults(func=cmd_synth)
    return parser


def _load_config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _formats(args) -> set:
    return set(args.format) if args.format else set(ALL_FORMATS)


def cmd_emg(args) -> int:
    cfg = _load_config(args)
    fmts = _formats(args)
    traces, _meta = io.read_emg_csv(args.signals, args.meta)
    mvc_traces, _ = io.read_emg_csv(args.mvc, args.mvc_meta or args.meta)
    missing = set(traces) - set(mvc_traces)
    if missing:
        raise SchemaError(f"{args.mvc}: missing MVC columns for {sorted(missing)}")
    spans = io.read_spans_csv(args.spans) if args.spans else None

    rows = []
    for muscle, trace in traces.items():
        ref = emg.mvc_peak(
            mvc_traces[muscle], cfg.signal.band_low_hz, cfg.signal.band_high_hz, cfg.signal.rms_window_ms
        )
        env = emg.rectify_rms(
            emg.bandpass_filter(trace, cfg.signal.band_low_hz, cfg.signal.band_high_hz, cfg.signal.filter_order),
            cfg.signal.rms_window_ms,
        )
        env = emg.normalize_mvc(env, ref)
        if "csv" in fmts:
            io.atomic_write_text(args.out_dir / "envelopes" / f"{muscle}.csv", io.envelope_csv_text(env))
        mean, peak = emg.activity_stats(env, spans, per_cycle=args.per_cycle)
        rows.append((muscle, mean, peak, env.exceeds_mvc))

    if "csv" in fmts:
        buf = _stdio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["muscle", "mean_pct_mvc", "peak_pct_mvc", "exceeds_mvc"])
        for muscle, mean, peak, flag in rows:
            writer.writerow([muscle, f"{mean:.6f}", f"{peak:.6f}", int(flag)])
        io.atomic_write_text(args.out_dir / "emg_stats.csv", buf.getvalue())
    print(f"processed {len(rows)} muscle channel(s) -> {args.out_dir}")
    return 0


def cmd_orf(args) -> int:
    cfg = _load_config(args)
    fmts = _formats(args)
    samples = io.read_samples_csv(args.samples)
    if args.questionnaires:
        samples["discomfort"].extend(
            surfaces.discomfort_samples(io.read_questionnaires_json(args.questionnaires))
        )
    if args.votes:
        samples["preference"].extend(surfaces.preference_samples(io.read_votes_json(args.votes)))
    for kind in ("emg", "discomfort", "preference"):
        if len(samples[kind]) < 2:
            raise InsufficientDataError(f"need at least 2 {kind!r} samples, got {len(samples[kind])}")

    p_lo, p_hi = cfg.surfaces.payload_range_kg
    domain = ((0.0, 1.0), (float(p_lo), float(p_hi)))
    grid = surfaces.GridSpec.default(domain, tuple(int(n) for n in cfg.surfaces.grid_shape))
    fitted = {}
    normalized = {}
    for kind, name in (("emg", "EMG"), ("discomfort", "discomfort"), ("preference", "preference")):
        surf = surfaces.fit_surface(samples[kind], kind=name, seed=cfg.seed, domain=domain)
        fitted[kind] = surf
        normalized[kind] = surfaces.normalize_surface(surf, grid)
        if "json" in fmts:
            io.write_json(args.out_dir / "surfaces" / f"{kind}.json", surf.to_dict())
        if "svg" in fmts:
            plots.surface_contour_svg(
                grid, surf.grid_values(grid), args.out_dir / "plots" / f"{kind}.svg", title=f"{name} surface"
            )

    total = surfaces.combine_total(
        normalized["emg"], normalized["discomfort"], normalized["preference"], cfg.surfaces.weights
    )
    slices = np.linspace(p_lo, p_hi, args.payload_slices)
    points = surfaces.optimal_assistance(total, slices)
    interior = [p for p in points if not p.boundary]
    curve = None
    fit_error = None
    if len(interior) >= 3:
        norm_pts = [((p.payload - p_lo) / (p_hi - p_lo), p.assistance) for p in interior]
        try:
            curve = surfaces.fit_exponential([(pn, a) for pn, a in norm_pts])
        except ConvergenceError as exc:
            fit_error = {
                "message": str(exc),
                "best_params": list(exc.best_params) if exc.best_params else None,
                "residual_rms": exc.residual_rms,
            }

    if "csv" in fmts:
        io.atomic_write_text(args.out_dir / "torf_grid.csv", io.grid_csv_text(grid, total.grid_values()))
        buf = _stdio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["payload_kg", "payload_norm", "assistance_opt", "total_value", "boundary"])
        for p in points:
            writer.writerow(
                [
                    f"{p.payload:.6f}",
                    f"{(p.payload - p_lo) / (p_hi - p_lo):.6f}",
                    f"{p.assistance:.6f}",
                    f"{p.value:.9f}",
                    int(p.boundary),
                ]
            )
        io.atomic_write_text(args.out_dir / "optimal_points.csv", buf.getvalue())
    if "json" in fmts:
        fit_obj = {
            "seed": cfg.seed,
            "weights": list(cfg.surfaces.weights),
            "payload_range_kg": [p_lo, p_hi],
            "n_points": len(interior),
            "degenerate": {k: normalized[k].degenerate for k in normalized},
        }
        if curve is not None:
            fit_obj["fit"] = {"a": curve.a, "b": curve.b, "c": curve.c, "residual_rms": curve.residual_rms}
        if fit_error is not None:
            fit_obj["fit_error"] = fit_error
        io.write_json(args.out_dir / "exp_fit.json", fit_obj)
    if "svg" in fmts:
        plots.surface_contour_svg(grid, total.grid_values(), args.out_dir / "plots" / "total.svg", title="total surface")
        if points:
            plots.optimal_curve_svg(points, curve, args.out_dir / "plots" / "optimal_curve.svg")

    if curve is not None:
        print(
            f"optimal law fit: a={curve.a:.4f} b={curve.b:.4f} c={curve.c:.4f} "
            f"(rms {curve.residual_rms:.2e}) -> {args.out_dir}"
        )
    elif fit_error is not None:
        print(f"surfaces built; exponential fit did not converge (recorded) -> {args.out_dir}")
    else:
        print(f"surfaces built; too few interior optima for an exponential fit -> {args.out_dir}")
    return 0


def cmd_replay(args) -> int:
    cfg = _load_config(args)
    fmts = _formats(args)
    reports = []
    for path in args.logs:
        log = io.load_session_jsonl(path)
        report = replay.run_session(log, cfg)
        reports.append(report)
        if "json" in fmts:
            io.write_json(args.out_dir / "reports" / f"{report.subject}.json", report.to_dict())
        if "csv" in fmts:
            lines = [c.to_json_line() for c in report.commands]
            io.atomic_write_text(
                args.out_dir / "commands" / f"{report.subject}.jsonl", "\n".join(lines) + "\n"
            )
    cohort = replay.aggregate(reports)
    if "json" in fmts:
        io.write_json(args.out_dir / "cohort.json", cohort.to_dict())
    if "svg" in fmts:
        plots.accuracy_bars_svg(cohort.per_subject, cohort.mean_accuracy, args.out_dir / "plots" / "accuracy.svg")
        plots.confusion_heatmap_svg(cohort.pooled_confusion, args.out_dir / "plots" / "confusion.svg")
    print(
        f"replayed {cohort.n_sessions} session(s): pooled accuracy "
        f"{cohort.pooled_accuracy:.2%} -> {args.out_dir}"
    )
    return 0


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    logs = replay.synth_cohort(args.subjects, seed=cfg.seed, flip_prob=args.flip_prob)
    for log in logs:
        io.atomic_write_text(args.out_dir / f"{log.subject}.jsonl", io.session_jsonl_text(log))
    print(f"wrote {len(logs)} synthetic session log(s) -> {args.out_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExoAdaptError, OSError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"exoadapt: error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
