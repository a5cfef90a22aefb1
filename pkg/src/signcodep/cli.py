"""Command line interface.

Exit codes: 0 success, 1 configuration error, 2 manifest or data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ingest import ManifestError
from .pipeline import (
    OUTPUT_ENV,
    ConfigError,
    PipelineConfig,
    ingest_check,
    load_config,
    run_annotate,
    run_pipeline,
    run_stats,
)
from .report import (
    AlphaMismatch,
    HandMismatch,
    compare_languages,
    comparison_tsv,
    comparison_to_dict,
    read_significance,
)
from .synthgen import InfeasiblePlacement, generate_corpora, read_spec_file

logger = logging.getLogger("signcodep")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


def _add_run_options(p: argparse.ArgumentParser, stats=True) -> None:
    p.add_argument("--config", type=Path, help="JSON config file (overrides defaults)")
    p.add_argument("--manifest", type=Path, help="corpus manifest JSON")
    p.add_argument("--output-dir", type=Path, help=f"output directory (default: ${OUTPUT_ENV} or ./signcodep-out)")
    p.add_argument("--workers", type=int)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--min-confidence", type=float, dest="min_keypoint_confidence")
    p.add_argument("--min-hand-points", type=int, dest="min_valid_hand_points")
    p.add_argument("--required-body", type=lambda s: [int(i) for i in s.split(",")],
                   dest="required_body_indices", help="comma-separated BODY_25 indices")
    p.add_argument("--threshold-fraction", type=float, help="location threshold as a fraction of the image diagonal")
    p.add_argument("--min-video-acceptance", type=float)
    if stats:
        _add_stats_options(p)
        p.add_argument("--no-annotation-dump", dest="dump_annotations", action="store_false", default=None)


def _add_stats_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float)
    p.add_argument("--min-expected", type=float)
    p.add_argument("--continuity-correction", action="store_true", default=None)
    p.add_argument("--no-heatmaps", dest="heatmaps", action="store_false", default=None)


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config is not None:
        cfg = load_config(args.config, cfg)
    top = {}
    for key in ("manifest", "output_dir", "workers", "chunk_size", "alpha", "min_expected",
                "continuity_correction", "heatmaps", "dump_annotations", "min_video_acceptance"):
        value = getattr(args, key, None)
        if value is not None:
            top[key] = value
    filt = {k: getattr(args, k) for k in ("min_keypoint_confidence", "min_valid_hand_points", "required_body_indices")
            if getattr(args, k, None) is not None}
    try:
        if filt:
            top["filter"] = replace(cfg.filter, **filt)
        if args.threshold_fraction is not None:
            top["location"] = replace(cfg.location, threshold_fraction=args.threshold_fraction)
        cfg = replace(cfg, **top)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.manifest is None:
        raise ConfigError("a manifest is required (--manifest or 'manifest' in the config file)")
    return cfg


def cmd_run(args) -> int:
    res = run_pipeline(_config(args))
    totals = res.run_manifest["totals"]
    print(f"frames read {totals['frames_read']}, accepted {totals['accepted']}, "
          f"malformed {totals['malformed']}; reports in {res.output_dir}")
    return EXIT_OK


def cmd_ingest_check(args) -> int:
    cfg = _config(args)
    report = ingest_check(cfg)
    sys.stdout.write(report.to_text())
    if args.json is not None:
        args.json.write_text(json.dumps(report.to_records(), indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_annotate(args) -> int:
    cfg = _config(args)
    got = run_annotate(cfg)
    print(f"{len(got.annotations)} annotations written to {cfg.resolved_output() / 'annotations.tsv'}")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = PipelineConfig()
    if args.config is not None:
        cfg = load_config(args.config, cfg)
    values = {k: getattr(args, k) for k in ("alpha", "min_expected", "continuity_correction", "heatmaps", "output_dir")
              if getattr(args, k) is not None}
    cfg = replace(cfg, **values)
    run_stats(args.annotations, cfg.resolved_output(), cfg.alpha, cfg.min_expected,
              cfg.continuity_correction, cfg.heatmaps)
    print(f"reports in {cfg.resolved_output()}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        specs = read_spec_file(args.spec)
    except FileNotFoundError as exc:
        raise ConfigError(f"spec file not found: {args.spec}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid synth spec {args.spec}: {exc}") from exc
    out = args.output_dir or Path(PipelineConfig().resolved_output())
    manifest = generate_corpora(specs, out)
    n_videos = sum(len(c.videos) for c in manifest.corpora)
    print(f"{n_videos} synthetic videos written; manifest {out / 'manifest.json'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        a = read_significance(args.significance_a)
        b = read_significance(args.significance_b)
    except FileNotFoundError as exc:
        raise ManifestError(f"significance file not found: {exc.filename}") from exc
    except (ValueError, KeyError) as exc:
        raise ManifestError(f"unreadable significance file: {exc}") from exc
    try:
        cmp = compare_languages(a, b)
    except (HandMismatch, AlphaMismatch) as exc:
        raise ConfigError(str(exc)) from exc
    if args.json:
        text = json.dumps(comparison_to_dict(cmp), indent=1, sort_keys=True) + "\n"
    else:
        text = comparison_tsv([cmp])
    if args.output is not None:
        args.output.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signcodep",
        description="Location/orientation co-dependence analysis of sign-language pose keypoints.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: ingest, filter, annotate, statistics, reports")
    _add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest-check", help="parse and filter only; print the filter report")
    _add_run_options(p, stats=False)
    p.add_argument("--json", type=Path, help="also write the report as JSON")
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("annotate", help="write the per-hand annotation dump")
    _add_run_options(p, stats=False)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("stats", help="statistics and reports from an annotation dump")
    p.add_argument("annotations", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--output-dir", type=Path)
    _add_stats_options(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic corpus from a spec file")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--output-dir", type=Path)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="compare two significance files (JSON)")
    p.add_argument("significance_a", type=Path)
    p.add_argument("significance_b", type=Path)
    p.add_argument("--json", action="store_true", help="JSON instead of TSV")
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, InfeasiblePlacement) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ManifestError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
