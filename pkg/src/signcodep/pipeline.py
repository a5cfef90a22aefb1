"""End-to-end run: ingest -> filter -> annotate -> accumulate -> test -> report.

Frame files are processed in fixed-size chunks, optionally across a process
pool.  Chunks are merged in submission order and tables are sums, so every
output is independent of the worker count.
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .filtering import FilterConfig, FilterReport, filter_frame
from .ingest import ManifestError, frame_files, read_frames, read_manifest
from .phonology import (
    FAILURE_NAMES,
    LOCATIONS,
    OK,
    ORIENTATIONS,
    LocationConfig,
    PhonologicalAnnotation,
    annotate_arrays,
    read_annotations,
    write_annotations,
)
from .report import HANDS, AnalysisResults, analyze, dump_json, render_outputs
from .stats import ContingencyTable, accumulate

logger = logging.getLogger(__name__)

OUTPUT_ENV = "SIGNCODEP_OUTPUT_DIR"
DEFAULT_OUTPUT = "signcodep-out"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    manifest: Path | None = None
    output_dir: Path | None = None
    filter: FilterConfig = FilterConfig()
    location: LocationConfig = LocationConfig()
    alpha: float = 0.001
    min_expected: float = 5.0
    heatmaps: bool = True
    continuity_correction: bool = False
    dump_annotations: bool = True
    workers: int = 1
    chunk_size: int = 1000
    min_video_acceptance: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.min_expected < 0:
            raise ConfigError("min_expected must be >= 0")
        if self.workers < 1 or self.chunk_size < 1:
            raise ConfigError("workers and chunk_size must be >= 1")
        if self.min_video_acceptance is not None and not 0.0 <= self.min_video_acceptance <= 1.0:
            raise ConfigError("min_video_acceptance must lie in [0, 1]")

    def resolved_output(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)

    def analysis_dict(self) -> dict:
        """Settings that affect results (paths and worker count excluded)."""
        return {
            "filter": self.filter.to_dict(),
            "location": {"threshold_fraction": self.location.threshold_fraction},
            "alpha": self.alpha,
            "min_expected": self.min_expected,
            "continuity_correction": self.continuity_correction,
            "heatmaps": self.heatmaps,
            "dump_annotations": self.dump_annotations,
            "chunk_size": self.chunk_size,
            "min_video_acceptance": self.min_video_acceptance,
        }


_SIMPLE_KEYS = {f.name for f in fields(PipelineConfig)} - {"filter", "location", "manifest", "output_dir"}


def config_from_dict(doc: dict, base_dir=".", base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Apply a config document on top of ``base``; relative paths resolve against ``base_dir``."""
    unknown = set(doc) - _SIMPLE_KEYS - {"filter", "location", "manifest", "output_dir"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        updates = {k: doc[k] for k in _SIMPLE_KEYS if k in doc}
        for key in ("manifest", "output_dir"):
            if doc.get(key) is not None:
                p = Path(doc[key])
                updates[key] = p if p.is_absolute() else Path(base_dir) / p
        if "filter" in doc:
            updates["filter"] = replace(base.filter, **doc["filter"])
        if "location" in doc:
            updates["location"] = replace(base.location, **doc["location"])
        return replace(base, **updates)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except ValueError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(doc, path.parent, base)


# ── chunk processing ───────────────────────────────────────────────────


@dataclass
class ChunkResult:
    corpus_id: str
    video_id: str
    annotations: list = field(default_factory=list)
    filter_counts: Counter = field(default_factory=Counter)
    skipped: list = field(default_factory=list)
    annotate_skips: Counter = field(default_factory=Counter)


def process_chunk(task) -> ChunkResult:
    """Parse, filter and annotate one run of frame files of a single video."""
    corpus_id, video_id, paths, first_id, width, height, filter_cfg, location_cfg, annotate = task
    out = ChunkResult(corpus_id, video_id)

    def on_skip(path, reason):
        out.skipped.append((str(path), reason))

    hands, bodies, keys = [], [], []
    for frame in read_frames(paths, width, height, first_id, on_skip):
        verdict = filter_frame(frame, filter_cfg)
        out.filter_counts["Accepted" if verdict.accepted else verdict.reason.value] += 1
        if not verdict.accepted or not annotate:
            continue
        person = frame.people[0]
        for side in HANDS:
            if side in verdict.hands:
                hands.append(person.hand(side).keypoints)
                bodies.append(person.body.keypoints)
                keys.append((frame.frame_id, side))
    out.filter_counts["Malformed"] += len(out.skipped)

    if keys:
        loc, ori, status = annotate_arrays(
            np.stack(hands), np.stack(bodies), width, height,
            filter_cfg.min_keypoint_confidence, location_cfg.threshold_fraction,
        )
        for (frame_id, side), li, oi, st in zip(keys, loc, ori, status):
            if st != OK:
                out.annotate_skips[FAILURE_NAMES[int(st)]] += 1
                continue
            out.annotations.append(
                PhonologicalAnnotation(corpus_id, video_id, frame_id, side, LOCATIONS[li], ORIENTATIONS[oi])
            )
    return out


def _tasks(manifest, config: PipelineConfig, annotate: bool = True):
    for corpus_id, video in manifest.videos():
        paths = frame_files(video.frames_dir)
        for start in range(0, len(paths), config.chunk_size):
            yield (corpus_id, video.video_id, paths[start:start + config.chunk_size], start,
                   video.image_width, video.image_height, config.filter, config.location, annotate)


def _run_chunks(tasks, workers: int):
    if workers == 1:
        yield from map(process_chunk, tasks)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(process_chunk, tasks)


# ── public entry points ────────────────────────────────────────────────


@dataclass
class RunResult:
    results: AnalysisResults
    run_manifest: dict
    annotations: list
    output_dir: Path


def _fresh_tables(corpora: dict):
    tables = {(c, h): ContingencyTable(c, h) for c in corpora for h in HANDS}
    video_tables = {(c, v): ContingencyTable(c, None) for c, videos in corpora.items() for v in videos}
    return tables, video_tables


def tables_from_annotations(annotations, corpora: dict):
    tables, video_tables = _fresh_tables(corpora)
    accumulate(annotations, tables)
    for a in annotations:
        key = (a.corpus_id, a.video_id)
        if key not in video_tables:
            video_tables[key] = ContingencyTable(a.corpus_id, None)
        video_tables[key].add(a.orientation, a.location)
    return tables, video_tables


@dataclass
class Collected:
    """Output of the ingest/filter/annotate stages for a whole manifest."""

    corpora: dict
    annotations: list
    report: FilterReport
    skipped: list
    annotate_skips: Counter


def collect(config: PipelineConfig, annotate: bool = True) -> Collected:
    """Parse, filter and (optionally) annotate every frame of the manifest."""
    if config.manifest is None:
        raise ConfigError("no manifest given")
    manifest = read_manifest(config.manifest)
    manifest.check_directories()
    manifest_dir = Path(config.manifest).resolve().parent

    corpora = {c.corpus_id: [v.video_id for v in c.videos] for c in manifest.corpora}
    report = FilterReport()
    for corpus_id, video in manifest.videos():
        report.ensure(corpus_id, video.video_id)
    annotations, skipped, annotate_skips = [], [], Counter()
    for chunk in _run_chunks(_tasks(manifest, config, annotate), config.workers):
        report.counts[(chunk.corpus_id, chunk.video_id)].update(chunk.filter_counts)
        annotations.extend(chunk.annotations)
        annotate_skips.update(chunk.annotate_skips)
        for path, reason in chunk.skipped:
            skipped.append({
                "corpus": chunk.corpus_id,
                "video": chunk.video_id,
                "path": _relative(path, manifest_dir),
                "reason": reason,
            })
    return Collected(corpora, annotations, report, skipped, annotate_skips)


def write_filter_report(report: FilterReport, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "filter_report.txt").write_text(report.to_text())
    dump_json(report.to_records(), out_dir / "filter_report.json")


def run_annotate(config: PipelineConfig) -> Collected:
    """Ingest, filter and annotate; writes the annotation dump and filter report."""
    got = collect(config)
    out_dir = config.resolved_output()
    write_filter_report(got.report, out_dir)
    write_annotations(got.annotations, out_dir / "annotations.tsv", got.corpora)
    return got


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Run every stage and write the full output tree.

    Raises :class:`ConfigError` or :class:`ManifestError` for unusable
    configuration or manifests; malformed frames and empty corpora only
    produce warnings.
    """
    started = time.perf_counter()
    got = collect(config)
    out_dir = config.resolved_output()
    corpora = got.corpora

    tables, video_tables = tables_from_annotations(got.annotations, corpora)
    results = analyze(list(corpora), tables, video_tables, config.alpha, config.min_expected,
                      config.continuity_correction)
    render_outputs(results, out_dir, heatmaps=config.heatmaps)
    if config.dump_annotations:
        write_annotations(got.annotations, out_dir / "annotations.tsv", corpora)
    write_filter_report(got.report, out_dir)

    records = got.report.to_records()
    low = []
    if config.min_video_acceptance is not None:
        low = [f"{r['corpus']}/{r['video']}" for r in records
               if r["total_files"] and r["acceptance_ratio"] < config.min_video_acceptance]
        for name in low:
            logger.warning("video %s is below the acceptance ratio %.2f", name, config.min_video_acceptance)

    totals = Counter()
    for r in records:
        for col in FilterReport.COLUMNS:
            totals[col] += r[col]
    run_manifest = {
        "tool": "signcodep",
        "version": __version__,
        "manifest": Path(config.manifest).name,
        "config": config.analysis_dict(),
        "totals": {
            "files": sum(totals.values()),
            "frames_read": sum(totals.values()) - totals["Malformed"],
            "malformed": totals["Malformed"],
            "accepted": totals["Accepted"],
            "rejected": {k: totals[k] for k in FilterReport.COLUMNS[1:-1]},
            "annotations": {c: {h.value: tables[(c, h)].grand_total for h in HANDS} for c in corpora},
            "annotation_skips": dict(sorted(got.annotate_skips.items())),
        },
        "videos": records,
        "low_acceptance_videos": low,
        "skipped_files": got.skipped,
        "runtime": {
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "workers": config.workers,
            "output_dir": str(out_dir),
            "elapsed_seconds": round(time.perf_counter() - started, 3),
        },
    }
    dump_json(run_manifest, out_dir / "run_manifest.json")
    return RunResult(results, run_manifest, got.annotations, out_dir)


def _relative(path, base) -> str:
    try:
        return Path(path).resolve().relative_to(Path(base).resolve()).as_posix()
    except ValueError:
        return str(path)


def run_stats(annotation_file, output_dir, alpha=0.001, min_expected=5.0, correction=False,
              heatmaps=True) -> AnalysisResults:
    """Statistics and reports from an annotation dump (the later half of the pipeline)."""
    try:
        annotations, corpora = read_annotations(annotation_file)
    except FileNotFoundError as exc:
        raise ManifestError(f"annotation file not found: {annotation_file}") from exc
    tables, video_tables = tables_from_annotations(annotations, corpora)
    results = analyze(list(corpora), tables, video_tables, alpha, min_expected, correction)
    render_outputs(results, output_dir, heatmaps=heatmaps)
    return results


def ingest_check(config: PipelineConfig) -> FilterReport:
    """Parse and filter only; no annotation or statistics."""
    return collect(config, annotate=False).report
