"""Relative-frequency matrices, cross-corpus comparison and output files.

Output layout under the report directory::

    results.json                          everything below, machine-readable
    counts/<corpus>/<hand|all>.tsv        raw orientation x location counts
    frequencies/<corpus>/<hand|all>.tsv   relative frequencies
    frequencies/<corpus>/videos/<video>.tsv
    significance/<corpus>/<hand>.tsv|json post-hoc test per cell
    comparison/<a>__vs__<b>.tsv|json      significant cells shared / only in one
    heatmaps/<corpus>/<hand>_{frequency,significance}.svg   (optional)

Every file is a pure function of the analysis results, so identical inputs
give byte-identical files.  Heatmap palette: frequency cells shade from
white to dark blue with the proportion (scaled to the table maximum);
significance cells are red for over-represented, blue for
under-represented, grey for untestable (Invalid) and white otherwise.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .ingest import Hand
from .phonology import LOCATIONS, ORIENTATIONS, LocationBin, OrientationBin
from .stats import (
    ContingencyTable,
    Direction,
    EmptyTable,
    PostHocTable,
    SignificanceCell,
    SignificanceMap,
    significance_map,
)

logger = logging.getLogger(__name__)

HANDS = (Hand.LEFT, Hand.RIGHT)


class HandMismatch(ValueError):
    pass


class AlphaMismatch(ValueError):
    pass


@dataclass
class FrequencyMatrix:
    corpus_id: str
    video_id: str | None
    hand: Hand | None
    values: np.ndarray
    total: int


def relative_frequencies(table: ContingencyTable, video_id: str | None = None) -> FrequencyMatrix:
    total = table.grand_total
    if total == 0:
        raise EmptyTable(f"no annotations for {table.corpus_id}")
    return FrequencyMatrix(table.corpus_id, video_id, table.hand, table.counts / total, total)


@dataclass
class LanguageComparison:
    corpus_a: str
    corpus_b: str
    hand: Hand | None
    shared_significant: frozenset
    only_a: frozenset
    only_b: frozenset


def compare_languages(sig_a: SignificanceMap, sig_b: SignificanceMap) -> LanguageComparison:
    """Partition the over-represented significant cells of two corpora."""
    if sig_a.hand != sig_b.hand:
        raise HandMismatch(f"cannot compare {sig_a.hand} with {sig_b.hand}")
    if sig_a.alpha != sig_b.alpha:
        raise AlphaMismatch(f"cannot compare alpha={sig_a.alpha} with alpha={sig_b.alpha}")
    a = sig_a.significant_cells(Direction.OVER)
    b = sig_b.significant_cells(Direction.OVER)
    return LanguageComparison(
        sig_a.corpus_id, sig_b.corpus_id, sig_a.hand, frozenset(a & b), frozenset(a - b), frozenset(b - a)
    )


def empty_significance(table: ContingencyTable, alpha, min_expected, correction) -> SignificanceMap:
    return SignificanceMap(table.corpus_id, table.hand, alpha, min_expected, correction, 0, [])


@dataclass
class AnalysisResults:
    """Tables, tests and comparisons for a set of corpora.

    ``tables`` maps (corpus, hand) to a table, ``video_tables`` maps
    (corpus, video) to a table with both hands pooled.
    """

    corpus_ids: list
    tables: dict
    video_tables: dict
    alpha: float
    min_expected: float
    correction: bool
    significance: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)

    def pooled(self, corpus_id: str) -> ContingencyTable:
        counts = sum(self.tables[(corpus_id, h)].counts for h in HANDS)
        return ContingencyTable(corpus_id, None, counts)


def analyze(corpus_ids, tables, video_tables, alpha=0.001, min_expected=5.0, correction=False) -> AnalysisResults:
    """Run the significance tests and pairwise comparisons.

    Missing (corpus, hand) tables are treated as empty.  Empty tables get an
    empty significance map and a logged warning rather than an error.
    """
    tables = dict(tables)
    for corpus_id in corpus_ids:
        for hand in HANDS:
            tables.setdefault((corpus_id, hand), ContingencyTable(corpus_id, hand))
    res = AnalysisResults(list(corpus_ids), tables, dict(video_tables), alpha, min_expected, correction)
    for corpus_id in corpus_ids:
        for hand in HANDS:
            table = tables[(corpus_id, hand)]
            if table.grand_total == 0:
                logger.warning("no %s-hand annotations for corpus %s", hand.value, corpus_id)
                res.significance[(corpus_id, hand)] = empty_significance(table, alpha, min_expected, correction)
            else:
                res.significance[(corpus_id, hand)] = significance_map(table, alpha, min_expected, correction)
    for a, b in itertools.combinations(corpus_ids, 2):
        for hand in HANDS:
            res.comparisons.append(compare_languages(res.significance[(a, hand)], res.significance[(b, hand)]))
    return res


# ── serialization ──────────────────────────────────────────────────────


def _hand(h) -> str:
    return "all" if h is None else Hand(h).value


def _cell_key(cell) -> list:
    return [cell[0].value, cell[1].value]


def _sorted_cells(cells) -> list:
    order = {(o, l): i for i, (o, l) in enumerate(itertools.product(ORIENTATIONS, LOCATIONS))}
    return sorted(cells, key=order.__getitem__)


def significance_to_dict(sig: SignificanceMap) -> dict:
    return {
        "corpus": sig.corpus_id,
        "hand": _hand(sig.hand),
        "alpha": sig.alpha,
        "min_expected": sig.min_expected,
        "correction": sig.correction,
        "n_tests": sig.n_tests,
        "status": "ok" if sig.cells else "empty",
        "cells": [
            {
                "orientation": c.cell[0].value,
                "location": c.cell[1].value,
                "a": c.table.a,
                "b": c.table.b,
                "c": c.table.c,
                "d": c.table.d,
                "expected_a": c.expected_a,
                "chi2": c.chi2_statistic,
                "p_raw": c.p_raw,
                "p_adjusted": c.p_adjusted,
                "valid": c.valid,
                "significant": c.significant,
                "verdict": c.verdict,
                "direction": c.direction.value,
            }
            for c in sig.cells
        ],
    }


def significance_from_dict(doc: dict) -> SignificanceMap:
    hand = None if doc["hand"] == "all" else Hand(doc["hand"])
    cells = []
    for c in doc["cells"]:
        cell = (OrientationBin(c["orientation"]), LocationBin(c["location"]))
        cells.append(
            SignificanceCell(
                cell=cell,
                table=PostHocTable(cell, c["a"], c["b"], c["c"], c["d"]),
                chi2_statistic=c["chi2"],
                p_raw=c["p_raw"],
                p_adjusted=c["p_adjusted"],
                significant=c["significant"],
                direction=Direction(c["direction"]),
                valid=c["valid"],
                expected_a=c["expected_a"],
            )
        )
    return SignificanceMap(
        doc["corpus"], hand, doc["alpha"], doc["min_expected"], doc["correction"], doc["n_tests"], cells
    )


def read_significance(path) -> SignificanceMap:
    return significance_from_dict(json.loads(Path(path).read_text()))


def comparison_to_dict(cmp: LanguageComparison) -> dict:
    return {
        "corpus_a": cmp.corpus_a,
        "corpus_b": cmp.corpus_b,
        "hand": _hand(cmp.hand),
        "shared_significant": [_cell_key(c) for c in _sorted_cells(cmp.shared_significant)],
        "only_a": [_cell_key(c) for c in _sorted_cells(cmp.only_a)],
        "only_b": [_cell_key(c) for c in _sorted_cells(cmp.only_b)],
    }


def _table_record(table: ContingencyTable, **scope) -> dict:
    total = table.grand_total
    return {
        **scope,
        "total": total,
        "counts": table.counts.tolist(),
        "frequencies": None if total == 0 else relative_frequencies(table).values.tolist(),
    }


def results_to_dict(res: AnalysisResults) -> dict:
    return {
        "orientations": [o.value for o in ORIENTATIONS],
        "locations": [l.value for l in LOCATIONS],
        "alpha": res.alpha,
        "min_expected": res.min_expected,
        "continuity_correction": res.correction,
        "corpora": res.corpus_ids,
        "tables": [
            _table_record(res.tables[(c, h)], corpus=c, hand=h.value)
            for c in res.corpus_ids
            for h in HANDS
        ],
        "videos": [
            _table_record(t, corpus=c, video=v) for (c, v), t in res.video_tables.items()
        ],
        "significance": [significance_to_dict(res.significance[(c, h)]) for c in res.corpus_ids for h in HANDS],
        "comparisons": [comparison_to_dict(cmp) for cmp in res.comparisons],
    }


def dump_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n")


def _matrix_tsv(values, header: str, fmt=repr) -> str:
    lines = [header, "orientation\t" + "\t".join(l.value for l in LOCATIONS)]
    for o, row in zip(ORIENTATIONS, values):
        lines.append(o.value + "\t" + "\t".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _write_matrices(table: ContingencyTable, out_dir: Path, name: str, scope: str) -> None:
    total = table.grand_total
    header = f"# {scope} total={total}"
    counts = _matrix_tsv(table.counts.tolist(), header, str)
    if total == 0:
        freq = f"# {scope} total=0\n# empty\n"
    else:
        freq = _matrix_tsv(relative_frequencies(table).values.tolist(), header)
    _write(out_dir / "counts" / name, counts)
    _write(out_dir / "frequencies" / name, freq)


SIG_COLUMNS = (
    "orientation", "location", "a", "b", "c", "d", "expected_a",
    "chi2", "p_raw", "p_adjusted", "verdict", "direction",
)


def significance_tsv(sig: SignificanceMap) -> str:
    lines = [
        f"# corpus={sig.corpus_id} hand={_hand(sig.hand)} alpha={sig.alpha!r} "
        f"min_expected={sig.min_expected!r} correction={sig.correction} n_tests={sig.n_tests}"
    ]
    if not sig.cells:
        lines.append("# empty")
    lines.append("\t".join(SIG_COLUMNS))
    for c in sig.cells:
        t = c.table
        lines.append(
            "\t".join(
                [c.cell[0].value, c.cell[1].value, str(t.a), str(t.b), str(t.c), str(t.d),
                 repr(c.expected_a), repr(c.chi2_statistic), repr(c.p_raw), repr(c.p_adjusted),
                 c.verdict, c.direction.value]
            )
        )
    return "\n".join(lines) + "\n"


def comparison_tsv(cmps) -> str:
    lines = ["hand\torientation\tlocation\tmembership"]
    for cmp in cmps:
        for label, cells in (("shared", cmp.shared_significant), ("only_" + cmp.corpus_a, cmp.only_a),
                             ("only_" + cmp.corpus_b, cmp.only_b)):
            for o, l in _sorted_cells(cells):
                lines.append(f"{_hand(cmp.hand)}\t{o.value}\t{l.value}\t{label}")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


# ── SVG heatmaps ───────────────────────────────────────────────────────

_CELL_W, _CELL_H, _LEFT, _TOP = 78, 30, 46, 56
_MARK_COLOURS = {"Over": "#d6604d", "Under": "#4393c3", "Invalid": "#bdbdbd", "": "#ffffff"}


def _blend(frac: float) -> str:
    lo, hi = np.array([255, 255, 255]), np.array([8, 48, 107])
    rgb = np.rint(lo + (hi - lo) * min(max(frac, 0.0), 1.0)).astype(int)
    return "#%02x%02x%02x" % tuple(rgb)


def _svg(title: str, fills, labels) -> str:
    width = _LEFT + _CELL_W * len(LOCATIONS) + 10
    height = _TOP + _CELL_H * len(ORIENTATIONS) + 10
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{_LEFT}" y="16" font-size="13">{escape(title)}</text>',
    ]
    for j, loc in enumerate(LOCATIONS):
        x = _LEFT + _CELL_W * j + _CELL_W // 2
        out.append(f'<text x="{x}" y="{_TOP - 8}" text-anchor="middle">{escape(loc.value)}</text>')
    for i, ori in enumerate(ORIENTATIONS):
        y = _TOP + _CELL_H * i
        out.append(f'<text x="{_LEFT - 6}" y="{y + _CELL_H // 2 + 4}" text-anchor="end">{ori.value}</text>')
        for j in range(len(LOCATIONS)):
            x = _LEFT + _CELL_W * j
            fill, text, dark = fills[i][j], labels[i][j], False
            if fill.startswith("#") and sum(int(fill[k:k + 2], 16) for k in (1, 3, 5)) < 3 * 128:
                dark = True
            out.append(
                f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" fill="{fill}" stroke="#999999"/>'
            )
            if text:
                colour = "#ffffff" if dark else "#000000"
                out.append(
                    f'<text x="{x + _CELL_W // 2}" y="{y + _CELL_H // 2 + 4}" text-anchor="middle" '
                    f'fill="{colour}">{escape(text)}</text>'
                )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def frequency_svg(freq: FrequencyMatrix | None, title: str) -> str:
    if freq is None:
        fills = [["#ffffff"] * len(LOCATIONS) for _ in ORIENTATIONS]
        return _svg(title + " (empty)", fills, [[""] * len(LOCATIONS) for _ in ORIENTATIONS])
    top = float(freq.values.max()) or 1.0
    fills = [[_blend(v / top) for v in row] for row in freq.values]
    labels = [[f"{v:.3f}" for v in row] for row in freq.values]
    return _svg(title, fills, labels)


def significance_svg(sig: SignificanceMap, title: str) -> str:
    marks = [[""] * len(LOCATIONS) for _ in ORIENTATIONS]
    for c in sig.cells:
        marks[ORIENTATIONS.index(c.cell[0])][LOCATIONS.index(c.cell[1])] = c.marker
    fills = [[_MARK_COLOURS[m] for m in row] for row in marks]
    if not sig.cells:
        title += " (empty)"
    return _svg(title, fills, marks)


# ── rendering ──────────────────────────────────────────────────────────


def render_outputs(res: AnalysisResults, out_dir, heatmaps: bool = True) -> list:
    """Write every report file for ``res`` under ``out_dir``; returns the paths written."""
    out_dir = Path(out_dir)
    written = []

    def put(rel: str, text: str):
        _write(out_dir / rel, text)
        written.append(out_dir / rel)

    for corpus_id in res.corpus_ids:
        for hand in HANDS:
            table = res.tables[(corpus_id, hand)]
            _write_matrices(table, out_dir, f"{corpus_id}/{hand.value}.tsv", f"corpus={corpus_id} hand={hand.value}")
            sig = res.significance[(corpus_id, hand)]
            put(f"significance/{corpus_id}/{hand.value}.tsv", significance_tsv(sig))
            put(f"significance/{corpus_id}/{hand.value}.json", json.dumps(significance_to_dict(sig), indent=1, sort_keys=True) + "\n")
            if heatmaps:
                freq = relative_frequencies(table) if table.grand_total else None
                put(f"heatmaps/{corpus_id}/{hand.value}_frequency.svg",
                    frequency_svg(freq, f"{corpus_id} {hand.value} hand: relative frequency"))
                put(f"heatmaps/{corpus_id}/{hand.value}_significance.svg",
                    significance_svg(sig, f"{corpus_id} {hand.value} hand: alpha={res.alpha:g} Bonferroni"))
        _write_matrices(res.pooled(corpus_id), out_dir, f"{corpus_id}/all.tsv", f"corpus={corpus_id} hand=all")
        written += [out_dir / "counts" / corpus_id / "all.tsv", out_dir / "frequencies" / corpus_id / "all.tsv"]
        written += [out_dir / d / corpus_id / f"{h.value}.tsv" for d in ("counts", "frequencies") for h in HANDS]

    for (corpus_id, video_id), table in res.video_tables.items():
        _write_matrices(table, out_dir, f"{corpus_id}/videos/{video_id}.tsv", f"corpus={corpus_id} video={video_id}")
        written += [out_dir / d / corpus_id / "videos" / f"{video_id}.tsv" for d in ("counts", "frequencies")]

    for a, b in itertools.combinations(res.corpus_ids, 2):
        cmps = [c for c in res.comparisons if (c.corpus_a, c.corpus_b) == (a, b)]
        put(f"comparison/{a}__vs__{b}.tsv", comparison_tsv(cmps))
        put(f"comparison/{a}__vs__{b}.json",
            json.dumps([comparison_to_dict(c) for c in cmps], indent=1, sort_keys=True) + "\n")

    dump_json(results_to_dict(res), out_dir / "results.json")
    written.append(out_dir / "results.json")
    return sorted(set(written))
