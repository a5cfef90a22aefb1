import hashlib
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from signcodep.ingest import Hand
from signcodep.phonology import LOCATIONS, ORIENTATIONS, LocationBin, OrientationBin
from signcodep.report import (
    AlphaMismatch,
    HandMismatch,
    analyze,
    compare_languages,
    read_significance,
    relative_frequencies,
    render_outputs,
    significance_from_dict,
    significance_to_dict,
)
from signcodep.stats import ContingencyTable, Direction, EmptyTable, SignificanceMap, significance_map

CELLS = [(o, l) for o in ORIENTATIONS for l in LOCATIONS]


def test_single_cell_frequency():
    counts = np.zeros((8, 7), dtype=int)
    counts[3, 2] = 7
    f = relative_frequencies(ContingencyTable(counts=counts))
    assert f.values[3, 2] == 1.0 and f.values.sum() == 1.0


def test_two_cell_frequency():
    t = ContingencyTable("A")
    t.add(OrientationBin.N, LocationBin.NECK, 2)
    t.add(OrientationBin.E, LocationBin.ABDOMEN)
    f = relative_frequencies(t)
    assert f.values[0, 3] == pytest.approx(2 / 3)
    assert f.values[2, 5] == pytest.approx(1 / 3)
    assert f.total == 3


def test_uniform_frequency():
    f = relative_frequencies(ContingencyTable(counts=np.full((8, 7), 9)))
    assert np.allclose(f.values, 1 / 56)


def test_empty_frequency():
    with pytest.raises(EmptyTable):
        relative_frequencies(ContingencyTable())


@given(st.lists(st.integers(0, 10**6), min_size=56, max_size=56).filter(any))
def test_frequencies_sum_to_one(counts):
    f = relative_frequencies(ContingencyTable(counts=np.reshape(counts, (8, 7))))
    assert abs(f.values.sum() - 1.0) <= 1e-12
    assert ((0 <= f.values) & (f.values <= 1)).all()


def _sig(cells, corpus="A", hand=Hand.RIGHT, alpha=0.001, direction=Direction.OVER):
    from signcodep.stats import PostHocTable, SignificanceCell

    out = [
        SignificanceCell(c, PostHocTable(c, 1, 1, 1, 1), 0.0, 1.0, 1.0, c in cells, direction)
        for c in CELLS
    ]
    return SignificanceMap(corpus, hand, alpha, 5.0, False, 56, out)


x, y, z = CELLS[0], CELLS[10], CELLS[20]


@pytest.mark.parametrize(
    "a, b, shared, only_a, only_b",
    [({x, y}, {x, y}, {x, y}, set(), set()), ({x}, {y}, set(), {x}, {y}), ({x, y}, {y, z}, {y}, {x}, {z})],
)
def test_comparison_examples(a, b, shared, only_a, only_b):
    cmp = compare_languages(_sig(a), _sig(b, "B"))
    assert (cmp.shared_significant, cmp.only_a, cmp.only_b) == (shared, only_a, only_b)


def test_comparison_ignores_under_represented():
    cmp = compare_languages(_sig({x}, direction=Direction.UNDER), _sig({x}, "B"))
    assert cmp.shared_significant == set() and cmp.only_b == {x}


def test_comparison_mismatch():
    with pytest.raises(HandMismatch):
        compare_languages(_sig(set()), _sig(set(), hand=Hand.LEFT))
    with pytest.raises(AlphaMismatch):
        compare_languages(_sig(set()), _sig(set(), alpha=0.01))


cell_sets = st.sets(st.sampled_from(CELLS))


@given(cell_sets, cell_sets)
def test_partition_laws(a, b):
    cmp = compare_languages(_sig(a), _sig(b, "B"))
    parts = (cmp.shared_significant, cmp.only_a, cmp.only_b)
    assert all(not (p & q) for i, p in enumerate(parts) for q in parts[i + 1:])
    assert set().union(*parts) == a | b


def test_significance_json_round_trip(rng):
    counts = rng.integers(0, 40, (8, 7))
    counts[0, 3] = 500
    sig = significance_map(ContingencyTable("ASL", Hand.LEFT, counts))
    back = significance_from_dict(significance_to_dict(sig))
    assert back == sig


def _results(rng, empty_b=False):
    tables = {}
    for corpus in ("ASL", "Libras"):
        for hand in (Hand.LEFT, Hand.RIGHT):
            counts = rng.integers(0, 60, (8, 7))
            if empty_b and corpus == "Libras":
                counts[:] = 0
            tables[(corpus, hand)] = ContingencyTable(corpus, hand, counts)
    videos = {("ASL", "v0"): ContingencyTable("ASL", None, tables[("ASL", Hand.LEFT)].counts)}
    return analyze(["ASL", "Libras"], tables, videos)


def _digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_render_layout_and_determinism(tmp_path, rng):
    res = _results(rng)
    render_outputs(res, tmp_path / "a")
    render_outputs(res, tmp_path / "b")
    da, db = _digest(tmp_path / "a"), _digest(tmp_path / "b")
    assert da == db
    for rel in ("results.json", "counts/ASL/left.tsv", "frequencies/Libras/all.tsv",
                "frequencies/ASL/videos/v0.tsv", "significance/ASL/right.json",
                "comparison/ASL__vs__Libras.tsv", "heatmaps/Libras/left_significance.svg"):
        assert rel in da
    sig = read_significance(tmp_path / "a" / "significance" / "ASL" / "right.json")
    assert sig == res.significance[("ASL", Hand.RIGHT)]


def test_heatmaps_can_be_disabled(tmp_path, rng):
    render_outputs(_results(rng), tmp_path, heatmaps=False)
    assert not list(tmp_path.rglob("*.svg"))


def test_empty_corpus_is_marked_and_warned(tmp_path, rng, caplog):
    with caplog.at_level(logging.WARNING):
        res = _results(rng, empty_b=True)
    assert "Libras" in caplog.text
    render_outputs(res, tmp_path)
    assert "empty" in (tmp_path / "frequencies" / "Libras" / "left.tsv").read_text()
    assert "empty" in (tmp_path / "significance" / "Libras" / "left.tsv").read_text()
