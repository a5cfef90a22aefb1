"""Orientation x location contingency tables and per-cell post-hoc tests.

Each cell of a global table is collapsed into a 2x2 table (the cell, the
rest of its row, the rest of its column, everything else) and tested with
a 1-df Pearson chi-square.  Raw p-values are Bonferroni-adjusted over the
valid cells of the same table.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .ingest import Hand
from .phonology import LOCATIONS, ORIENTATIONS, LocationBin, OrientationBin
from .special import chi2_sf

_ORI_POS = {o: i for i, o in enumerate(ORIENTATIONS)}
_LOC_POS = {l: i for i, l in enumerate(LOCATIONS)}


class EmptyTable(ValueError):
    pass


class Direction(str, enum.Enum):
    OVER = "OverRepresented"
    UNDER = "UnderRepresented"


@dataclass
class ContingencyTable:
    """Counts indexed ``[orientation, location]``.

    Defaults to the full 8 x 7 label set; any other label lists work for the
    statistics as long as ``counts`` has the matching shape.
    """

    corpus_id: str = ""
    hand: Hand | None = None
    counts: np.ndarray = None
    row_labels: tuple = ORIENTATIONS
    col_labels: tuple = LOCATIONS

    def __post_init__(self):
        shape = (len(self.row_labels), len(self.col_labels))
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)
        else:
            self.counts = np.array(self.counts, dtype=np.int64)
        if self.counts.shape != shape:
            raise ValueError(f"counts shape {self.counts.shape} does not match labels {shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def grand_total(self) -> int:
        return int(self.counts.sum())

    def count(self, orientation, location) -> int:
        return int(self.counts[self.row_labels.index(orientation), self.col_labels.index(location)])

    def add(self, orientation: OrientationBin, location: LocationBin, n: int = 1) -> None:
        self.counts[_ORI_POS[orientation], _LOC_POS[location]] += n

    def merge(self, other: "ContingencyTable") -> "ContingencyTable":
        if (self.row_labels, self.col_labels) != (other.row_labels, other.col_labels):
            raise ValueError("cannot merge tables with different labels")
        return ContingencyTable(
            self.corpus_id, self.hand, self.counts + other.counts, self.row_labels, self.col_labels
        )

    __add__ = merge

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return (
            (self.corpus_id, self.hand, self.row_labels, self.col_labels)
            == (other.corpus_id, other.hand, other.row_labels, other.col_labels)
            and np.array_equal(self.counts, other.counts)
        )


def accumulate(annotations: Iterable, tables: dict | None = None) -> dict:
    """Fold annotations into ``{(corpus_id, hand): ContingencyTable}``.

    Pass ``tables`` to keep adding to existing tables (e.g. to pre-seed
    zero tables for corpora that may see no annotations).
    """
    tables = {} if tables is None else tables
    for a in annotations:
        key = (a.corpus_id, a.hand)
        table = tables.get(key)
        if table is None:
            table = tables[key] = ContingencyTable(a.corpus_id, a.hand)
        table.counts[_ORI_POS[a.orientation], _LOC_POS[a.location]] += 1
    return tables


def merge_tables(*parts: dict) -> dict:
    out = {}
    for part in parts:
        for key, table in part.items():
            out[key] = out[key].merge(table) if key in out else ContingencyTable(
                table.corpus_id, table.hand, table.counts.copy(), table.row_labels, table.col_labels
            )
    return out


@dataclass(frozen=True)
class PostHocTable:
    cell: tuple
    a: int
    b: int
    c: int
    d: int

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.int64)


def post_hoc_decompose(table: ContingencyTable) -> list:
    """One 2x2 table per cell, row-major: a = cell, b = rest of row, c = rest of column."""
    counts = table.counts
    n = int(counts.sum())
    if n == 0:
        raise EmptyTable(f"table {table.corpus_id}/{_hand_name(table.hand)} has no counts")
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    out = []
    for i, ri in enumerate(table.row_labels):
        for j, cj in enumerate(table.col_labels):
            a = int(counts[i, j])
            b = int(rows[i]) - a
            c = int(cols[j]) - a
            out.append(PostHocTable((ri, cj), a, b, c, n - int(rows[i]) - int(cols[j]) + a))
    return out


def expected_counts(t: PostHocTable) -> np.ndarray:
    obs = t.as_array().astype(np.float64)
    n = obs.sum()
    return np.outer(obs.sum(axis=1), obs.sum(axis=0)) / n


def chi_square_2x2(t: PostHocTable, correction: bool = False) -> tuple:
    """Pearson chi-square and its 1-df upper-tail p-value.

    Degenerate tables (an empty row or column margin) give ``(0.0, 1.0)``.
    With ``correction`` the Yates adjustment is applied, never past zero.
    """
    if t.total <= 0:
        raise EmptyTable("2x2 table has no counts")
    obs = t.as_array().astype(np.float64)
    exp = expected_counts(t)
    if (exp == 0).any():
        return 0.0, 1.0
    dev = np.abs(obs - exp)
    if correction:
        dev = np.maximum(dev - 0.5, 0.0)
    chi2 = float((dev**2 / exp).sum())
    return chi2, chi2_sf(chi2, 1)


@dataclass(frozen=True)
class SignificanceCell:
    cell: tuple
    table: PostHocTable
    chi2_statistic: float
    p_raw: float
    p_adjusted: float
    significant: bool
    direction: Direction
    valid: bool = True
    expected_a: float = 0.0

    @property
    def verdict(self) -> str:
        if not self.valid:
            return "Invalid"
        if self.significant:
            return "Significant"
        return "NotSignificant"

    @property
    def marker(self) -> str:
        """Over / Under when significant, Invalid for untestable cells, else empty."""
        if not self.valid:
            return "Invalid"
        if self.significant:
            return "Over" if self.direction is Direction.OVER else "Under"
        return ""


@dataclass
class SignificanceMap:
    corpus_id: str
    hand: Hand | None
    alpha: float
    min_expected: float
    correction: bool
    n_tests: int
    cells: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)

    def cell(self, orientation, location) -> SignificanceCell:
        for c in self.cells:
            if c.cell == (orientation, location):
                return c
        raise KeyError((orientation, location))

    def significant_cells(self, direction: Direction | None = Direction.OVER) -> set:
        return {
            c.cell for c in self.cells if c.significant and (direction is None or c.direction is direction)
        }


def bonferroni(p_values, n_tests: int) -> np.ndarray:
    return np.minimum(1.0, np.asarray(p_values, dtype=np.float64) * n_tests)


def significance_map(
    table: ContingencyTable,
    alpha: float = 0.001,
    min_expected: float = 5.0,
    correction: bool = False,
) -> SignificanceMap:
    """Test every cell of ``table``; the Bonferroni family is its valid cells."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    posthoc = post_hoc_decompose(table)
    tests = []
    for t in posthoc:
        exp = expected_counts(t)
        valid = bool((exp >= min_expected).all())
        chi2, p = chi_square_2x2(t, correction)
        tests.append((t, exp[0, 0], valid, chi2, p))

    n_tests = sum(valid for _, _, valid, _, _ in tests)
    cells = []
    for t, e_a, valid, chi2, p in tests:
        # invalid cells still get an adjusted value for the report
        p_adj = float(bonferroni(p, max(n_tests, 1)))
        cells.append(
            SignificanceCell(
                cell=t.cell,
                table=t,
                chi2_statistic=chi2,
                p_raw=p,
                p_adjusted=p_adj,
                significant=valid and p_adj < alpha,
                direction=Direction.OVER if t.a > e_a else Direction.UNDER,
                valid=valid,
                expected_a=float(e_a),
            )
        )
    return SignificanceMap(table.corpus_id, table.hand, alpha, min_expected, correction, n_tests, cells)


def _hand_name(hand) -> str:
    return "-" if hand is None else Hand(hand).value
