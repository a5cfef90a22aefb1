"""Contingency table, post-hoc 2x2 tests and the Bonferroni-adjusted map."""

import numpy as np

from signcodep import ContingencyTable, chi_square_2x2, post_hoc_decompose, relative_frequencies, significance_map
from signcodep.phonology import LocationBin, OrientationBin
from signcodep.stats import PostHocTable

rng = np.random.default_rng(0)

# independent background plus extra mass on (N, Neck) and (E, Shoulder)
counts = rng.poisson(40, size=(8, 7))
counts[0, 3] += 300
counts[2, 4] += 120
table = ContingencyTable("demo", None, counts)
print("grand total", table.grand_total)

# one cell against the rest of its row, the rest of its column and everything else
cell = next(t for t in post_hoc_decompose(table) if t.cell == (OrientationBin.N, LocationBin.NECK))
print("a b c d =", cell.a, cell.b, cell.c, cell.d)
print("chi2, p =", chi_square_2x2(cell))

# textbook table
print(chi_square_2x2(PostHocTable(None, 10, 20, 30, 40)))
print(chi_square_2x2(PostHocTable(None, 10, 20, 30, 40), correction=True))

sig = significance_map(table, alpha=0.001)
print(sig.n_tests, "tests in the Bonferroni family")
for c in sig:
    if c.significant:
        o, l = c.cell
        print(f"  {o.value:2s} {l.value:12s} {c.direction.value:17s} chi2={c.chi2_statistic:8.2f} p_adj={c.p_adjusted:.2e}")

freq = relative_frequencies(table)
print("frequency row N:", np.round(freq.values[0], 3), "sum", freq.values.sum())
