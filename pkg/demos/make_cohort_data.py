"""
Synthetic cohort tables
=======================

Writes a microbe count table (73 samples x 134 taxa) and a table of 29
metabolite outcomes to ``demos/data/``. The shape mirrors a small gut
microbiome cohort; the values are simulated. ``configs/cohort_example.json``
points at these files.
"""

from pathlib import Path

import numpy as np

from commit_tl.io import RawAbundanceTable, Table, clr_transform, save_csv

rng = np.random.default_rng(11)
n, p, q = 73, 134, 29
out = Path(__file__).parent / "data"
out.mkdir(exist_ok=True)

# Overdispersed counts: a few abundant taxa, many rare ones.
counts = rng.poisson(rng.gamma(0.8, 20, size=p), size=(n, p)).astype(float)

# Taxa seen in fewer than two samples carry no usable signal after CLR,
# so a real pipeline filters them. Here we top them up instead.
for k in np.flatnonzero((counts > 0).sum(axis=0) < 2):
    counts[rng.choice(n, 2, replace=False), k] += 1 + rng.integers(3, size=2)

X = clr_transform(counts)

# Each metabolite depends on five taxa. ba_1 borrows most of its signal
# from ba_0, which makes ba_0 a natural auxiliary for ba_1.
B = np.zeros((q, p))
for j in range(q):
    B[j, rng.choice(p, 5, replace=False)] = rng.normal(0, 1, 5)
B[1] = B[0] + 0.1 * B[5]
Y = X @ B.T + 0.5 * rng.standard_normal((n, q))

ids = [f"S{i:03d}" for i in range(n)]
save_csv(RawAbundanceTable(counts, ids, [f"otu_{k}" for k in range(p)]), out / "microbes.csv")
save_csv(Table(Y, ids, [f"ba_{j}" for j in range(q)]), out / "metabolites.csv")
print(f"wrote {n} x {p} counts and {n} x {q} outcomes to {out}")
