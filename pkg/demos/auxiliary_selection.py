"""
Choosing auxiliary outcomes in a cohort
=======================================

Run ``make_cohort_data.py`` first. Candidates are screened by how well their
taxon-correlation profile matches the target's, then nested sets are compared
by cross-validated prediction error.

The same steps from the shell::

    commit-tl select-aux --config configs/cohort_example.json --out sel.json
    commit-tl infer --config configs/cohort_example.json --out inf.json --csv inf.csv
    commit-tl report --in inf.json
"""

from pathlib import Path

import numpy as np

from commit_tl.io import clr_transform, load_csv
from commit_tl.selection import select_auxiliary

here = Path(__file__).parent / "data"
microbes = load_csv(here / "microbes.csv", kind="abundance")
outcomes = load_csv(here / "metabolites.csv")

X = clr_transform(microbes)
target = outcomes.column("ba_1")
names = [c for c in outcomes.columns if c != "ba_1"]
pool = outcomes.values[:, outcomes.column_index(names)]

res = select_auxiliary(X, target, pool, candidate_names=names)
print("screened:", [names[j] for j in res.screened])
print("CV error by prefix:", np.round(res.mse_by_m, 4))
print("selected:", res.selected_names)
