import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config.addinivalue_line("filterwarnings", "ignore::commit_tl.solver.ConvergenceWarning")


def cohort_like_tables(seed=1, n=73, p=134, q=29):
    """Synthetic counts and outcomes shaped like a small microbiome cohort (73 x 134, 29 outcomes)."""
    from commit_tl.io import RawAbundanceTable, Table, clr_transform

    rng = np.random.default_rng(seed)
    counts = rng.poisson(rng.gamma(0.8, 20, size=p), size=(n, p)).astype(float)
    # every feature observed in at least two distinct samples
    for k in np.flatnonzero((counts > 0).sum(axis=0) < 2):
        counts[rng.choice(n, 2, replace=False), k] += 1 + rng.integers(3, size=2)
    ids = [f"S{i:03d}" for i in range(n)]
    X = clr_transform(counts)
    B = np.zeros((q, p))
    for j in range(q):
        B[j, rng.choice(p, 5, replace=False)] = rng.normal(0, 1, 5)
    B[1] = B[0] + 0.1 * B[5]
    Y = X @ B.T + 0.5 * rng.standard_normal((n, q))
    microbes = RawAbundanceTable(counts, ids, [f"otu_{k}" for k in range(p)])
    outcomes = Table(Y, ids, [f"ba_{j}" for j in range(q)])
    return microbes, outcomes


@pytest.fixture(scope="session")
def cohort_files(tmp_path_factory):
    import json

    from commit_tl.io import save_csv

    d = tmp_path_factory.mktemp("cohort")
    microbes, outcomes = cohort_like_tables()
    save_csv(microbes, d / "microbes.csv")
    save_csv(outcomes, d / "metabolites.csv")
    cfg = {
        "microbes": "microbes.csv",
        "metabolites": "metabolites.csv",
        "target": "ba_1",
        "zeta": "fast",
        "simulation": {"n": 30, "p": 40, "s": 5, "n_replications": 2,
                       "methods": ["commit", "lasso", "commit_debias", "ldpe_lasso"]},
    }
    (d / "config.json").write_text(json.dumps(cfg))
    return d
