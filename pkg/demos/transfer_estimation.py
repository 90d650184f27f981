"""
Borrowing strength from related outcomes
========================================

Two auxiliary outcomes share most of their signal with the target. A lasso on
the target alone has to find 100 nonzero coefficients from 100 samples; the
transfer estimator fits the auxiliaries first, then only needs a small
correction on top of their weighted combination.
"""

import numpy as np

from commit_tl import CommitConfig, SolverOptions, fit_commit, solve_cv
from commit_tl.simulation import SimConfig, generate_dataset, generate_truth, information_score

cfg = SimConfig(n=100, p=300, s=20, theta1=0.3, theta2=0.2)
truth = generate_truth(cfg)
data = generate_dataset(cfg, truth, 0)

print("information score of each auxiliary:",
      [round(information_score(truth.beta0, b), 3) for b in (truth.beta1, truth.beta2)])
print("L1 gap between the target and the best combination:", truth.h_true)

# %%
# The design has no intercept, so neither fit uses one.
opts = SolverOptions(fit_intercept=False)
fit = fit_commit(data, CommitConfig(solver=opts))
lasso, _ = solve_cv(data.X, data.y_target, options=opts)

print("estimated weights:", np.round(fit.alpha, 3), "(truth 1, -0.5)")
print("nonzeros in the correction:", np.count_nonzero(fit.w))


def sq_err(b):
    return float(np.sum((b - truth.beta0) ** 2))


print(f"squared error: transfer {sq_err(fit.beta0):.3f}, lasso {sq_err(lasso.coefficients):.3f}")
