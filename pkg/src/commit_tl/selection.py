"""Data-driven choice of auxiliary outcomes.

Candidates are screened by how closely their feature-correlation profile
tracks the target's profile, ordered by that similarity, and the best prefix
of the ordering is picked by cross-validated prediction error of the full
transfer fit.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .estimator import CommitConfig, Dataset, fit_commit, predict
from .exceptions import DataError, DimensionMismatchError, ZeroVarianceError
from .solver import fold_ids

__all__ = [
    "MicrobialCorrelation",
    "SelectionResult",
    "microbial_correlation",
    "screen",
    "select_auxiliary",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MicrobialCorrelation:
    """Profile correlations between the target and each candidate.

    ``r_matrix`` row 0 is the target's profile ``Cor(y0, x_k)``; row ``j``
    is candidate ``j``'s. ``rho`` is the signed profile correlation,
    ``r_hat = |rho|`` and ``p_hat`` its two-sided p-value.
    """

    rho: np.ndarray
    r_hat: np.ndarray
    p_hat: np.ndarray
    r_matrix: np.ndarray
    method: str = "pearson"


@dataclass(frozen=True)
class SelectionResult:
    screened: tuple
    mse_by_m: np.ndarray
    m_opt: int
    selected: tuple
    thresholds: tuple
    folds: int
    r_hat: np.ndarray
    p_hat: np.ndarray
    candidate_names: tuple = ()

    @property
    def selected_names(self):
        return tuple(self.candidate_names[j] for j in self.selected) if self.candidate_names else ()


def _corr(a, b, method):
    if method == "pearson":
        return stats.pearsonr(a, b)
    if method == "spearman":
        res = stats.spearmanr(a, b)
        return res.statistic, res.pvalue
    raise ValueError(f"correlation must be 'pearson' or 'spearman', got {method!r}")


def _feature_profile(y, X, method):
    keep = np.isfinite(y)
    y, X = y[keep], X[keep]
    if y.size < 3 or np.ptp(y) == 0:
        raise ZeroVarianceError("outcome is constant (or has fewer than 3 observed rows)")
    if method == "spearman":
        y = stats.rankdata(y)
        X = np.apply_along_axis(stats.rankdata, 0, X)
    yc = y - y.mean()
    Xc = X - X.mean(axis=0)
    sx = np.sqrt((Xc**2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (Xc.T @ yc) / (sx * np.sqrt(yc @ yc))
    return np.where(sx > 0, r, np.nan)


def microbial_correlation(X, y_target, y_candidates, method="pearson"):
    """Correlate the target's feature-correlation profile with each candidate's.

    Features that are constant on the observed rows contribute no profile
    entry. Rows where an outcome is missing are dropped for that outcome only.
    """
    X = np.asarray(X, dtype=float)
    y0 = np.asarray(y_target, dtype=float)
    Y = np.asarray(y_candidates, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.shape
    if y0.shape != (n,) or Y.shape[0] != n:
        raise DimensionMismatchError("outcomes must have one value per row of X")
    q = Y.shape[1]
    if q < 1:
        raise ValueError("need at least one candidate outcome")
    if p < 3:
        raise DimensionMismatchError("profile correlation needs p >= 3")
    R = np.empty((q + 1, p))
    R[0] = _feature_profile(y0, X, method)
    for j in range(q):
        R[j + 1] = _feature_profile(Y[:, j], X, method)
    rho = np.empty(q)
    pval = np.empty(q)
    for j in range(q):
        ok = np.isfinite(R[0]) & np.isfinite(R[j + 1])
        a, b = R[0, ok], R[j + 1, ok]
        if ok.sum() < 3 or np.ptp(a) == 0 or np.ptp(b) == 0:
            raise ZeroVarianceError(f"correlation profile of candidate {j} is constant")
        r, pv = _corr(a, b, method)
        rho[j] = np.clip(r, -1.0, 1.0)
        pval[j] = pv
    return MicrobialCorrelation(rho, np.abs(rho), np.clip(pval, 0.0, 1.0), R, method)


def screen(mc, r0=0.5, p0=0.05):
    """Indices with ``r_hat > r0`` and ``p_hat < p0``, sorted by ``r_hat``
    non-increasing; ties keep input order."""
    keep = np.flatnonzero((mc.r_hat > r0) & (mc.p_hat < p0))
    order = np.argsort(-mc.r_hat[keep], kind="stable")
    return tuple(int(j) for j in keep[order])


def _cv_mse(dataset, foldid, k, config):
    errs = np.empty(dataset.n)
    for f in range(k):
        test = foldid == f
        fit = fit_commit(dataset.rows(~test), config)
        errs[test] = (dataset.y_target[test] - predict(fit, dataset.X[test])) ** 2
    return float(errs.mean())


def select_auxiliary(
    X,
    y_target,
    y_candidates,
    candidate_names=None,
    r0=0.5,
    p0=0.05,
    k_folds=5,
    seed=0,
    config=None,
    correlation="pearson",
):
    """Screen, rank and choose the auxiliary set by cross-validation.

    For each prefix length ``m`` of the screened ordering the whole estimator
    (including its own penalty tuning) is refit inside every fold; held-out
    squared error of the target gives ``mse_by_m``. The smallest ``m`` among
    ties wins. An empty screen returns ``m_opt = 0``.

    ``k_folds="loo"`` means leave-one-out.
    """
    if not 0 <= r0 < 1:
        raise ValueError(f"r0 must lie in [0, 1), got {r0}")
    if not 0 < p0 <= 1:
        raise ValueError(f"p0 must lie in (0, 1], got {p0}")
    cfg = config or CommitConfig()
    X = np.asarray(X, dtype=float)
    y0 = np.asarray(y_target, dtype=float)
    Y = np.asarray(y_candidates, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    q = Y.shape[1]
    names = tuple(candidate_names) if candidate_names is not None else tuple(
        f"y{j + 1}" for j in range(q)
    )
    if len(names) != q:
        raise DimensionMismatchError(f"{len(names)} names for {q} candidates")

    mc = microbial_correlation(X, y0, Y, method=correlation)
    S = screen(mc, r0, p0)

    complete = np.isfinite(y0) & np.all(np.isfinite(X), axis=1)
    if S:
        complete &= np.all(np.isfinite(Y[:, list(S)]), axis=1)
    dropped = int((~complete).sum())
    if dropped:
        log.info("dropping %d incomplete rows before cross-validation", dropped)
    n = int(complete.sum())
    k = n if k_folds == "loo" else int(k_folds)
    if k < 2:
        raise ValueError("k_folds must be >= 2")
    if not S:
        return SelectionResult((), np.zeros(0), 0, (), (r0, p0), k, mc.r_hat, mc.p_hat, names)
    if n < 3:
        raise DataError(f"only {n} complete rows")

    foldid = fold_ids(n, k, seed)
    base = Dataset(X[complete], y0[complete], Y[complete][:, list(S)])
    mse = np.empty(len(S))
    for m in range(1, len(S) + 1):
        data = base.with_auxiliaries(range(m))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                mse[m - 1] = _cv_mse(data, foldid, k, cfg)
        except Exception as exc:  # noqa: BLE001 - scored as +inf per contract
            warnings.warn(f"prefix m={m} failed in cross-validation: {exc}", stacklevel=2)
            mse[m - 1] = np.inf
    m_opt = int(np.argmin(mse)) + 1
    return SelectionResult(
        screened=S,
        mse_by_m=mse,
        m_opt=m_opt,
        selected=S[:m_opt],
        thresholds=(r0, p0),
        folds=k,
        r_hat=mc.r_hat,
        p_hat=mc.p_hat,
        candidate_names=names,
    )
