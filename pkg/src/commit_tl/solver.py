"""Weighted-L1 penalized least squares by coordinate descent.

The problem solved everywhere in the package is

    minimize  (1/2n) ||y - b0 - X beta||^2 + lam * sum_k f_k |beta_k|

with per-coefficient penalty factors ``f_k >= 0`` (0 leaves a coefficient
unpenalized). With ``standardize=True`` (the default) the factors are applied
on the unit-variance scale, i.e. the effective original-scale factor is
``f_k * sd_k``; this is the convention of glmnet and what makes a single
``lam`` comparable across features of different spread. The effective factors
are stored on every fit so the optimality conditions can be checked on the
original scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _cd
from .exceptions import (
    DegenerateColumnError,
    DidNotConvergeError,
    DimensionMismatchError,
    NonFiniteError,
    TooFewSamplesError,
)

__all__ = [
    "ConvergenceWarning",
    "CvResult",
    "PenalizedFit",
    "PenaltySpec",
    "SolverOptions",
    "cross_validate",
    "cross_validate_ridge",
    "fold_ids",
    "kkt_violation",
    "lambda_max",
    "solve_cv",
    "solve_path",
    "solve_penalized_ls",
    "solve_ridge",
    "soft_threshold",
]

_VAR_EPS = 1e-12


class ConvergenceWarning(UserWarning):
    pass


def soft_threshold(z, gamma):
    """Return ``sign(z) * max(|z| - gamma, 0)``; works elementwise on arrays.

    >>> soft_threshold(3.0, 1.0)
    2.0
    >>> soft_threshold(-0.5, 1.0)
    0.0
    """
    if np.ndim(z) == 0 and np.ndim(gamma) == 0:
        z = float(z)
        if z > gamma:
            return z - gamma
        if z < -gamma:
            return z + gamma
        return 0.0
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


@dataclass(frozen=True)
class PenaltySpec:
    """Global penalty level plus per-coefficient multipliers.

    ``factors=None`` means all ones.
    """

    lam: float
    factors: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.factors is not None:
            f = np.asarray(self.factors, dtype=float)
            if f.ndim != 1:
                raise DimensionMismatchError("penalty factors must be a 1-d vector")
            if np.any(~np.isfinite(f)) or np.any(f < 0):
                raise ValueError("penalty factors must be finite and >= 0")
            object.__setattr__(self, "factors", f)

    def resolve(self, p):
        if self.factors is None:
            return np.ones(p)
        if self.factors.shape[0] != p:
            raise DimensionMismatchError(
                f"{self.factors.shape[0]} penalty factors for {p} coefficients"
            )
        return self.factors


@dataclass(frozen=True)
class SolverOptions:
    fit_intercept: bool = True
    standardize: bool = True
    tol: float = 1e-7
    max_sweeps: int = 10_000
    strict: bool = False
    n_lambdas: int = 100
    lambda_min_ratio: float | None = None
    early_stop: bool = True


@dataclass(frozen=True)
class PenalizedFit:
    """Solution of one weighted-L1 least-squares problem (original data scale)."""

    coefficients: np.ndarray
    intercept: float
    lambda_used: float
    n_iterations: int
    converged: bool
    objective_value: float
    penalty_factors: np.ndarray = field(repr=False)

    @property
    def n_nonzero(self):
        return int(np.count_nonzero(self.coefficients))

    @property
    def is_zero(self):
        return not np.any(self.coefficients)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.coefficients.shape[0]:
            raise DimensionMismatchError(
                f"expected {self.coefficients.shape[0]} columns, got shape {X.shape}"
            )
        return self.intercept + X @ self.coefficients


@dataclass(frozen=True)
class CvResult:
    lambda_path: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    lambda_min: float
    lambda_1se: float
    n_nonzero: np.ndarray
    k: int
    seed: int

    @property
    def index_min(self):
        return int(np.flatnonzero(self.lambda_path == self.lambda_min)[0])

    @property
    def index_1se(self):
        return int(np.flatnonzero(self.lambda_path == self.lambda_1se)[0])


class _Problem:
    """Centred, scaled copy of (X, y) ready for the compiled kernel."""

    def __init__(self, X, y, factors, opts):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatchError(f"X must be 2-d, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DimensionMismatchError(f"y has shape {y.shape}, X has {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteError("X or y contains NaN/Inf")
        n, p = X.shape
        if n < 2:
            raise TooFewSamplesError(f"need n >= 2, got {n}")
        factors = np.asarray(factors, dtype=float)
        if factors.shape != (p,):
            raise DimensionMismatchError(f"{factors.shape[0]} penalty factors for {p} columns")

        if opts.fit_intercept:
            self.x_mean = X.mean(axis=0)
            self.y_mean = float(y.mean())
        else:
            self.x_mean = np.zeros(p)
            self.y_mean = 0.0
        Xc = X - self.x_mean
        self.y = y - self.y_mean
        scale = np.sqrt(np.mean(Xc**2, axis=0))
        ref = np.maximum(np.sqrt(np.mean(X**2, axis=0)), 1.0)
        dead = scale <= _VAR_EPS * ref
        bad = np.flatnonzero(dead & (factors == 0))
        if bad.size:
            raise DegenerateColumnError(
                f"unpenalized column(s) {bad.tolist()} have zero variance", bad
            )
        if np.any(dead):
            warnings.warn(
                f"zero-variance column(s) {np.flatnonzero(dead).tolist()} get coefficient 0",
                stacklevel=3,
            )
        scale = np.where(dead, 1.0, scale)
        self.n, self.p = n, p
        self.scale = scale
        self.dead = dead
        self.Xs = np.asfortranarray(Xc / scale)
        self.Xs[:, dead] = 0.0
        self.colsq = np.where(dead, 0.0, 1.0)
        self.factors = factors
        if opts.standardize:
            self.eff_factors = factors * scale
            self.pen_unit = factors.copy()
        else:
            self.eff_factors = factors.copy()
            self.pen_unit = factors / scale
        self.opts = opts

    def lambda_max(self):
        pen = self.pen_unit > 0
        r = self.y
        free = np.flatnonzero(~pen & ~self.dead)
        if free.size:
            A = self.Xs[:, free]
            coef, *_ = np.linalg.lstsq(A, r, rcond=None)
            r = r - A @ coef
        if not np.any(pen & ~self.dead):
            return 0.0
        grad = np.abs(self.Xs.T @ r) / self.n
        return float(np.max(grad[pen & ~self.dead] / self.pen_unit[pen & ~self.dead]))

    def unscale(self, beta_s):
        coef = beta_s / (self.scale if beta_s.ndim == 1 else self.scale[:, None])
        intercept = self.y_mean - self.x_mean @ coef
        return coef, intercept

    def make_fit(self, X, y, beta_s, lam, sweeps, converged):
        coef, intercept = self.unscale(beta_s)
        resid = y - intercept - X @ coef
        obj = 0.5 * np.mean(resid**2) + lam * float(np.sum(self.eff_factors * np.abs(coef)))
        if not converged:
            msg = f"coordinate descent did not converge in {sweeps} sweeps (lambda={lam:.4g})"
            if self.opts.strict:
                raise DidNotConvergeError(msg)
            warnings.warn(msg, ConvergenceWarning, stacklevel=3)
        return PenalizedFit(
            coefficients=coef,
            intercept=float(intercept),
            lambda_used=float(lam),
            n_iterations=int(sweeps),
            converged=bool(converged),
            objective_value=float(obj),
            penalty_factors=self.eff_factors,
        )

    def grid(self, n_lambdas, ratio):
        lmax = self.lambda_max()
        if ratio is None:
            ratio = 1e-3 if self.n < self.p else 1e-4
        if lmax <= 0:
            lmax = 1.0
        return np.geomspace(lmax, lmax * ratio, n_lambdas)


def _as_penalty(penalty, p):
    if isinstance(penalty, PenaltySpec):
        return penalty.lam, penalty.resolve(p)
    return float(penalty), np.ones(p)


def solve_penalized_ls(X, y, penalty, options=None, warm_start=None):
    """Minimise the weighted-L1 least-squares objective by coordinate descent.

    Parameters
    ----------
    X : (n, p) array
    y : (n,) array
    penalty : PenaltySpec or float
        A bare float means factors of one on every coefficient.
    options : SolverOptions, optional
    warm_start : (p,) array, optional
        Initial coefficients on the original scale.

    Returns
    -------
    PenalizedFit
        ``converged`` is False (with a ``ConvergenceWarning``) if the sweep
        limit was hit; ``options.strict`` turns that into an exception.
    """
    opts = options or SolverOptions()
    X = np.asarray(X, dtype=float)
    lam, factors = _as_penalty(penalty, X.shape[1] if X.ndim == 2 else 0)
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    prob = _Problem(X, y, factors, opts)
    beta = np.zeros(prob.p)
    if warm_start is not None:
        beta = np.asarray(warm_start, dtype=float) * prob.scale
        beta[prob.dead] = 0.0
    r = prob.y - prob.Xs @ beta
    sweeps, conv = _cd.cd_solve(
        prob.Xs, r, beta, lam * prob.pen_unit, prob.colsq, opts.tol, opts.max_sweeps
    )
    return prob.make_fit(X, np.asarray(y, dtype=float), beta, lam, sweeps, conv)


def lambda_max(X, y, factors=None, options=None):
    """Smallest penalty at which every penalized coefficient is zero."""
    opts = options or SolverOptions()
    X = np.asarray(X, dtype=float)
    f = np.ones(X.shape[1]) if factors is None else np.asarray(factors, dtype=float)
    return _Problem(X, y, f, opts).lambda_max()


def _path_arrays(prob, lambdas, opts):
    return _cd.cd_path(
        prob.Xs,
        prob.y,
        prob.pen_unit,
        lambdas,
        prob.colsq,
        opts.tol,
        opts.max_sweeps,
        opts.early_stop,
    )


def solve_path(X, y, penalty_factors=None, options=None, lambdas=None):
    """Warm-started fits along a decreasing, log-spaced penalty grid.

    The grid starts at ``lambda_max`` (all penalized coefficients zero) and ends
    at ``lambda_min_ratio * lambda_max``. Pass ``lambdas`` to override it.
    With ``options.early_stop`` the path is cut once the fit is saturated, so
    fewer fits than grid points may come back.
    """
    opts = options or SolverOptions()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    f = np.ones(X.shape[1]) if penalty_factors is None else np.asarray(penalty_factors, float)
    prob = _Problem(X, y, f, opts)
    if lambdas is None:
        if opts.n_lambdas < 2:
            raise ValueError("path length must be >= 2")
        lambdas = prob.grid(opts.n_lambdas, opts.lambda_min_ratio)
    else:
        lambdas = np.asarray(lambdas, dtype=float)
        if lambdas.size < 2 or np.any(np.diff(lambdas) >= 0):
            raise ValueError("lambdas must be strictly decreasing with length >= 2")
    coefs, sweeps, conv, m = _path_arrays(prob, lambdas, opts)
    return [
        prob.make_fit(X, y, coefs[:, t], lambdas[t], sweeps[t], conv[t]) for t in range(m)
    ]


def fold_ids(n, k, seed):
    """Balanced random fold labels in ``0..k-1``, a pure function of ``(n, k, seed)``."""
    if k < 2 or k > n:
        raise TooFewSamplesError(f"need 2 <= k <= n, got k={k}, n={n}")
    if n - int(np.ceil(n / k)) < 2:
        raise TooFewSamplesError(f"{k}-fold CV on n={n} leaves fewer than 2 training rows")
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=np.int64)
    ids[perm] = np.arange(n) % k
    return ids


def _cv_summary(errors, foldid, k):
    # errors: (n, L) squared held-out errors
    n = errors.shape[0]
    fold_mse = np.stack([errors[foldid == f].mean(axis=0) for f in range(k)])
    sizes = np.bincount(foldid, minlength=k).astype(float)
    mean = errors.mean(axis=0)
    var = (sizes[:, None] * (fold_mse - mean) ** 2).sum(axis=0) / (n * (k - 1))
    return mean, np.sqrt(var)


def _pick(lambdas, mean, se):
    finite = np.isfinite(mean)
    i_min = int(np.argmin(np.where(finite, mean, np.inf)))
    bound = mean[i_min] + se[i_min]
    i_1se = int(np.flatnonzero(finite & (mean <= bound))[0])
    return i_min, i_1se


def cross_validate(X, y, penalty_factors=None, k=5, seed=0, options=None, lambdas=None):
    """K-fold cross-validation over the penalty path.

    The grid is computed on the full data; every fold refits the same grid.
    If early stopping cuts any path short, the grid is truncated to the
    common prefix.
    ``cv_mean`` is the pooled mean squared prediction error over all held-out
    rows, so ``k = n`` gives the leave-one-out average.
    """
    opts = options or SolverOptions()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    f = np.ones(p) if penalty_factors is None else np.asarray(penalty_factors, dtype=float)
    full = _Problem(X, y, f, opts)
    if lambdas is None:
        lambdas = full.grid(opts.n_lambdas, opts.lambda_min_ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    foldid = fold_ids(n, k, seed)
    full_coefs, _, _, m = _path_arrays(full, lambdas, opts)
    errors = np.empty((n, lambdas.size))
    for fold in range(k):
        test = foldid == fold
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob = _Problem(X[~test], y[~test], f, opts)
        coefs, _, _, mf = _path_arrays(prob, lambdas, opts)
        m = min(m, mf)
        coef, intercept = prob.unscale(coefs)
        pred = intercept + X[test] @ coef
        errors[test] = (y[test, None] - pred) ** 2
    # all folds share the prefix of the grid that every fit reached
    lambdas = lambdas[:m]
    errors = errors[:, :m]
    mean, se = _cv_summary(errors, foldid, k)
    i_min, i_1se = _pick(lambdas, mean, se)
    nnz = np.count_nonzero(full_coefs[:, :m], axis=0)
    return CvResult(
        lambda_path=lambdas,
        cv_mean=mean,
        cv_se=se,
        lambda_min=float(lambdas[i_min]),
        lambda_1se=float(lambdas[i_1se]),
        n_nonzero=nnz,
        k=k,
        seed=seed,
    )


def solve_cv(X, y, penalty_factors=None, rule="min", k=5, seed=0, options=None):
    """Cross-validate, then fit at the chosen penalty. Returns ``(fit, cv)``.

    ``rule`` is ``"min"`` or ``"1se"``.
    """
    if rule not in ("min", "1se"):
        raise ValueError(f"rule must be 'min' or '1se', got {rule!r}")
    cv = cross_validate(X, y, penalty_factors, k=k, seed=seed, options=options)
    lam = cv.lambda_min if rule == "min" else cv.lambda_1se
    X = np.asarray(X, dtype=float)
    f = None if penalty_factors is None else np.asarray(penalty_factors, dtype=float)
    fit = solve_penalized_ls(X, y, PenaltySpec(lam, f), options)
    return fit, cv


def kkt_violation(fit, X, y, fit_intercept=True):
    """Largest violation of the lasso optimality conditions on the original scale."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    r = y - fit.intercept - X @ fit.coefficients
    grad = X.T @ r / X.shape[0]
    if fit_intercept:
        grad = (X - X.mean(axis=0)).T @ (r - r.mean()) / X.shape[0]
    bound = fit.lambda_used * fit.penalty_factors
    b = fit.coefficients
    nz = b != 0
    viol = np.maximum(np.abs(grad) - bound, 0.0)
    viol[nz] = np.abs(grad[nz] - bound[nz] * np.sign(b[nz]))
    return float(viol.max()) if viol.size else 0.0


# ---------------------------------------------------------------- ridge


def _center(X, y, fit_intercept):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionMismatchError(f"X shape {X.shape} incompatible with y shape {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteError("X or y contains NaN/Inf")
    if fit_intercept:
        xm, ym = X.mean(axis=0), float(y.mean())
    else:
        xm, ym = np.zeros(X.shape[1]), 0.0
    return X - xm, y - ym, xm, ym


def _ridge_svd_coefs(U, d, Vt, y, n, lambdas):
    uy = U.T @ y
    shrink = d[:, None] / (d[:, None] ** 2 + n * np.atleast_1d(lambdas)[None, :])
    return Vt.T @ (shrink * uy[:, None])


def solve_ridge(X, y, lam, fit_intercept=True):
    """Closed-form ridge: ``(Xc'Xc + n*lam*I)^{-1} Xc'yc`` on centred data."""
    if not lam > 0:
        raise ValueError(f"ridge lambda must be > 0, got {lam}")
    Xc, yc, xm, ym = _center(X, y, fit_intercept)
    n = Xc.shape[0]
    U, d, Vt = np.linalg.svd(Xc, full_matrices=False)
    coef = _ridge_svd_coefs(U, d, Vt, yc, n, lam)[:, 0]
    resid = yc - Xc @ coef
    obj = 0.5 * np.mean(resid**2) + 0.5 * lam * float(coef @ coef)
    return PenalizedFit(
        coefficients=coef,
        intercept=float(ym - xm @ coef),
        lambda_used=float(lam),
        n_iterations=0,
        converged=True,
        objective_value=float(obj),
        penalty_factors=np.ones(Xc.shape[1]),
    )


def cross_validate_ridge(X, y, k=5, seed=0, lambdas=None, fit_intercept=True, n_lambdas=100):
    """K-fold CV for ridge over a log grid scaled to the leading singular value."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xc, yc, _, _ = _center(X, y, fit_intercept)
    n = X.shape[0]
    if lambdas is None:
        top = np.linalg.norm(Xc, 2) ** 2 / n
        lambdas = np.geomspace(top * 10.0, top * 1e-5, n_lambdas)
    lambdas = np.asarray(lambdas, dtype=float)
    foldid = fold_ids(n, k, seed)
    errors = np.empty((n, lambdas.size))
    for fold in range(k):
        test = foldid == fold
        Xt, yt, xm, ym = _center(X[~test], y[~test], fit_intercept)
        U, d, Vt = np.linalg.svd(Xt, full_matrices=False)
        coefs = _ridge_svd_coefs(U, d, Vt, yt, Xt.shape[0], lambdas)
        pred = ym + (X[test] - xm) @ coefs
        errors[test] = (y[test, None] - pred) ** 2
    mean, se = _cv_summary(errors, foldid, k)
    i_min, i_1se = _pick(lambdas, mean, se)
    return CvResult(
        lambda_path=lambdas,
        cv_mean=mean,
        cv_se=se,
        lambda_min=float(lambdas[i_min]),
        lambda_1se=float(lambdas[i_1se]),
        n_nonzero=np.full(lambdas.size, X.shape[1]),
        k=k,
        seed=seed,
    )
