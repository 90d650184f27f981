"""Debiased inference for the transfer estimator and for the plain lasso.

Each coordinate ``l`` gets a projection direction ``z_l``: the residual of a
lasso regression of column ``l`` on the remaining columns. A penalized estimate
``b`` of a response ``y`` is corrected by

    b_l + z_l'(y - X b) / z_l'x_l

and the corrected coordinate has standard error ``sigma0 / tau_l`` with
``tau_l = |z_l'x_l| / ||z_l||``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _cd
from .estimator import compose
from .exceptions import (
    DegenerateColumnError,
    DimensionMismatchError,
    InvalidAlphaError,
    NonFiniteError,
    OutOfRangeError,
    SfDegenerateError,
)
from .solver import (
    ConvergenceWarning,
    PenaltySpec,
    SolverOptions,
    cross_validate,
    solve_cv,
    solve_penalized_ls,
)

__all__ = [
    "BiasFactorReport",
    "InferenceConfig",
    "InferenceResult",
    "NodewiseResiduals",
    "bh_adjust",
    "bias_factor_report",
    "debias_coefficients",
    "debias_commit",
    "debias_lasso",
    "estimate_sigma0",
    "nodewise_residuals",
    "t_inference",
]

VARIANCE_METHODS = ("natural", "naive", "sf")
DF_CONVENTIONS = ("n", "n-1", "normal")


@dataclass(frozen=True)
class InferenceConfig:
    """Options for nodewise tuning, variance estimation and the test.

    ``zeta`` is ``"cv"`` (per-column CV minimum), ``"fast"``
    (``sqrt(log p / n)`` times the column's standard deviation), a float used
    for every column, or a length-p array.
    """

    zeta: object = "cv"
    variance_method: str = "natural"
    df: str = "n"
    alpha_level: float = 0.05
    cv_folds: int = 5
    seed: int = 0
    fit_intercept: bool = True
    degenerate_tol: float = 1e-8
    tol: float = 1e-7
    max_sweeps: int = 10_000

    def __post_init__(self):
        if self.variance_method not in VARIANCE_METHODS:
            raise ValueError(f"variance_method must be one of {VARIANCE_METHODS}")
        if self.df not in DF_CONVENTIONS:
            raise ValueError(f"df must be one of {DF_CONVENTIONS}")
        if not 0 < self.alpha_level < 1:
            raise InvalidAlphaError(f"alpha must lie in (0, 1), got {self.alpha_level}")

    def solver(self):
        return SolverOptions(
            fit_intercept=self.fit_intercept, tol=self.tol, max_sweeps=self.max_sweeps
        )


@dataclass(frozen=True)
class NodewiseResiduals:
    Z: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    zetas: np.ndarray
    gammas: np.ndarray
    centered: bool

    @property
    def eta_star(self):
        return float(self.eta.max())


@dataclass(frozen=True)
class BiasFactorReport:
    eta: np.ndarray
    eta_star: float


@dataclass(frozen=True)
class InferenceResult:
    beta0_de: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    p_adjusted: np.ndarray
    sigma0_hat: float
    variance_method: str
    df: float
    alpha_level: float
    beta0: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    feature_names: tuple = ()
    aux_betas_de: np.ndarray = None
    w_de: np.ndarray = None

    @property
    def eta_star(self):
        return float(self.eta.max())

    def table(self):
        """Per-feature rows with the columns needed for a volcano plot."""
        names = self.feature_names or tuple(f"x{k}" for k in range(self.beta0_de.size))
        return [
            {
                "feature": names[k],
                "coefficient": float(self.beta0[k]),
                "debiased": float(self.beta0_de[k]),
                "se": float(self.se[k]),
                "p_value": float(self.p_values[k]),
                "p_adjusted": float(self.p_adjusted[k]),
                "ci_lower": float(self.ci_lower[k]),
                "ci_upper": float(self.ci_upper[k]),
                "eta": float(self.eta[k]),
            }
            for k in range(self.beta0_de.size)
        ]


# ------------------------------------------------------------- nodewise


def _check_X(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-d, got shape {X.shape}")
    if X.shape[1] < 2:
        raise DimensionMismatchError("nodewise regression needs p >= 2")
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("X contains NaN/Inf")
    return X


def _collinear_columns(Xc, scale, tol):
    """Columns that duplicate (up to sign and scale) some other column."""
    U = Xc / scale
    C = np.abs(U.T @ U) / Xc.shape[0]
    np.fill_diagonal(C, 0.0)
    return set(np.flatnonzero(C.max(axis=0) > 1.0 - tol).tolist())


def _zetas(Xc, scale, policy, cfg):
    n, p = Xc.shape
    if isinstance(policy, str):
        if policy == "fast":
            return np.sqrt(np.log(p) / n) * scale
        if policy == "cv":
            out = np.empty(p)
            opts = SolverOptions(fit_intercept=False, tol=cfg.tol, max_sweeps=cfg.max_sweeps)
            for l in range(p):
                others = np.delete(Xc, l, axis=1)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    cv = cross_validate(others, Xc[:, l], k=cfg.cv_folds, seed=cfg.seed, options=opts)
                out[l] = cv.lambda_min
            return out
        raise ValueError(f"unknown zeta policy {policy!r}")
    z = np.broadcast_to(np.asarray(policy, dtype=float), (p,)).copy()
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise ValueError("zeta values must be finite and >= 0")
    return z


def nodewise_residuals(X, config=None):
    """Residuals of each column regressed (lasso, penalty ``zeta_l``) on the rest.

    Raises
    ------
    DegenerateColumnError
        If some column is constant, duplicates another column, or leaves a
        residual with ``||z_l|| < tol ||x_l||`` or ``|z_l'x_l| < tol ||x_l||^2``.
    """
    cfg = config or InferenceConfig()
    X = _check_X(X)
    n, p = X.shape
    Xc = X - X.mean(axis=0) if cfg.fit_intercept else X
    scale = np.sqrt(np.mean(Xc**2, axis=0))
    const = np.flatnonzero(scale <= 1e-12 * np.maximum(np.sqrt(np.mean(X**2, axis=0)), 1.0))
    if const.size:
        raise DegenerateColumnError(f"constant column(s) {const.tolist()}", const)
    dup = _collinear_columns(Xc, scale, cfg.degenerate_tol)

    zetas = _zetas(Xc, scale, cfg.zeta, cfg)
    Xs = np.asfortranarray(Xc / scale)
    R, G, _, conv = _cd.nodewise_fixed(Xs, zetas / scale, cfg.tol, cfg.max_sweeps)
    if not np.all(conv):
        warnings.warn(
            f"{int(np.sum(~conv))} nodewise regressions hit the sweep limit",
            ConvergenceWarning,
            stacklevel=2,
        )
    Z = R * scale
    gammas = G * scale[None, :] / scale[:, None]

    ZtX = Z.T @ Xc
    znorm = np.linalg.norm(Z, axis=0)
    xnorm = np.linalg.norm(Xc, axis=0)
    diag = np.diag(ZtX).copy()
    bad = dup | set(
        np.flatnonzero(
            (znorm < cfg.degenerate_tol * xnorm) | (np.abs(diag) < cfg.degenerate_tol * xnorm**2)
        ).tolist()
    )
    if bad:
        cols = sorted(bad)
        raise DegenerateColumnError(
            f"column(s) {cols} are explained by the others; no debiasing direction", cols
        )
    tau = np.abs(diag) / znorm
    off = np.abs(ZtX)
    np.fill_diagonal(off, 0.0)
    eta = off.max(axis=1) / znorm
    return NodewiseResiduals(Z, tau, eta, zetas, gammas, cfg.fit_intercept)


def bias_factor_report(Z, X):
    """``eta_l = max_{k != l} |z_l'x_k| / ||z_l||`` and their maximum."""
    Z = np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    if Z.shape != X.shape:
        raise DimensionMismatchError(f"Z shape {Z.shape} differs from X shape {X.shape}")
    off = np.abs(Z.T @ X)
    np.fill_diagonal(off, 0.0)
    eta = off.max(axis=1) / np.linalg.norm(Z, axis=0)
    return BiasFactorReport(eta, float(eta.max()))


# ------------------------------------------------------------ debiasing


def debias_coefficients(fit_beta, X, response, Z, tol=1e-12):
    """One-step correction ``b_l + z_l'(response - X b) / z_l'x_l`` for every l."""
    b = np.asarray(fit_beta, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(response, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.shape != Z.shape or b.shape != (X.shape[1],) or y.shape != (X.shape[0],):
        raise DimensionMismatchError("fit_beta, X, response and Z shapes disagree")
    denom = np.einsum("il,il->l", Z, X)
    small = np.abs(denom) < tol * np.einsum("il,il->l", X, X)
    if np.any(small):
        cols = np.flatnonzero(small).tolist()
        raise DegenerateColumnError(f"z_l'x_l vanishes for column(s) {cols}", cols)
    return b + Z.T @ (y - X @ b) / denom


def _df(cfg, n):
    return {"n": float(n), "n-1": float(n - 1), "normal": np.inf}[cfg.df]


def t_inference(estimate, tau, sigma0, alpha_level, df):
    """Two-sided p-values and ``1 - alpha`` intervals from ``estimate * tau / sigma0``."""
    if not 0 < alpha_level < 1:
        raise InvalidAlphaError(f"alpha must lie in (0, 1), got {alpha_level}")
    se = sigma0 / np.asarray(tau, dtype=float)
    dist = stats.norm if np.isinf(df) else stats.t(df)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = np.abs(estimate) / se
    tstat = np.where(se == 0, np.where(estimate == 0, 0.0, np.inf), tstat)
    p = np.clip(2.0 * dist.sf(tstat), 0.0, 1.0)
    q = dist.ppf(1.0 - alpha_level / 2.0)
    return se, p, estimate - q * se, estimate + q * se


def bh_adjust(p_values):
    """Benjamini-Hochberg step-up adjusted p-values."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        p = p.ravel()
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise OutOfRangeError("p-values must lie in [0, 1]")
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


# ------------------------------------------------------------- variance


def estimate_sigma0(X, y, method="natural", beta=None, lam=None, config=None):
    """Noise standard deviation of the target regression.

    ``naive``
        root mean squared residual at ``beta`` (the debiased estimate).
    ``sf``
        residual sum of squares at the sparse ``beta`` divided by ``n - s``.
    ``natural``
        square root of ``min_b {||y - Xb||^2 / n + 2 lam ||b||_1}``, which is
        twice the solver's objective; ``lam`` defaults to the CV minimum.
    """
    cfg = config or InferenceConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if method == "natural":
        opts = cfg.solver()
        if lam is None:
            fit, _ = solve_cv(X, y, k=cfg.cv_folds, seed=cfg.seed, options=opts)
        else:
            fit = solve_penalized_ls(X, y, PenaltySpec(float(lam)), opts)
        return float(np.sqrt(max(2.0 * fit.objective_value, 0.0)))
    if beta is None:
        raise ValueError(f"method {method!r} needs the coefficient vector")
    beta = np.asarray(beta, dtype=float)
    resid = y - X @ beta
    if cfg.fit_intercept:
        resid = resid - resid.mean()
    rss = float(resid @ resid)
    if method == "naive":
        return float(np.sqrt(rss / n))
    if method == "sf":
        s = int(np.count_nonzero(beta))
        if s >= n:
            raise SfDegenerateError(f"{s} nonzero coefficients with n = {n}")
        return float(np.sqrt(rss / (n - s)))
    raise ValueError(f"unknown variance method {method!r}")


# ---------------------------------------------------------- entry points


def _finish(beta_de, beta, nw, sigma0, method, cfg, n, names, **extra):
    df = _df(cfg, n)
    se, p, lo, hi = t_inference(beta_de, nw.tau, sigma0, cfg.alpha_level, df)
    return InferenceResult(
        beta0_de=beta_de,
        se=se,
        p_values=p,
        ci_lower=lo,
        ci_upper=hi,
        p_adjusted=bh_adjust(p),
        sigma0_hat=float(sigma0),
        variance_method=method,
        df=df,
        alpha_level=cfg.alpha_level,
        beta0=beta,
        tau=nw.tau,
        eta=nw.eta,
        feature_names=tuple(names),
        **extra,
    )


def _sigma(dataset, beta_hat, beta_de, cfg):
    m = cfg.variance_method
    ref = beta_de if m == "naive" else beta_hat
    return estimate_sigma0(dataset.X, dataset.y_target, m, beta=ref, config=cfg)


def debias_commit(commit_fit, dataset, nodewise, config=None, sigma0=None):
    """Debiased transfer estimate with t-based p-values and intervals.

    Every auxiliary coefficient vector is corrected against its own outcome,
    ``w`` against ``y0 - sum_j alpha_j X b_j``, and the corrected pieces are
    recombined with the fitted ``alpha``. Pass ``sigma0`` to override the
    variance estimate.
    """
    cfg = config or InferenceConfig()
    X, Z = dataset.X, nodewise.Z
    B = commit_fit.aux_betas
    B_de = np.vstack([debias_coefficients(B[j], X, dataset.y_aux[:, j], Z) for j in range(B.shape[0])]) if B.shape[0] else np.zeros((0, dataset.p))
    r0 = dataset.y_target - X @ compose(commit_fit.alpha, B, np.zeros(dataset.p))
    w_de = debias_coefficients(commit_fit.w, X, r0, Z)
    beta_de = compose(commit_fit.alpha, B_de, w_de)
    if sigma0 is None:
        sigma0 = _sigma(dataset, commit_fit.beta0, beta_de, cfg)
    return _finish(
        beta_de,
        commit_fit.beta0,
        nodewise,
        sigma0,
        cfg.variance_method,
        cfg,
        dataset.n,
        dataset.feature_names,
        aux_betas_de=B_de,
        w_de=w_de,
    )


def debias_lasso(dataset, nodewise, config=None, solver=None, sigma0=None):
    """Debiased plain lasso of the target (the LDPE baseline)."""
    cfg = config or InferenceConfig()
    opts = solver or cfg.solver()
    fit, _ = solve_cv(dataset.X, dataset.y_target, k=cfg.cv_folds, seed=cfg.seed, options=opts)
    beta_de = debias_coefficients(fit.coefficients, dataset.X, dataset.y_target, nodewise.Z)
    if sigma0 is None:
        sigma0 = _sigma(dataset, fit.coefficients, beta_de, cfg)
    return _finish(
        beta_de,
        fit.coefficients,
        nodewise,
        sigma0,
        cfg.variance_method,
        cfg,
        dataset.n,
        dataset.feature_names,
    )
