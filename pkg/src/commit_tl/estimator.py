"""Three-step transfer estimator for a target outcome given auxiliary outcomes.

1. Lasso of every auxiliary outcome on X.
2. One weighted-L1 fit of the target on ``[X b_1 | ... | X b_J | X]`` with the
   J composite columns unpenalized (their coefficients are ``alpha``) and the
   p raw columns penalized (their coefficients are ``w``).
3. ``beta0 = sum_j alpha_j b_j + w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    AllAuxiliariesDegenerateError,
    DimensionMismatchError,
    NonFiniteError,
)
from .solver import (
    CvResult,
    PenalizedFit,
    PenaltySpec,
    SolverOptions,
    solve_cv,
    solve_penalized_ls,
)

__all__ = [
    "AlphaWFit",
    "CommitConfig",
    "CommitFit",
    "Dataset",
    "compose",
    "fit_alpha_w",
    "fit_auxiliary",
    "fit_commit",
    "predict",
]


@dataclass(frozen=True)
class Dataset:
    """Covariates plus one target and ``J >= 0`` auxiliary outcomes on the same rows."""

    X: np.ndarray
    y_target: np.ndarray
    y_aux: np.ndarray = None
    feature_names: tuple = None
    outcome_names: tuple = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y_target, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatchError(f"X must be 2-d, got shape {X.shape}")
        n, p = X.shape
        if y.shape != (n,):
            raise DimensionMismatchError(f"target has shape {y.shape}, expected ({n},)")
        if self.y_aux is None:
            Y = np.empty((n, 0))
        else:
            Y = np.asarray(self.y_aux, dtype=float)
            if Y.ndim == 1:
                Y = Y[:, None]
            if Y.ndim != 2 or Y.shape[0] != n:
                raise DimensionMismatchError(f"auxiliary outcomes have shape {Y.shape}, n={n}")
        for name, arr in (("X", X), ("target", y), ("auxiliary", Y)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError(f"{name} contains NaN/Inf")
        J = Y.shape[1]
        fnames = tuple(self.feature_names) if self.feature_names is not None else tuple(
            f"x{k}" for k in range(p)
        )
        onames = tuple(self.outcome_names) if self.outcome_names is not None else (
            "y0",
            *(f"y{j + 1}" for j in range(J)),
        )
        if len(fnames) != p:
            raise DimensionMismatchError(f"{len(fnames)} feature names for {p} columns")
        if len(onames) != J + 1:
            raise DimensionMismatchError(f"{len(onames)} outcome names for {J + 1} outcomes")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y_target", y)
        object.__setattr__(self, "y_aux", Y)
        object.__setattr__(self, "feature_names", fnames)
        object.__setattr__(self, "outcome_names", onames)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def J(self):
        return self.y_aux.shape[1]

    def with_auxiliaries(self, indices):
        """Keep only the auxiliary outcomes at ``indices`` (in that order)."""
        idx = list(indices)
        return Dataset(
            self.X,
            self.y_target,
            self.y_aux[:, idx],
            self.feature_names,
            (self.outcome_names[0], *(self.outcome_names[j + 1] for j in idx)),
        )

    def rows(self, mask):
        return Dataset(
            self.X[mask],
            self.y_target[mask],
            self.y_aux[mask],
            self.feature_names,
            self.outcome_names,
        )


@dataclass(frozen=True)
class CommitConfig:
    """Tuning policy for the estimator.

    ``lambda_aux`` and ``lambda_w`` are each ``"cv"`` (CV minimum),
    ``"cv_1se"`` or a fixed nonnegative float.
    """

    lambda_aux: object = "cv"
    lambda_w: object = "cv"
    cv_folds: int = 5
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    collinearity_threshold: float = 0.999

    def __post_init__(self):
        for name in ("lambda_aux", "lambda_w"):
            v = getattr(self, name)
            if isinstance(v, str):
                if v not in ("cv", "cv_1se"):
                    raise ValueError(f"{name} must be 'cv', 'cv_1se' or a float, got {v!r}")
            elif not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v}")


def _solve(X, y, factors, policy, cfg):
    if isinstance(policy, str):
        rule = "min" if policy == "cv" else "1se"
        return solve_cv(X, y, factors, rule=rule, k=cfg.cv_folds, seed=cfg.seed, options=cfg.solver)
    pen = PenaltySpec(float(policy), factors)
    return solve_penalized_ls(X, y, pen, cfg.solver), None


@dataclass(frozen=True)
class AlphaWFit:
    alpha: np.ndarray
    w: np.ndarray
    fit: PenalizedFit
    kept: tuple
    dropped: tuple
    cv: CvResult | None = None


@dataclass(frozen=True)
class CommitFit:
    """Result of the three-step estimator.

    ``alpha`` has one entry per auxiliary; dropped auxiliaries carry
    ``alpha = 0`` so that ``beta0 == compose(alpha, aux_betas, w)`` holds for
    every fit.
    """

    aux_betas: np.ndarray
    alpha: np.ndarray
    w: np.ndarray
    beta0: np.ndarray
    intercept: float
    lambdas_aux: np.ndarray
    lambda_w: float
    dropped_aux: tuple
    feature_names: tuple = ()
    outcome_names: tuple = ()
    aux_intercepts: np.ndarray = None
    zero_aux: tuple = ()

    @property
    def J(self):
        return self.aux_betas.shape[0]

    @property
    def no_auxiliaries(self):
        return self.J == 0


def compose(alpha, aux_betas, w):
    """``sum_j alpha_j * aux_betas[j] + w``, accumulated in auxiliary order."""
    out = np.zeros_like(np.asarray(w, dtype=float))
    for a, b in zip(alpha, aux_betas):
        out = out + a * b
    return out + w


def fit_auxiliary(dataset, config=None):
    """Step 1: one lasso per auxiliary outcome. Returns ``(fits, cvs)``.

    Fits whose coefficients are all zero are legal; they show up as
    ``fit.is_zero`` and are dropped in step 2.
    """
    cfg = config or CommitConfig()
    if dataset.J < 1:
        raise ValueError("fit_auxiliary needs at least one auxiliary outcome")
    fits, cvs = [], []
    for j in range(dataset.J):
        try:
            fit, cv = _solve(dataset.X, dataset.y_aux[:, j], None, cfg.lambda_aux, cfg)
        except Exception as exc:
            exc.args = (f"auxiliary {dataset.outcome_names[j + 1]!r}: {exc.args[0]}",) + exc.args[1:]
            raise
        fits.append(fit)
        cvs.append(cv)
    return fits, cvs


def _screen_columns(cols, nonzero, threshold, centered):
    kept, dropped = [], []
    unit = []
    for j in range(cols.shape[1]):
        if not nonzero[j]:
            dropped.append(j)
            continue
        c = cols[:, j] - cols[:, j].mean() if centered else cols[:, j]
        norm = np.linalg.norm(c)
        if norm == 0:
            dropped.append(j)
            continue
        u = c / norm
        if any(abs(float(u @ v)) > threshold for v in unit):
            dropped.append(j)
            continue
        kept.append(j)
        unit.append(u)
    return kept, dropped


def fit_alpha_w(dataset, aux_betas, config=None):
    """Step 2: joint fit of ``alpha`` (unpenalized) and ``w`` (L1-penalized).

    Auxiliaries whose coefficient vector is zero, or whose composite column
    ``X b_j`` is correlated above ``collinearity_threshold`` with an earlier
    retained one, are dropped before fitting.
    """
    cfg = config or CommitConfig()
    B = np.atleast_2d(np.asarray(aux_betas, dtype=float))
    if B.shape[1] != dataset.p:
        raise DimensionMismatchError(f"aux_betas have {B.shape[1]} coefficients, X has {dataset.p}")
    J = B.shape[0]
    cols = dataset.X @ B.T
    nonzero = [bool(np.any(B[j])) for j in range(J)]
    kept, dropped = _screen_columns(
        cols, nonzero, cfg.collinearity_threshold, cfg.solver.fit_intercept
    )
    if not kept:
        raise AllAuxiliariesDegenerateError(
            f"all {J} auxiliary fits are zero or collinear; nothing to transfer from"
        )
    m = len(kept)
    design = np.hstack([cols[:, kept], dataset.X])
    factors = np.concatenate([np.zeros(m), np.ones(dataset.p)])
    fit, cv = _solve(design, dataset.y_target, factors, cfg.lambda_w, cfg)
    alpha = np.zeros(J)
    alpha[kept] = fit.coefficients[:m]
    w = fit.coefficients[m:].copy()
    return AlphaWFit(alpha, w, fit, tuple(kept), tuple(dropped), cv)


def fit_commit(dataset, config=None):
    """Run all three steps and return a :class:`CommitFit`.

    With no auxiliaries the procedure is a plain lasso of the target on X,
    tuned by the ``lambda_w`` policy.
    """
    cfg = config or CommitConfig()
    names = dict(feature_names=dataset.feature_names, outcome_names=dataset.outcome_names)
    if dataset.J == 0:
        fit, _ = _solve(dataset.X, dataset.y_target, None, cfg.lambda_w, cfg)
        empty = np.zeros((0, dataset.p))
        return CommitFit(
            aux_betas=empty,
            alpha=np.zeros(0),
            w=fit.coefficients,
            beta0=fit.coefficients,
            intercept=fit.intercept,
            lambdas_aux=np.zeros(0),
            lambda_w=fit.lambda_used,
            dropped_aux=(),
            aux_intercepts=np.zeros(0),
            **names,
        )
    aux_fits, _ = fit_auxiliary(dataset, cfg)
    B = np.vstack([f.coefficients for f in aux_fits])
    step2 = fit_alpha_w(dataset, B, cfg)
    beta0 = compose(step2.alpha, B, step2.w)
    return CommitFit(
        aux_betas=B,
        alpha=step2.alpha,
        w=step2.w,
        beta0=beta0,
        intercept=step2.fit.intercept,
        lambdas_aux=np.array([f.lambda_used for f in aux_fits]),
        lambda_w=step2.fit.lambda_used,
        dropped_aux=step2.dropped,
        aux_intercepts=np.array([f.intercept for f in aux_fits]),
        zero_aux=tuple(j for j, f in enumerate(aux_fits) if f.is_zero),
        **names,
    )


def predict(fit, X_new):
    """``intercept + X_new @ beta0``."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != fit.beta0.shape[0]:
        raise DimensionMismatchError(
            f"expected {fit.beta0.shape[0]} columns, got shape {X_new.shape}"
        )
    return fit.intercept + X_new @ fit.beta0


def with_solver(config, **changes):
    """Copy of ``config`` with solver options replaced."""
    return replace(config, solver=replace(config.solver, **changes))
