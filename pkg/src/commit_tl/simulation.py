"""Synthetic two-auxiliary design and a replication engine comparing estimators.

Covariates are AR(1) Gaussian (``Sigma_jk = rho^|j-k|``). With block size
``s`` the coefficient vectors are

    beta1 = theta1 on [0, s) and [p - s, p)
    beta2 = theta1 on [s, 3s)
    omega = theta2 on [3s, 4s)
    beta0 = beta1 - 0.5 * beta2 + omega

so ``beta1 . beta2 = 0`` and ``||beta0 - (beta1 - 0.5 beta2)||_1 = s |theta2|``.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .estimator import CommitConfig, Dataset, fit_commit
from .exceptions import InvalidLayoutError, StudyFailedError, ZeroVectorError
from .inference import (
    InferenceConfig,
    debias_commit,
    debias_lasso,
    estimate_sigma0,
    nodewise_residuals,
)
from .solver import (
    SolverOptions,
    cross_validate_ridge,
    solve_cv,
    solve_ridge,
)

__all__ = [
    "METHODS",
    "SimConfig",
    "SimulationReport",
    "TruthSet",
    "generate_dataset",
    "generate_truth",
    "information_score",
    "run_replication",
    "run_study",
]

log = logging.getLogger(__name__)

METHODS = ("commit", "lasso", "ridge", "ldpe_lasso", "commit_debias")
INFERENCE_METHODS = ("ldpe_lasso", "commit_debias")


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    p: int = 300
    s: int = 20
    theta1: float = 0.3
    theta2: float = 0.2
    rho: float = 0.3
    sigma0: float = 0.2
    sigma1: float = 0.1
    sigma2: float = 0.1
    n_replications: int = 100
    alpha_level: float = 0.05
    seed: int = 2024
    methods: tuple = ("commit", "lasso", "ridge")
    cv_folds: int = 5
    zeta: object = "fast"
    variance_method: str = "natural"
    df: str = "n"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.s < 1 or 4 * self.s > self.p:
            raise InvalidLayoutError(f"block layout needs 1 <= s and 4s <= p, got s={self.s}, p={self.p}")
        if not -1 < self.rho < 1:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if min(self.sigma0, self.sigma1, self.sigma2) < 0:
            raise ValueError("noise levels must be >= 0")
        if self.n_replications < 1:
            raise ValueError("n_replications must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass(frozen=True)
class TruthSet:
    beta0: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    omega: np.ndarray
    h_true: float


def generate_truth(config):
    p, s, t1, t2 = config.p, config.s, config.theta1, config.theta2
    if 4 * s > p:
        raise InvalidLayoutError(f"4s = {4 * s} exceeds p = {p}")
    beta1 = np.zeros(p)
    beta1[:s] = t1
    beta1[p - s :] = t1
    beta2 = np.zeros(p)
    beta2[s : 3 * s] = t1
    omega = np.zeros(p)
    omega[3 * s : 4 * s] = t2
    beta0 = beta1 - 0.5 * beta2 + omega
    h = float(np.abs(beta0 - (beta1 - 0.5 * beta2)).sum())
    return TruthSet(beta0, beta1, beta2, omega, h)


def replication_rng(seed, index):
    """Independent stream per replication, identical whether run serially or not."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def ar1_gaussian(rng, n, p, rho):
    """Rows drawn from N(0, Sigma) with ``Sigma_jk = rho^|j-k|`` (unit marginal variance)."""
    E = rng.standard_normal((n, p))
    X = np.empty_like(E)
    X[:, 0] = E[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for k in range(1, p):
        X[:, k] = rho * X[:, k - 1] + c * E[:, k]
    return X


def generate_dataset(config, truth, replication_index):
    rng = replication_rng(config.seed, replication_index)
    X = ar1_gaussian(rng, config.n, config.p, config.rho)
    noise = rng.standard_normal((config.n, 3))
    y0 = X @ truth.beta0 + config.sigma0 * noise[:, 0]
    y1 = X @ truth.beta1 + config.sigma1 * noise[:, 1]
    y2 = X @ truth.beta2 + config.sigma2 * noise[:, 2]
    return Dataset(X, y0, np.column_stack([y1, y2]))


def information_score(beta0, betaj):
    """Absolute cosine of the angle between two coefficient vectors."""
    a = np.asarray(beta0, dtype=float)
    b = np.asarray(betaj, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVectorError("information score is undefined for a zero vector")
    return float(min(abs(a @ b) / (na * nb), 1.0))


# ------------------------------------------------------------------ study


@dataclass
class MethodSummary:
    mse: list = field(default_factory=list)
    typeI_rejections: int = 0
    typeI_tests: int = 0
    power_rejections: int = 0
    power_tests: int = 0
    runtimes: list = field(default_factory=list)

    @property
    def typeI_rate(self):
        return self.typeI_rejections / self.typeI_tests if self.typeI_tests else None

    @property
    def power(self):
        return self.power_rejections / self.power_tests if self.power_tests else None

    def to_dict(self):
        mse = np.asarray(self.mse, dtype=float)
        rt = np.asarray(self.runtimes, dtype=float)
        return {
            "mse": self.mse,
            "mse_median": float(np.median(mse)) if mse.size else None,
            "mse_mean": float(np.mean(mse)) if mse.size else None,
            "typeI_rate": self.typeI_rate,
            "typeI_rejections": self.typeI_rejections,
            "typeI_tests": self.typeI_tests,
            "power": self.power,
            "power_rejections": self.power_rejections,
            "power_tests": self.power_tests,
            "runtime_mean": float(rt.mean()) if rt.size else None,
            "runtime_total": float(rt.sum()) if rt.size else None,
        }


@dataclass
class SimulationReport:
    config: SimConfig
    methods: dict
    records: list
    replication_seeds: list
    failed: list

    def summary(self):
        return {
            "config": self.config.to_dict(),
            "methods": {
                m: {k: v for k, v in s.to_dict().items() if k != "mse"}
                | {"mse": s.mse}
                for m, s in self.methods.items()
            },
            "n_failed": len(self.failed),
            "failed": self.failed,
            "replication_seeds": self.replication_seeds,
        }


def _commit_config(config):
    return CommitConfig(
        cv_folds=config.cv_folds,
        seed=config.seed,
        solver=SolverOptions(fit_intercept=False),
    )


def _inference_config(config):
    return InferenceConfig(
        zeta=config.zeta,
        variance_method=config.variance_method,
        df=config.df,
        alpha_level=config.alpha_level,
        cv_folds=config.cv_folds,
        seed=config.seed,
        fit_intercept=False,
    )


def run_replication(config, truth, index):
    """Fit every requested method on one synthetic dataset.

    Returns a list of long-format records, one per method.
    """
    data = generate_dataset(config, truth, index)
    ccfg = _commit_config(config)
    icfg = _inference_config(config)
    nonzero = truth.beta0 != 0
    records = []
    cache = {}

    def commit_fit():
        if "commit" not in cache:
            cache["commit"] = fit_commit(data, ccfg)
        return cache["commit"]

    def nodewise():
        if "Z" not in cache:
            cache["Z"] = nodewise_residuals(data.X, icfg)
        return cache["Z"]

    def sigma0():
        # the natural-lasso estimate depends only on (X, y0): share it
        if config.variance_method != "natural":
            return None
        if "sigma" not in cache:
            cache["sigma"] = estimate_sigma0(data.X, data.y_target, "natural", config=icfg)
        return cache["sigma"]

    for method in config.methods:
        t0 = time.perf_counter()
        reject = None
        res = None
        if method == "commit":
            est = commit_fit().beta0
        elif method == "lasso":
            fit, _ = solve_cv(data.X, data.y_target, k=config.cv_folds, seed=config.seed,
                              options=ccfg.solver)
            est = fit.coefficients
        elif method == "ridge":
            cv = cross_validate_ridge(data.X, data.y_target, k=config.cv_folds, seed=config.seed,
                                      fit_intercept=False)
            est = solve_ridge(data.X, data.y_target, cv.lambda_min, fit_intercept=False).coefficients
        elif method == "commit_debias":
            res = debias_commit(commit_fit(), data, nodewise(), icfg, sigma0=sigma0())
            est = res.beta0_de
            reject = res.p_values < config.alpha_level
        elif method == "ldpe_lasso":
            res = debias_lasso(data, nodewise(), icfg, solver=ccfg.solver, sigma0=sigma0())
            est = res.beta0_de
            reject = res.p_values < config.alpha_level
        elapsed = time.perf_counter() - t0
        rec = {
            "replication": index,
            "method": method,
            "mse": float(np.sum((est - truth.beta0) ** 2)),
            "runtime": elapsed,
        }
        if res is not None:
            rec["sigma0_hat"] = res.sigma0_hat
            rec["typeI_rejections"] = int(np.sum(reject[~nonzero]))
            rec["typeI_tests"] = int(np.sum(~nonzero))
            rec["power_rejections"] = int(np.sum(reject[nonzero]))
            rec["power_tests"] = int(np.sum(nonzero))
        records.append(rec)
    return records


def run_study(config, n_jobs=1, progress=None):
    """Run ``config.n_replications`` replications and aggregate per method.

    A replication that raises is logged and excluded; the study fails when
    more than 10% of replications fail. ``n_jobs > 1`` runs replications in
    worker processes; results do not depend on ``n_jobs``.
    """
    truth = generate_truth(config)
    indices = list(range(config.n_replications))

    def one(i):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                return i, run_replication(config, truth, i), None
            except Exception as exc:  # noqa: BLE001 - recorded and counted
                return i, None, f"{type(exc).__name__}: {exc}"

    if n_jobs == 1:
        outcomes = []
        for i in indices:
            outcomes.append(one(i))
            if progress is not None:
                progress(i)
    else:
        try:
            from joblib import Parallel, delayed
        except ImportError:
            raise ImportError("n_jobs > 1 needs joblib: pip install commit-tl[parallel]") from None

        outcomes = Parallel(n_jobs=n_jobs)(delayed(one)(i) for i in indices)
    outcomes.sort(key=lambda t: t[0])

    methods = {m: MethodSummary() for m in config.methods}
    records, failed = [], []
    for i, recs, err in outcomes:
        if err is not None:
            log.warning("replication %d failed: %s", i, err)
            failed.append({"replication": i, "error": err})
            continue
        for rec in recs:
            s = methods[rec["method"]]
            s.mse.append(rec["mse"])
            s.runtimes.append(rec["runtime"])
            if "typeI_tests" in rec:
                s.typeI_rejections += rec["typeI_rejections"]
                s.typeI_tests += rec["typeI_tests"]
                s.power_rejections += rec["power_rejections"]
                s.power_tests += rec["power_tests"]
            records.append(rec)
    if len(failed) > 0.1 * config.n_replications:
        raise StudyFailedError(
            f"{len(failed)} of {config.n_replications} replications failed: {failed[:3]}"
        )
    seeds = [[int(config.seed), i] for i in indices]
    return SimulationReport(config, methods, records, seeds, failed)


def binomial_band(rate, n_tests, level=0.95):
    """Exact (Clopper-Pearson style) acceptance band for a rejection count."""
    lo = stats.binom.ppf((1 - level) / 2, n_tests, rate) / n_tests
    hi = stats.binom.ppf(1 - (1 - level) / 2, n_tests, rate) / n_tests
    return float(lo), float(hi)
