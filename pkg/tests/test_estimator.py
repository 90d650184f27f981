import numpy as np
import pytest

from commit_tl.estimator import (
    CommitConfig,
    Dataset,
    compose,
    fit_alpha_w,
    fit_auxiliary,
    fit_commit,
    predict,
)
from commit_tl.exceptions import (
    AllAuxiliariesDegenerateError,
    DimensionMismatchError,
    NonFiniteError,
)
from commit_tl.simulation import SimConfig, generate_dataset, generate_truth
from commit_tl.solver import (
    PenaltySpec,
    SolverOptions,
    lambda_max,
    solve_cv,
    solve_penalized_ls,
)

NO_INTERCEPT = CommitConfig(solver=SolverOptions(fit_intercept=False))


@pytest.fixture(scope="module")
def sim_data():
    cfg = SimConfig(n=100, p=300, theta2=0.2)
    truth = generate_truth(cfg)
    return cfg, truth, generate_dataset(cfg, truth, 0)


def small_problem(rng, n=60, p=30, J=2):
    X = rng.standard_normal((n, p))
    B = np.zeros((J, p))
    for j in range(J):
        B[j, 3 * j : 3 * j + 3] = 1.0
    Y = X @ B.T + 0.1 * rng.standard_normal((n, J))
    y0 = X @ (B[0] - 0.5 * B[-1]) + 0.1 * rng.standard_normal(n)
    return Dataset(X, y0, Y)


def test_dataset_validation(rng):
    X = rng.standard_normal((5, 3))
    with pytest.raises(DimensionMismatchError):
        Dataset(X, np.ones(4))
    with pytest.raises(DimensionMismatchError):
        Dataset(X, np.ones(5), np.ones((4, 2)))
    with pytest.raises(NonFiniteError):
        Dataset(X, np.array([1, 2, np.nan, 4, 5.0]))
    with pytest.raises(DimensionMismatchError):
        Dataset(X, np.ones(5), feature_names=["a"])
    d = Dataset(X, np.ones(5), np.ones((5, 2)))
    assert d.J == 2 and d.outcome_names == ("y0", "y1", "y2")
    sub = d.with_auxiliaries([1])
    assert sub.J == 1 and sub.outcome_names == ("y0", "y2")


def test_auxiliary_support_contains_driving_feature(rng):
    n, p = 60, 40
    X = rng.standard_normal((n, p))
    y_aux = 3.0 * X[:, 1] + 0.01 * rng.standard_normal(n)
    fits, _ = fit_auxiliary(Dataset(X, rng.standard_normal(n), y_aux))
    assert fits[0].coefficients[1] != 0
    assert np.argmax(np.abs(fits[0].coefficients)) == 1


def test_auxiliary_at_lambda_max_all_flagged(rng):
    d = small_problem(rng)
    lmax = max(lambda_max(d.X, d.y_aux[:, j]) for j in range(d.J))
    fits, _ = fit_auxiliary(d, CommitConfig(lambda_aux=lmax))
    assert all(f.is_zero for f in fits)
    with pytest.raises(AllAuxiliariesDegenerateError):
        fit_commit(d, CommitConfig(lambda_aux=lmax))


def test_auxiliary_requires_one_outcome(rng):
    with pytest.raises(ValueError):
        fit_auxiliary(Dataset(rng.standard_normal((10, 3)), np.ones(10)))


def test_auxiliary_support_concentrates_on_true_blocks(sim_data):
    cfg, truth, _ = sim_data
    hits = total = 0
    mass = []
    for rep in range(3):
        data = generate_dataset(cfg, truth, rep)
        fits, _ = fit_auxiliary(data, NO_INTERCEPT)
        for fit, beta in zip(fits, (truth.beta1, truth.beta2)):
            b = fit.coefficients
            hits += np.sum((b != 0) & (beta != 0))
            total += np.sum(b != 0)
            mass.append(np.abs(b[beta != 0]).sum() / np.abs(b).sum())
    assert hits / total > 0.5
    assert min(mass) > 0.8


def test_self_auxiliary_gives_alpha_one(rng):
    n, p = 80, 10
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p)
    d = Dataset(X, y, y[:, None])
    cfg = CommitConfig(lambda_aux=0.0, lambda_w=10.0, solver=SolverOptions(tol=1e-12))
    fit = fit_commit(d, cfg)
    assert fit.alpha[0] == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(fit.w, 0.0, atol=1e-6)


def test_collinear_auxiliary_dropped(rng):
    d = small_problem(rng, J=2)
    b = np.zeros(d.p)
    b[:3] = 1.0
    res = fit_alpha_w(d, np.vstack([b, 2 * b]))
    assert res.dropped == (1,)
    assert res.kept == (0,)
    assert res.alpha[1] == 0.0


def test_all_zero_auxiliaries_raise(rng):
    d = small_problem(rng)
    with pytest.raises(AllAuxiliariesDegenerateError):
        fit_alpha_w(d, np.zeros((2, d.p)))


def test_alpha_w_orthogonality_to_composite_columns(rng):
    d = small_problem(rng, J=3)
    fit = fit_commit(d)
    r = d.y_target - predict(fit, d.X)
    scale = np.linalg.norm(d.y_target) * np.linalg.norm(d.X)
    for j in range(d.J):
        if j in fit.dropped_aux:
            continue
        col = d.X @ fit.aux_betas[j]
        assert abs(r @ (col - col.mean())) < 1e-6 * scale


def test_alpha_recovers_design_when_theta2_zero():
    cfg = SimConfig(theta2=0.0)
    truth = generate_truth(cfg)
    alphas = np.array([fit_commit(generate_dataset(cfg, truth, r), NO_INTERCEPT).alpha for r in range(4)])
    # lasso shrinkage in step 1 biases alpha_1 upward by about 0.05 on this design
    np.testing.assert_allclose(alphas.mean(axis=0), [1.0, -0.5], atol=0.1)


@pytest.mark.parametrize("policy", [0.05, "cv"])
def test_no_auxiliaries_is_plain_lasso(rng, policy):
    X = rng.standard_normal((50, 30))
    y = X[:, 0] + rng.standard_normal(50)
    fit = fit_commit(Dataset(X, y), CommitConfig(lambda_w=policy))
    if policy == "cv":
        ref, _ = solve_cv(X, y, k=5, seed=0)
    else:
        ref = solve_penalized_ls(X, y, PenaltySpec(policy))
    assert fit.no_auxiliaries
    assert np.array_equal(fit.beta0, ref.coefficients)
    assert fit.intercept == ref.intercept
    assert fit.lambda_w == ref.lambda_used


def test_composition_identity_bitwise(rng):
    d = small_problem(rng, J=3)
    fit = fit_commit(d)
    assert np.array_equal(fit.beta0, compose(fit.alpha, fit.aux_betas, fit.w))
    manual = fit.w.copy() * 0
    for a, b in zip(fit.alpha, fit.aux_betas):
        manual = manual + a * b
    assert np.array_equal(fit.beta0, manual + fit.w)


def test_permuting_auxiliaries_permutes_alpha(rng):
    d = small_problem(rng, J=2)
    cfg = CommitConfig(lambda_aux=0.05, lambda_w=0.05, solver=SolverOptions(tol=1e-11))
    a = fit_commit(d, cfg)
    b = fit_commit(d.with_auxiliaries([1, 0]), cfg)
    np.testing.assert_allclose(b.alpha, a.alpha[::-1], atol=1e-7)
    np.testing.assert_allclose(b.beta0, a.beta0, atol=1e-7)


def test_predict(rng):
    d = small_problem(rng)
    fit = fit_commit(d)
    np.testing.assert_array_equal(predict(fit, np.zeros((4, d.p))), np.full(4, fit.intercept))
    np.testing.assert_allclose(predict(fit, d.X), fit.intercept + d.X @ fit.beta0)
    with pytest.raises(DimensionMismatchError):
        predict(fit, np.zeros((4, d.p + 1)))


def test_config_validation():
    with pytest.raises(ValueError):
        CommitConfig(lambda_aux="bic")
    with pytest.raises(ValueError):
        CommitConfig(lambda_w=-1.0)


@pytest.mark.slow
def test_loocv_commit_beats_lasso():
    cfg = SimConfig(n=40, p=60, s=5, theta1=0.5, theta2=0.1, sigma0=0.3, sigma1=0.1, sigma2=0.1)
    truth = generate_truth(cfg)
    d = generate_dataset(cfg, truth, 0)
    ccfg = CommitConfig(cv_folds=3, solver=SolverOptions(fit_intercept=False))
    err_c, err_l = [], []
    for i in range(d.n):
        keep = np.arange(d.n) != i
        train = d.rows(keep)
        fc = fit_commit(train, ccfg)
        fl = fit_commit(train.with_auxiliaries([]), ccfg)
        err_c.append((d.y_target[i] - predict(fc, d.X[i : i + 1])[0]) ** 2)
        err_l.append((d.y_target[i] - predict(fl, d.X[i : i + 1])[0]) ** 2)
    assert np.mean(err_c) < np.mean(err_l)
