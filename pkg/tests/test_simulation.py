import numpy as np
import pytest

from commit_tl.exceptions import InvalidLayoutError, ZeroVectorError
from commit_tl.simulation import (
    SimConfig,
    ar1_gaussian,
    generate_dataset,
    generate_truth,
    information_score,
    run_replication,
    run_study,
)
from oracles import ar1_cov


def test_truth_blocks():
    cfg = SimConfig(p=300, s=20, theta1=0.3, theta2=0.2)
    t = generate_truth(cfg)
    assert np.count_nonzero(t.beta1) == 40 and np.count_nonzero(t.beta2) == 40
    assert not np.any((t.beta1 != 0) & (t.beta2 != 0))
    assert t.beta1 @ t.beta2 == 0.0
    assert np.count_nonzero(t.omega) == 20
    np.testing.assert_array_equal(t.beta0, t.beta1 - 0.5 * t.beta2 + t.omega)
    assert t.h_true == pytest.approx(4.0, rel=1e-12)


def test_no_transfer_gap_when_theta2_zero():
    t = generate_truth(SimConfig(theta2=0.0))
    assert not np.any(t.omega) and t.h_true == 0.0


@pytest.mark.parametrize("p, s", [(79, 20), (10, 3), (30, 0)])
def test_invalid_layout(p, s):
    with pytest.raises(InvalidLayoutError):
        SimConfig(p=p, s=s)


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.8])
def test_ar1_covariance(rho):
    rng = np.random.default_rng(5)
    X = ar1_gaussian(rng, 5000, 10, rho)
    np.testing.assert_allclose(np.cov(X, rowvar=False), ar1_cov(10, rho), atol=0.05)


def test_noiseless_target_is_exact():
    cfg = SimConfig(n=20, p=40, s=5, sigma0=0.0, sigma1=0.0, sigma2=0.0)
    t = generate_truth(cfg)
    d = generate_dataset(cfg, t, 3)
    np.testing.assert_array_equal(d.y_target, d.X @ t.beta0)
    np.testing.assert_array_equal(d.y_aux[:, 0], d.X @ t.beta1)


def test_datasets_are_reproducible_and_distinct():
    cfg = SimConfig(n=20, p=40, s=5)
    t = generate_truth(cfg)
    a, b, c = (generate_dataset(cfg, t, i) for i in (0, 0, 1))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y_aux, b.y_aux)
    assert not np.array_equal(a.X, c.X)


@pytest.mark.parametrize(
    "u, v, expected",
    [
        ([1, 0], [0, 1], 0.0),
        ([1, 2], [2, 4], 1.0),
        ([1, 2], [-2, -4], 1.0),
        ([1, 1], [1, 0], np.sqrt(0.5)),
    ],
)
def test_information_score(u, v, expected):
    assert information_score(u, v) == pytest.approx(expected, abs=1e-12)


def test_information_score_zero_vector():
    with pytest.raises(ZeroVectorError):
        information_score([0, 0], [1, 0])


def test_information_score_of_design():
    t = generate_truth(SimConfig(theta2=0.0))
    assert information_score(t.beta0, t.beta1) > information_score(t.beta0, t.beta2) > 0


def test_config_round_trip():
    cfg = SimConfig(n=30, methods=["commit", "ridge"])
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        SimConfig(methods=["bogus"])


def test_replication_records():
    cfg = SimConfig(n=40, p=40, s=5, methods=("commit", "lasso", "ridge", "commit_debias", "ldpe_lasso"))
    recs = run_replication(cfg, generate_truth(cfg), 0)
    assert [r["method"] for r in recs] == list(cfg.methods)
    inf = {r["method"]: r for r in recs if "typeI_tests" in r}
    assert set(inf) == {"commit_debias", "ldpe_lasso"}
    assert inf["commit_debias"]["sigma0_hat"] == inf["ldpe_lasso"]["sigma0_hat"]
    for r in inf.values():
        assert r["typeI_tests"] + r["power_tests"] == cfg.p
        assert r["power_tests"] == 5 * cfg.s


def test_single_replication_study_is_reproducible():
    cfg = SimConfig(n=30, p=40, s=5, n_replications=1)
    a, b = run_study(cfg).summary(), run_study(cfg).summary()
    for m in cfg.methods:
        assert a["methods"][m]["mse"] == b["methods"][m]["mse"]
    assert a["replication_seeds"] == [[cfg.seed, 0]]
    assert a["n_failed"] == 0


def test_information_score_closed_form():
    # theta2 = 0: beta0 = beta1 - beta2 / 2 with orthogonal equal-norm blocks,
    # so the scores are sqrt(4/5) and sqrt(1/5)
    t = generate_truth(SimConfig(theta2=0.0))
    assert information_score(t.beta0, t.beta1) == pytest.approx(np.sqrt(0.8), rel=1e-12)
    assert information_score(t.beta0, t.beta2) == pytest.approx(np.sqrt(0.2), rel=1e-12)


def test_parallel_matches_serial():
    pytest.importorskip("joblib")
    cfg = SimConfig(n=30, p=40, s=5, n_replications=3, methods=("commit", "ridge"))
    a, b = run_study(cfg).summary(), run_study(cfg, n_jobs=2).summary()
    for m in cfg.methods:
        assert a["methods"][m]["mse"] == b["methods"][m]["mse"]
