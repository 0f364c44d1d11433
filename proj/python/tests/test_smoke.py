import math

import numpy as np
import pytest

import moenet


def logistic_data(n=120, p=8, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    eta = 1.5 * x[:, 0] - 1.0 * x[:, 1]
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return x, y


def test_fit_and_predict():
    x, y = logistic_data()
    lmax = moenet.lambda_max(x, y)
    empty = moenet.fit_enet(x, y, lam=1.01 * lmax)
    assert all(c == 0.0 for c in empty["coefficients"])
    fit = moenet.fit_enet(x, y, lam=0.05 * lmax)
    assert fit["coefficients"][0] > 0 and fit["coefficients"][1] < 0
    p = moenet.predict_proba(fit["intercept"], np.array(fit["coefficients"]), x)
    assert p.shape == (120,)
    assert np.all((p > 0) & (p < 1))


def test_cv_lambda_and_errors():
    x, y = logistic_data(seed=1)
    cv = moenet.cv_lambda(x, y, folds=5, seed=3)
    assert cv == moenet.cv_lambda(x, y, folds=5, seed=3)
    with pytest.raises(moenet.MoenetError):
        moenet.fit_enet(x, np.ones(120), lam=0.1)
    with pytest.raises(moenet.MoenetError):
        moenet.run_method(x, y, [("layer1", 0, 8, True)], "not_a_method")


def test_simulate_and_run_method():
    d = moenet.simulate("A", scale_to=20, n_test=50, seed=4)
    assert d["x_train"].shape == (100, 42)
    assert d["x_test"].shape == (50, 42)
    assert [l[0] for l in d["layers"]] == ["clinical", "layer1", "layer2"]
    assert sum(d["relevant"]) == 2
    r = moenet.run_method(d["x_train"], d["y_train"], d["layers"], "two_step_fixed", seed=1, cv_folds=5)
    assert r["method"] == "two_step_fixed"
    assert "hyperparams" in r
    assert set(moenet.method_names()) >= {"naive_en", "sipf_en", "ipf_en", "univariate_wald"}


def test_epsgo_with_python_objective():
    res = moenet.epsgo_minimize(lambda p: (p[0] - 0.3) ** 2, [("x", 0.0, 1.0, False)], seed=2, max_evals=25)
    assert abs(res["best_point"]["x"] - 0.3) < 0.05
    assert res["best_value"] < 0.01


def test_stats_and_ranks():
    bh = moenet.benjamini_hochberg([0.01, 0.02, 0.03])
    assert bh["adjusted"] == pytest.approx([0.03, 0.03, 0.03])
    assert moenet.mann_whitney([1, 2, 3], [4, 5, 6])["u"] == 0.0
    assert list(moenet.descending_ranks(np.array([0.5, 0.5]))) == [1.5, 1.5]
    t = moenet.aggregate_ranks(["a", "b", "c"], [("x", np.array([0.9, 0.1, 0.5])), ("y", np.array([0.8, 0.2, 0.4]))])
    assert list(t["aggregate_rank"]) == [1.0, 3.0, 2.0]
    assert math.isclose(moenet.expected_improvement(0.5, 1.0, 0.5), 0.3989422804, rel_tol=1e-9)
    lhs = moenet.latin_hypercube(2, 10, 0)
    assert lhs.shape == (10, 2)
