import math

import numpy as np
import pytest

import mrtsi


@pytest.fixture(scope="module")
def trial():
    return mrtsi.simulate(n=60, T=10, p=10, c=4.4, seed=3)


def test_simulate_shapes(trial):
    X, y, groups = trial["X"], trial["y"], trial["groups"]
    assert X.shape == (len(y), 11)
    assert len(groups) == len(y)
    assert trial["unpenalized"] == [0]
    assert trial["columns"][0] == "(intercept)"
    assert np.count_nonzero(trial["beta_star"]) == 5


def test_si_intervals_contain_estimates(trial):
    rep = mrtsi.intervals(trial["X"], trial["y"], trial["groups"], method="si",
                          unpenalized=trial["unpenalized"], seed=5)
    assert rep["method"] == "si"
    assert 0 in rep["selected"]
    for iv in rep["intervals"]:
        assert iv["finite"]
        assert iv["lower"] < iv["estimate"] < iv["upper"]
        assert abs(iv["pivot_lower"] - 0.95) < 1e-6
        assert abs(iv["pivot_upper"] - 0.05) < 1e-6


@pytest.mark.parametrize("method", ["polyhedral", "splitting", "naive"])
def test_comparators_run(trial, method):
    rep = mrtsi.intervals(trial["X"], trial["y"], trial["groups"], method=method,
                          unpenalized=trial["unpenalized"], seed=5)
    for iv in rep["intervals"]:
        assert iv["lower"] <= iv["upper"]


def test_naive_width(trial):
    rep = mrtsi.intervals(trial["X"], trial["y"], trial["groups"], method="naive",
                          unpenalized=trial["unpenalized"], seed=5)
    n = len(set(trial["groups"]))
    for iv in rep["intervals"]:
        assert iv["upper"] - iv["lower"] == pytest.approx(2 * 1.6448536269514722 * iv["sigma"] / math.sqrt(n))


def test_randomized_lasso_kkt():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((90, 4))
    y = X @ np.array([1.0, 0.0, -0.5, 0.0]) + rng.standard_normal(90)
    groups = np.repeat(np.arange(30), 3)
    omega = rng.standard_normal(4)
    fit = mrtsi.randomized_lasso(X, y, groups, 1.0, omega)
    n = 30
    H, c = X.T @ X / n, X.T @ y / n
    lhs = math.sqrt(n) * (H @ fit["beta"] - c) + 1.0 * fit["subgradient"]
    np.testing.assert_allclose(lhs, omega, atol=1e-8)


def test_errors():
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        mrtsi.intervals(X, np.zeros(3), [0, 0, 1, 1])
    with pytest.raises(ValueError):
        mrtsi.intervals(X, np.zeros(4), [0, 1, 0, 1])
    with pytest.raises(ValueError):
        mrtsi.intervals(X, np.zeros(4), [0, 0, 1, 1], method="bogus")
