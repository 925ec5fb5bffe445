"""Coordinate-descent penalized logistic regression tests."""

import numpy as np
import pytest

from hemascreen.errors import SingleClass
from hemascreen.models.elastic_net import (
    fit_penalized_logistic,
    lambda_grid,
    lambda_max,
    train_elastic_net,
)


def irls_logistic(X, y, iters=500, tol=1e-12):
    """Oracle: unpenalized fit by Newton-Raphson with an explicit solve."""
    n, p = X.shape
    design = np.hstack([np.ones((n, 1)), X])
    beta = np.zeros(p + 1)
    for _ in range(iters):
        prob = 1.0 / (1.0 + np.exp(-(design @ beta)))
        weight = prob * (1.0 - prob)
        grad = design.T @ (prob - y) / n
        hess = (design * weight[:, None]).T @ design / n
        step = np.linalg.solve(hess, grad)
        beta -= step
        if np.max(np.abs(step)) < tol:
            break
    return beta[0], beta[1:]


def logistic_instance(rng, n=90, p=6, scale=0.8):
    """Well-conditioned overlapping classes, both present."""
    X = rng.normal(size=(n, p))
    beta = rng.normal(scale=scale, size=p)
    prob = 1.0 / (1.0 + np.exp(-(X @ beta + 0.2)))
    y = (rng.random(n) < prob).astype(int)
    if y.min() == y.max():
        y[:2] = [0, 1]
    return X, y


class TestKernel:
    def test_objective_monotone_every_sweep(self, rng):
        for lam in (0.0, 0.01, 0.1):
            X, y = logistic_instance(rng)
            _, _, trace = fit_penalized_logistic(
                X, y.astype(float), lam, alpha=1.0, record_objective=True
            )
            diffs = np.diff(trace)
            assert np.all(diffs <= 1e-10)

    def test_converges_to_stationary_point(self, rng):
        X, y = logistic_instance(rng, n=60, p=4)
        coef, intercept, _ = fit_penalized_logistic(
            X, y.astype(float), 0.0, alpha=1.0, tol=1e-18, max_sweeps=50000
        )
        prob = 1.0 / (1.0 + np.exp(-(intercept + X @ coef)))
        grad = X.T @ (prob - y) / len(y)
        assert np.max(np.abs(grad)) < 1e-8
        assert abs(np.mean(prob - y)) < 1e-8


class TestPathEndpoints:
    def test_lambda_max_kills_every_coefficient(self, rng):
        X, y = logistic_instance(rng)
        lam_max = lambda_max(X, y.astype(float), alpha=1.0)
        model = train_elastic_net(X, y, alpha=1.0, lambda_selection=lam_max, n_lambdas=10)
        assert np.all(model.coefficients == 0.0)
        assert model.intercept == pytest.approx(np.log(y.mean() / (1 - y.mean())), abs=1e-7)

    def test_above_lambda_max_also_zero(self, rng):
        X, y = logistic_instance(rng)
        lam_max = lambda_max(X, y.astype(float), alpha=1.0)
        model = train_elastic_net(X, y, alpha=1.0, lambda_selection=2 * lam_max, n_lambdas=10)
        assert np.all(model.coefficients == 0.0)

    def test_path_head_is_all_zero(self, rng):
        X, y = logistic_instance(rng)
        model = train_elastic_net(X, y, alpha=1.0, lambda_selection=0.01, n_lambdas=30)
        assert np.all(model.lambda_path[0].coefficients == 0.0)
        lams = [pt.lam for pt in model.lambda_path]
        assert lams == sorted(lams, reverse=True)

    def test_grid_span(self):
        grid = lambda_grid(2.0, 100)
        assert len(grid) == 100
        assert grid[0] == pytest.approx(2.0)
        assert grid[-1] == pytest.approx(2.0e-3)


class TestLambdaZeroOracle:
    def test_matches_irls(self, rng):
        """Unpenalized coordinate-descent fit equals the Newton oracle."""
        for _ in range(5):
            X, y = logistic_instance(rng)
            model = train_elastic_net(X, y, alpha=1.0, lambda_selection=0.0, n_lambdas=20)
            intercept, coefs = irls_logistic(X, y.astype(float))
            np.testing.assert_allclose(model.coefficients, coefs, atol=1e-4)
            assert model.intercept == pytest.approx(intercept, abs=1e-4)

    def test_alpha_irrelevant_at_zero(self, rng):
        X, y = logistic_instance(rng, n=70, p=4)
        lasso = train_elastic_net(X, y, alpha=1.0, lambda_selection=0.0, n_lambdas=15)
        ridge = train_elastic_net(X, y, alpha=0.0, lambda_selection=0.0, n_lambdas=15)
        np.testing.assert_allclose(lasso.coefficients, ridge.coefficients, atol=1e-5)


class TestCvSelection:
    def test_recovers_sparse_signal(self, rng):
        n, p = 160, 10
        X = rng.normal(size=(n, p))
        beta = np.zeros(p)
        beta[:3] = [1.6, -1.2, 1.0]
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(X @ beta)))).astype(int)
        model = train_elastic_net(X, y, alpha=1.0, lambda_selection="cv", seed=0, n_lambdas=40)
        support = set(np.flatnonzero(model.coefficients != 0.0))
        assert {0, 1, 2} <= support
        # noise coefficients shrink well below the signal ones
        signal_floor = np.min(np.abs(model.coefficients[:3]))
        noise_ceiling = np.max(np.abs(model.coefficients[3:]), initial=0.0)
        assert noise_ceiling < signal_floor
        assert model.cv_mean_auc is not None and len(model.cv_mean_auc) == 40

    def test_deterministic(self, rng):
        X, y = logistic_instance(rng, n=80)
        a = train_elastic_net(X, y, lambda_selection="cv", seed=5, n_lambdas=25)
        b = train_elastic_net(X, y, lambda_selection="cv", seed=5, n_lambdas=25)
        np.testing.assert_array_equal(a.coefficients, b.coefficients)
        assert a.lam == b.lam

    def test_scores_are_probabilities(self, rng):
        X, y = logistic_instance(rng)
        model = train_elastic_net(X, y, lambda_selection=0.05, n_lambdas=15)
        scores = model.raw_scores(X)
        assert np.all((scores > 0) & (scores < 1))


class TestValidation:
    def test_single_class(self, rng):
        X = rng.normal(size=(20, 3))
        with pytest.raises(SingleClass):
            train_elastic_net(X, np.ones(20), lambda_selection=0.1)

    def test_alpha_range(self, rng):
        X, y = logistic_instance(rng, n=30, p=3)
        with pytest.raises(ValueError):
            train_elastic_net(X, y, alpha=1.5, lambda_selection=0.1)
