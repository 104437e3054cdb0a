import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_l1
from tlkit.data import LabeledDataset
from tlkit.l1fit import (
    FittedModel,
    ProblemTooLarge,
    RegressionProblem,
    best_threshold,
    fit_l1,
    predict,
)
from tlkit.polycore import MonomialPoly, MultiIndex, design_matrix, enumerate_monomials

ONE = MultiIndex()
X1 = MultiIndex(((0, 1),))


def problem(feats, X, y, degree=None):
    degree = max(f.degree for f in feats) if degree is None else degree
    return RegressionProblem(tuple(feats), np.asarray(X, float).reshape(len(y), -1), np.asarray(y, float), degree)


@pytest.mark.parametrize("method", ["highs", "simplex"])
class TestFitExamples:
    def test_constant_fit(self, method):
        m = fit_l1(problem([ONE], [[0.0], [1.0]], [1, 1]), method)
        assert m.poly.coefficient(ONE) == pytest.approx(1.0)
        assert m.empirical_l1 == pytest.approx(0.0, abs=1e-12)

    def test_exact_line(self, method):
        x = np.linspace(-1, 1, 7)
        m = fit_l1(problem([ONE, X1], x, 2 * x), method)
        assert m.poly.coefficient(ONE) == pytest.approx(0.0, abs=1e-9)
        assert m.poly.coefficient(X1) == pytest.approx(2.0)
        assert m.empirical_l1 == pytest.approx(0.0, abs=1e-9)

    def test_median(self, method):
        m = fit_l1(problem([ONE], [[0.0]] * 3, [-1, -1, 1]), method)
        assert m.poly.coefficient(ONE) == pytest.approx(-1.0)
        assert m.empirical_l1 == pytest.approx(2 / 3)


class TestFitProperties:
    def test_brute_force_agreement(self):
        rng = np.random.default_rng(7)
        pool = list(enumerate_monomials(2, 2))
        for _ in range(60):
            m = int(rng.integers(1, 7))
            p = int(rng.integers(1, 3))
            feats = [pool[i] for i in rng.choice(len(pool), p, replace=False)]
            X = rng.normal(size=(m, 2))
            y = rng.choice([-1.0, 1.0], m)
            ref = brute_force_l1(design_matrix(feats, X), y)
            for method in ("highs", "simplex"):
                assert fit_l1(problem(feats, X, y), method).empirical_l1 == pytest.approx(ref, abs=1e-5)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), m=st.integers(5, 40))
    def test_nested_bases_monotone(self, seed, m):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(m, 2))
        y = rng.choice([-1.0, 1.0], m)
        feats = list(enumerate_monomials(2, 3))
        prev = math.inf
        for k in (1, 3, 6, 10):
            cur = fit_l1(problem(feats[:k], X, y, 3)).empirical_l1
            assert cur <= prev + 1e-9
            prev = cur

    def test_dual_certificate(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(400, 2))
        y = np.where(X[:, 0] + 0.3 * rng.normal(size=400) > 0, 1.0, -1.0)
        m = fit_l1(problem(list(enumerate_monomials(2, 3)), X, y))
        assert abs(m.diagnostics["duality_gap"]) <= 1e-7

    def test_methods_agree_on_objective(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(25, 2))
        y = rng.choice([-1.0, 1.0], 25)
        pr = problem(list(enumerate_monomials(2, 2)), X, y)
        assert fit_l1(pr, "highs").empirical_l1 == pytest.approx(fit_l1(pr, "simplex").empirical_l1, abs=1e-7)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(300, 3))
        y = rng.choice([-1.0, 1.0], 300)
        pr = problem(list(enumerate_monomials(3, 2)), X, y)
        assert fit_l1(pr).poly.terms == fit_l1(pr).poly.terms

    def test_constant_labels_shortcut(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        m = fit_l1(problem(list(enumerate_monomials(2, 2)), X, -np.ones(10)))
        assert m.poly.terms == {ONE: -1.0}
        assert m.empirical_l1 == 0.0

    def test_sample_complexity_smoke(self):
        # target sign(x1) is itself a basis function's sign, so opt = noise rate
        rng = np.random.default_rng(8)
        eps, noise = 0.1, 0.1
        feats = list(enumerate_monomials(2, 3))
        m = int(len(feats) / eps**2 * math.log(1 / 0.1))
        X = rng.normal(size=(m, 2))
        y = np.where(X[:, 0] >= 0, 1.0, -1.0) * np.where(rng.random(m) < noise, -1.0, 1.0)
        model = best_threshold(fit_l1(problem(feats, X, y)), LabeledDataset(X, y))
        Xh = rng.normal(size=(20000, 2))
        yh = np.where(Xh[:, 0] >= 0, 1.0, -1.0) * np.where(rng.random(20000) < noise, -1.0, 1.0)
        err = float(np.mean(predict(model, Xh) != yh))
        assert err <= noise + 2 * eps + 3 * math.sqrt(0.25 / 20000)

    def test_validation(self):
        with pytest.raises(ValueError):
            RegressionProblem((MultiIndex(((0, 3),)),), np.zeros((2, 1)), np.ones(2), 2)
        with pytest.raises(ValueError):
            RegressionProblem((ONE,), np.zeros((0, 1)), np.zeros(0), 0)
        with pytest.raises(ValueError):
            fit_l1(problem([ONE], [[0.0]], [1.0]), method="nope")

    def test_size_cap(self, monkeypatch):
        import tlkit.l1fit as mod

        monkeypatch.setattr(mod, "MAX_FEATURES", 3)
        with pytest.raises(ProblemTooLarge):
            fit_l1(problem(list(enumerate_monomials(2, 2)), np.zeros((3, 2)), [1, -1, 1]))


def model_with(poly, n=1):
    return FittedModel(poly, n, 0.0, 0.0)


class TestThreshold:
    def test_separated(self):
        X = np.array([[-2.0], [-1.0], [1.0], [3.0]])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        m = best_threshold(model_with(MonomialPoly({X1: 1.0})), LabeledDataset(X, y))
        assert m.empirical_01 == 0.0

    def test_constant_poly(self):
        X = np.zeros((10, 1))
        y = np.array([1.0] * 6 + [-1.0] * 4)
        m = best_threshold(model_with(MonomialPoly({ONE: 0.3})), LabeledDataset(X, y))
        assert m.empirical_01 == pytest.approx(0.4)
        assert np.all(predict(m, X) == 1.0)
        assert m.threshold < 0.3

    def test_midpoint_choice(self):
        rng = np.random.default_rng(0)
        X = np.array([[-1.0], [-0.5], [0.5], [1.0]])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        perm = rng.permutation(4)
        m = best_threshold(model_with(MonomialPoly({X1: 1.0})), LabeledDataset(X[perm], y[perm]))
        assert -0.5 < m.threshold < 0.5
        assert m.empirical_01 == 0.0

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            X = rng.integers(-3, 4, size=(15, 1)).astype(float)
            y = rng.choice([-1.0, 1.0], 15)
            m = best_threshold(model_with(MonomialPoly({X1: 1.0})), LabeledDataset(X, y))
            scan = min(np.mean(np.where(X[:, 0] - t >= 0, 1.0, -1.0) != y) for t in np.arange(-4.0, 4.01, 0.25))
            assert m.empirical_01 == pytest.approx(scan)


class TestPredict:
    def test_sign_and_tie(self):
        m = FittedModel(MonomialPoly({X1: 1.0}), 3, 0.0, 0.0, threshold=0.0)
        assert predict(m, [2.0, 0.0, 0.0]) == 1
        assert predict(m, [0.0, 5.0, 5.0]) == 1
        assert predict(m, [-0.1, 0.0, 0.0]) == -1

    def test_requires_threshold(self):
        with pytest.raises(ValueError):
            predict(model_with(MonomialPoly({X1: 1.0})), [1.0])

    def test_json_round_trip(self):
        m = FittedModel(MonomialPoly({X1: 1.5, ONE: -0.25}), 2, 0.1, 0.2, threshold=0.05)
        back = FittedModel.from_json(json.loads(json.dumps(m.to_json())))
        assert back == m
