import itertools
import math

import numpy as np
import pytest

from tlkit.cube_pair import (
    DecisionList,
    bias_threshold,
    derive_cube_params,
    derive_dl_params,
    eval_decision_list,
    is_regular,
    iter_decision_lists,
    kwise_bias_table,
    kwise_sample_count,
    run_cube_halfspace_learner,
    run_decision_list_learner,
    run_decision_list_tester,
    run_kwise_tester,
)
from tlkit.data import (
    ArrayStream,
    LabeledDataset,
    SampleStream,
    coin_labeler,
    decision_list_labeler,
    halfspace_labeler,
    majority_labeler,
    make_distribution,
    with_label_noise,
)


def full_cube(n):
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n)))


def stream(name, n, seed, labeler=None, stage="tester", **kw):
    D = make_distribution(name, n, **kw)
    return SampleStream(D.sample, labeler, seed, stage)


P8 = derive_cube_params(0.5, 8, k=3, max_degree=3)


class TestParams:
    def test_formulas(self):
        p = derive_cube_params(0.5, 8)
        L = math.log(2)
        assert p.formula["k"] == max(1, math.ceil(L**4 / (50 * 0.5**4)))
        assert p.formula["degree"] == math.ceil(20 * L**2 / 0.5**4) == 154
        assert p.degree == 8  # multilinear degree cannot exceed n

    def test_override_flags(self):
        assert P8.k == 3 and P8.degree == 3
        assert len(P8.deviations) == 2

    def test_dl_params(self):
        q = derive_dl_params(0.25, 10)
        assert q.k == 2
        assert q.learner_samples == math.ceil(100 / 0.0625 * 8 * math.log2(10))
        assert derive_dl_params(0.5, 10).k == 1
        with pytest.raises(ValueError):
            derive_dl_params(0.01, 10)

    def test_threshold_calibration(self):
        m = kwise_sample_count(8, 3, 0.1)
        assert bias_threshold(8, 3, m) <= 0.05 + 1e-12


class TestBiasTable:
    def test_uniform_exact(self):
        tab = kwise_bias_table(full_cube(5), 3)
        assert len(tab) == 5 + 10 + 10
        assert all(v == 0.0 for v in tab.values())

    def test_planted_parity(self):
        X = full_cube(4)
        X[:, 2] = X[:, 0] * X[:, 1]
        tab = kwise_bias_table(X, 3)
        assert tab[(0, 1, 2)] == 1.0
        assert tab[(0, 1)] == 0.0

    def test_hoeffding_scale(self):
        X = stream("cube", 8, 0).examples(100_000)
        tab = kwise_bias_table(X, 3)
        K = len(tab)
        assert max(abs(v) for v in tab.values()) <= 4 * math.sqrt(math.log(2 * K) / 100_000)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kwise_bias_table(full_cube(3), 4)


class TestKwiseTester:
    def test_uniform_accepted(self):
        acc = sum(run_kwise_tester(stream("cube", 8, s), P8).accept for s in range(20))
        assert acc >= 18

    def test_parity_rejected(self):
        v = run_kwise_tester(stream("parity-planted", 8, 1), P8)
        assert not v.accept and v.worst_index == "1,2,3" and v.gap == 1.0

    def test_biased_first_coordinate(self):
        p = derive_cube_params(0.5, 8, k=1)
        v = run_kwise_tester(stream("biased-coord", 8, 2, bias=0.5), p)
        assert not v.accept and v.worst_index == "1"

    def test_label_oblivious_and_deterministic(self):
        D = make_distribution("cube", 8)
        a = run_kwise_tester(SampleStream(D.sample, coin_labeler(), 3), P8)
        b = run_kwise_tester(SampleStream(D.sample, majority_labeler([0, 1, 2]), 3), P8)
        assert a == b

    def test_decision_list_tester(self):
        assert run_decision_list_tester(stream("cube", 10, 4), 0.25, 10).accept
        assert not run_decision_list_tester(stream("biased-coord", 10, 4, bias=0.5), 0.25, 10).accept
        # x3 = x1 x2 is invisible at k = 2: pairwise independence survives
        assert run_decision_list_tester(stream("parity-planted", 10, 4), 0.25, 10).accept


class TestHalfspaceLearner:
    def test_majority_exact(self):
        X = full_cube(5)
        p = derive_cube_params(0.5, 5, degree=3)
        lab = majority_labeler([0, 1, 2])
        model, rep = run_cube_halfspace_learner(stream("cube", 5, 0, lab, "learner"), p)
        y = lab(X, None)
        assert np.mean(model(X) != y) <= 0.05
        assert rep.n_features == 1 + 5 + 10 + 10

    def test_majority_is_cubic(self):
        # exact multilinear form of maj(x1, x2, x3)
        X = full_cube(3)
        poly = (X.sum(axis=1) - X.prod(axis=1)) / 2
        np.testing.assert_array_equal(poly, np.sign(X.sum(axis=1)))

    def test_constant_labels(self):
        p = derive_cube_params(0.5, 4, degree=2)
        model, rep = run_cube_halfspace_learner(stream("cube", 4, 0, lambda X, r: np.ones(len(X)), "learner"), p)
        assert np.all(model(full_cube(4)) == 1.0)
        assert rep.empirical_01 == 0.0

    def test_noisy_halfspace(self):
        p = derive_cube_params(0.5, 6, degree=3)
        lab = with_label_noise(halfspace_labeler([1, 1, 1, 0, 0, 0], 0.5), 0.1)
        model, _ = run_cube_halfspace_learner(stream("cube", 6, 1, lab, "learner"), p)
        hold = stream("cube", 6, 1, lab, "holdout").labeled(20_000)
        assert np.mean(model(hold.X) != hold.y) <= 0.1 + 0.15


class TestDecisionLists:
    def test_eval(self):
        assert eval_decision_list(DecisionList(), [1, 1]) == -1
        dl = DecisionList((1,), (1,), (-1,), 1)
        assert eval_decision_list(dl, [5, 1]) == -1
        two = DecisionList((0, 1), (1, 1), (1, -1))
        assert eval_decision_list(two, [-1, 1]) == -1
        assert eval_decision_list(two, [1, 1]) == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            DecisionList((0, 0), (1, 1), (1, 1))
        with pytest.raises(ValueError):
            DecisionList((0,), (2,), (1,))
        with pytest.raises(ValueError):
            DecisionList((0, 1), (1,), (1,))

    def test_json(self):
        dl = DecisionList((2, 0), (-1, 1), (1, -1))
        assert DecisionList.from_json(dl.to_json()) == dl

    def test_enumeration_order(self):
        lists = list(iter_decision_lists(3, 2))
        assert len(lists) == 3 * 2 * 4 * 4
        assert lists[0] == DecisionList((0, 1), (-1, -1), (-1, -1))
        # colex: {0,1} then {0,2} then {1,2}
        firsts = [tuple(sorted(d.order)) for d in lists[::32]]
        assert firsts == [(0, 1), (0, 2), (1, 2)]

    def test_learner_matches_brute_force(self):
        rng = np.random.default_rng(0)
        X = rng.choice([-1.0, 1.0], size=(300, 4))
        y = rng.choice([-1.0, 1.0], 300)
        data = LabeledDataset(X, y)
        p = derive_dl_params(0.25, 4)
        p = type(p)(**{**p.__dict__, "learner_samples": 300})
        dl, rep = run_decision_list_learner(ArrayStream(data), 0.25, params=p)
        errs = [np.mean(d(X) != y) for d in iter_decision_lists(4, 2)]
        best = int(np.argmin(errs))
        assert rep.empirical_01 == pytest.approx(errs[best])
        assert dl == list(iter_decision_lists(4, 2))[best]

    def test_recovers_one_variable_list(self):
        lab = decision_list_labeler([4], [1], [1])
        dl, rep = run_decision_list_learner(stream("cube", 8, 0, lab, "learner"), 0.5, 8)
        assert rep.empirical_01 == 0.0
        X = full_cube(8)
        assert np.all(dl(X) == lab(X, None))

    def test_two_variable_noise(self):
        lab = with_label_noise(decision_list_labeler([2, 5], [1, -1], [1, 1]), 0.05)
        dl, _ = run_decision_list_learner(stream("cube", 10, 1, lab, "learner"), 0.25, 10)
        hold = stream("cube", 10, 1, lab, "holdout").labeled(20_000)
        assert np.mean(dl(hold.X) != hold.y) <= 0.05 + 0.1

    def test_coin_labels(self):
        dl, _ = run_decision_list_learner(stream("cube", 6, 2, coin_labeler(), "learner"), 0.25, 6)
        hold = stream("cube", 6, 2, coin_labeler(), "holdout").labeled(20_000)
        assert abs(np.mean(dl(hold.X) != hold.y) - 0.5) <= 0.05

    def test_prefix_proximity(self):
        rng = np.random.default_rng(3)
        n = 12
        X = full_cube(n)
        for _ in range(5):
            order = tuple(rng.permutation(n))
            bits = tuple(rng.choice([-1, 1], n))
            vals = tuple(rng.choice([-1, 1], n))
            full = DecisionList(order, bits, vals)
            for k in (1, 2, 3, 4):
                pre = DecisionList(order[:k], bits[:k], vals[:k])
                assert np.mean(pre(X) != full(X)) <= 2.0 ** (1 - k)


class TestCubeProperties:
    def test_kwise_moment_bound(self):
        # x_n = prod of the others: every n-1 coordinates are uniform
        n = 6
        base = full_cube(n - 1)
        X = np.column_stack([base, base.prod(axis=1)])
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.normal(size=n)
            v /= np.linalg.norm(v)
            for d in (2, 4):
                assert np.mean((X @ v) ** d) ** (1 / d) <= 2 * math.sqrt(d)

    def test_regular_anti_concentration(self):
        n = 16
        X = full_cube(n)
        rng = np.random.default_rng(1)
        eps = 0.35
        checked = 0
        for _ in range(40):
            v = rng.uniform(0.5, 1.0, n) * rng.choice([-1, 1], n)
            v /= np.linalg.norm(v)
            if not is_regular(v, eps):
                continue
            checked += 1
            proj = np.sort(X @ v)
            for a in np.linspace(-1.5, 1.5, 13):
                for width in (0.0, 0.1, 0.3):
                    mass = np.mean((proj >= a) & (proj <= a + width))
                    assert mass <= width + 2 * eps
        assert checked > 10

    def test_is_regular(self):
        assert is_regular(np.ones(16), 0.25)
        assert not is_regular([1.0, 0.1], 0.5)
