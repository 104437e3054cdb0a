import math

import numpy as np
import pytest

from oracles import binomial_tail_ge
from tlkit.data import SampleStream, coin_labeler, halfspace_labeler, make_distribution, with_label_noise
from tlkit.gauss_pair import (
    AllSamplesDiscarded,
    amplification_error_bound,
    amplify_tester,
    derive_params,
    desk_profile,
    max_window_mass,
    run_learner,
    run_tester,
    tail_check,
    tail_sample_count,
    truncate,
)
from tlkit.reports import Verdict


def stream(name, n, seed, labeler=None, stage="tester"):
    D = make_distribution(name, n)
    return SampleStream(D.sample, labeler, seed, stage)


def const_stream(point, seed=0):
    point = np.asarray(point, dtype=float)
    return SampleStream(lambda rng, m: np.tile(point, (m, 1)), None, seed)


class TestDeriveParams:
    def test_desk_example(self):
        p = derive_params(0.5, 4)
        assert p.d == 2 * math.floor(8 * math.log(2) ** 3) == 4
        assert math.floor(16 * math.log(2) ** 4) == 3
        assert p.delta == 2
        assert p.deviations == ()
        assert p.moment_tol == pytest.approx(1 / (2 * 4**2))
        assert p.N1 == 4**4

    def test_t_formula(self):
        p = derive_params(0.5, 4, C1=2.0, C2=3.0)
        expect = 2.0 * 2 * math.log(2) * math.sqrt(math.log(4)) + math.sqrt(2 * math.log(3 * 4 / 0.5))
        assert p.t == pytest.approx(expect)
        assert p.N2 == math.ceil(p.t ** (2 * 2) * 4 ** (1.0 * 2) - 1e-9)

    def test_monotone_in_eps(self):
        prev = None
        for eps in (0.5, 0.4, 0.3, 0.2):
            p = derive_params(eps, 3, max_n1=10, max_n2=10)
            if prev is not None:
                assert p.d > prev.d and p.delta > prev.delta
            prev = p

    def test_t_increases_with_n(self):
        ts = [derive_params(0.5, n).t for n in (1, 2, 5, 20)]
        assert all(a < b for a, b in zip(ts, ts[1:]))

    def test_even_degrees(self):
        for eps in np.linspace(0.1, 0.6, 11):
            p = derive_params(float(eps), 3, max_n1=10, max_n2=10)
            assert p.d % 2 == 0 and p.delta % 2 == 0 and p.d >= 2 and p.delta >= 2

    def test_caps_and_overrides_recorded_once(self):
        p = derive_params(0.5, 3, max_n2=1000, moment_tol=0.1, d=6)
        assert len(p.deviations) == 3
        assert any(s.startswith("N2 capped") for s in p.deviations)
        assert any(s.startswith("moment_tol") for s in p.deviations)
        assert any(s.startswith("d overridden") for s in p.deviations)

    def test_desk_profile(self):
        p = desk_profile(0.5, 3)
        assert p.delta == 4 and p.d == 4
        assert p.N1 == 3**8 and p.N2 == 1_000_000
        assert p.moment_tol == 0.05
        assert p.t == pytest.approx(4 * math.log(4) * math.sqrt(math.log(3)) + math.sqrt(2 * math.log(6)))

    def test_rejects_bad_eps(self):
        for e in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                derive_params(e, 3)

    def test_uncapped_overflow(self):
        with pytest.raises(OverflowError):
            derive_params(0.1, 50)

    def test_tail_sample_count(self):
        assert tail_sample_count(0.5, 3) == math.ceil(math.log(600) * 180**2 / 2)


class TestTail:
    def test_origin_passes(self):
        assert tail_check(const_stream([0.0, 0.0, 0.0]), derive_params(0.5, 3)).passed

    def test_far_point_fails(self):
        p = derive_params(0.5, 3)
        r = tail_check(const_stream([2 * p.t, 0.0, 0.0]), p)
        assert not r.passed and r.coordinate == 0

    def test_gaussian_passes(self):
        p = derive_params(0.5, 3)
        passes = sum(tail_check(stream("gaussian", 3, s), p).passed for s in range(20))
        assert passes >= 19

    def test_truncate(self):
        X = np.array([[0.1, 0.2], [0.3, -0.4]])
        kept, frac = truncate(X, 1.0)
        assert frac == 0.0 and kept.shape == (2, 2)
        kept, frac = truncate(X * 10, 1.0)
        assert frac == 1.0 and kept.shape[0] == 0

    def test_truncate_gaussian_fraction(self):
        p = derive_params(0.5, 3)
        X = np.random.default_rng(0).standard_normal((100_000, 3))
        _, frac = truncate(X, p.t)
        assert frac <= p.eps / 5


class TestTester:
    P = desk_profile(0.5, 3)

    def test_accepts_gaussian(self):
        v = run_tester(stream("gaussian", 3, 11), self.P)
        assert v.accept and v.stage == "ok"
        assert v.samples_used == self.P.tail_samples + self.P.N2

    def test_rejects_rademacher(self):
        v = run_tester(stream("rademacher-coord", 3, 12), self.P)
        assert not v.accept and v.stage == "moments"
        assert v.worst_index == "4,0,0"
        assert v.gap == pytest.approx(2.0, abs=0.05)

    def test_rejects_scaled(self):
        v = run_tester(stream("scaled-gaussian", 3, 13), self.P)
        assert not v.accept and v.stage == "moments"
        # degree-2 moments already miss by 1.25
        assert abs(v.gap) > 1.0

    def test_label_oblivious(self):
        D = make_distribution("gaussian", 3)
        a = run_tester(SampleStream(D.sample, halfspace_labeler([1, 0, 0]), 5), self.P)
        b = run_tester(SampleStream(D.sample, coin_labeler(), 5), self.P)
        assert a == b

    def test_deterministic(self):
        assert run_tester(stream("gaussian", 3, 9), self.P) == run_tester(stream("gaussian", 3, 9), self.P)

    def test_verdict_invariant(self):
        with pytest.raises(ValueError):
            Verdict(True, "tail", None, None, 0)
        with pytest.raises(ValueError):
            Verdict(False, "ok", None, None, 0)

    def test_anti_concentration_on_accepted(self):
        s = stream("gaussian", 3, 21)
        assert run_tester(s, self.P).accept
        X = s.examples(100_000)
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            proj = X @ v
            for width in (0.05, 0.2, 0.5):
                assert max_window_mass(proj, width) <= 10 * width
            for d in (2, 4):
                assert np.mean(proj**d) ** (1 / d) <= 2 * math.sqrt(d)


class TestLearner:
    def test_noiseless_axis(self):
        p = desk_profile(0.5, 2)
        lab = halfspace_labeler([1.0, 0.0])
        pred, rep = run_learner(stream("gaussian", 2, 1, lab, "learner"), p)
        hold = stream("gaussian", 2, 1, lab, "holdout").labeled(20_000)
        assert np.mean(pred(hold.X) != hold.y) <= 0.1
        assert rep.samples_used == p.N1

    def test_coin_labels(self):
        p = desk_profile(0.5, 2)
        pred, _ = run_learner(stream("gaussian", 2, 2, coin_labeler(), "learner"), p)
        hold = stream("gaussian", 2, 2, coin_labeler(), "holdout").labeled(20_000)
        assert abs(np.mean(pred(hold.X) != hold.y) - 0.5) <= 0.05

    def test_noisy_halfspace(self):
        p = desk_profile(0.5, 2)
        lab = with_label_noise(halfspace_labeler([1.0, 1.0], 0.3), 0.1)
        pred, _ = run_learner(stream("gaussian", 2, 3, lab, "learner"), p)
        hold = stream("gaussian", 2, 3, lab, "holdout").labeled(20_000)
        assert np.mean(pred(hold.X) != hold.y) <= 0.1 + 0.15

    def test_outside_box_predicts_plus(self):
        p = desk_profile(0.5, 2)
        pred, _ = run_learner(stream("gaussian", 2, 4, halfspace_labeler([-1.0, 0.0]), "learner"), p)
        assert pred([[p.t + 1, 0.0]])[0] == 1.0
        assert pred([[0.5 * p.t, 0.0]])[0] == -1.0

    def test_all_discarded(self):
        p = desk_profile(0.5, 2)
        far = SampleStream(lambda rng, m: np.full((m, 2), 1e3), halfspace_labeler([1.0, 0.0]), 0)
        with pytest.raises(AllSamplesDiscarded):
            run_learner(far, p)

    def test_deterministic(self):
        p = desk_profile(0.5, 2)
        lab = with_label_noise(halfspace_labeler([1.0, 0.0]), 0.1)
        a, ra = run_learner(stream("gaussian", 2, 8, lab, "learner"), p)
        b, rb = run_learner(stream("gaussian", 2, 8, lab, "learner"), p)
        assert a.model.poly == b.model.poly and ra == rb


class TestComposability:
    def test_zoo(self):
        P = desk_profile(0.5, 3)
        lab = with_label_noise(halfspace_labeler([1.0, -1.0, 0.5], 0.2), 0.1)
        for name in ("gaussian", "rademacher-coord", "scaled-gaussian"):
            acc = [run_tester(stream(name, 3, s), P).accept for s in range(5)]
            rate = sum(acc) / len(acc)
            if name == "gaussian":
                assert rate > 0.25
                pred, _ = run_learner(stream(name, 3, 0, lab, "learner"), P)
                hold = stream(name, 3, 0, lab, "holdout").labeled(20_000)
                assert np.mean(pred(hold.X) != hold.y) <= 0.1 + 0.15
            else:
                assert 1 - rate >= 0.9


def bernoulli_tester(p):
    def base(seed):
        return bool(np.random.default_rng(seed).random() < p)
    return base


class TestAmplify:
    def test_always_accept(self):
        amp = amplify_tester(lambda s: True, 7, 0.1, 0.9)
        assert amp(0).accept and amp(0).yes_count == 7

    def test_low_acceptance_rejected(self):
        amp = amplify_tester(bernoulli_tester(0.05), 100, 0.1, 0.9)
        assert amp(1).threshold == pytest.approx(0.5)
        rejects = sum(not amp(s).accept for s in range(100))
        assert rejects >= 99
        assert binomial_tail_ge(100, 0.05, 50) <= 0.01

    def test_coin_tester_is_borderline(self):
        # with threshold 1/2 a fair base tester passes about half the time
        assert binomial_tail_ge(100, 0.5, 50) == pytest.approx(0.5398, abs=1e-4)
        amp = amplify_tester(bernoulli_tester(0.5), 100, 0.1, 0.9)
        rate = np.mean([amp(s).accept for s in range(200)])
        assert abs(rate - 0.5398) <= 3 * math.sqrt(0.25 / 200)

    def test_bound_value(self):
        assert amplification_error_bound(50, 0.2, 0.7) == pytest.approx(2 * math.exp(-2 * 0.25 * 50 / 9))

    def test_bound_dominates_binomial(self):
        # base accepts w.p. >= 1 - delta2: amplified rejection is rare
        r, d2, d3 = 60, 0.1, 0.6
        k_needed = math.ceil((1 - (d2 + d3) / 2) * r)
        fail = 1 - binomial_tail_ge(r, 1 - d2, k_needed)
        assert fail <= amplification_error_bound(r, d2, d3)
        # base accepts w.p. <= 1 - delta3: amplified acceptance is rare
        assert binomial_tail_ge(r, 1 - d3, k_needed) <= amplification_error_bound(r, d2, d3)

    def test_validation(self):
        with pytest.raises(ValueError):
            amplify_tester(lambda s: True, 0, 0.1, 0.9)
        with pytest.raises(ValueError):
            amplify_tester(lambda s: True, 5, 0.9, 0.1)

    def test_verdict_input(self):
        v = Verdict(True, "ok", None, None, 0)
        assert amplify_tester(lambda s: v, 3, 0.1, 0.5)(0).accept


def test_window_mass():
    assert max_window_mass(np.array([0.0, 0.1, 0.2, 5.0]), 0.2) == 0.75
    assert max_window_mass(np.array([]), 1.0) == 0.0
