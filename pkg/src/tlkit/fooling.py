"""Harness for the sample-complexity fooling constructions.

A hard distribution is the uniform distribution over a multiset ``S`` of
``M`` i.i.d. draws from the base distribution ``D``. Labels are fixed by the
norm (Gaussian) or Hamming weight (cube) outside a thin band and are fair
coins inside it. A tester or learner that sees ``N << sqrt(M)`` samples should
not tell the difference; the harness measures how often a given tester
accepts and how much better than chance a given learner labels ``S``, and
compares both with closed-form bounds.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .data import SampleStream, make_distribution, stage_rng
from .gauss_pair import derive_params, run_learner, run_tester
from .reports import Verdict

__all__ = [
    "FoolingConfig",
    "BandLabeler",
    "FoolingReport",
    "build_support",
    "gaussian_band",
    "cube_band_halfwidth",
    "tester_fooling_bound",
    "learner_fooling_bound",
    "collision_probability",
    "collision_bound",
    "run_fooling_experiment",
    "desk_gaussian_tester",
    "desk_l1_learner",
]


@dataclass(frozen=True)
class FoolingConfig:
    """Experiment size and confidence parameters.

    ``delta2`` is the base tester's failure probability on ``D`` and
    ``delta_fool`` the confidence slack of the tester bound.
    """

    M: int
    N: int
    n: int
    alpha: float = 0.05
    delta2: float = 0.1
    delta_fool: float = 0.9
    domain: str = "gaussian"
    seed: int = 0
    trials: int = 20

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be positive")
        if self.N > self.M:
            raise ValueError("N must not exceed M")
        if not 0 < self.alpha < 1 / 8:
            raise ValueError("alpha must lie in (0, 1/8)")
        if self.domain not in ("gaussian", "cube"):
            raise ValueError("domain must be 'gaussian' or 'cube'")
        if not 0 <= self.delta2 < 1 or not self.delta_fool > 0:
            raise ValueError("need 0 <= delta2 < 1 and delta_fool > 0")
        if self.trials < 1:
            raise ValueError("trials must be positive")


def gaussian_band(n: int, alpha: float) -> tuple[float, float]:
    """Radii ``(a, b)`` with ``Pr[|x| < a] + Pr[|x| > b] <= alpha`` for
    ``x ~ N(0, I_n)``, from the chi-square tail bounds of Laurent and Massart."""
    L = math.log(2 / alpha)
    b = math.sqrt(n + 2 * math.sqrt(n * L) + 2 * L)
    a = math.sqrt(max(0.0, n - 2 * math.sqrt(n * L)))
    return a, b


def cube_band_halfwidth(n: int, alpha: float) -> float:
    """``h`` with ``Pr[|weight - n/2| > h] <= alpha`` by Hoeffding."""
    return math.sqrt(n / 2 * math.log(2 / alpha))


@dataclass(frozen=True)
class BandLabeler:
    """Deterministic labels outside the band, hashed coin flips inside.

    Gaussian: +1 for ``|x| > b``, -1 for ``|x| < a``. Cube: with ``w`` the
    number of +1 coordinates, -1 below ``n/2 - h`` and +1 above ``n/2 + h``.
    """

    domain: str
    n: int
    inner: float
    outer: float
    seed: int

    def in_band(self, X) -> np.ndarray:
        s = self._statistic(X)
        return (s >= self.inner) & (s <= self.outer)

    def _statistic(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.domain == "gaussian":
            return np.linalg.norm(X, axis=1)
        return np.sum(X > 0, axis=1).astype(float)

    def _coin(self, x: np.ndarray) -> float:
        h = hashlib.blake2b(np.ascontiguousarray(x, dtype=np.float64).tobytes(), digest_size=8,
                            key=int(self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
        return 1.0 if h.digest()[0] & 1 else -1.0

    def __call__(self, X, rng=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = self._statistic(X)
        out = np.where(s > self.outer, 1.0, -1.0)
        band = (s >= self.inner) & (s <= self.outer)
        for i in np.flatnonzero(band):
            out[i] = self._coin(X[i])
        return out


def build_support(config: FoolingConfig):
    """Draw the multiset ``S`` (M x n) and its labeler."""
    D = make_distribution("gaussian" if config.domain == "gaussian" else "cube", config.n)
    S = D.sample(stage_rng(config.seed, "support"), config.M)
    if config.domain == "gaussian":
        a, b = gaussian_band(config.n, config.alpha)
    else:
        h = cube_band_halfwidth(config.n, config.alpha)
        a, b = config.n / 2 - h, config.n / 2 + h
    return S, BandLabeler(config.domain, config.n, a, b, config.seed)


def tester_fooling_bound(delta2: float, N: int, M: int, delta_fool: float) -> float:
    """``1 - delta2 - N^2/M - N / sqrt(delta_fool M)``: acceptance floor on the
    uniform-over-S distribution for a tester that accepts D w.p. ``1 - delta2``."""
    return 1.0 - delta2 - N * N / M - N / math.sqrt(delta_fool * M)


def learner_fooling_bound(phi: float, N: int, M: int) -> float:
    """``1.5 (phi + N/M) + 5 sqrt(ln M / M)``: ceiling on a learner's advantage
    over a random guess when a ``phi`` fraction of labels is predetermined."""
    return 1.5 * (phi + N / M) + 5.0 * math.sqrt(math.log(M) / M)


def collision_probability(N: int, M: int) -> float:
    """Exact ``Pr[no repeat among N uniform draws from M items]``."""
    if N > M:
        raise ValueError("N must not exceed M")
    p = 1.0
    for i in range(N):
        p *= 1.0 - i / M
    return p


def collision_bound(N: int, M: int) -> float:
    """The birthday lower bound ``1 - N^2/M``."""
    return 1.0 - N * N / M


@dataclass(frozen=True)
class FoolingReport:
    acceptance_empirical: Optional[float]
    acceptance_sigma: Optional[float]
    acceptance_true: Optional[float]
    acceptance_bound: float
    advantage_empirical: Optional[float]
    advantage_sigma: Optional[float]
    advantage_bound: float
    phi: float
    collision_exact: float
    collision_bound: float
    acceptance_bound_vacuous: bool
    advantage_bound_vacuous: bool
    config_echo: dict

    def to_json(self) -> dict:
        return asdict(self)


def _uniform_from(S: np.ndarray) -> Callable:
    def sampler(rng, m):
        return S[rng.integers(0, S.shape[0], size=m)]
    return sampler


def _trial_seed(seed: int, i: int) -> int:
    return (int(seed) ^ i) & 0xFFFFFFFFFFFFFFFF


def run_fooling_experiment(
    config: FoolingConfig,
    tester: Optional[Callable[[SampleStream], Verdict]] = None,
    learner: Optional[Callable[[SampleStream], Callable]] = None,
    *,
    measure_true: bool = True,
    learner_trials: Optional[int] = None,
) -> FoolingReport:
    """Run ``tester`` and ``learner`` against the uniform-over-S distribution.

    Each receives a stream limited to ``N`` samples; exceeding it raises
    :class:`tlkit.data.BudgetExceeded`. Learner advantage
    ``|Pr[f(x) != g(x)] - 1/2|`` is evaluated exactly over all of ``S`` (the
    expectation of a fresh uniform-from-S holdout) and averaged over trials.
    """
    S, g = build_support(config)
    labels = g(S)
    phi = float(np.mean(~g.in_band(S)))
    R = config.trials
    acc = acc_true = None
    if tester is not None:
        acc_list = []
        for i in range(R):
            st = SampleStream(_uniform_from(S), g, _trial_seed(config.seed, i), "tester", budget=config.N, n=config.n)
            acc_list.append(bool(tester(st).accept))
        acc = float(np.mean(acc_list))
        if measure_true:
            D = make_distribution("gaussian" if config.domain == "gaussian" else "cube", config.n)
            true_list = []
            for i in range(R):
                st = SampleStream(D.sample, None, _trial_seed(config.seed, i) ^ 0x5A5A, "tester", budget=config.N, n=config.n)
                true_list.append(bool(tester(st).accept))
            acc_true = float(np.mean(true_list))
    adv = adv_sigma = None
    if learner is not None:
        advs = []
        for i in range(learner_trials or R):
            st = SampleStream(_uniform_from(S), g, _trial_seed(config.seed, i), "learner", budget=config.N, n=config.n)
            f = learner(st)
            advs.append(abs(float(np.mean(np.asarray(f(S)) != labels)) - 0.5))
        adv = float(np.mean(advs))
        adv_sigma = float(np.std(advs, ddof=1) / math.sqrt(len(advs))) if len(advs) > 1 else 0.0
    a_bound = tester_fooling_bound(config.delta2, config.N, config.M, config.delta_fool)
    l_bound = learner_fooling_bound(phi, config.N, config.M)
    acc_sigma = math.sqrt(acc * (1 - acc) / R) if acc is not None else None
    return FoolingReport(
        acceptance_empirical=acc,
        acceptance_sigma=acc_sigma,
        acceptance_true=acc_true,
        acceptance_bound=a_bound,
        advantage_empirical=adv,
        advantage_sigma=adv_sigma,
        advantage_bound=l_bound,
        phi=phi,
        collision_exact=collision_probability(config.N, config.M),
        collision_bound=collision_bound(config.N, config.M),
        acceptance_bound_vacuous=a_bound <= 0.0,
        advantage_bound_vacuous=l_bound >= 0.5,
        config_echo=asdict(config),
    )


def desk_gaussian_tester(n: int, N: int, eps: float = 0.5, moment_tol: float = 1.0) -> Callable[[SampleStream], Verdict]:
    """The Gaussian moment tester squeezed into a budget of ``N`` samples:
    ``N//2`` for the tail check, the rest for degree-2 moment matching."""
    params = derive_params(eps, n, delta=2, tail_samples=N // 2, max_n2=N - N // 2, moment_tol=moment_tol)

    def tester(stream: SampleStream) -> Verdict:
        return run_tester(stream, params)
    return tester


def desk_l1_learner(n: int, N: int, eps: float = 0.5, degree: int = 2) -> Callable[[SampleStream], Callable]:
    """Degree-``degree`` L1 regression on at most ``N`` samples."""
    params = derive_params(eps, n, d=degree, max_n1=N, max_n2=N)

    def learner(stream: SampleStream):
        return run_learner(stream, params)[0]
    return learner
