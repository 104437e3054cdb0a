"""Tester-learner pairs on the Boolean cube {-1, +1}^n.

The tester is a k-wise independence check based on the largest empirical
character bias ``|E[prod_{i in S} x_i]|`` over nonempty ``|S| <= k``. The
halfspace learner is L1 regression over multilinear monomials; the
decision-list learner enumerates all length-k decision lists.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations, permutations, product
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .data import SampleStream
from .l1fit import RegressionProblem, best_threshold, fit_l1
from .polycore import enumerate_monomials
from .reports import LearnReport, Verdict

__all__ = [
    "CubeParams",
    "derive_cube_params",
    "derive_dl_params",
    "kwise_bias_table",
    "kwise_sample_count",
    "bias_threshold",
    "run_kwise_tester",
    "run_cube_halfspace_learner",
    "DecisionList",
    "eval_decision_list",
    "run_decision_list_learner",
    "run_decision_list_tester",
    "iter_decision_lists",
    "is_regular",
    "MAX_CUBE_N",
]

MAX_CUBE_N = 24


@dataclass(frozen=True)
class CubeParams:
    """Parameters of a cube pair.

    ``k`` is the independence order checked by the tester, ``degree`` the
    learner's monomial degree, ``tv_tol`` the bias gap the tester must
    resolve, ``fail_prob`` its error probability on either side.
    """

    eps: float
    n: int
    k: int
    degree: int
    tv_tol: float
    tester_samples: int
    learner_samples: int
    fail_prob: float = 0.1
    formula: dict = field(default_factory=dict)
    deviations: tuple = ()

    def to_json(self) -> dict:
        out = asdict(self)
        out["deviations"] = list(self.deviations)
        return out


def _num_subsets(n: int, k: int) -> int:
    return sum(math.comb(n, j) for j in range(1, k + 1))


def kwise_sample_count(n: int, k: int, tv_tol: float, fail_prob: float = 0.1) -> int:
    """Samples making the bias threshold equal ``tv_tol / 2``.

    With ``K`` nonempty subsets, Hoeffding plus a union bound puts every bias
    of a k-wise uniform source within ``sqrt(2 ln(2K/delta) / m)`` of 0 with
    probability ``1 - delta``; solving for the threshold ``tv_tol/2`` gives
    ``m = 8 ln(2K/delta) / tv_tol^2``.
    """
    K = _num_subsets(n, k)
    return math.ceil(8 * math.log(2 * K / fail_prob) / tv_tol**2)


def bias_threshold(n: int, k: int, m: int, fail_prob: float = 0.1) -> float:
    K = _num_subsets(n, k)
    return math.sqrt(2 * math.log(2 * K / fail_prob) / m)


def derive_cube_params(
    eps: float,
    n: int,
    *,
    k: Optional[int] = None,
    degree: Optional[int] = None,
    max_degree: Optional[int] = None,
    tv_tol: float = 0.1,
    fail_prob: float = 0.1,
    learner_samples: Optional[int] = None,
    max_learner_samples: int = 200_000,
) -> CubeParams:
    """Halfspace-pair parameters.

    Formula values ``k = ceil(ln^4(1/eps) / (50 eps^4))`` and
    ``degree = ceil(20 ln^2(1/eps) / eps^4)``. The learner's sample count is
    ``ceil(N_features ln(1/fail_prob) / eps^2)`` (capped). Overrides and caps
    are listed in ``deviations``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not 1 <= n <= MAX_CUBE_N:
        raise ValueError(f"n must lie in [1, {MAX_CUBE_N}]")
    L = math.log(1 / eps)
    k_formula = max(1, math.ceil(L**4 / (50 * eps**4)))
    deg_formula = max(1, math.ceil(20 * L**2 / eps**4))
    devs = []
    k_eff = k_formula
    if k is not None:
        if k < 1:
            raise ValueError("k must be positive")
        if k != k_formula:
            devs.append(f"k overridden: {k} (formula {k_formula})")
        k_eff = int(k)
    if k_eff > n:
        devs.append(f"k clipped to n={n} (was {k_eff})")
        k_eff = n
    deg_eff = deg_formula
    if degree is not None:
        if degree < 1:
            raise ValueError("degree must be positive")
        if degree != deg_formula:
            devs.append(f"degree overridden: {degree} (formula {deg_formula})")
        deg_eff = int(degree)
    if max_degree is not None and deg_eff > max_degree:
        devs.append(f"degree capped at {max_degree} (formula {deg_formula})")
        deg_eff = int(max_degree)
    deg_eff = min(deg_eff, n)  # multilinear monomials stop at degree n
    n_feat = sum(math.comb(n, j) for j in range(deg_eff + 1))
    ls_formula = math.ceil(n_feat * math.log(1 / fail_prob) / eps**2)
    ls_eff = ls_formula
    if learner_samples is not None:
        if learner_samples != ls_formula:
            devs.append(f"learner_samples overridden: {learner_samples} (formula {ls_formula})")
        ls_eff = int(learner_samples)
    elif ls_eff > max_learner_samples:
        devs.append(f"learner_samples capped at {max_learner_samples} (formula {ls_formula})")
        ls_eff = max_learner_samples
    return CubeParams(
        eps=float(eps), n=int(n), k=k_eff, degree=deg_eff, tv_tol=float(tv_tol),
        tester_samples=kwise_sample_count(n, k_eff, tv_tol, fail_prob), learner_samples=ls_eff,
        fail_prob=float(fail_prob),
        formula={"k": k_formula, "degree": deg_formula, "learner_samples": ls_formula},
        deviations=tuple(devs),
    )


def derive_dl_params(eps: float, n: int, *, tv_tol: float = 0.1, fail_prob: float = 0.1, max_k: int = 4) -> CubeParams:
    """Decision-list pair: ``k = ceil(log2(1/eps))`` and
    ``ceil(100 k^3 log2(n) / eps^2)`` learner samples."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    k = max(1, math.ceil(math.log2(1 / eps) - 1e-12))
    if k > max_k:
        raise ValueError(f"k = {k} exceeds the enumeration limit {max_k}")
    if k > n:
        raise ValueError("k exceeds n")
    m = math.ceil(100 / eps**2 * k**3 * max(math.log2(n), 1.0))
    return CubeParams(
        eps=float(eps), n=int(n), k=k, degree=k, tv_tol=float(tv_tol),
        tester_samples=kwise_sample_count(n, k, tv_tol, fail_prob), learner_samples=m,
        fail_prob=float(fail_prob), formula={"k": k, "learner_samples": m},
    )


# ---------------------------------------------------------------------------
# k-wise independence tester
# ---------------------------------------------------------------------------


def kwise_bias_table(X, k: int) -> Dict[Tuple[int, ...], float]:
    """Empirical ``E[prod_{i in S} x_i]`` for every nonempty ``|S| <= k``.

    Keys are 0-based coordinate tuples in increasing order, enumerated by
    size and then lexicographically.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if k < 1:
        raise ValueError("k must be positive")
    out = {}
    for size in range(1, k + 1):
        for S in combinations(range(n), size):
            out[S] = float(np.mean(np.prod(X[:, S], axis=1)))
    return out


def run_kwise_tester(stream: SampleStream, params: CubeParams) -> Verdict:
    """Accept iff every character bias up to order ``k`` is at most the
    Hoeffding threshold. Labels are never read."""
    start = stream.samples_used
    X = stream.examples(params.tester_samples)
    table = kwise_bias_table(X, params.k)
    tau = bias_threshold(params.n, params.k, X.shape[0], params.fail_prob)
    worst = max(table, key=lambda S: (abs(table[S]), -len(S)))
    gap = abs(table[worst])
    key = ",".join(str(j + 1) for j in worst)
    eff = params.to_json()
    eff["bias_threshold"] = tau
    used = stream.samples_used - start
    if gap > tau:
        return Verdict(False, "moments", key, gap, used, eff, params.deviations)
    return Verdict(True, "ok", key, gap, used, eff, params.deviations)


# ---------------------------------------------------------------------------
# halfspace learner
# ---------------------------------------------------------------------------


def run_cube_halfspace_learner(stream: SampleStream, params: CubeParams, method: str = "highs"):
    """L1 regression over all multilinear monomials of degree <= ``params.degree``.

    Returns ``(FittedModel, LearnReport)``; the model predicts through
    :func:`tlkit.l1fit.predict`.
    """
    feats = tuple(enumerate_monomials(params.n, params.degree, multilinear=True))
    data = stream.labeled(params.learner_samples)
    model = fit_l1(RegressionProblem.from_dataset(feats, data, params.degree), method)
    model = best_threshold(model, data)
    rep = LearnReport(
        samples_used=data.size, samples_kept=data.size, discard_fraction=0.0,
        degree=params.degree, n_features=len(feats), empirical_l1=model.empirical_l1,
        empirical_01=model.empirical_01, threshold=model.threshold,
        effective_params=params.to_json(), deviations=params.deviations,
    )
    return model, rep


# ---------------------------------------------------------------------------
# decision lists
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecisionList:
    """``if x[order[0]] == bits[0]: return values[0]; ...; else default``.

    Coordinates are 0-based.
    """

    order: Tuple[int, ...] = ()
    bits: Tuple[int, ...] = ()
    values: Tuple[int, ...] = ()
    default: int = -1

    def __post_init__(self):
        for name in ("order", "bits", "values"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if not len(self.order) == len(self.bits) == len(self.values):
            raise ValueError("order, bits and values must have equal length")
        if len(set(self.order)) != len(self.order):
            raise ValueError("coordinates must be distinct")
        if any(b not in (-1, 1) for b in self.bits + self.values) or self.default not in (-1, 1):
            raise ValueError("bits, values and default must be -1 or +1")

    def __call__(self, X) -> np.ndarray:
        return eval_decision_list(self, X)

    def to_json(self) -> dict:
        return {"order": list(self.order), "bits": list(self.bits), "values": list(self.values), "default": self.default}

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionList":
        return cls(tuple(obj["order"]), tuple(obj["bits"]), tuple(obj["values"]), int(obj.get("default", -1)))


def eval_decision_list(dl: DecisionList, X):
    """Value of the first firing rule, else the default. Scalar for one example."""
    arr = np.asarray(X, dtype=float)
    single = arr.ndim == 1
    X2 = np.atleast_2d(arr)
    out = np.full(X2.shape[0], float(dl.default))
    open_ = np.ones(X2.shape[0], dtype=bool)
    for j, b, v in zip(dl.order, dl.bits, dl.values):
        hit = open_ & (X2[:, j] == b)
        out[hit] = v
        open_ &= ~hit
    return int(out[0]) if single else out


def _colex_subsets(n: int, k: int):
    # colex: compare largest element first
    return sorted(combinations(range(n), k), key=lambda S: S[::-1])


def iter_decision_lists(n: int, k: int):
    """All length-k lists in tie-breaking order: subsets (colex), orderings
    (lexicographic), bits, then values."""
    for S in _colex_subsets(n, k):
        for order in permutations(S):
            for bits in product((-1, 1), repeat=k):
                for values in product((-1, 1), repeat=k):
                    yield DecisionList(order, bits, values)


def run_decision_list_learner(stream: SampleStream, eps: float, n: Optional[int] = None, params: Optional[CubeParams] = None):
    """Empirical-risk minimization over all length-k decision lists.

    For a fixed ordered subset and bit pattern the error separates over the
    firing buckets, so the best values are found bucket by bucket; within a
    bucket a tie goes to -1, which reproduces the first minimizer in the
    enumeration order of :func:`iter_decision_lists`. Across patterns only a
    strictly smaller error replaces the incumbent.
    """
    if params is None:
        if n is None:
            raise ValueError("give n or params")
        params = derive_dl_params(eps, n)
    n, k = params.n, params.k
    data = stream.labeled(params.learner_samples)
    X, y = data.X, data.y
    m = len(y)
    pos = y > 0
    best_err, best = None, None
    default_val = -1
    for S in _colex_subsets(n, k):
        for order in permutations(S):
            cols = X[:, order]
            for bits in product((-1, 1), repeat=k):
                match = cols == np.asarray(bits, dtype=float)
                # bucket = first firing position, k when nothing fires
                fired = np.where(match.any(axis=1), match.argmax(axis=1), k)
                n_pos = np.bincount(fired[pos], minlength=k + 1)
                n_neg = np.bincount(fired[~pos], minlength=k + 1)
                values = tuple(1 if n_neg[b] < n_pos[b] else -1 for b in range(k))
                err = sum(min(n_pos[b], n_neg[b]) for b in range(k))
                err += n_pos[k] if default_val == -1 else n_neg[k]
                if best_err is None or err < best_err:
                    best_err, best = err, DecisionList(order, bits, values, default_val)
    rep = LearnReport(
        samples_used=m, samples_kept=m, discard_fraction=0.0, degree=k,
        n_features=math.comb(n, k) * math.factorial(k) * 4**k, empirical_l1=None,
        empirical_01=best_err / m, threshold=None, effective_params=params.to_json(),
        deviations=params.deviations,
    )
    return best, rep


def run_decision_list_tester(stream: SampleStream, eps: float, n: Optional[int] = None, params: Optional[CubeParams] = None) -> Verdict:
    """k-wise independence tester at ``k = ceil(log2(1/eps))``."""
    if params is None:
        if n is None:
            raise ValueError("give n or params")
        params = derive_dl_params(eps, n)
    return run_kwise_tester(stream, params)


def is_regular(v: Sequence[float], eps: float) -> bool:
    """``max_i |v_i| <= eps * ||v||_2``."""
    v = np.asarray(v, dtype=float)
    return bool(np.max(np.abs(v)) <= eps * np.linalg.norm(v))
