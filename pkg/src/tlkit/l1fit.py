"""L1 polynomial regression and sign-with-offset rounding.

The regression ``min_c mean_i |sum_j c_j g_j(x_i) - y_i|`` is a linear
program. Two exact solvers are provided:

* ``"highs"`` solves the dual ``max y.u  s.t.  F^T u = 0, -1 <= u <= 1``
  with HiGHS and reads the primal coefficients off the equality duals. The
  dual has one variable per sample and one row per feature, which is far
  smaller than the primal with its per-sample slack pairs.
* ``"simplex"`` is a dense tableau simplex on the primal
  ``F (c+ - c-) + u - v = y`` with Bland's pivoting rule. It is slow but
  fully deterministic and serves as the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .data import LabeledDataset
from .polycore import MonomialPoly, MultiIndex, design_matrix

__all__ = [
    "RegressionProblem",
    "FittedModel",
    "ProblemTooLarge",
    "fit_l1",
    "best_threshold",
    "predict",
    "zero_one_error",
    "MAX_FEATURES",
]

MAX_FEATURES = 50_000
_SIMPLEX_MAX_CELLS = 4_000_000


class ProblemTooLarge(ValueError):
    """Feature matrix exceeds the supported size."""


@dataclass(frozen=True)
class RegressionProblem:
    """Features ``g_1..g_N`` (monomials) together with training data.

    Targets are usually +-1 labels but any real values are accepted, which is
    handy for exact-fit checks.
    """

    features: tuple
    X: np.ndarray
    y: np.ndarray
    degree: int

    def __post_init__(self):
        feats = tuple(self.features)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError("examples and targets differ in length")
        if y.size < 1:
            raise ValueError("need at least one sample")
        if not feats:
            raise ValueError("need at least one feature")
        for f in feats:
            if f.degree > self.degree:
                raise ValueError(f"feature {f!r} exceeds degree {self.degree}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_dataset(cls, features: Sequence[MultiIndex], data: LabeledDataset, degree: int) -> "RegressionProblem":
        return cls(tuple(features), data.X, data.y, degree)

    @property
    def n(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FittedModel:
    """Polynomial ``P`` plus rounding offset; predicts ``sign(P(x) - threshold)``.

    Before :func:`best_threshold` the threshold is ``None`` and
    ``empirical_01`` refers to the offset 0.
    """

    poly: MonomialPoly
    n: int
    empirical_l1: float
    empirical_01: float
    threshold: Optional[float] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __call__(self, X) -> np.ndarray:
        return predict(self, X)

    def to_json(self) -> dict:
        return {
            "terms": self.poly.to_json(self.n),
            "threshold": self.threshold,
            "empirical_l1": self.empirical_l1,
            "empirical_01": self.empirical_01,
            "n": self.n,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FittedModel":
        return cls(
            poly=MonomialPoly.from_json(obj["terms"]),
            n=int(obj["n"]),
            empirical_l1=float(obj["empirical_l1"]),
            empirical_01=float(obj["empirical_01"]),
            threshold=None if obj.get("threshold") is None else float(obj["threshold"]),
        )


def _sign(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0, -1.0)


def zero_one_error(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(pred != y)) if len(y) else 0.0


def fit_l1(problem: RegressionProblem, method: str = "highs") -> FittedModel:
    """Minimize the empirical L1 loss over the span of the features."""
    if method not in ("highs", "simplex"):
        raise ValueError(f"unknown method {method!r}")
    p = len(problem.features)
    if p > MAX_FEATURES:
        raise ProblemTooLarge(f"{p} features exceeds the limit of {MAX_FEATURES}")
    F = design_matrix(problem.features, problem.X)
    y = problem.y
    m = y.size
    const = MultiIndex()

    if np.all(y == y[0]) and const in problem.features:
        # every label equal: the constant fits exactly
        coef = np.zeros(p)
        coef[problem.features.index(const)] = y[0]
        diag = {"method": "constant", "duality_gap": 0.0}
    elif method == "highs":
        coef, diag = _solve_dual_highs(F, y)
    else:
        if m * (2 * p + 2 * m) > _SIMPLEX_MAX_CELLS:
            raise ProblemTooLarge("problem too large for the reference simplex")
        coef = _solve_bland_simplex(F, y)
        diag = {"method": "simplex"}

    resid = F @ coef - y
    l1 = math.fsum(np.abs(resid)) / m
    poly = MonomialPoly.from_features(problem.features, coef)
    err = zero_one_error(_sign(F @ coef), y)
    diag["coefficients"] = [float(c) for c in coef]
    return FittedModel(poly, problem.n, l1, err, None, diag)


def _solve_dual_highs(F: np.ndarray, y: np.ndarray):
    m, p = F.shape
    res = linprog(
        -y,
        A_eq=F.T,
        b_eq=np.zeros(p),
        bounds=(-1.0, 1.0),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    coef = -np.asarray(res.eqlin.marginals, dtype=float)
    dual_obj = -float(res.fun)
    primal_obj = math.fsum(np.abs(F @ coef - y))
    gap = (primal_obj - dual_obj) / m
    if gap > 1e-7:
        # degenerate dual: fall back to the primal LP for the coefficients
        coef = _solve_primal_highs(F, y)
        primal_obj = math.fsum(np.abs(F @ coef - y))
        gap = (primal_obj - dual_obj) / m
    return coef, {"method": "highs-dual", "duality_gap": gap}


def _solve_primal_highs(F: np.ndarray, y: np.ndarray) -> np.ndarray:
    m, p = F.shape
    # variables: c (free), s (m slacks); minimize sum s with |F c - y| <= s
    I = sparse.identity(m, format="csr")
    Fs = sparse.csr_matrix(F)
    A = sparse.vstack([sparse.hstack([Fs, -I]), sparse.hstack([-Fs, -I])], format="csr")
    b = np.concatenate([y, -y])
    cost = np.concatenate([np.zeros(p), np.ones(m)])
    bounds = [(None, None)] * p + [(0, None)] * m
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return np.asarray(res.x[:p])


def _solve_bland_simplex(F: np.ndarray, y: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """Primal simplex on ``F c+ - F c- + u - v = y`` with Bland's rule.

    Starting basis: ``u_i`` when ``y_i >= 0`` and ``v_i`` otherwise (after
    negating that row), which is feasible, so no phase one is needed.
    """
    m, p = F.shape
    nv = 2 * p + 2 * m
    A = np.hstack([F, -F, np.eye(m), -np.eye(m)])
    b = y.astype(float).copy()
    cost = np.concatenate([np.zeros(2 * p), np.ones(2 * m)])
    basis = []
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            basis.append(2 * p + m + i)
        else:
            basis.append(2 * p + i)
    T = np.hstack([A, b[:, None]])
    max_iter = 50 * nv
    for _ in range(max_iter):
        cb = cost[basis]
        reduced = cost - cb @ T[:, :nv]
        entering = next((j for j in range(nv) if reduced[j] < -tol), None)
        if entering is None:
            break
        col = T[:, entering]
        best_ratio, leave = math.inf, None
        for i in range(m):
            if col[i] > tol:
                r = T[i, -1] / col[i]
                if r < best_ratio - tol or (abs(r - best_ratio) <= tol and leave is not None and basis[i] < basis[leave]):
                    best_ratio, leave = r, i
        if leave is None:
            raise RuntimeError("L1 regression LP reported unbounded, which cannot happen")
        T[leave] /= T[leave, entering]
        for i in range(m):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
    else:
        raise RuntimeError("simplex did not converge")
    x = np.zeros(nv)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    return x[:p] - x[p : 2 * p]


def best_threshold(model: FittedModel, samples: LabeledDataset | tuple) -> FittedModel:
    """Choose the offset minimizing the 0/1 error of ``sign(P(x) - tau)``.

    Candidates are the values ``P(x_i)``, midpoints between consecutive
    distinct values, and sentinels one unit below the minimum (always +1)
    and above the maximum (always -1). Ties go to the smallest offset.
    """
    X, y = (samples.X, samples.y) if isinstance(samples, LabeledDataset) else samples
    y = np.asarray(y, dtype=float)
    P = model.poly(X)
    vals = np.unique(P)
    cands = np.concatenate([[vals[0] - 1.0], vals, (vals[:-1] + vals[1:]) / 2.0, [vals[-1] + 1.0]])
    cands = np.unique(cands)
    order = np.argsort(P, kind="stable")
    Ps, ys = P[order], y[order]
    pos_below = np.concatenate([[0], np.cumsum(ys > 0)])  # +1 labels among the first k
    neg_total = int(np.sum(ys < 0))
    neg_below = np.concatenate([[0], np.cumsum(ys < 0)])
    k = np.searchsorted(Ps, cands, side="left")  # points with P < tau
    errors = pos_below[k] + (neg_total - neg_below[k])
    best = int(np.argmin(errors))  # first minimum = smallest tau
    tau = float(cands[best])
    return replace(model, threshold=tau, empirical_01=float(errors[best]) / len(y))


def predict(model: FittedModel, X):
    """``sign(P(x) - tau)`` with ``sign(0) = +1``; scalar in, scalar out."""
    if model.threshold is None:
        raise ValueError("model has no threshold; call best_threshold first")
    arr = np.asarray(X, dtype=float)
    single = arr.ndim == 1
    out = _sign(model.poly(np.atleast_2d(arr)) - model.threshold)
    return int(out[0]) if single else out
