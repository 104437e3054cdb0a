"""Multi-index moments: analytic references, empirical tables and comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np
from scipy import integrate

from .polycore import MultiIndex, design_matrix, enumerate_monomials

__all__ = [
    "MomentTable",
    "TableComparison",
    "gaussian_moment",
    "double_factorial",
    "truncated_gaussian_moment_1d",
    "truncation_gap_bound",
    "gaussian_table",
    "truncated_gaussian_table",
    "uniform_cube_table",
    "empirical_moments",
    "compare_tables",
    "directional_moment",
    "default_moment_tol",
]

MAX_DOUBLE_FACTORIAL_ARG = 33
_CHUNK = 1 << 15


def double_factorial(k: int) -> int:
    """``k!!`` by integer recurrence; ``(-1)!! = 0!! = 1``."""
    if k > MAX_DOUBLE_FACTORIAL_ARG:
        raise OverflowError(f"double factorial argument {k} exceeds {MAX_DOUBLE_FACTORIAL_ARG}")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def gaussian_moment(alpha: MultiIndex) -> float:
    """``E[prod_j x_j^alpha_j]`` under the standard Gaussian.

    Equals ``prod_j (alpha_j - 1)!!`` when every exponent is even and 0
    otherwise.
    """
    out = 1
    for _, e in alpha.exps:
        if e % 2:
            return 0.0
        out *= double_factorial(e - 1)
    return float(out)


def truncated_gaussian_moment_1d(d: int, t: float, epsrel: float = 1e-10) -> float:
    """``E[x^d | |x| <= t]`` for a standard normal ``x``.

    Computed with adaptive quadrature on ``[0, t]`` (the integrand is even or
    odd) and normalized by the truncated mass.
    """
    if d < 0 or d > 64:
        raise ValueError("moment degree must lie in [0, 64]")
    if t < 1:
        raise ValueError("truncation half-width must be >= 1")
    if d % 2:
        return 0.0
    num, _ = integrate.quad(lambda x: x**d * math.exp(-0.5 * x * x), 0.0, t, epsrel=epsrel, epsabs=0.0, limit=200)
    den, _ = integrate.quad(lambda x: math.exp(-0.5 * x * x), 0.0, t, epsrel=epsrel, epsabs=0.0, limit=200)
    return num / den


def truncation_gap_bound(degree: int, t: float) -> float:
    """Upper bound ``2^D D^((D+2)/2) t^D exp(-t^2/2)`` on how far a degree-D
    moment can move when a Gaussian is truncated to the box ``[-t, t]^n``
    (valid for ``t >= 2 sqrt(D) + 1``)."""
    D = degree
    return 2.0**D * D ** ((D + 2) / 2) * t**D * math.exp(-0.5 * t * t)


def default_moment_tol(n: int, max_degree: int) -> float:
    """Moment-matching tolerance ``1 / (2 n^Delta)``."""
    # log space: huge Delta underflows to 0 instead of raising
    return math.exp(-math.log(2.0) - max_degree * math.log(n))


@dataclass(frozen=True)
class MomentTable:
    """Moments of all monomials of degree 1..``max_degree`` in ``n`` variables.

    ``entries`` is keyed by :class:`MultiIndex`. ``sample_count`` is 0 for
    analytic tables; ``truncation`` is the box half-width when one applies.
    """

    n: int
    max_degree: int
    entries: Mapping[MultiIndex, float]
    sample_count: int = 0
    truncation: Optional[float] = None

    def __post_init__(self):
        if self.max_degree < 1:
            raise ValueError("max_degree must be positive")
        for mi in self.entries:
            if not 1 <= mi.degree <= self.max_degree:
                raise ValueError(f"{mi!r} has degree outside [1, {self.max_degree}]")
        object.__setattr__(self, "entries", dict(self.entries))

    def __getitem__(self, mi: MultiIndex) -> float:
        return self.entries[mi]

    def ordered(self) -> list[tuple[MultiIndex, float]]:
        return sorted(self.entries.items(), key=lambda kv: kv[0].grlex_key())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "max_degree": self.max_degree,
            "sample_count": self.sample_count,
            "truncation": self.truncation,
            "entries": {mi.key(self.n): v for mi, v in self.ordered()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MomentTable":
        return cls(
            n=int(obj["n"]),
            max_degree=int(obj["max_degree"]),
            entries={MultiIndex.from_key(k): float(v) for k, v in obj["entries"].items()},
            sample_count=int(obj.get("sample_count", 0)),
            truncation=obj.get("truncation"),
        )


def _indices(n: int, max_degree: int) -> list[MultiIndex]:
    return list(enumerate_monomials(n, max_degree, min_degree=1))


def gaussian_table(n: int, max_degree: int) -> MomentTable:
    return MomentTable(n, max_degree, {mi: gaussian_moment(mi) for mi in _indices(n, max_degree)})


def truncated_gaussian_table(n: int, max_degree: int, t: float) -> MomentTable:
    """Moments of ``N(0, I_n)`` conditioned on the box ``[-t, t]^n``.

    The conditioned law is still a product measure, so each entry is a
    product of one-dimensional truncated moments.
    """
    one_d = [truncated_gaussian_moment_1d(k, t) for k in range(max_degree + 1)]
    entries = {}
    for mi in _indices(n, max_degree):
        entries[mi] = math.prod(one_d[e] for _, e in mi.exps)
    return MomentTable(n, max_degree, entries, truncation=float(t))


def uniform_cube_table(n: int, max_degree: int) -> MomentTable:
    """Uniform ``{-1, +1}^n``: 1 when every exponent is even, else 0."""
    entries = {mi: float(all(e % 2 == 0 for _, e in mi.exps)) for mi in _indices(n, max_degree)}
    return MomentTable(n, max_degree, entries)


def empirical_moments(X, max_degree: int, truncation: Optional[float] = None) -> MomentTable:
    """Sample means of every monomial of degree 1..``max_degree``.

    Rows are processed in fixed-size chunks; within a chunk each column is
    reduced with numpy's pairwise summation and chunk totals are combined with
    ``math.fsum``. The result depends only on the input order through
    rounding at the 1e-16 relative level.
    """
    X = getattr(X, "X", X)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    if m == 0:
        raise ValueError("cannot compute moments of an empty sample")
    if not np.all(np.isfinite(X)):
        raise ValueError("examples contain non-finite coordinates")
    idx = _indices(n, max_degree)
    partial: list[list[float]] = [[] for _ in idx]
    for start in range(0, m, _CHUNK):
        F = design_matrix(idx, X[start : start + _CHUNK])
        sums = np.sum(np.ascontiguousarray(F.T), axis=1)
        for j, s in enumerate(sums):
            partial[j].append(float(s))
    entries = {mi: math.fsum(p) / m for mi, p in zip(idx, partial)}
    return MomentTable(n, max_degree, entries, sample_count=m, truncation=truncation)


@dataclass(frozen=True)
class TableComparison:
    """Outcome of :func:`compare_tables`; ``worst_index`` is ``None`` only for
    tables without common entries."""

    passed: bool
    worst_index: Optional[MultiIndex]
    gap: float
    tol: float
    gaps: Dict[MultiIndex, float] = field(default_factory=dict, repr=False)


def compare_tables(observed: MomentTable, reference: MomentTable, tol: float) -> TableComparison:
    """Pass iff every shared entry differs by at most ``tol``.

    The worst violator is the entry with the largest absolute gap; ties go to
    the earliest index in graded lexicographic order.
    """
    if observed.max_degree != reference.max_degree:
        raise ValueError(f"degree mismatch: {observed.max_degree} vs {reference.max_degree}")
    if observed.n != reference.n:
        raise ValueError(f"dimension mismatch: {observed.n} vs {reference.n}")
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    worst, worst_gap = None, -1.0
    gaps = {}
    for mi, v in observed.ordered():
        if mi not in reference.entries:
            continue
        g = abs(v - reference.entries[mi])
        gaps[mi] = g
        if g > worst_gap:
            worst, worst_gap = mi, g
    worst_gap = max(worst_gap, 0.0)
    return TableComparison(worst_gap <= tol, worst, worst_gap, tol, gaps)


def directional_moment(table: MomentTable, v, degree: int) -> float:
    """``E[(v . x)^degree]`` implied by the table through multinomial expansion."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != table.n:
        raise ValueError("direction has the wrong dimension")
    if not 1 <= degree <= table.max_degree:
        raise ValueError("degree outside the table")
    total = []
    for mi, m in table.entries.items():
        if mi.degree != degree:
            continue
        coef = math.factorial(degree)
        term = 1.0
        for j, e in mi.exps:
            coef //= math.factorial(e)
            term *= v[j] ** e
        total.append(coef * term * m)
    return math.fsum(total)
