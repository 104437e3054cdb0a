"""Chebyshev projections and sparse multivariate polynomials.

The one-dimensional machinery approximates a bounded piecewise-linear target
``f`` on a window ``[-w, w]`` by the truncated Chebyshev expansion
``sum_k a_k T_k(x / w)``; the multivariate side expands such a univariate
polynomial along a direction ``v`` into monomials of ``x``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement
from typing import Dict, Iterable, Iterator, Mapping, Sequence, Tuple

import numpy as np

__all__ = [
    "ChebSeries",
    "MultiIndex",
    "MonomialPoly",
    "Trapezoid",
    "Ramp",
    "cheb_eval",
    "project",
    "series_eval",
    "expand_to_monomials_1d",
    "power_eval",
    "compose_direction",
    "sign_approximator_1d",
    "build_sign_approximator",
    "enumerate_monomials",
    "design_matrix",
    "coefficient_bound",
    "moment_tail_bound",
    "outside_window_bound",
    "DEFAULT_MIN_NODES",
    "MAX_EXPANSION_DEGREE",
    "MAX_EXPANSION_TERMS",
]

# Gauss-Chebyshev node floor; aliasing error for kinked targets decays ~ m^-2.
DEFAULT_MIN_NODES = 1 << 16
MAX_EXPANSION_DEGREE = 64
MAX_EXPANSION_TERMS = 10_000_000


# ---------------------------------------------------------------------------
# Chebyshev polynomials and windowed projections
# ---------------------------------------------------------------------------


def cheb_eval(k: int, x):
    """Evaluate ``T_k(x)`` with the three-term recurrence.

    Works for scalars or arrays. Arguments outside ``[-1, 1]`` are not
    clamped; the recurrence is simply continued there.
    """
    if k < 0:
        raise ValueError("Chebyshev degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for _ in range(k - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class ChebSeries:
    """Degree-``d`` Chebyshev expansion on the window ``[-w, w]``."""

    window_halfwidth: float
    coeffs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ValueError("a Chebyshev series needs at least one coefficient")
        if not self.window_halfwidth >= 1.0:
            raise ValueError("window half-width must be >= 1")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return series_eval(self, x)


@dataclass(frozen=True)
class Trapezoid:
    """Trapezoid bump: 1 on ``[y, y+eps]``, linear ramps of width ``eps`` on
    either side, 0 outside ``[y-eps, y+2eps]``."""

    y: float
    eps: float
    kind: str = field(default="trapezoid", init=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        up = (z - (self.y - self.eps)) / self.eps
        down = ((self.y + 2.0 * self.eps) - z) / self.eps
        return np.clip(np.minimum(up, down), 0.0, 1.0)

    @property
    def derivative_variation(self) -> float:
        # four jumps of size 1/eps in g'
        return 4.0 / self.eps


@dataclass(frozen=True)
class Ramp:
    """Clipped ramp ``clip((x - theta)/eps, -1, 1)``, a Lipschitz stand-in
    for ``sign(x - theta)``."""

    theta: float
    eps: float
    kind: str = field(default="ramp", init=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.theta) / self.eps, -1.0, 1.0)

    @property
    def derivative_variation(self) -> float:
        return 2.0 / self.eps


def project(target, w: float, d: int, quadrature_points: int | None = None) -> ChebSeries:
    """Degree-``d`` Chebyshev projection of ``y -> target(w*y)``.

    The coefficients

        a_k = (1 + [k>0]) / pi * int_{-1}^{1} f(wy) T_k(y) / sqrt(1-y^2) dy

    are computed with ``m``-point Gauss-Chebyshev quadrature. In the angle
    variable the rule is the midpoint rule, so each coefficient is an
    ordinary (pairwise) sum of ``f(w cos th_j) cos(k th_j)``.

    Parameters
    ----------
    target : callable
        Vectorized function bounded in ``[-1, 1]``.
    w : float
        Window half-width, ``w >= 1``.
    d : int
        Truncation degree.
    quadrature_points : int, optional
        Node count ``m``; must be at least ``8(d+1)``. Defaults to
        ``max(8(d+1), DEFAULT_MIN_NODES)``.
    """
    if not w >= 1.0:
        raise ValueError(f"window half-width must be >= 1, got {w}")
    if d < 0:
        raise ValueError(f"degree must be nonnegative, got {d}")
    floor = 8 * (d + 1)
    m = max(floor, DEFAULT_MIN_NODES) if quadrature_points is None else int(quadrature_points)
    if m < floor:
        raise ValueError(f"need at least {floor} quadrature points for degree {d}, got {m}")
    theta = (np.arange(m) + 0.5) * (np.pi / m)
    fv = np.asarray(target(w * np.cos(theta)), dtype=float)
    coeffs = np.empty(d + 1)
    for k in range(d + 1):
        coeffs[k] = np.sum(fv * np.cos(k * theta)) * (2.0 / m)
    coeffs[0] *= 0.5
    return ChebSeries(float(w), tuple(coeffs))


def series_eval(s: ChebSeries, x):
    """Evaluate ``sum_k a_k T_k(x / w)`` by running the recurrence once."""
    x = np.asarray(x, dtype=float)
    u = x / s.window_halfwidth
    a = s.coeffs
    total = np.full_like(u, a[0])
    if len(a) > 1:
        prev, cur = np.ones_like(u), u.copy()
        total = total + a[1] * cur
        for ak in a[2:]:
            prev, cur = cur, 2.0 * u * cur - prev
            total = total + ak * cur
    return total if total.ndim else float(total)


def _cheb_power_triangle(d: int) -> list[list[int]]:
    """Integer power-basis coefficients of ``T_0 .. T_d`` (row k = T_k)."""
    rows = [[1], [0, 1]]
    for k in range(2, d + 1):
        nxt = [0] * (k + 1)
        for i, c in enumerate(rows[k - 1]):
            nxt[i + 1] += 2 * c
        for i, c in enumerate(rows[k - 2]):
            nxt[i] -= c
        rows.append(nxt)
    return rows[: d + 1]


def expand_to_monomials_1d(s: ChebSeries, exact: bool = False) -> list:
    """Rewrite a Chebyshev series in the power basis of ``x``.

    Returns ``c_0 .. c_d`` with ``sum_i c_i x^i == sum_k a_k T_k(x/w)``. The
    Chebyshev triangle is built in exact integers; each ``c_i`` is a
    correctly-rounded sum of the float products.

    With ``exact=True`` the coefficients are :class:`fractions.Fraction`
    values equal to the power-basis form of the stored float series, with
    no rounding at all. The float form loses about ``(1 + sqrt 2)^d`` ulps
    to cancellation when evaluated on the window, so it is only usable up to
    ``MAX_EXPANSION_DEGREE``; the exact form has no such limit.
    """
    d = s.degree
    if d > MAX_EXPANSION_DEGREE and not exact:
        raise OverflowError(f"power-basis expansion limited to degree {MAX_EXPANSION_DEGREE}, got {d}")
    tri = _cheb_power_triangle(d)
    w = s.window_halfwidth
    out = []
    if exact:
        a = [Fraction(c) for c in s.coeffs]
        wf = Fraction(w)
        for i in range(d + 1):
            out.append(sum((a[k] * tri[k][i] for k in range(i, d + 1) if i < len(tri[k])), Fraction(0)) / wf**i)
        return out
    for i in range(d + 1):
        parts = [s.coeffs[k] * tri[k][i] for k in range(i, d + 1) if i < len(tri[k]) and tri[k][i]]
        out.append(math.fsum(parts) / w**i)
    return out


def power_eval(coeffs: Sequence[float], x):
    """Horner evaluation of ``sum_i c_i x^i``."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc if acc.ndim else float(acc)


def coefficient_bound(d: int) -> float:
    """Explicit power-basis coefficient bound ``4(d+1)3^d`` for a degree-d
    projection of a [-1,1]-valued target (|a_k| <= 4, T_k coefficients <= 3^k)."""
    return 4.0 * (d + 1) * 3.0**d


def moment_tail_bound(k: int, w: float, beta: float, d0: int) -> float:
    """Markov-type bound ``2 w^k (beta/w)^d0`` on ``E[|x|^k 1{|x|>w}]`` when
    ``(E|x|^d0)^(1/d0) <= beta`` and ``k <= d0/2``."""
    if not 0 <= k <= d0 / 2:
        raise ValueError("need 0 <= k <= d0/2")
    return 2.0 * w**k * (beta / w) ** d0


def outside_window_bound(d: int, tail_moment: float, constant: float = 16.0) -> float:
    """``constant * 4^d * E[|x|^d 1{|x|>w}]`` -- the out-of-window error of a
    degree-d projection, with the big-O made explicit."""
    return constant * 4.0**d * tail_moment


# ---------------------------------------------------------------------------
# Multi-indices and sparse monomial polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class MultiIndex:
    """Sparse exponent vector: sorted ``(coordinate, exponent)`` pairs, no zeros.

    Coordinates are 0-based internally; string keys (``"a1,a2,..."``) list the
    dense exponents in coordinate order.
    """

    exps: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        clean = {}
        for j, e in self.exps:
            if j < 0 or e < 0:
                raise ValueError("coordinates and exponents must be nonnegative")
            if e:
                clean[int(j)] = clean.get(int(j), 0) + int(e)
        object.__setattr__(self, "exps", tuple(sorted(clean.items())))

    @classmethod
    def from_dense(cls, exponents: Iterable[int]) -> "MultiIndex":
        return cls(tuple((j, int(e)) for j, e in enumerate(exponents) if e))

    @classmethod
    def from_coords(cls, coords: Iterable[int]) -> "MultiIndex":
        """Multi-index of ``prod_{j in coords} x_j`` (repeats raise the power)."""
        return cls(tuple((j, 1) for j in coords))

    @classmethod
    def from_key(cls, key: str) -> "MultiIndex":
        key = key.strip()
        if not key:
            return cls()
        return cls.from_dense(int(p) for p in key.split(","))

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.exps)

    def exponent(self, j: int) -> int:
        for c, e in self.exps:
            if c == j:
                return e
        return 0

    def dense(self, n: int) -> Tuple[int, ...]:
        out = [0] * n
        for j, e in self.exps:
            if j >= n:
                raise ValueError(f"coordinate {j} out of range for dimension {n}")
            out[j] = e
        return tuple(out)

    def key(self, n: int) -> str:
        return ",".join(str(e) for e in self.dense(n))

    def grlex_key(self) -> tuple:
        # total degree first, then lexicographic with x_1 > x_2 > ...
        return (self.degree, tuple((j, -e) for j, e in self.exps))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.ones(X.shape[0])
        for j, e in self.exps:
            out = out * X[:, j] ** e
        return out

    def __repr__(self) -> str:
        if not self.exps:
            return "MultiIndex(1)"
        return "MultiIndex(" + "*".join(f"x{j + 1}^{e}" if e > 1 else f"x{j + 1}" for j, e in self.exps) + ")"


def enumerate_monomials(n: int, max_degree: int, *, min_degree: int = 0, multilinear: bool = False) -> Iterator[MultiIndex]:
    """All multi-indices in ``n`` variables with degree in ``[min_degree, max_degree]``.

    Graded lexicographic order: by degree, and within a degree
    lexicographically with ``x_1`` largest. ``multilinear`` restricts to
    exponents in {0, 1} (monomials on the Boolean cube).
    """
    for g in range(min_degree, max_degree + 1):
        gen = combinations(range(n), g) if multilinear else combinations_with_replacement(range(n), g)
        for coords in gen:
            yield MultiIndex.from_coords(coords)


def design_matrix(features: Sequence[MultiIndex], X: np.ndarray) -> np.ndarray:
    """Columns ``prod_j x_j^{alpha_j}`` for each feature, sharing power tables."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    top = max((max((e for _, e in f.exps), default=0) for f in features), default=0)
    powers = [np.ones((m, n))]
    for _ in range(top):
        powers.append(powers[-1] * X)
    F = np.empty((m, len(features)))
    for col, f in enumerate(features):
        v = np.ones(m)
        for j, e in f.exps:
            v = v * powers[e][:, j]
        F[:, col] = v
    return F


class MonomialPoly:
    """Sparse multivariate polynomial ``sum_alpha c_alpha x^alpha``.

    Zero coefficients are never stored. Instances are treated as immutable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[MultiIndex, float] | None = None):
        clean: Dict[MultiIndex, float] = {}
        for mi, c in (terms or {}).items():
            c = float(c)
            if c != 0.0:
                clean[mi] = clean.get(mi, 0.0) + c
        self._terms = {mi: c for mi, c in clean.items() if c != 0.0}

    @classmethod
    def from_features(cls, features: Sequence[MultiIndex], coeffs: Sequence[float]) -> "MonomialPoly":
        if len(features) != len(coeffs):
            raise ValueError("features and coefficients differ in length")
        acc: Dict[MultiIndex, float] = {}
        for f, c in zip(features, coeffs):
            acc[f] = acc.get(f, 0.0) + float(c)
        return cls(acc)

    @property
    def terms(self) -> Dict[MultiIndex, float]:
        return dict(self._terms)

    @property
    def max_degree(self) -> int:
        return max((mi.degree for mi in self._terms), default=0)

    def coefficient(self, mi: MultiIndex) -> float:
        return self._terms.get(mi, 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MonomialPoly):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None

    def __call__(self, X) -> np.ndarray:
        return self.evaluate(X)

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self._terms:
            return np.zeros(X.shape[0])
        feats = sorted(self._terms, key=MultiIndex.grlex_key)
        F = design_matrix(feats, X)
        return F @ np.array([self._terms[f] for f in feats])

    def to_json(self, n: int) -> list:
        """Sparse term list ``[[exponent_key, coefficient], ...]`` in grlex order."""
        return [[mi.key(n), c] for mi, c in sorted(self._terms.items(), key=lambda kv: kv[0].grlex_key())]

    @classmethod
    def from_json(cls, terms: list) -> "MonomialPoly":
        return cls({MultiIndex.from_key(k): float(c) for k, c in terms})

    def __repr__(self) -> str:
        return f"MonomialPoly({len(self._terms)} terms, degree {self.max_degree})"


def compose_direction(coeffs_1d: Sequence[float], v) -> MonomialPoly:
    """Expand ``sum_i c_i (v . x)^i`` into monomials of ``x``.

    Only coordinates where ``v`` is nonzero take part in the multinomial
    enumeration; the total number of enumerated terms is capped at
    ``MAX_EXPANSION_TERMS``.
    """
    v = np.asarray(v, dtype=float).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    support = [j for j in range(v.size) if v[j] != 0.0]
    s = len(support)
    d = len(coeffs_1d) - 1
    count = sum(math.comb(s + i - 1, i) for i in range(d + 1))
    if count > MAX_EXPANSION_TERMS:
        raise OverflowError(f"expansion would enumerate {count} terms (cap {MAX_EXPANSION_TERMS})")
    terms: Dict[MultiIndex, float] = {}
    for i, ci in enumerate(coeffs_1d):
        if ci == 0.0:
            continue
        for combo in combinations_with_replacement(range(s), i):
            counts: Dict[int, int] = {}
            for q in combo:
                counts[q] = counts.get(q, 0) + 1
            multinom = math.factorial(i)
            val = 1.0
            for q, e in counts.items():
                multinom //= math.factorial(e)
                val *= v[support[q]] ** e
            mi = MultiIndex(tuple((support[q], e) for q, e in counts.items()))
            terms[mi] = terms.get(mi, 0.0) + ci * multinom * val
    return MonomialPoly(terms)


def sign_approximator_1d(theta: float, eps: float, beta: float, quadrature_points: int | None = None) -> ChebSeries:
    """Chebyshev projection of the ramp at ``theta`` on window ``w = 2 beta``
    with degree ``ceil(2 beta / eps^2)``."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    d = math.ceil(2.0 * beta / eps**2)
    return project(Ramp(theta, eps), 2.0 * beta, d, quadrature_points)


def build_sign_approximator(v, theta: float, eps: float, beta: float, quadrature_points: int | None = None) -> MonomialPoly:
    """Multivariate polynomial ``P(x) ~ sign(v.x - theta)``.

    Projects the ramp of width ``eps`` onto Chebyshev polynomials on the
    window ``[-2 beta, 2 beta]`` at degree ``ceil(2 beta/eps^2)``, converts to
    the power basis and expands along ``v``.
    """
    series = sign_approximator_1d(theta, eps, beta, quadrature_points)
    return compose_direction(expand_to_monomials_1d(series), v)
