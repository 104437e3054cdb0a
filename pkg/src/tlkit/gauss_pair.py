"""Tester-learner pair for halfspaces under the standard Gaussian.

The tester checks coordinate tails, truncates to a box ``[-t, t]^n`` and
compares every moment of degree at most ``Delta`` with its Gaussian value.
The learner truncates to the same box, runs degree-``d`` L1 regression over
all monomials and answers +1 outside the box.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .data import LabeledDataset, SampleStream
from .l1fit import FittedModel, RegressionProblem, best_threshold, fit_l1, predict
from .moments import compare_tables, default_moment_tol, empirical_moments, gaussian_table
from .polycore import enumerate_monomials
from .reports import LearnReport, Verdict

__all__ = [
    "GaussPairParams",
    "derive_params",
    "desk_profile",
    "tail_sample_count",
    "tail_check",
    "TailResult",
    "truncate",
    "run_tester",
    "run_learner",
    "BoxedPredictor",
    "AllSamplesDiscarded",
    "amplify_tester",
    "amplification_error_bound",
    "AmplifiedVerdict",
    "max_window_mass",
]


@dataclass(frozen=True)
class GaussPairParams:
    """Effective parameters of the Gaussian pair.

    ``formula`` keeps the unmodified formula values; ``deviations`` lists
    every override or cap that made an effective value differ from them.
    """

    eps: float
    n: int
    C1: float
    C2: float
    C3: float
    C4: float
    d: int
    delta: int
    t: float
    N1: int
    N2: int
    moment_tol: float
    tail_samples: int
    formula: dict = field(default_factory=dict)
    deviations: tuple = ()

    def to_json(self) -> dict:
        out = asdict(self)
        out["deviations"] = list(self.deviations)
        return out


def _even_floor(x: float) -> int:
    k = math.floor(x)
    return k - (k % 2)


def _ceil_or_inf(log_value: float) -> float:
    # ceil(exp(log_value)) as an int, or inf when it cannot be represented
    if log_value > 700:
        return math.inf
    return math.ceil(math.exp(log_value) - 1e-9)


def tail_sample_count(eps: float, n: int) -> int:
    """Hoeffding count ``ceil(ln(200 n) (30 n / eps)^2 / 2)``: additive
    accuracy ``eps/(30n)`` with failure probability ``1/(100 n)``."""
    return math.ceil(math.log(200 * n) * (30 * n / eps) ** 2 / 2)


def derive_params(
    eps: float,
    n: int,
    C1: float = 1.0,
    C2: float = 1.0,
    C3: float = 1.0,
    C4: float = 1.0,
    *,
    d: Optional[int] = None,
    delta: Optional[int] = None,
    t: Optional[float] = None,
    moment_tol: Optional[float] = None,
    tail_samples: Optional[int] = None,
    max_n1: Optional[int] = None,
    max_n2: Optional[int] = None,
    delta_rounding: str = "down",
) -> GaussPairParams:
    """Parameters from the closed-form recipe, with optional overrides.

    Formula values::

        d     = 2 floor(ln^3(1/eps) / (2 eps^4))
        Delta = floor(ln^4(1/eps) / eps^4), made even
        t     = C1 Delta ln(Delta) sqrt(ln n) + sqrt(2 ln(C2 n / eps))
        N1    = ceil(n^(C3 d)),   N2 = ceil(t^(2 Delta) n^(C4 Delta))

    ``delta_rounding`` picks the even neighbour of an odd Delta ("down" is the
    default; "up" is recorded as a deviation). Degrees that come out as 0 are
    raised to 2, also recorded.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if n < 1:
        raise ValueError("n must be positive")
    if min(C1, C2, C3, C4) <= 0:
        raise ValueError("constants must be positive")
    devs: list[str] = []
    L = math.log(1.0 / eps)

    d_formula = 2 * math.floor(L**3 / (2 * eps**4))
    delta_raw = math.floor(L**4 / eps**4)
    delta_formula = delta_raw - (delta_raw % 2)

    if d is not None:
        if d < 1:
            raise ValueError("d must be positive")
        if d != d_formula:
            devs.append(f"d overridden: {d} (formula {d_formula})")
        d_eff = int(d)
    elif d_formula < 2:
        devs.append(f"d raised to 2 (formula {d_formula})")
        d_eff = 2
    else:
        d_eff = d_formula

    if delta is not None:
        if delta < 2 or delta % 2:
            raise ValueError("Delta must be an even integer >= 2")
        if delta != delta_formula:
            devs.append(f"Delta overridden: {delta} (formula {delta_formula})")
        delta_eff = int(delta)
    else:
        if delta_rounding not in ("down", "up"):
            raise ValueError("delta_rounding must be 'down' or 'up'")
        delta_eff = delta_formula
        if delta_rounding == "up" and delta_raw % 2:
            delta_eff = delta_raw + 1
            devs.append(f"Delta rounded up to {delta_eff} (formula {delta_formula})")
        if delta_eff < 2:
            devs.append(f"Delta raised to 2 (formula {delta_formula})")
            delta_eff = 2

    t_formula = C1 * delta_eff * math.log(delta_eff) * math.sqrt(math.log(n)) + math.sqrt(2 * math.log(C2 * n / eps))
    if t is not None:
        if t < 1:
            raise ValueError("t must be >= 1")
        devs.append(f"t overridden: {t} (formula {t_formula:.6g})")
        t_eff = float(t)
    else:
        t_eff = max(t_formula, 1.0)
        if t_formula < 1:
            devs.append(f"t raised to 1 (formula {t_formula:.6g})")

    n1_formula = _ceil_or_inf(C3 * d_eff * math.log(n)) if n > 1 else 1
    n2_formula = _ceil_or_inf(2 * delta_eff * math.log(t_eff) + C4 * delta_eff * math.log(n))
    N1 = n1_formula
    if max_n1 is not None and N1 > max_n1:
        devs.append(f"N1 capped at {max_n1} (formula {n1_formula})")
        N1 = int(max_n1)
    N2 = n2_formula
    if max_n2 is not None and N2 > max_n2:
        devs.append(f"N2 capped at {max_n2} (formula {n2_formula})")
        N2 = int(max_n2)
    if math.isinf(N1) or math.isinf(N2):
        raise OverflowError("sample counts are astronomically large; set max_n1/max_n2 caps")

    tol_formula = default_moment_tol(n, delta_eff)
    if moment_tol is not None:
        if moment_tol <= 0:
            raise ValueError("moment_tol must be positive")
        if moment_tol != tol_formula:
            devs.append(f"moment_tol overridden: {moment_tol} (formula {tol_formula:.6g})")
        tol_eff = float(moment_tol)
    else:
        tol_eff = tol_formula

    ts_formula = tail_sample_count(eps, n)
    if tail_samples is not None:
        if tail_samples < 1:
            raise ValueError("tail_samples must be positive")
        if tail_samples != ts_formula:
            devs.append(f"tail_samples overridden: {tail_samples} (formula {ts_formula})")
        ts_eff = int(tail_samples)
    else:
        ts_eff = ts_formula

    formula = {
        "d": d_formula,
        "delta": delta_formula,
        "t": t_formula,
        "N1": n1_formula if math.isfinite(n1_formula) else "inf",
        "N2": n2_formula if math.isfinite(n2_formula) else "inf",
        "moment_tol": tol_formula,
        "tail_samples": ts_formula,
    }
    return GaussPairParams(
        eps=float(eps), n=int(n), C1=float(C1), C2=float(C2), C3=float(C3), C4=float(C4),
        d=d_eff, delta=delta_eff, t=t_eff, N1=int(N1), N2=int(N2), moment_tol=tol_eff,
        tail_samples=ts_eff, formula=formula, deviations=tuple(devs),
    )


def desk_profile(eps: float, n: int, **overrides) -> GaussPairParams:
    """Laptop-scale parameters.

    Constants ``C3 = 2, C4 = 4``; an odd Delta is rounded up rather than
    down (so the fourth moment is always examined); the moment tolerance is
    0.05 instead of ``1/(2 n^Delta)``; N1 and N2 are capped at 2e4 and 1e6.
    """
    kw = dict(C3=2.0, C4=4.0, delta_rounding="up", moment_tol=0.05, max_n1=20_000, max_n2=1_000_000)
    kw.update(overrides)
    return derive_params(eps, n, **kw)


# ---------------------------------------------------------------------------
# tester
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailResult:
    passed: bool
    coordinate: Optional[int]
    estimates: tuple
    threshold: float
    samples: int


def tail_check(stream: SampleStream, params: GaussPairParams) -> TailResult:
    """Estimate ``Pr[|x_j| > t]`` for every coordinate from one shared batch.

    Fails at the first coordinate whose estimate reaches ``eps / (10 n)``.
    """
    X = stream.examples(params.tail_samples)
    est = np.mean(np.abs(X) > params.t, axis=0)
    thr = params.eps / (10 * params.n)
    bad = np.flatnonzero(est >= thr)
    coord = int(bad[0]) if bad.size else None
    return TailResult(coord is None, coord, tuple(float(e) for e in est), thr, X.shape[0])


def truncate(data: Union[LabeledDataset, np.ndarray], t: float):
    """Keep the samples whose coordinates all lie in ``[-t, t]``.

    Returns ``(kept, discard_fraction)``; ``kept`` has the type of ``data``.
    """
    X = data.X if isinstance(data, LabeledDataset) else np.atleast_2d(np.asarray(data, dtype=float))
    m = X.shape[0]
    keep = np.all(np.abs(X) <= t, axis=1)
    frac = 1.0 - keep.sum() / m if m else 0.0
    kept = data.subset(keep) if isinstance(data, LabeledDataset) else X[keep]
    return kept, float(frac)


def run_tester(stream: SampleStream, params: GaussPairParams) -> Verdict:
    """Tail check, then moment matching on ``N2`` fresh truncated samples.

    Only examples are read from the stream, never labels.
    """
    eff = params.to_json()
    start = stream.samples_used
    tail = tail_check(stream, params)
    if not tail.passed:
        j = tail.coordinate
        return Verdict(False, "tail", f"x{j + 1}", tail.estimates[j], stream.samples_used - start, eff, params.deviations)
    X = stream.examples(params.N2)
    kept, _ = truncate(X, params.t)
    if kept.shape[0] == 0:
        return Verdict(False, "moments", None, None, stream.samples_used - start, eff, params.deviations)
    obs = empirical_moments(kept, params.delta, truncation=params.t)
    cmp = compare_tables(obs, gaussian_table(params.n, params.delta), params.moment_tol)
    key = cmp.worst_index.key(params.n) if cmp.worst_index is not None else None
    used = stream.samples_used - start
    if not cmp.passed:
        return Verdict(False, "moments", key, cmp.gap, used, eff, params.deviations)
    return Verdict(True, "ok", key, cmp.gap, used, eff, params.deviations)


# ---------------------------------------------------------------------------
# learner
# ---------------------------------------------------------------------------


class AllSamplesDiscarded(RuntimeError):
    """Truncation removed every training sample."""


@dataclass(frozen=True)
class BoxedPredictor:
    """Regression predictor inside ``[-t, t]^n``, constant +1 outside."""

    model: FittedModel
    t: float

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inside = np.all(np.abs(X) <= self.t, axis=1)
        out = np.ones(X.shape[0])
        if inside.any():
            out[inside] = predict(self.model, X[inside])
        return out

    def to_json(self) -> dict:
        return {"model": self.model.to_json(), "t": self.t, "outside": 1}


def run_learner(stream: SampleStream, params: GaussPairParams, method: str = "highs"):
    """Draw ``N1`` labeled samples, truncate, fit and round.

    Returns ``(BoxedPredictor, LearnReport)``.
    """
    data = stream.labeled(params.N1)
    kept, frac = truncate(data, params.t)
    if kept.size == 0:
        raise AllSamplesDiscarded(f"all {data.size} samples fell outside the box of half-width {params.t}")
    feats = tuple(enumerate_monomials(params.n, params.d))
    model = fit_l1(RegressionProblem.from_dataset(feats, kept, params.d), method)
    model = best_threshold(model, kept)
    report = LearnReport(
        samples_used=data.size,
        samples_kept=kept.size,
        discard_fraction=frac,
        degree=params.d,
        n_features=len(feats),
        empirical_l1=model.empirical_l1,
        empirical_01=model.empirical_01,
        threshold=model.threshold,
        effective_params=params.to_json(),
        deviations=params.deviations,
    )
    return BoxedPredictor(model, params.t), report


# ---------------------------------------------------------------------------
# amplification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmplifiedVerdict:
    accept: bool
    yes_count: int
    repetitions: int
    threshold: float


def amplification_error_bound(r: int, delta2: float, delta3: float) -> float:
    """``2 exp(-2 (delta3 - delta2)^2 r / 9)``."""
    return 2.0 * math.exp(-2.0 * (delta3 - delta2) ** 2 * r / 9.0)


def _sub_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, i]).generate_state(1, np.uint64)[0])


def amplify_tester(base: Callable[[int], object], r: int, delta2: float, delta3: float) -> Callable[[int], AmplifiedVerdict]:
    """Repeat a randomized tester ``r`` times and take a thresholded vote.

    ``base(seed)`` returns a :class:`Verdict` or a bool. The amplified tester
    accepts iff the fraction of Yes answers is at least
    ``1 - (delta2 + delta3) / 2``.
    """
    if r < 1:
        raise ValueError("r must be positive")
    if not 0 < delta2 < delta3 < 1:
        raise ValueError("need 0 < delta2 < delta3 < 1")
    thr = 1.0 - (delta2 + delta3) / 2.0

    def amplified(seed: int) -> AmplifiedVerdict:
        yes = 0
        for i in range(r):
            out = base(_sub_seed(seed, i))
            yes += bool(getattr(out, "accept", out))
        return AmplifiedVerdict(yes / r >= thr, yes, r, thr)

    return amplified


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def max_window_mass(values: np.ndarray, width: float) -> float:
    """Largest fraction of ``values`` inside any closed window of the given width."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        return 0.0
    hi = np.searchsorted(v, v + width, side="right")
    return float(np.max(hi - np.arange(v.size)) / v.size)
