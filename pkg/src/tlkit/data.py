"""Labeled datasets, seeded sample streams and synthetic distributions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "LabeledDataset",
    "SampleStream",
    "ArrayStream",
    "StreamExhausted",
    "BudgetExceeded",
    "stage_rng",
    "STAGES",
    "Distribution",
    "make_distribution",
    "DIST_NAMES",
    "halfspace_labeler",
    "majority_labeler",
    "decision_list_labeler",
    "coin_labeler",
    "with_label_noise",
    "ingest_dataset",
    "DatasetFormatError",
]

# Stage ids for independent random streams derived from one seed.
STAGES = {"tester": 1, "learner": 2, "holdout": 3, "support": 4, "labels": 5, "trials": 6}


def stage_rng(seed: int, stage: str | int) -> np.random.Generator:
    """Counter-based (Philox) generator for one named stage of a run."""
    sid = STAGES[stage] if isinstance(stage, str) else int(stage)
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, sid])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class LabeledDataset:
    """Examples ``X`` (m x n) with labels ``y`` in {-1, +1}.

    ``seed`` records where the data came from (``None`` for ingested files).
    """

    X: np.ndarray
    y: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} examples but {y.shape[0]} labels")
        if y.size and not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("labels must be -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.size

    def subset(self, mask) -> "LabeledDataset":
        return LabeledDataset(self.X[mask], self.y[mask], self.seed)


class StreamExhausted(RuntimeError):
    """A finite stream ran out of examples."""


class BudgetExceeded(RuntimeError):
    """A consumer asked for more samples than its budget allows."""


Sampler = Callable[[np.random.Generator, int], np.ndarray]
Labeler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


class SampleStream:
    """I.i.d. labeled example access with a sample budget.

    Examples and labels use separate generators, so a tester that only looks
    at examples sees exactly the same points under any relabeling.
    """

    def __init__(
        self,
        sampler: Sampler,
        labeler: Optional[Labeler],
        seed: int,
        stage: str = "tester",
        budget: Optional[int] = None,
        n: Optional[int] = None,
    ):
        self._sampler = sampler
        self._labeler = labeler
        self._ex_rng = stage_rng(seed, stage)
        # labels get their own substream of the same stage
        lab_ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, STAGES[stage], STAGES["labels"]])
        self._lab_rng = np.random.Generator(np.random.Philox(lab_ss))
        self.seed = seed
        self.budget = budget
        self.samples_used = 0
        self.n = n

    def _charge(self, m: int):
        if m < 0:
            raise ValueError("sample count must be nonnegative")
        if self.budget is not None and self.samples_used + m > self.budget:
            raise BudgetExceeded(f"requested {m} samples with {self.budget - self.samples_used} left of {self.budget}")
        self.samples_used += m

    def examples(self, m: int) -> np.ndarray:
        self._charge(m)
        return np.atleast_2d(self._sampler(self._ex_rng, m)).reshape(m, -1)

    def labeled(self, m: int) -> LabeledDataset:
        X = self.examples(m)
        if self._labeler is None:
            raise StreamExhausted("stream carries no labels")
        return LabeledDataset(X, self._labeler(X, self._lab_rng), self.seed)


class ArrayStream(SampleStream):
    """Stream that replays a fixed dataset in order; runs out at the end."""

    def __init__(self, data: LabeledDataset, budget: Optional[int] = None):
        self._data = data
        self._pos = 0
        self.seed = data.seed
        self.budget = budget
        self.samples_used = 0
        self.n = data.n

    def _take(self, m: int) -> slice:
        if self._pos + m > self._data.size:
            raise StreamExhausted(f"requested {m} samples, {self._data.size - self._pos} remain")
        self._charge(m)
        sl = slice(self._pos, self._pos + m)
        self._pos += m
        return sl

    def examples(self, m: int) -> np.ndarray:
        return np.array(self._data.X[self._take(m)])

    def labeled(self, m: int) -> LabeledDataset:
        sl = self._take(m)
        return LabeledDataset(self._data.X[sl], self._data.y[sl], self.seed)


# ---------------------------------------------------------------------------
# distributions and labelers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    """A named example distribution over R^n or {-1, +1}^n."""

    name: str
    n: int
    sampler: Sampler = field(repr=False)
    domain: str = "gaussian"

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return self.sampler(rng, m)


DIST_NAMES = ("gaussian", "cube", "rademacher-coord", "scaled-gaussian", "parity-planted", "biased-coord")


def make_distribution(name: str, n: int, *, scale: float = 1.5, bias: float = 0.5) -> Distribution:
    """Build one of the named distributions.

    ``gaussian``          standard normal on R^n
    ``cube``              uniform on {-1, +1}^n
    ``rademacher-coord``  x_1 uniform on {-1, +1}, the rest standard normal
    ``scaled-gaussian``   N(0, scale^2 I)
    ``parity-planted``    uniform cube except x_3 = x_1 * x_2
    ``biased-coord``      cube with E[x_1] = bias
    """
    if n < 1:
        raise ValueError("dimension must be positive")

    if name == "gaussian":
        def s(rng, m):
            return rng.standard_normal((m, n))
        dom = "gaussian"
    elif name == "cube":
        def s(rng, m):
            return rng.choice(np.array([-1.0, 1.0]), size=(m, n))
        dom = "cube"
    elif name == "rademacher-coord":
        def s(rng, m):
            X = rng.standard_normal((m, n))
            X[:, 0] = rng.choice(np.array([-1.0, 1.0]), size=m)
            return X
        dom = "gaussian"
    elif name == "scaled-gaussian":
        def s(rng, m):
            return scale * rng.standard_normal((m, n))
        dom = "gaussian"
    elif name == "parity-planted":
        if n < 3:
            raise ValueError("parity-planted needs n >= 3")
        def s(rng, m):
            X = rng.choice(np.array([-1.0, 1.0]), size=(m, n))
            X[:, 2] = X[:, 0] * X[:, 1]
            return X
        dom = "cube"
    elif name == "biased-coord":
        p = (1.0 + bias) / 2.0
        def s(rng, m):
            X = rng.choice(np.array([-1.0, 1.0]), size=(m, n))
            X[:, 0] = np.where(rng.random(m) < p, 1.0, -1.0)
            return X
        dom = "cube"
    else:
        raise ValueError(f"unknown distribution {name!r}; choose from {', '.join(DIST_NAMES)}")
    return Distribution(name, n, s, dom)


def _sign(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0, -1.0)


def halfspace_labeler(w, theta: float = 0.0) -> Labeler:
    w = np.asarray(w, dtype=float)

    def lab(X, rng):
        return _sign(X @ w - theta)
    return lab


def majority_labeler(coords) -> Labeler:
    coords = list(coords)

    def lab(X, rng):
        return _sign(X[:, coords].sum(axis=1))
    return lab


def decision_list_labeler(order, bits, values, default: float = -1.0) -> Labeler:
    def lab(X, rng):
        out = np.full(X.shape[0], float(default))
        done = np.zeros(X.shape[0], dtype=bool)
        for j, b, v in zip(order, bits, values):
            hit = (~done) & (X[:, j] == b)
            out[hit] = v
            done |= hit
        return out
    return lab


def coin_labeler() -> Labeler:
    def lab(X, rng):
        return np.where(rng.random(X.shape[0]) < 0.5, 1.0, -1.0)
    return lab


def with_label_noise(base: Labeler, rate: float) -> Labeler:
    """Flip each label independently with probability ``rate``."""
    if not 0 <= rate <= 0.5:
        raise ValueError("noise rate must lie in [0, 0.5]")

    def lab(X, rng):
        y = base(X, rng)
        flip = rng.random(X.shape[0]) < rate
        return np.where(flip, -y, y)
    return lab


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the offending row/column."""


def ingest_dataset(path, fmt: str = "csv", *, map_01: bool = False) -> LabeledDataset:
    """Read a dataset from disk.

    CSV files need a header with a ``y`` column; all other columns are
    numeric features in file order. The binary format is an ``.npz`` archive
    with arrays ``X`` and ``y``. Labels must be -1/+1, or 0/1 when
    ``map_01`` is set (0 maps to -1).
    """
    if fmt == "csv":
        X, y = _read_csv(path)
    elif fmt == "binary":
        with np.load(path) as z:
            if "X" not in z or "y" not in z:
                raise DatasetFormatError("binary dataset needs arrays 'X' and 'y'")
            X, y = np.asarray(z["X"], dtype=float), np.asarray(z["y"], dtype=float)
        if X.ndim != 2 or y.ndim != 1 or len(y) != len(X):
            raise DatasetFormatError("binary dataset has inconsistent shapes")
        if len(y) == 0:
            raise DatasetFormatError("dataset is empty")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    vals = set(np.unique(y).tolist())
    if vals <= {-1.0, 1.0}:
        pass
    elif vals <= {0.0, 1.0}:
        if not map_01:
            raise DatasetFormatError("labels are 0/1; pass the 0/1 mapping flag to convert them")
        y = np.where(y == 1.0, 1.0, -1.0)
    else:
        bad = sorted(vals - {-1.0, 1.0, 0.0})[:3] or sorted(vals)[:3]
        raise DatasetFormatError(f"labels outside {{-1, +1}}: {bad}")
    return LabeledDataset(X, y)


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("dataset is empty") from None
        header = [h.strip() for h in header]
        if "y" not in header:
            raise DatasetFormatError("header has no 'y' column")
        yi = header.index("y")
        rows_X, rows_y = [], []
        for r, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetFormatError(f"row {r}: expected {len(header)} cells, found {len(row)}")
            vals = []
            for c, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetFormatError(f"row {r}, column {c + 1} ({header[c]!r}): non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise DatasetFormatError(f"row {r}, column {c + 1} ({header[c]!r}): non-finite value")
                vals.append(v)
            rows_y.append(vals[yi])
            rows_X.append(vals[:yi] + vals[yi + 1 :])
    if not rows_y:
        raise DatasetFormatError("dataset has a header but no rows")
    return np.array(rows_X, dtype=float).reshape(len(rows_y), len(header) - 1), np.array(rows_y)
