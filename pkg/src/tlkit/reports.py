"""Structured outcomes of testers and learners."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

__all__ = ["Verdict", "LearnReport", "STAGES_OF_VERDICT"]

STAGES_OF_VERDICT = ("tail", "moments", "ok")


@dataclass(frozen=True)
class Verdict:
    """Tester outcome.

    ``stage`` names the check that failed (``"tail"`` or ``"moments"``), or is
    ``"ok"`` on acceptance. ``worst_index`` is a coordinate label such as
    ``"x2"`` or a moment exponent key such as ``"4,0,0"``.
    """

    accept: bool
    stage: str
    worst_index: Optional[str]
    gap: Optional[float]
    samples_used: int
    effective_params: dict = field(default_factory=dict)
    deviations: tuple = ()

    def __post_init__(self):
        if self.stage not in STAGES_OF_VERDICT:
            raise ValueError(f"unknown stage {self.stage!r}")
        if (self.stage == "ok") != bool(self.accept):
            raise ValueError("stage must be 'ok' exactly when the tester accepts")
        object.__setattr__(self, "deviations", tuple(self.deviations))

    def to_json(self) -> dict:
        d = asdict(self)
        d["deviations"] = list(self.deviations)
        return d


@dataclass(frozen=True)
class LearnReport:
    """Learner outcome: training statistics and, when measured, holdout error."""

    samples_used: int
    samples_kept: int
    discard_fraction: float
    degree: int
    n_features: int
    empirical_l1: Optional[float]
    empirical_01: float
    threshold: Optional[float]
    holdout_error: Optional[float] = None
    effective_params: dict = field(default_factory=dict)
    deviations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "deviations", tuple(self.deviations))

    def with_holdout(self, err: float) -> "LearnReport":
        return replace(self, holdout_error=float(err))

    def to_json(self) -> dict:
        d = asdict(self)
        d["deviations"] = list(self.deviations)
        return d
