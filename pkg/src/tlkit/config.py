"""Experiment configuration files (JSON)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "config_from_dict", "MODES"]

MODES = ("gauss_pair", "cube_pair", "decision_list", "fooling", "approx_bench")

_SECTIONS = {
    "constants": {"C1", "C2", "C3", "C4"},
    "overrides": {"d", "delta", "t", "moment_tol", "tail_samples", "k", "degree", "tv_tol", "learner_samples", "N1", "N2"},
    "caps": {"max_n1", "max_n2", "max_degree", "max_learner_samples"},
    "labels": {"kind", "weights", "threshold", "coords", "order", "bits", "values", "noise"},
    "fooling": {"M", "N", "alpha", "delta2", "delta_fool", "domain"},
    "approx": {"theta", "window", "degrees", "mc_samples"},
    "dataset": {"path", "format", "map_01"},
}
_TOP = {"mode", "seed", "trials", "output", "n", "eps", "distribution", "profile", "holdout", "target_excess",
        "csv_summary", *_SECTIONS}
_LABEL_KINDS = ("halfspace", "majority", "decision_list", "coin")


class ConfigError(ValueError):
    """Unreadable or invalid configuration; the message names the location or field."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    seed: int
    trials: int = 1
    output: Optional[str] = None
    n: int = 3
    eps: float = 0.5
    distribution: Optional[str] = None
    profile: str = "formula"
    holdout: int = 20_000
    target_excess: float = 0.15
    csv_summary: bool = False
    constants: dict = field(default_factory=lambda: {"C1": 1.0, "C2": 1.0, "C3": 1.0, "C4": 1.0})
    overrides: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)
    fooling: dict = field(default_factory=dict)
    approx: dict = field(default_factory=dict)
    dataset: dict = field(default_factory=dict)
    explicit_constants: tuple = ()

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("explicit_constants")
        return out


def _need(cond: bool, fieldname: str, msg: str):
    if not cond:
        raise ConfigError(f"{fieldname}: {msg}")


def config_from_dict(raw: Any) -> ExperimentConfig:
    """Validate a parsed JSON object and fill defaults."""
    _need(isinstance(raw, dict), "<root>", "expected a JSON object")
    unknown = sorted(set(raw) - _TOP)
    _need(not unknown, unknown[0] if unknown else "", "unknown key")
    _need("mode" in raw, "mode", "required")
    mode = raw["mode"]
    _need(mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
    _need("seed" in raw, "seed", "required")
    seed = raw["seed"]
    _need(isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64, "seed", "must be an integer in [0, 2^64)")
    trials = raw.get("trials", 1)
    _need(isinstance(trials, int) and trials >= 1, "trials", "must be an integer >= 1")
    n = raw.get("n", 3)
    _need(isinstance(n, int) and n >= 1, "n", "must be a positive integer")
    eps = raw.get("eps", 0.5)
    _need(isinstance(eps, (int, float)) and 0 < eps < 1, "eps", "must lie in (0, 1)")
    profile = raw.get("profile", "formula")
    _need(profile in ("formula", "desk"), "profile", "must be 'formula' or 'desk'")
    holdout = raw.get("holdout", 20_000)
    _need(isinstance(holdout, int) and holdout >= 1, "holdout", "must be a positive integer")
    excess = raw.get("target_excess", 0.15)
    _need(isinstance(excess, (int, float)) and excess >= 0, "target_excess", "must be nonnegative")
    output = raw.get("output")
    _need(output is None or isinstance(output, str), "output", "must be a path string")
    dist = raw.get("distribution")
    _need(dist is None or isinstance(dist, str), "distribution", "must be a string")

    sections = {}
    for name, allowed in _SECTIONS.items():
        sec = raw.get(name, {})
        _need(isinstance(sec, dict), name, "must be an object")
        bad = sorted(set(sec) - allowed)
        _need(not bad, f"{name}.{bad[0]}" if bad else name, "unknown key")
        sections[name] = dict(sec)

    consts = {"C1": 1.0, "C2": 1.0, "C3": 1.0, "C4": 1.0}
    for k, v in sections["constants"].items():
        _need(isinstance(v, (int, float)) and v > 0, f"constants.{k}", "must be a positive number")
        consts[k] = float(v)
    for k, v in {**sections["overrides"], **sections["caps"]}.items():
        where = "overrides" if k in sections["overrides"] else "caps"
        _need(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0, f"{where}.{k}", "must be a positive number")
    lab = sections["labels"]
    if lab:
        _need(lab.get("kind") in _LABEL_KINDS, "labels.kind", f"must be one of {', '.join(_LABEL_KINDS)}")
        noise = lab.get("noise", 0.0)
        _need(isinstance(noise, (int, float)) and 0 <= noise <= 0.5, "labels.noise", "must lie in [0, 0.5]")
    if mode == "fooling":
        fo = sections["fooling"]
        for k in ("M", "N"):
            _need(isinstance(fo.get(k), int) and fo[k] >= 1, f"fooling.{k}", "required positive integer")
        _need(fo["N"] <= fo["M"], "fooling.N", "must not exceed fooling.M")
    if sections["dataset"]:
        _need(isinstance(sections["dataset"].get("path"), str), "dataset.path", "required")
        _need(sections["dataset"].get("format", "csv") in ("csv", "binary"), "dataset.format", "must be 'csv' or 'binary'")
        _need(trials == 1, "trials", "must be 1 when a dataset file is given")

    return ExperimentConfig(
        mode=mode, seed=seed, trials=trials, output=output, n=n, eps=float(eps), distribution=dist,
        profile=profile, holdout=holdout, target_excess=float(excess), csv_summary=bool(raw.get("csv_summary", False)),
        constants=consts, overrides=sections["overrides"], caps=sections["caps"], labels=lab,
        fooling=sections["fooling"], approx=sections["approx"], dataset=sections["dataset"],
        explicit_constants=tuple(sorted(sections["constants"])),
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(raw)
