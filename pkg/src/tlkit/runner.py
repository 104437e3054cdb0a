"""Seeded orchestration of tester-learner runs and report assembly.

Each trial ``i`` uses seed ``config.seed ^ i``. Within a trial the tester,
learner and holdout read independent generator streams, so the learner never
sees a point the tester saw. Trials run serially unless ``TLKIT_THREADS`` asks
for more workers; results are collected in trial order either way, so the
report does not depend on the worker count.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Optional

import numpy as np

from .config import ExperimentConfig, config_from_dict
from .cube_pair import (
    derive_cube_params,
    derive_dl_params,
    run_cube_halfspace_learner,
    run_decision_list_learner,
    run_kwise_tester,
)
from .data import (
    ArrayStream,
    SampleStream,
    coin_labeler,
    decision_list_labeler,
    halfspace_labeler,
    ingest_dataset,
    majority_labeler,
    make_distribution,
    stage_rng,
    with_label_noise,
)
from .fooling import FoolingConfig, desk_gaussian_tester, desk_l1_learner, run_fooling_experiment
from .gauss_pair import derive_params, run_learner, run_tester
from .l1fit import predict
from .polycore import Ramp, coefficient_bound, project, series_eval

__all__ = ["run", "EXIT_OK", "EXIT_ERROR", "EXIT_REJECTED", "EXIT_MISSED_TARGET", "report_to_text", "worker_count"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2
EXIT_MISSED_TARGET = 3


def worker_count() -> int:
    raw = os.environ.get("TLKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _trial_seed(seed: int, i: int) -> int:
    return (int(seed) ^ i) & 0xFFFFFFFFFFFFFFFF


def _dedupe(items) -> list:
    seen, out = set(), []
    for s in items:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# parameter resolution
# ---------------------------------------------------------------------------


def _gauss_params(cfg: ExperimentConfig):
    ov, caps = cfg.overrides, cfg.caps
    kw = {k: ov[k] for k in ("d", "delta", "t", "moment_tol", "tail_samples") if k in ov}
    for k in ("d", "delta", "tail_samples"):
        if k in kw:
            kw[k] = int(kw[k])
    if "max_n1" in caps:
        kw["max_n1"] = int(caps["max_n1"])
    if "max_n2" in caps:
        kw["max_n2"] = int(caps["max_n2"])
    consts = dict(cfg.constants)
    profile_devs = []
    if cfg.profile == "desk":
        base = dict(C3=2.0, C4=4.0, delta_rounding="up", moment_tol=0.05, max_n1=20_000, max_n2=1_000_000)
        for c in ("C3", "C4"):
            if c in cfg.explicit_constants:
                base.pop(c)
            else:
                profile_devs.append(f"{c} set to {base[c]:g} by the desk profile")
        base.update(kw)
        kw = base
        consts = {c: v for c, v in consts.items() if c not in kw}
    p = derive_params(cfg.eps, cfg.n, **consts, **kw)
    return replace(p, deviations=tuple(profile_devs) + tuple(p.deviations))


def _cube_params(cfg: ExperimentConfig):
    ov, caps = cfg.overrides, cfg.caps
    kw = {}
    for k in ("k", "degree", "learner_samples"):
        if k in ov:
            kw[k] = int(ov[k])
    if "tv_tol" in ov:
        kw["tv_tol"] = float(ov["tv_tol"])
    if "max_degree" in caps:
        kw["max_degree"] = int(caps["max_degree"])
    if "max_learner_samples" in caps:
        kw["max_learner_samples"] = int(caps["max_learner_samples"])
    return derive_cube_params(cfg.eps, cfg.n, **kw)


def _dl_params(cfg: ExperimentConfig):
    p = derive_dl_params(cfg.eps, cfg.n, **({"tv_tol": float(cfg.overrides["tv_tol"])} if "tv_tol" in cfg.overrides else {}))
    devs = list(p.deviations)
    if "learner_samples" in cfg.overrides:
        m = int(cfg.overrides["learner_samples"])
        if m != p.learner_samples:
            devs.append(f"learner_samples overridden: {m} (formula {p.learner_samples})")
        p = replace(p, learner_samples=m, deviations=tuple(devs))
    return p


def _resolve_params(cfg: ExperimentConfig):
    if cfg.mode == "gauss_pair":
        return _gauss_params(cfg)
    if cfg.mode == "cube_pair":
        return _cube_params(cfg)
    if cfg.mode == "decision_list":
        return _dl_params(cfg)
    return None


def _default_distribution(cfg: ExperimentConfig) -> str:
    if cfg.distribution:
        return cfg.distribution
    return "gaussian" if cfg.mode == "gauss_pair" else "cube"


def _labelers(cfg: ExperimentConfig):
    """``(clean, noisy)`` labelers; ``clean`` is ``None`` for coin labels."""
    lab = dict(cfg.labels)
    n = cfg.n
    if not lab:
        if cfg.mode == "gauss_pair":
            lab = {"kind": "halfspace", "weights": [1.0] * n}
        elif cfg.mode == "cube_pair":
            lab = {"kind": "majority", "coords": list(range(min(3, n)))}
        else:
            lab = {"kind": "decision_list", "order": [0, 1], "bits": [1, -1], "values": [1, 1]}
    kind = lab["kind"]
    if kind == "halfspace":
        w = np.asarray(lab.get("weights", [1.0] * n), dtype=float)
        if w.size != n:
            raise ValueError(f"labels.weights has length {w.size}, expected {n}")
        clean = halfspace_labeler(w / np.linalg.norm(w), float(lab.get("threshold", 0.0)))
    elif kind == "majority":
        clean = majority_labeler(lab.get("coords", list(range(min(3, n)))))
    elif kind == "decision_list":
        clean = decision_list_labeler(lab["order"], lab["bits"], lab["values"])
    else:
        clean = None
    base = clean if clean is not None else coin_labeler()
    noise = float(lab.get("noise", 0.0))
    return clean, (with_label_noise(base, noise) if noise > 0 else base)


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------


def _holdout_stats(cfg, predictor, clean, noisy, sampler, seed):
    st = SampleStream(sampler, noisy, seed, "holdout", n=cfg.n)
    h = st.labeled(cfg.holdout)
    err = float(np.mean(np.asarray(predictor(h.X)) != h.y))
    if clean is not None:
        opt = float(np.mean(clean(h.X, None) != h.y))
    else:
        p = float(np.mean(h.y > 0))
        opt = min(p, 1 - p)
    return err, opt


def _pair_trial(cfg: ExperimentConfig, params, i: int, force_learn: bool) -> dict:
    seed = _trial_seed(cfg.seed, i)
    clean, noisy = _labelers(cfg)
    if cfg.dataset:
        data = ingest_dataset(cfg.dataset["path"], cfg.dataset.get("format", "csv"), map_01=bool(cfg.dataset.get("map_01", False)))
        if data.n != cfg.n:
            raise ValueError(f"dataset has dimension {data.n}, config says n={cfg.n}")
        m = data.size
        a, b = m // 2, m // 2 + (3 * m) // 10
        t_stream = ArrayStream(data.subset(np.arange(m) < a))
        l_stream = ArrayStream(data.subset((np.arange(m) >= a) & (np.arange(m) < b)))
        held = data.subset(np.arange(m) >= b)
        sampler = None
    else:
        dist = make_distribution(_default_distribution(cfg), cfg.n)
        sampler = dist.sample
        t_stream = SampleStream(sampler, noisy, seed, "tester", n=cfg.n)
        l_stream = SampleStream(sampler, noisy, seed, "learner", n=cfg.n)

    if cfg.mode == "gauss_pair":
        verdict = run_tester(t_stream, params)
    else:
        verdict = run_kwise_tester(t_stream, params)
    out = {"trial": i, "seed": seed, "verdict": _strip(verdict.to_json())}
    if not (verdict.accept or force_learn):
        out["learn"] = None
        return out

    if cfg.mode == "gauss_pair":
        predictor, rep = run_learner(l_stream, params)
    elif cfg.mode == "cube_pair":
        model, rep = run_cube_halfspace_learner(l_stream, params)

        def predictor(X, _m=model):
            return predict(_m, X)
    else:
        predictor, rep = run_decision_list_learner(l_stream, cfg.eps, params=params)

    if cfg.dataset:
        err = float(np.mean(np.asarray(predictor(held.X)) != held.y))
        opt = None
    else:
        err, opt = _holdout_stats(cfg, predictor, clean, noisy, sampler, seed)
    learn = _strip(rep.with_holdout(err).to_json())
    learn["opt_estimate"] = opt
    learn["target_met"] = None if opt is None else bool(err <= opt + cfg.target_excess)
    out["learn"] = learn
    return out


def _strip(d: dict) -> dict:
    d = dict(d)
    d.pop("effective_params", None)
    d.pop("deviations", None)
    return d


def _approx_trial(cfg: ExperimentConfig, i: int) -> dict:
    ap = cfg.approx
    theta = float(ap.get("theta", 0.0))
    w = float(ap.get("window", 2.0))
    degrees = [int(d) for d in ap.get("degrees", [10, 20, 40, 80])]
    target = Ramp(theta, cfg.eps)
    grid = np.linspace(-w, w, 20001)
    fv = target(grid)
    mc = int(ap.get("mc_samples", 20000))
    z = stage_rng(_trial_seed(cfg.seed, i), "tester").standard_normal(mc)
    zin = z[np.abs(z) <= w]
    rows = []
    for d in degrees:
        s = project(target, w, d)
        err = float(np.max(np.abs(series_eval(s, grid) - fv)))
        l1 = float(np.mean(np.abs(series_eval(s, zin) - target(zin)))) if zin.size else None
        rows.append({
            "degree": d,
            "sup_error": err,
            "scaled_error": err * d,
            "gaussian_l1_in_window": l1,
            "max_abs_coeff": float(np.max(np.abs(s.coeffs))),
            "coeff_bound": coefficient_bound(d) if d <= 300 else math.inf,
        })
    return {"trial": i, "seed": _trial_seed(cfg.seed, i), "rows": rows}


def _run_one(cfg_json: dict, i: int, force_learn: bool) -> dict:
    cfg = config_from_dict(cfg_json)
    if cfg.mode == "approx_bench":
        return _approx_trial(cfg, i)
    return _pair_trial(cfg, _resolve_params(cfg), i, force_learn)


def _map_trials(cfg: ExperimentConfig, force_learn: bool) -> list:
    raw = _raw(cfg)
    idx = range(cfg.trials)
    workers = min(worker_count(), cfg.trials)
    if workers <= 1:
        return [_run_one(raw, i, force_learn) for i in idx]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, [raw] * cfg.trials, idx, [force_learn] * cfg.trials))


def _raw(cfg: ExperimentConfig) -> dict:
    d = cfg.to_json()
    d["constants"] = {k: cfg.constants[k] for k in cfg.explicit_constants}
    return {k: v for k, v in d.items() if v not in ({}, None)}


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(math.fsum(xs) / len(xs)) if xs else None


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def run(config: ExperimentConfig, *, force_learn: bool = False, timestamp: Optional[str] = None):
    """Execute ``config``. Returns ``(report, exit_code)``.

    Exit codes: 0 tester accepted and learner met its target, 2 tester
    rejected (majority of trials), 3 tester accepted but the learner missed
    ``opt + target_excess``, 1 internal error (the report then carries
    ``error``). The report is a plain dict whose key order is fixed.
    """
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    report = {"mode": config.mode, "timestamp": ts, "config": config.to_json()}
    try:
        code = _execute(config, force_learn, report)
    except Exception as exc:  # reported, not raised: the CLI maps this to exit 1
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        report.setdefault("deviations", [])
        code = EXIT_ERROR
    report["exit_code"] = code
    return report, code


def _execute(config: ExperimentConfig, force_learn: bool, report: dict) -> int:
    if config.mode == "fooling":
        return _execute_fooling(config, report)
    params = _resolve_params(config)
    report["effective_params"] = params.to_json() if params is not None else {}
    devs = list(params.deviations) if params is not None else []
    trials = _map_trials(config, force_learn)
    report["trials"] = trials
    report["deviations"] = _dedupe(devs)
    if config.mode == "approx_bench":
        report["aggregate"] = {"trials": len(trials)}
        return EXIT_OK
    accepts = [t["verdict"]["accept"] for t in trials]
    learns = [t["learn"] for t in trials if t["learn"] is not None]
    met = [l["target_met"] for l in learns if l["target_met"] is not None]
    agg = {
        "trials": len(trials),
        "accept_rate": sum(accepts) / len(trials),
        "learner_runs": len(learns),
        "mean_holdout_error": _mean([l["holdout_error"] for l in learns]),
        "mean_opt_estimate": _mean([l["opt_estimate"] for l in learns]),
        "target_met_rate": (sum(met) / len(met)) if met else None,
    }
    report["aggregate"] = agg
    if agg["accept_rate"] < 0.5 and not force_learn:
        return EXIT_REJECTED
    if agg["mean_holdout_error"] is not None and agg["mean_opt_estimate"] is not None:
        if agg["mean_holdout_error"] > agg["mean_opt_estimate"] + config.target_excess:
            return EXIT_MISSED_TARGET
    return EXIT_REJECTED if agg["accept_rate"] < 0.5 else EXIT_OK


def _execute_fooling(config: ExperimentConfig, report: dict) -> int:
    fo = config.fooling
    fc = FoolingConfig(
        M=int(fo["M"]), N=int(fo["N"]), n=config.n, alpha=float(fo.get("alpha", 0.05)),
        delta2=float(fo.get("delta2", 0.1)), delta_fool=float(fo.get("delta_fool", 0.9)),
        domain=fo.get("domain", "gaussian"), seed=config.seed, trials=config.trials,
    )
    if fc.domain != "gaussian":
        raise ValueError("the fooling runner ships desk testers for the Gaussian domain only")
    tester = desk_gaussian_tester(fc.n, fc.N, eps=config.eps)
    learner = desk_l1_learner(fc.n, fc.N, eps=config.eps)
    rep = run_fooling_experiment(fc, tester, learner)
    out = rep.to_json()
    report["fooling"] = out
    report["deviations"] = _dedupe([
        f"tester budget: {fc.N // 2} tail samples and {fc.N - fc.N // 2} moment samples at Delta=2, moment_tol=1.0",
        f"learner budget: degree 2 on at most {fc.N} samples",
    ])
    ok_acc = out["acceptance_empirical"] >= out["acceptance_bound"] - 3 * out["acceptance_sigma"]
    ok_adv = out["advantage_empirical"] <= out["advantage_bound"] + 3 * out["advantage_sigma"]
    report["aggregate"] = {"acceptance_within_bound": bool(ok_acc), "advantage_within_bound": bool(ok_adv)}
    return EXIT_OK if ok_acc and ok_adv else EXIT_MISSED_TARGET


def report_to_text(report: dict) -> str:
    """Serialize with a fixed key order (insertion order) and a trailing newline."""
    return json.dumps(report, indent=2, allow_nan=True) + "\n"


def report_without_timestamp(report: dict) -> str:
    r = dict(report)
    r.pop("timestamp", None)
    return report_to_text(r)
