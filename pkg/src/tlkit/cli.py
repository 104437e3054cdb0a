"""Command-line entry point: ``tlkit run``, ``tlkit gen`` and ``tlkit fool``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .data import DIST_NAMES, coin_labeler, halfspace_labeler, make_distribution, stage_rng, with_label_noise
from .runner import EXIT_ERROR, report_to_text, run

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tlkit", description="Tester-learner experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a tester-learner experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--force-learn", action="store_true", help="run the learner even when the tester rejects")
    r.add_argument("--out", help="write the JSON report here instead of stdout")
    r.add_argument("--csv-summary", help="also write one CSV row per trial to this path")

    g = sub.add_parser("gen", help="write a labeled sample as CSV")
    g.add_argument("--dist", required=True, choices=DIST_NAMES)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--samples", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--labels", choices=("halfspace", "coin"), default="halfspace",
                   help="halfspace: sign of the coordinate sum; coin: fair coins")
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--out", help="output CSV path (default stdout)")

    f = sub.add_parser("fool", help="run the fooling harness from a JSON config")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    return p


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv_summary(report: dict, path: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "seed", "accept", "stage", "worst_index", "gap", "holdout_error", "opt_estimate"])
        for t in report.get("trials", []):
            v = t.get("verdict", {})
            lr = t.get("learn") or {}
            w.writerow([t["trial"], t["seed"], v.get("accept"), v.get("stage"), v.get("worst_index"), v.get("gap"),
                        lr.get("holdout_error"), lr.get("opt_estimate")])


def _cmd_run(args, *, fooling: bool) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"tlkit: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if fooling and cfg.mode != "fooling":
        print(f"tlkit: config error: mode: 'fool' needs mode 'fooling', got {cfg.mode!r}", file=sys.stderr)
        return EXIT_ERROR
    report, code = run(cfg, force_learn=getattr(args, "force_learn", False))
    if "error" in report:
        print(f"tlkit: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    _emit(report_to_text(report), args.out or cfg.output)
    summary = getattr(args, "csv_summary", None)
    if summary:
        _write_csv_summary(report, summary)
    elif cfg.csv_summary and (args.out or cfg.output):
        _write_csv_summary(report, str(Path(args.out or cfg.output).with_suffix(".csv")))
    return code


def _cmd_gen(args) -> int:
    if args.n < 1 or args.samples < 1:
        print("tlkit: --n and --samples must be positive", file=sys.stderr)
        return EXIT_ERROR
    try:
        dist = make_distribution(args.dist, args.n)
        lab = halfspace_labeler(np.ones(args.n) / np.sqrt(args.n)) if args.labels == "halfspace" else coin_labeler()
        if args.noise > 0:
            lab = with_label_noise(lab, args.noise)
    except ValueError as exc:
        print(f"tlkit: {exc}", file=sys.stderr)
        return EXIT_ERROR
    X = dist.sample(stage_rng(args.seed, "tester"), args.samples)
    y = lab(X, stage_rng(args.seed, "labels"))
    header = [f"x{j + 1}" for j in range(args.n)] + ["y"]
    lines = [",".join(header)]
    for row, lbl in zip(X, y):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(lbl)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gen":
        return _cmd_gen(args)
    return _cmd_run(args, fooling=args.command == "fool")


if __name__ == "__main__":
    sys.exit(main())
