"""Command-line harness: simulate, track, eval, oracle.

All commands are deterministic under a fixed seed.  Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .engine import ModelBundle
from .errors import EotError, NumericalFailure, ParseError
from .metrics import MetricConfig, gospa, ospa
from .runtime import (read_results, replay_ingest, run, write_results,
                      write_summary)
from .scenario import (read_truth, simulate, write_measurements, write_truth)
from .validation import run_suites

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eotspa",
                     description="Extended object tracking via particle-based "
                                 "belief propagation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate ground truth and measurements")
    p_sim.add_argument("--config", required=True, type=Path)
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_sim.add_argument("--out", required=True, type=Path,
                       help="output directory")

    p_track = sub.add_parser("track", help="run the tracker on a measurement file")
    p_track.add_argument("--measurements", required=True, type=Path)
    p_track.add_argument("--config", required=True, type=Path)
    p_track.add_argument("--seed", type=int, default=None)
    p_track.add_argument("--out", required=True, type=Path)
    p_track.add_argument("--truth", type=Path, default=None,
                         help="optional ground truth for per-frame metrics")
    p_track.add_argument("--particles", type=int, default=None)
    p_track.add_argument("--iterations", type=int, default=None)
    p_track.add_argument("--gate", type=float, default=None,
                         help="censor PO/measurement pairs beyond this distance")
    p_track.add_argument("--threads", type=int, default=None,
                         help="worker threads (default: EOT_THREADS or 1)")

    p_eval = sub.add_parser("eval", help="recompute metrics from result files")
    p_eval.add_argument("--results", required=True, type=Path)
    p_eval.add_argument("--truth", required=True, type=Path)
    p_eval.add_argument("--base", choices=["gw", "euclidean"], default="gw")
    p_eval.add_argument("--cutoff", type=float, default=20.0)
    p_eval.add_argument("--order", type=float, default=1.0)
    p_eval.add_argument("--out", type=Path, default=None,
                        help="output CSV (default: stdout)")

    p_oracle = sub.add_parser("oracle", help="run the oracle validation suites")
    p_oracle.add_argument("--suite", choices=["likelihood", "tree", "loopy", "all"],
                          default="all")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--out", type=Path, default=None,
                          help="write a JSON report")
    return parser


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.scenario is None:
        raise ParseError("config has no 'scenario' section")
    seed = args.seed if args.seed is not None else cfg.seed
    rng = np.random.default_rng(seed)
    truth, frames = simulate(cfg.scenario, cfg.model.measurement_model(), rng)
    args.out.mkdir(parents=True, exist_ok=True)
    write_truth(args.out / "truth.jsonl", truth)
    write_measurements(args.out / "measurements.jsonl", frames)
    print(f"wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = load_config(args.config)
    spa = cfg.spa
    overrides = {}
    if args.particles is not None:
        overrides["num_particles"] = args.particles
    if args.iterations is not None:
        overrides["num_iterations"] = args.iterations
    if args.gate is not None:
        overrides["gate_radius"] = args.gate
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("EOT_THREADS", "1"))
    overrides["workers"] = threads
    spa = dataclasses.replace(spa, **overrides)
    seed = args.seed if args.seed is not None else cfg.seed

    frames = replay_ingest(args.measurements)
    truth = read_truth(args.truth) if args.truth is not None else None
    bundle = ModelBundle(
        transition=cfg.model.transition_model(),
        measurement=cfg.model.measurement_model(),
        birth=cfg.model.birth_model(),
        survival_prob=cfg.model.p_s,
    )
    results = run(frames, bundle, spa, seed, truth=truth,
                  shape=cfg.model.shape, metric_cfg=cfg.metric)
    args.out.mkdir(parents=True, exist_ok=True)
    write_results(args.out / "results.jsonl", results)
    write_summary(args.out / "summary.csv", results)
    total_ms = sum(r.runtime_ms for r in results)
    print(f"tracked {len(results)} frames in {total_ms / 1e3:.2f} s "
          f"-> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    metric = MetricConfig(order=args.order, cutoff=args.cutoff, base=args.base)
    results = read_results(args.results)
    truth = read_truth(args.truth)
    lines = [",".join(["step", "ospa_total", "ospa_state", "ospa_card",
                       "gospa_total", "gospa_state", "gospa_missed",
                       "gospa_false", "n_detected"])]
    for record in results:
        t = record["t"]
        if t >= len(truth):
            raise ParseError(f"results reference frame {t} beyond truth")
        truth_set = [(np.asarray(o.kin[:2]), np.asarray(o.ext))
                     for o in truth[t] if o.alive]
        est_set = [(np.asarray(d["x"][:2]), np.asarray(d["E"]))
                   for d in record.get("detections", [])]
        o_total, o_state, o_card = ospa(truth_set, est_set, metric)
        g_total, g_state, g_missed, g_false = gospa(truth_set, est_set, metric)
        lines.append(",".join(map(repr, [t, o_total, o_state, o_card,
                                         g_total, g_state, g_missed, g_false,
                                         len(est_set)])))
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        args.out.write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    names = (["likelihood", "tree", "loopy"] if args.suite == "all"
             else [args.suite])
    reports = run_suites(names, args.seed)
    all_passed = True
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(f"[{status}] {report.name} ({len(report.cases)} cases)")
        all_passed &= report.passed
    if args.out is not None:
        args.out.write_text(json.dumps(
            {"seed": args.seed, "suites": [r.to_dict() for r in reports]},
            indent=2, default=float))
        print(f"report: {args.out}")
    return EXIT_OK if all_passed else EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    handlers = {"simulate": cmd_simulate, "track": cmd_track,
                "eval": cmd_eval, "oracle": cmd_oracle}
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"eotspa: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as exc:
        print(f"eotspa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (EotError, ValueError) as exc:
        print(f"eotspa: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
