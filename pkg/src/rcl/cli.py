"""Command line interface.

    rcl run      --config cfg.json [--seed N] [--out report.json]
    rcl mc       --config cfg.json [--seed N] [--trials N] [--out ...]
    rcl fairness --config cfg.json [--seed N] [--trials N] [--out ...]
    rcl deviate  --config cfg.json [--seed N] [--trials N] [--out ...]
    rcl exhibit  --config cfg.json [--seed N] [--out ...]

Exit status: 0 on success, 1 on usage errors, 2 when an honest-mode run
violated a protocol guarantee.  Reports are JSON with sorted keys, so a
given (config, seed) always produces byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .harness import (ExperimentConfig, deviation_gain, expost_exhibit,
                      fairness_test, monte_carlo)
from .simulator import run as run_once


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="rcl", description="consensus lottery simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "mc", "fairness", "deviate", "exhibit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        if name in ("mc", "fairness", "deviate"):
            sp.add_argument("--trials", type=int, default=None)
    return p


def _load_config(args) -> ExperimentConfig:
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_dict(json.load(fh))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "trials", None) is not None:
        cfg = replace(cfg, trials=args.trials)
    return cfg


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        print(f"rcl: bad config: {e}", file=sys.stderr)
        return 1

    honest = cfg.deviator is None
    status = 0
    if args.command == "run":
        if cfg.context is None:
            print("rcl: 'run' needs an explicit context in the config",
                  file=sys.stderr)
            return 1
        rec = run_once(cfg.n, cfg.f, cfg.context, seed=cfg.seed,
                       protocol=cfg.protocol, deviations=cfg.deviation_map(),
                       se_mode=cfg.se_mode, prime=cfg.prime, record=True)
        report = {"command": "run", "config": cfg.to_dict(),
                  "result": rec.report_dict()}
        if honest and rec.outcome.violations:
            status = 2
    elif args.command == "mc":
        stats = monte_carlo(cfg)
        report = {"command": "mc", "config": cfg.to_dict(),
                  "result": stats.report_dict(cfg.params)}
        if honest and (stats.violation_counts or stats.detector_fires):
            status = 2
    elif args.command == "fairness":
        result = fairness_test(cfg)
        report = {"command": "fairness", "config": cfg.to_dict(),
                  "result": result}
        if honest and not result["fairness_bound_ok"]:
            status = 2
    elif args.command == "deviate":
        if cfg.deviator is None:
            print("rcl: 'deviate' needs a deviator in the config",
                  file=sys.stderr)
            return 1
        result = deviation_gain(cfg)
        report = {"command": "deviate", "config": cfg.to_dict(),
                  "result": result.report_dict()}
    else:  # exhibit
        result = expost_exhibit(cfg.n, cfg.f, beta=cfg.beta, seed=cfg.seed,
                                prime=cfg.prime)
        report = {"command": "exhibit", "config": cfg.to_dict(),
                  "result": result}
    _emit(report, args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
