"""Command-line entry point.

    commpert --config experiment.json --out results/
    commpert --suite closure --out results/
"""

from __future__ import annotations

import argparse
import logging
import sys

from .runner import ConfigError, load_config, run_experiment
from .suites import SUITES, run_suite

log = logging.getLogger("commpert")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="commpert", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="experiment configuration (JSON)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--order", type=int, help="override max_order")
    p.add_argument("--slices", type=int, help="fixed slice count (disables refinement)")
    p.add_argument("--suite", help=f"run a named suite: {', '.join(SUITES)}")
    p.add_argument("--seed", type=int, help="random seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if bool(args.config) == bool(args.suite):
        log.error("give exactly one of --config or --suite")
        return 2
    if args.suite:
        try:
            summary = run_suite(args.suite, args.out, seed=args.seed or 0)
        except ValueError as exc:
            log.error("%s", exc)
            return 2
        for check in summary["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            log.info("%s %s measured=%s threshold=%s", status, check["name"],
                     check["measured"], check["threshold"])
        return 0 if summary["passed"] else 1

    try:
        cfg = load_config(args.config, order=args.order, slices=args.slices, seed=args.seed)
        report = run_experiment(cfg, args.out)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return 2
    for name, entry in report["methods"].items():
        if entry["status"] == "ok":
            log.info("%-22s ok", name)
        else:
            log.info("%-22s failed: %s", name, entry["reason"])
    return 1 if report["all_failed"] else 0


if __name__ == "__main__":
    sys.exit(main())
