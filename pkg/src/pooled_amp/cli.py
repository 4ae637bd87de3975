"""Command line entry point: ``pooled-amp run|se|diagnose-scaling``.

Exit codes: 0 success, 2 validation error, 3 solver or AMP failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import SolverError, ValidationError
from .harness import (
    ExperimentConfig, emit_csv, emit_json, run_experiment, scaling_diagnostic, se_trajectories,
)

log = logging.getLogger("pooled_amp")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pooled-amp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run a Monte Carlo experiment"),
                            ("se", "state evolution predictions only (no sampling)"),
                            ("diagnose-scaling", "check how |tY| scales with p")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field; VALUE is parsed as JSON when possible")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "run":
            sp.add_argument("--threads", type=int, help="worker threads across trials")
    return ap


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config).with_overrides(args.override)
    extra = []
    if args.out:
        extra.append(f"out={json.dumps(args.out)}")
    if getattr(args, "threads", None):
        extra.append(f"threads={args.threads}")
    if args.command == "se":
        extra.append('methods=["se-only"]')
    return cfg.with_overrides(extra)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        out = Path(cfg.out)
        if args.command == "diagnose-scaling":
            report = scaling_diagnostic(cfg)
            out.mkdir(parents=True, exist_ok=True)
            (out / "scaling.json").write_text(json.dumps(report, indent=1, sort_keys=True))
            print(f"ratio_exact={report['ratio_exact']:.4f} ratio_shifted={report['ratio_shifted']:.4f}")
            return EXIT_OK
        table = run_experiment(cfg)
        stem = "se" if args.command == "se" else "results"
        csv_path = emit_csv(table, out / f"{stem}.csv", with_runtime=cfg.record_runtime)
        if cfg.debug_dump:
            emit_json(table, out / f"{stem}.json")
        if args.command == "se":
            (out / "se_trajectories.json").write_text(json.dumps(se_trajectories(cfg)))
        log.info("wrote %s (%d rows)", csv_path, len(table.rows))
        print(csv_path)
        return EXIT_OK
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        where = f" at iteration {exc.iteration}" if exc.iteration is not None else ""
        print(f"solver failure{where}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
