#!/usr/bin/env python3
"""
Copycat RPL simulator - command line entry point

Runs one scenario (replicated) or the full baseline/variant/interval grid and
writes CSV results plus a manifest into the output directory.
"""
import argparse
import logging
import sys
from typing import List, Optional

from config import VERSION, ConfigError, config, parse_config, with_overrides
from models.schemas import RunManifest, ScenarioConfig
from services.experiment_service import cell_name, run_cell, run_matrix, seeds_for
from services.report_service import EmptyResultsError, ReportError, get_report_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOPOLOGY = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copycat-sim",
        description="Discrete-event simulator of RPL networks under the copycat DIO replay attack"
    )
    parser.add_argument("--config", help="scenario file (key = value); defaults apply when omitted")
    parser.add_argument("--out", default=None, help=f"output directory (default {config.OUTPUT_DIR})")
    parser.add_argument("--grid", action="store_true", help="run baseline plus both variants at intervals 1-4 s")
    parser.add_argument("--baseline-only", action="store_true", help="with --grid, run only the baseline cell")
    parser.add_argument("--seed", type=int, help="first seed; replications use seed, seed+1, ...")
    parser.add_argument("--replications", type=int, help="number of seeds per cell")
    parser.add_argument("--detector", choices=("on", "off"), default="on", help="IQR detector report")
    parser.add_argument("--workers", type=int, default=config.WORKERS, help="process pool size for replications")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="DEBUG, INFO, WARNING, ...")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    return parser


def load_scenario(args: argparse.Namespace) -> ScenarioConfig:
    cfg = parse_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if not overrides:
        return cfg
    try:
        return with_overrides(cfg, **overrides)
    except ValueError as e:
        raise ConfigError(str(e), "/".join(f"--{k}" for k in overrides)) from e


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        cfg = load_scenario(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    detector = args.detector == "on"
    out_dir = args.out or config.OUTPUT_DIR
    logger.info(f"Copycat simulator {VERSION}: seed {cfg.seed}, {cfg.replications} replications")

    if args.grid:
        cells = run_matrix(cfg, baseline_only=args.baseline_only, workers=args.workers, detector=detector)
    else:
        interval = cfg.replay_interval_s if cfg.attacked else None
        cells = [run_cell(cell_name(cfg.attack_variant, interval), cfg, args.workers, detector)]

    failed = [c for c in cells if c.error]
    if failed and len(failed) == len(cells):
        for cell in failed:
            logger.error(f"Cell {cell.scenario}: {cell.error}")
        if any(c.error_kind == "topology" for c in failed):
            return EXIT_TOPOLOGY
        return 1

    manifest = RunManifest(
        tool_version=VERSION,
        config_path=args.config,
        config=cfg,
        seeds=seeds_for(cfg),
        output_dir=out_dir,
        grid=args.grid,
        detector=detector,
        cells=[c.scenario for c in cells],
        fingerprints={c.scenario: [o.report.fingerprint for o in c.outcomes] for c in cells},
    )
    try:
        get_report_service(out_dir).emit_outputs(cells, manifest)
    except (ReportError, EmptyResultsError) as e:
        logger.error(f"Output error: {e}")
        return EXIT_IO

    logger.info(f"Done: {len(cells) - len(failed)}/{len(cells)} cells written to {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
