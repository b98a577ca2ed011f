"""
Experiment runner CLI

Usage:
    python -m harness estimate --config configs/estimate.json --out runs/estimate
    python -m harness compare-kf --config configs/compare_kf.json --seed 3
    python -m harness plan --config configs/plan_tmaze.json --jobs 4

Exit codes: 0 success, 2 invalid config, 3 simulation diverged.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from agent.base import DivergenceError
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import run_seed
from .report import REPORT_FILE, TRACE_TEMPLATE, RunReport, write_trace


load_dotenv()

logger = logging.getLogger('harness')

SUBCOMMANDS = {
    'estimate': 'estimate',
    'control': 'control',
    'plan': 'plan',
    'noise': 'noise',
    'compare-kf': 'compare_kf',
    'compare-pid': 'compare_pid',
}
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def resolve_output_dir(cfg: ExperimentConfig, out: Optional[str]) -> Path:
    """--out, then the config's output_dir, then FEA_OUT_DIR (default 'runs')"""
    return Path(out or cfg.output_dir or os.getenv('FEA_OUT_DIR', 'runs'))


def run_experiment(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> RunReport:
    """
    Run every seed of an experiment and write its outputs

    Args:
        cfg: Validated config
        out_dir: Directory for trace_<seed>.csv and report.json
        jobs: Worker processes for seeds (1 runs in-process)

    Returns:
        RunReport (also written to out_dir/report.json)

    Raises:
        DivergenceError: If any seed diverges
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        results = [run_seed(cfg, seed) for seed in cfg.seeds]

    report = RunReport(experiment=cfg.kind, config=cfg.to_dict())
    for seed, result in zip(cfg.seeds, results):
        write_trace(out_dir / TRACE_TEMPLATE.format(seed=seed), result.header, result.rows)
        report.add_seed(seed, result.metrics)
    report.wall_clock_seconds = time.perf_counter() - started
    report.to_json(out_dir / REPORT_FILE)

    log_summary(report, out_dir)
    return report


def log_summary(report: RunReport, out_dir: Path):
    logger.info("=" * 60)
    logger.info(f"{report.experiment} summary")
    logger.info("=" * 60)
    for entry in report.results:
        metrics = ', '.join(f"{k}={v:.6g}" for k, v in entry['metrics'].items())
        logger.info(f"seed {entry['seed']}: {metrics}")
    logger.info(f"Outputs: {out_dir}")
    logger.info(f"Wall clock: {report.wall_clock_seconds:.2f}s")
    logger.info("=" * 60)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Run active inference experiments')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for command in SUBCOMMANDS:
        sub = subparsers.add_parser(command, help=f'Run a {command} experiment')
        sub.add_argument('--config', required=True, help='Path to the JSON experiment config')
        sub.add_argument('--out', help='Output directory (default: config output_dir, then FEA_OUT_DIR)')
        sub.add_argument('--seed', type=int, help='Run only this seed, overriding the config')
        sub.add_argument('--jobs', type=int, default=1, help='Worker processes for seeds (default: 1)')
    return parser


def main(argv=None) -> int:
    """
    Run an experiment from the command line

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        for error in e.errors:
            logger.error(f"Invalid config: {error}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"Cannot read config {args.config}: {e}")
        return EXIT_CONFIG

    expected = SUBCOMMANDS[args.command]
    if cfg.kind != expected:
        logger.error(f"Invalid config: experiment: is {cfg.kind!r} but the subcommand is {args.command!r}")
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0:
            logger.error("Invalid config: seeds: --seed must be non-negative")
            return EXIT_CONFIG
        cfg = cfg.with_seeds([args.seed])

    try:
        run_experiment(cfg, resolve_output_dir(cfg, args.out), jobs=max(1, args.jobs))
    except DivergenceError as e:
        logger.error(f"Simulation diverged at step {e.step}: {e}")
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
