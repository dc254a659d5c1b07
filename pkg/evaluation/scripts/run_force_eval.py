#!/usr/bin/env python3
"""
Run Force Benchmark

Collects the synthetic dataset, trains on the standard and the object split,
and compares each model with the constant-mean baseline.
"""

import sys
from pathlib import Path

# Add src and the backend package to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "backend"))

import argparse
import logging

from dotenv import load_dotenv

from force_benchmark import run_force_benchmark

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main():
    load_dotenv()
    parser = argparse.ArgumentParser(description="Run the force-estimation benchmark")
    parser.add_argument("--config", type=str, default="../../configs/default.yaml", help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the configured seed")
    parser.add_argument("--work-dir", type=str, default="../results/force_runs",
                        help="Directory for the dataset, models and reports")
    parser.add_argument("--output", type=str, default="../results/force_scores.json",
                        help="Path to save benchmark results")
    args = parser.parse_args()

    logger.info("=" * 60)
    logger.info("FORCE BENCHMARK")
    logger.info("=" * 60)

    try:
        results = run_force_benchmark(args.config, args.work_dir, args.output, args.seed)
    except RuntimeError as e:
        logger.error(f"Benchmark failed: {e}", exc_info=True)
        sys.exit(1)

    logger.info("")
    logger.info("Summary:")
    for key, value in results['summary'].items():
        logger.info(f"  {key}: {value}")


if __name__ == "__main__":
    main()
