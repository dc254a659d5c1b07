#!/usr/bin/env python3
"""
Run Reconstruction Benchmark

Calibrates on simulated frames and scores sphere-press reconstructions.
"""

import sys
from pathlib import Path

# Add src and the backend package to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "backend"))

import argparse
import logging

from dotenv import load_dotenv

from recon_benchmark import run_recon_benchmark
from src.errors import GelSenseError
from src.settings import load_config

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main():
    load_dotenv()
    parser = argparse.ArgumentParser(description="Run the closed-loop reconstruction benchmark")
    parser.add_argument("--config", type=str, default="../../configs/default.yaml", help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the configured seed")
    parser.add_argument("--presses", type=int, default=None, help="Number of evaluation presses")
    parser.add_argument("--output", type=str, default="../results/recon_scores.json",
                        help="Path to save benchmark results")
    args = parser.parse_args()

    logger.info("=" * 60)
    logger.info("RECONSTRUCTION BENCHMARK")
    logger.info("=" * 60)
    logger.info(f"Config: {args.config}")
    logger.info(f"Output: {args.output}")

    try:
        results = run_recon_benchmark(load_config(args.config, args.seed), args.output, args.presses)
    except GelSenseError as e:
        logger.error(f"Benchmark failed: {e}", exc_info=True)
        sys.exit(e.exit_code)

    logger.info("")
    logger.info("Summary:")
    logger.info(f"  MAE: {results['summary']['MAE_mm']:.4f} mm")
    logger.info(f"  Std: {results['summary']['Std_mm']:.4f} mm")
    logger.info(f"  Presses: {results['summary']['n_images']} (excluded {len(results['excluded'])})")


if __name__ == "__main__":
    main()
