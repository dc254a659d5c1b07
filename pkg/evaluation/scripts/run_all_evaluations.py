#!/usr/bin/env python3
"""
Run Complete Evaluation Suite

Runs the reconstruction and force benchmarks, draws the figures and writes
a markdown report.
"""

import sys
import os
from pathlib import Path

# Add src and the backend package to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "backend"))

import argparse
import logging

from dotenv import load_dotenv

from force_benchmark import run_force_benchmark
from recon_benchmark import run_recon_benchmark
from src.settings import load_config
from utils import format_markdown_table
from visualization import generate_all_visualizations

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def generate_final_report(recon_results: dict, force_results: dict, output_path: str) -> str:
    """Markdown summary of both benchmarks."""
    report = "# Tactile Sensor Pipeline Benchmarks\n\n"

    report += "## Shape Reconstruction\n\n"
    summary = recon_results['summary']
    report += f"- **MAE**: {summary['MAE_mm']:.4f} mm\n"
    report += f"- **Std**: {summary['Std_mm']:.4f} mm\n"
    report += f"- **Presses**: {summary['n_images']} ({len(recon_results['excluded'])} excluded)\n"
    report += f"- **Fitted scale**: {recon_results['mm_per_pixel']:.5f} mm/px\n\n"
    report += format_markdown_table({"per-press MAE (mm)": recon_results['per_press_statistics']}) + "\n"

    report += "## Force Estimation\n\n"
    components = force_results['components']
    for split, data in force_results['splits'].items():
        report += f"### {split.capitalize()} split (selected epoch {data['model'].get('selected_epoch')})\n\n"
        rows = {
            "model MAE": dict(zip(components, data['model']['mae'])),
            "baseline MAE": dict(zip(components, data['baseline']['mae'])),
            "ratio": dict(zip(components, data['mae_ratio'])),
        }
        report += format_markdown_table(rows) + "\n"
    for key, value in force_results['summary'].items():
        report += f"- **{key}**: {value}\n"

    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(report)
    logger.info(f"Final report saved to: {output_path}")
    return report


def main():
    load_dotenv()
    parser = argparse.ArgumentParser(description="Run the complete benchmark suite")
    parser.add_argument("--config", type=str, default="../../configs/default.yaml", help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the configured seed")
    parser.add_argument("--output-dir", type=str, default="../results", help="Directory to save all results")
    args = parser.parse_args()

    os.makedirs(args.output_dir, exist_ok=True)
    recon_path = os.path.join(args.output_dir, "recon_scores.json")
    force_path = os.path.join(args.output_dir, "force_scores.json")

    logger.info("=" * 70)
    logger.info("COMPLETE EVALUATION SUITE")
    logger.info("=" * 70)

    logger.info("Step 1/3: Running reconstruction benchmark...")
    recon_results = run_recon_benchmark(load_config(args.config, args.seed), recon_path)
    logger.info("✅ Reconstruction benchmark complete!")

    logger.info("Step 2/3: Running force benchmark...")
    force_results = run_force_benchmark(args.config, os.path.join(args.output_dir, "force_runs"), force_path,
                                        args.seed)
    logger.info("✅ Force benchmark complete!")

    logger.info("Step 3/3: Drawing figures...")
    generate_all_visualizations(recon_path, force_path, os.path.join(args.output_dir, "figures"))

    generate_final_report(recon_results, force_results, os.path.join(args.output_dir, "final_report.md"))
    logger.info("=" * 70)
    logger.info("ALL EVALUATIONS COMPLETE!")
    logger.info("=" * 70)
    logger.info(f"Results saved to: {args.output_dir}/")


if __name__ == "__main__":
    main()
