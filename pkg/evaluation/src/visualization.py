"""
Visualization utilities for benchmark results.

Loss curves, per-component MAE against the baseline, and the per-press
reconstruction error distribution.
"""

import logging
from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from utils import load_json

logger = logging.getLogger(__name__)

# Set style
sns.set_style("whitegrid")
plt.rcParams['figure.figsize'] = (10, 6)
plt.rcParams['font.size'] = 12


class BenchmarkVisualizer:
    """Generate figures from the benchmark JSON files."""

    def __init__(self, output_dir: str = "../results/figures"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _save(self, fig, name: str, save_path: Optional[str]) -> Path:
        path = Path(save_path) if save_path else self.output_dir / name
        fig.tight_layout()
        fig.savefig(path, dpi=200, bbox_inches='tight')
        plt.close(fig)
        logger.info(f"Figure saved to {path}")
        return path

    def plot_loss_curves(self, force_file: str, save_path: Optional[str] = None) -> Path:
        """Training loss and held-out MAE per epoch, one line per split."""
        results = load_json(force_file)
        fig, (ax_loss, ax_mae) = plt.subplots(1, 2, figsize=(14, 5))
        for split, data in results['splits'].items():
            curve = pd.DataFrame(data['loss_curve'])
            best = data['model'].get('selected_epoch')
            ax_loss.plot(curve['epoch'], curve['train_loss'], label=split)
            ax_mae.plot(curve['epoch'], curve['held_out_mae'], label=split)
            if best:
                ax_mae.axvline(best, linestyle='--', alpha=0.4)
        ax_loss.set_xlabel('Epoch', fontweight='bold')
        ax_loss.set_ylabel('Mean L1 loss (normalized)', fontweight='bold')
        ax_mae.set_xlabel('Epoch', fontweight='bold')
        ax_mae.set_ylabel('Held-out MAE (normalized)', fontweight='bold')
        ax_loss.legend()
        ax_mae.legend()
        return self._save(fig, "loss_curves.png", save_path)

    def plot_component_mae(self, force_file: str, save_path: Optional[str] = None) -> Path:
        """Model-to-baseline MAE ratio per wrench component and split."""
        results = load_json(force_file)
        rows = []
        for split, data in results['splits'].items():
            for component, ratio in zip(results['components'], data['mae_ratio']):
                rows.append({'component': component, 'split': split, 'ratio': ratio})
        frame = pd.DataFrame(rows)

        fig, ax = plt.subplots(figsize=(10, 6))
        sns.barplot(data=frame, x='component', y='ratio', hue='split', ax=ax, palette="husl")
        ax.axhline(1.0, color='red', linestyle='--', alpha=0.6, label='Constant-mean baseline')
        ax.set_xlabel('Wrench component', fontsize=14, fontweight='bold')
        ax.set_ylabel('MAE / baseline MAE', fontsize=14, fontweight='bold')
        ax.set_title('Force Estimation vs Baseline', fontsize=16, fontweight='bold')
        ax.legend()
        return self._save(fig, "component_mae.png", save_path)

    def plot_press_errors(self, recon_file: str, save_path: Optional[str] = None) -> Path:
        """Reconstructed peak depth against the commanded press depth."""
        results = load_json(recon_file)
        presses = pd.DataFrame(results['presses'])
        fig, ax = plt.subplots(figsize=(8, 6))
        ax.scatter(presses['press_depth_mm'], presses['peak_depth_mm'], alpha=0.8)
        lims = np.array([0.0, max(presses['press_depth_mm'].max(), presses['peak_depth_mm'].max()) * 1.05])
        ax.plot(lims, lims, 'k--', alpha=0.5, label='ideal')
        ax.set_xlabel('Press depth (mm)', fontsize=14, fontweight='bold')
        ax.set_ylabel('Reconstructed peak depth (mm)', fontsize=14, fontweight='bold')
        ax.set_title(f"Sphere presses: MAE {results['summary']['MAE_mm']:.4f} mm", fontsize=16, fontweight='bold')
        ax.legend()
        return self._save(fig, "press_depths.png", save_path)


def generate_all_visualizations(recon_file: Optional[str], force_file: Optional[str],
                                output_dir: str = "../results/figures") -> None:
    visualizer = BenchmarkVisualizer(output_dir)
    if recon_file:
        visualizer.plot_press_errors(recon_file)
    if force_file:
        visualizer.plot_loss_curves(force_file)
        visualizer.plot_component_mae(force_file)
    logger.info(f"✅ Figures written to {output_dir}")
