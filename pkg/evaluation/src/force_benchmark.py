"""
Force Benchmark: learned regressor vs constant-mean baseline

Drives the command-line pipeline (simulate-dataset, train, evaluate) for the
standard and the object-held-out split and compares per-component MAE.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from src.core import Wrench
from src.main import main as gelsense

from utils import load_json, save_json

logger = logging.getLogger(__name__)

SPLITS = ("standard", "object")


class ForceBenchmark:
    """One dataset, two splits, a trained model and a baseline per split."""

    def __init__(self, config_path: str, work_dir: str, seed: Optional[int] = None):
        self.config_path = str(config_path)
        self.work_dir = Path(work_dir)
        self.seed = seed

    def _cli(self, *argv: Any) -> None:
        prefix = ["--config", self.config_path]
        if self.seed is not None:
            prefix += ["--seed", str(self.seed)]
        code = gelsense(prefix + [str(a) for a in argv])
        if code != 0:
            raise RuntimeError(f"gelsense {argv[0]} exited with code {code}")

    def collect(self) -> Path:
        manifest = self.work_dir / "data" / "manifest.jsonl"
        if manifest.exists():
            logger.info(f"♻️  Reusing dataset {manifest}")
        else:
            self._cli("simulate-dataset", "--out", self.work_dir / "data")
        return manifest

    def run_split(self, manifest: Path, split: str) -> Dict[str, Any]:
        model_dir = self.work_dir / f"model_{split}"
        eval_dir = self.work_dir / f"eval_{split}"
        self._cli("train", "--manifest", manifest, "--split", split, "--out", model_dir)
        common = ["evaluate", "--manifest", manifest, "--split", split, "--out", eval_dir]
        self._cli(*common, "--params", model_dir / "params.bin")
        self._cli(*common, "--baseline")

        learned = load_json(str(eval_dir / "eval_report.json"))
        baseline = load_json(str(eval_dir / "baseline_report.json"))
        ratio = np.asarray(learned["mae"]) / np.asarray(baseline["mae"])
        return {
            "model": learned,
            "baseline": baseline,
            "mae_ratio": ratio.tolist(),
            "mean_mae_ratio": float(ratio.mean()),
            "beats_baseline": bool(np.all(ratio < 1.0)),
            "loss_curve": pd.read_csv(model_dir / "loss_curve.csv").to_dict(orient="list"),
        }

    def run(self, splits: Sequence[str] = SPLITS) -> Dict[str, Any]:
        manifest = self.collect()
        results = {split: self.run_split(manifest, split) for split in splits}
        summary = {f"{split}_mean_mae_ratio": results[split]["mean_mae_ratio"] for split in splits}
        summary.update({f"{split}_beats_baseline": results[split]["beats_baseline"] for split in splits})
        if set(SPLITS) <= set(splits):
            summary["generalization_gap"] = (results["object"]["mean_mae_ratio"]
                                             - results["standard"]["mean_mae_ratio"])
        return {"components": list(Wrench.COMPONENTS), "splits": results, "summary": summary}


def run_force_benchmark(config_path: str, work_dir: str, output_path: str,
                        seed: Optional[int] = None) -> Dict[str, Any]:
    """Run the benchmark and save its JSON results."""
    results = ForceBenchmark(config_path, work_dir, seed).run()
    save_json(results, output_path)
    return results
