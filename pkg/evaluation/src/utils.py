"""
Utility functions for the evaluation framework.
"""

import json
import os
from typing import Any, Dict, List, Sequence

import numpy as np
from scipy import stats
import logging

logger = logging.getLogger(__name__)


def load_json(file_path: str) -> Dict[str, Any]:
    """Load JSON file and return data."""
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        logger.error(f"File not found: {file_path}")
        raise
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {file_path}: {e}")
        raise


def save_json(data: Dict[str, Any], file_path: str) -> None:
    """Save data to JSON file (sorted keys, so reruns compare byte for byte)."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.info(f"Saved results to {file_path}")


def calculate_confidence_interval(
    scores: Sequence[float],
    confidence: float = 0.95
) -> tuple[float, float]:
    """Student-t confidence interval of the mean."""
    scores = np.asarray(scores, dtype=np.float64)
    mean = float(np.mean(scores))
    if len(scores) < 2:
        return mean, mean
    stderr = stats.sem(scores)
    interval = stderr * stats.t.ppf((1 + confidence) / 2., len(scores) - 1)
    return mean - float(interval), mean + float(interval)


def calculate_statistics(scores: Sequence[float]) -> Dict[str, float]:
    """Calculate descriptive statistics for scores."""
    return {
        "mean": float(np.mean(scores)),
        "median": float(np.median(scores)),
        "std": float(np.std(scores)),
        "min": float(np.min(scores)),
        "max": float(np.max(scores)),
        "count": len(scores)
    }


def format_markdown_table(
    rows: Dict[str, Dict[str, float]],
    first_column: str = "Metric",
    precision: int = 4
) -> str:
    """Rows keyed by label, columns taken from the first row."""
    if not rows:
        return ""
    columns: List[str] = list(next(iter(rows.values())).keys())
    table = "| " + " | ".join([first_column] + columns) + " |\n"
    table += "|" + "|".join(["---"] * (len(columns) + 1)) + "|\n"
    for label, values in rows.items():
        cells = [f"{values[c]:.{precision}g}" if isinstance(values[c], float) else str(values[c]) for c in columns]
        table += "| " + " | ".join([label] + cells) + " |\n"
    return table
