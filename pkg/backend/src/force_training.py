# backend/src/force_training.py

"""
Training loop, epoch selection and per-component evaluation of the
wrench regressor.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from .core import Wrench
from .errors import EmptyDatasetError, NumericError, TrainingError
from .force_dataset import DatasetManifest, Normalization, load_inputs
from .force_regressor import Adam, RegressorParams, forward, init_params, loss_and_gradient

log = logging.getLogger(__name__)


# --- Domain Types ---

class TrainConfig(BaseModel):
    """Desk-scale defaults; the full-scale run used 200 epochs at the same batch size and rate."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(5e-4, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    epochs: int = Field(30, ge=1)
    seed: int = 0


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    held_out_mae: float


@dataclass(frozen=True)
class TrainResult:
    params: RegressorParams
    selected_epoch: int
    loss_curve: List[EpochRecord]


class EvalReport(BaseModel):
    """Per-component absolute-error statistics in physical units (N, N·m)."""

    components: List[str] = Field(default_factory=lambda: list(Wrench.COMPONENTS))
    mae: List[float]
    std: List[float]
    n: int = Field(..., ge=1)
    selected_epoch: Optional[int] = None

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae))


# --- Training ---

def _held_out_mae(params: RegressorParams, inputs: np.ndarray, targets: np.ndarray,
                  batch_size: int) -> float:
    errors = []
    for start in range(0, len(inputs), batch_size):
        pred = forward(params, inputs[start:start + batch_size])
        errors.append(np.abs(pred - targets[start:start + batch_size]))
    return float(np.concatenate(errors).mean())


def fit_arrays(train_x: np.ndarray, train_y: np.ndarray, held_x: np.ndarray, held_y: np.ndarray,
               config: TrainConfig, init: Optional[RegressorParams] = None) -> TrainResult:
    """
    Adam over shuffled mini-batches of normalized targets.

    The shuffle of epoch e is drawn from default_rng([seed, e]). The
    returned parameters are those of the epoch with the lowest held-out
    mean normalized MAE (earliest epoch on ties).
    """
    if len(train_x) == 0 or len(held_x) == 0:
        raise EmptyDatasetError("training and held-out sets must be non-empty")
    params = init if init is not None else init_params(config.seed, tuple(train_x.shape[1:]))
    theta = params.flatten()
    optimizer = Adam(theta.size, config.learning_rate, config.beta1, config.beta2, config.eps)

    best: Optional[Tuple[float, int, RegressorParams]] = None
    curve: List[EpochRecord] = []
    for epoch in tqdm(range(1, config.epochs + 1), desc="train", disable=None):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_x))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            try:
                loss, grad = loss_and_gradient(params, train_x[batch], train_y[batch])
                theta = optimizer.step(theta, grad.flatten())
                params = params.with_vector(theta)
            except NumericError as exc:
                raise TrainingError(f"training diverged in epoch {epoch}: {exc}", epoch) from exc
            total += loss

        held_mae = _held_out_mae(params, held_x, held_y, config.batch_size)
        if not np.isfinite(held_mae):
            raise TrainingError(f"held-out error is not finite in epoch {epoch}", epoch)
        curve.append(EpochRecord(epoch=epoch, train_loss=total / len(train_x), held_out_mae=held_mae))
        log.debug(f"epoch {epoch}: train loss {total / len(train_x):.4f}, held-out MAE {held_mae:.4f}")
        if best is None or held_mae < best[0]:
            best = (held_mae, epoch, params)

    log.info(f"✅ Training finished: selected epoch {best[1]} (held-out MAE {best[0]:.4f})")
    return TrainResult(params=best[2], selected_epoch=best[1], loss_curve=curve)


def train(train_set: DatasetManifest, config: TrainConfig, held_out: DatasetManifest,
          root: Union[str, Path]) -> TrainResult:
    """Train on `train_set`; both sets are normalized with the training statistics."""
    norm = train_set.normalization
    log.info(f"🚀 Training on {len(train_set)} samples, {len(held_out)} held out")
    return fit_arrays(
        load_inputs(train_set, root), norm.normalize(train_set.wrenches()),
        load_inputs(held_out, root), norm.normalize(held_out.wrenches()),
        config,
    )


# --- Evaluation ---

def _report(predicted: np.ndarray, actual: np.ndarray, selected_epoch: Optional[int]) -> EvalReport:
    errors = np.abs(predicted - actual)
    return EvalReport(
        mae=[float(v) for v in errors.mean(axis=0)],
        std=[float(v) for v in errors.std(axis=0)],
        n=len(errors),
        selected_epoch=selected_epoch,
    )


def evaluate_arrays(params: RegressorParams, inputs: np.ndarray, wrenches: np.ndarray,
                    normalization: Normalization, selected_epoch: Optional[int] = None,
                    batch_size: int = 64) -> EvalReport:
    if len(inputs) == 0:
        raise EmptyDatasetError("nothing to evaluate")
    predicted = np.concatenate([
        forward(params, inputs[start:start + batch_size]) for start in range(0, len(inputs), batch_size)
    ])
    return _report(normalization.denormalize(predicted), wrenches, selected_epoch)


def evaluate(params: RegressorParams, test_set: DatasetManifest, normalization: Normalization,
             root: Union[str, Path], selected_epoch: Optional[int] = None) -> EvalReport:
    return evaluate_arrays(params, load_inputs(test_set, root), test_set.wrenches(),
                           normalization, selected_epoch)


def evaluate_constant(test_set: DatasetManifest, normalization: Normalization) -> EvalReport:
    """Baseline that always predicts the training mean wrench."""
    actual = test_set.wrenches()
    predicted = np.broadcast_to(np.array(normalization.mean), actual.shape)
    return _report(predicted, actual, None)
