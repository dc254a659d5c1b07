# backend/src/force_dataset.py

"""
Image/wrench dataset assembly for the force regressor: significance
gating inside contact periods, input preparation, normalization and the
standard / object-held-out splits.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from .core import Wrench
from .deformation import DEFAULT_CONTACT_THRESHOLD, DeformationTriple, compose_triple, detect_contact
from .errors import DimensionError, EmptyDatasetError, ParameterError
from .gelsim import ContactState, Frame

log = logging.getLogger(__name__)

# --- Configuration ---
INPUT_SHAPE = (3, 60, 80)                              # channels, rows, cols
CHANNEL_GAINS = (4.0, 40.0, 1.0)                       # darker, brighter, reference
DEFAULT_GATE_SCALE = (0.05, 0.05, 0.1, 5e-5, 5e-5, 5e-5)
DEFAULT_EPSILON = 0.15
STD_FLOOR = 1e-6


# --- Domain Types ---

class Normalization(BaseModel):
    """Per-component standardization of wrenches."""

    model_config = ConfigDict(frozen=True)

    mean: Tuple[float, float, float, float, float, float]
    scale: Tuple[float, float, float, float, float, float]

    @field_validator("scale")
    @classmethod
    def _positive(cls, value):
        if min(value) <= 0:
            raise ValueError("normalization scale must be positive")
        return value

    @classmethod
    def fit(cls, wrenches: np.ndarray) -> "Normalization":
        wrenches = np.asarray(wrenches, dtype=np.float64).reshape(-1, 6)
        if len(wrenches) == 0:
            raise EmptyDatasetError("cannot normalize an empty set of wrenches")
        mean = wrenches.mean(axis=0)
        std = np.maximum(wrenches.std(axis=0), STD_FLOOR)
        return cls(mean=tuple(float(v) for v in mean), scale=tuple(float(v) for v in std))

    def normalize(self, wrenches: np.ndarray) -> np.ndarray:
        return (np.asarray(wrenches, dtype=np.float64) - np.array(self.mean)) / np.array(self.scale)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * np.array(self.scale) + np.array(self.mean)


class Sample(BaseModel):
    model_config = ConfigDict(frozen=True)

    triple_path: str
    wrench: Wrench
    object_id: str = Field(..., min_length=1)
    session_id: str
    frame_index: int = 0
    frame_path: Optional[str] = None
    reference_path: Optional[str] = None
    contact: Optional[ContactState] = None
    seed: Tuple[int, ...] = ()


class DatasetManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    samples: List[Sample] = Field(..., min_length=1)
    normalization: Normalization

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def object_ids(self) -> List[str]:
        return sorted({s.object_id for s in self.samples})

    def wrenches(self) -> np.ndarray:
        return np.stack([s.wrench.as_array() for s in self.samples])


def _manifest(samples: Sequence[Sample], normalize_on: Optional[Sequence[Sample]] = None) -> DatasetManifest:
    if not samples:
        raise EmptyDatasetError("no samples")
    basis = normalize_on if normalize_on is not None else samples
    norm = Normalization.fit(np.stack([s.wrench.as_array() for s in basis]))
    return DatasetManifest(samples=list(samples), normalization=norm)


# --- Gating ---

def gate_sample(current: Wrench, saved_in_period: Sequence[Wrench],
                normalization: Union[Normalization, Sequence[float]] = DEFAULT_GATE_SCALE,
                epsilon: float = DEFAULT_EPSILON) -> bool:
    """
    True iff `current` is at least `epsilon` away from every wrench saved this period.

    Distances are taken after dividing by the per-component scale of
    `normalization`, or by the given scale vector directly.
    """
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if not saved_in_period:
        return True
    scale = np.asarray(getattr(normalization, "scale", normalization), dtype=np.float64)
    saved = np.stack([w.as_array() for w in saved_in_period])
    distances = np.linalg.norm((saved - current.as_array()) / scale, axis=1)
    return bool(distances.min() >= epsilon)


# --- Input preparation ---

def prepare_input(triple: DeformationTriple, shape: Tuple[int, int] = INPUT_SHAPE[1:]) -> np.ndarray:
    """(3, rows, cols) regressor input: gained channels, edge-padded, block-averaged."""
    target_h, target_w = shape
    h, w = triple.shape
    factor = int(np.ceil(max(h / target_h, w / target_w)))
    pad_h, pad_w = target_h * factor - h, target_w * factor - w
    pads = ((pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2))

    channels = []
    for image, gain in zip((triple.darker, triple.brighter, triple.reference), CHANNEL_GAINS):
        padded = np.pad(gain * image.data, pads, mode="edge")
        channels.append(padded.reshape(target_h, factor, target_w, factor).mean(axis=(1, 3)))
    return np.stack(channels)


# --- Collection ---

def collect_dataset(streams: Iterable[Tuple[str, Iterable[Frame]]], out_dir: Union[str, Path],
                    epsilon: float = DEFAULT_EPSILON,
                    gate_scale: Sequence[float] = DEFAULT_GATE_SCALE,
                    energy_threshold: float = DEFAULT_CONTACT_THRESHOLD) -> DatasetManifest:
    """
    Save gated contact frames of every (session_id, frames) stream.

    Each kept frame is stored as the downsampled regressor input (.npy)
    and as an 8-bit tactile PGM; the session reference is written once.

    A contact period starts when the detector switches on and ends when it
    switches off; inside a period a frame is saved only if its wrench is
    significantly different from all wrenches already saved in it.
    """
    from .formats import write_pgm  # formats imports this module

    out_dir = Path(out_dir)
    samples: List[Sample] = []
    frames_seen = 0

    for session_id, frames in streams:
        session_dir = out_dir / "inputs" / session_id
        session_dir.mkdir(parents=True, exist_ok=True)
        saved_in_period: List[Wrench] = []
        in_contact = False
        periods = 0
        reference_path: Optional[Path] = None

        for index, frame in enumerate(tqdm(frames, desc=f"collect {session_id}", leave=False, disable=None)):
            frames_seen += 1
            triple = compose_triple(frame.reference, frame.tactile)
            touching = detect_contact(triple.darker, energy_threshold)
            if touching != in_contact:
                saved_in_period = []
                in_contact = touching
                periods += touching
            if not touching or not gate_sample(frame.wrench, saved_in_period, gate_scale, epsilon):
                continue

            if reference_path is None:
                reference_path = Path("inputs") / session_id / "reference.pgm"
                write_pgm(out_dir / reference_path, frame.reference)
            rel_path = Path("inputs") / session_id / f"{index:05d}.npy"
            frame_path = rel_path.with_suffix(".pgm")
            np.save(out_dir / rel_path, prepare_input(triple).astype(np.float32))
            write_pgm(out_dir / frame_path, frame.tactile)
            saved_in_period.append(frame.wrench)
            samples.append(Sample(
                triple_path=rel_path.as_posix(),
                wrench=frame.wrench,
                object_id=frame.object_id,
                session_id=session_id,
                frame_index=index,
                frame_path=frame_path.as_posix(),
                reference_path=reference_path.as_posix(),
                contact=frame.contact,
                seed=frame.seed,
            ))
        log.debug(f"{session_id}: {periods} contact periods")

    if not samples:
        raise EmptyDatasetError(f"no frame passed contact detection and gating ({frames_seen} frames)")
    log.info(f"📡 Collected {len(samples)} samples from {frames_seen} frames")
    return _manifest(samples)


def load_inputs(manifest: DatasetManifest, root: Union[str, Path]) -> np.ndarray:
    root = Path(root)
    arrays = [np.load(root / s.triple_path).astype(np.float64) for s in manifest.samples]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise DimensionError(f"inconsistent input shapes in manifest: {sorted(shapes)}")
    return np.stack(arrays)


# --- Splits ---

def split_standard(manifest: DatasetManifest, n_test: int, seed: int) -> Tuple[DatasetManifest, DatasetManifest]:
    """Uniform random hold-out of `n_test` samples; normalization from the train part."""
    count = len(manifest)
    if not 1 <= n_test < count:
        raise ParameterError(f"n_test must lie in [1, {count - 1}], got {n_test}")
    rng = np.random.default_rng(seed)
    test_mask = np.zeros(count, dtype=bool)
    test_mask[rng.permutation(count)[:n_test]] = True

    train = [s for s, held in zip(manifest.samples, test_mask) if not held]
    test = [s for s, held in zip(manifest.samples, test_mask) if held]
    return _manifest(train), _manifest(test, normalize_on=train)


def split_by_object(manifest: DatasetManifest,
                    test_object_ids: Iterable[str]) -> Tuple[DatasetManifest, DatasetManifest]:
    """Every sample of the listed objects goes to the test part."""
    test_ids = set(test_object_ids)
    if not test_ids:
        raise ParameterError("object split needs at least one test object")
    unknown = test_ids - set(manifest.object_ids)
    if unknown:
        raise ParameterError(f"unknown test object ids: {sorted(unknown)}")

    train = [s for s in manifest.samples if s.object_id not in test_ids]
    test = [s for s in manifest.samples if s.object_id in test_ids]
    if not train:
        raise ParameterError("object split leaves no training samples")
    return _manifest(train), _manifest(test, normalize_on=train)
