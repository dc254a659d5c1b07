# backend/src/settings.py

"""
Run configuration.

Precedence: CLI --seed > YAML file > environment (GELSENSE_*, nested
keys joined with "__", .env honored) > defaults. Unknown keys are errors.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .calibration import DEFAULT_BIN_WIDTH, GridSpec
from .core import PixelScale
from .errors import ConfigError
from .force_dataset import DEFAULT_EPSILON, DEFAULT_GATE_SCALE
from .force_training import TrainConfig
from .gelsim import DEFAULT_MM_PER_PIXEL, GelSpec, OpticalModel
from .reconstruction import FilterParams

log = logging.getLogger(__name__)


# --- Sections ---

class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SensorSection(_Section):
    raw_width: int = Field(640, ge=8)
    raw_height: int = Field(480, ge=8)
    width: int = Field(460, ge=8)
    height: int = Field(345, ge=8)
    mm_per_pixel: float = Field(DEFAULT_MM_PER_PIXEL, gt=0)
    reference_level: float = Field(0.75, gt=0, lt=1)
    reference_variation: float = Field(0.05, ge=0, lt=0.25)
    noise_std: float = Field(0.0, ge=0)
    distortion_k1: float = 0.08
    distortion_k2: float = 0.0

    @property
    def scale(self) -> PixelScale:
        return PixelScale(mm_per_pixel=self.mm_per_pixel)

    @property
    def raw_size(self) -> Tuple[int, int]:
        return self.raw_width, self.raw_height

    @property
    def size(self) -> Tuple[int, int]:
        return self.width, self.height


class CalibrationSection(_Section):
    ball_radius_mm: float = Field(4.0, gt=0)
    ball_press_depth_mm: float = Field(1.0, gt=0)
    eval_ball_radius_mm: float = Field(2.5, gt=0)
    n_eval_presses: int = Field(20, ge=1)
    bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0)
    contact_threshold: float = Field(0.002, gt=0, lt=1)
    grid: GridSpec = Field(default_factory=GridSpec)
    marker_radius_mm: float = Field(0.6, gt=0)
    board_press_depth_mm: float = Field(0.5, gt=0)
    marker_threshold: float = Field(0.05, gt=0, lt=1)
    marker_min_area: int = Field(10, ge=1)


class CollectionSection(_Section):
    n_objects: int = Field(20, ge=1)
    trajectories_per_object: int = Field(9, ge=1)
    press_steps: int = Field(6, ge=1)
    motion_steps: int = Field(6, ge=0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    energy_threshold: float = Field(50.0, gt=0)
    gate_scale: Tuple[float, float, float, float, float, float] = DEFAULT_GATE_SCALE
    n_test: int = Field(200, ge=1)
    test_objects: List[str] = Field(default_factory=list)


class PathsSection(_Section):
    out_dir: Path = Path("runs/default")


# --- Run configuration ---

class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="GELSENSE_",
        env_nested_delimiter="__",
        extra="forbid",
        frozen=True,
    )

    seed: int
    gel: GelSpec = Field(default_factory=GelSpec)
    optics: OpticalModel = Field(default_factory=OpticalModel)
    sensor: SensorSection = Field(default_factory=SensorSection)
    calibration: CalibrationSection = Field(default_factory=CalibrationSection)
    recon: FilterParams = Field(default_factory=FilterParams)
    collection: CollectionSection = Field(default_factory=CollectionSection)
    training: TrainConfig = Field(default_factory=TrainConfig)
    paths: PathsSection = Field(default_factory=PathsSection)

    @property
    def gel_spec(self) -> GelSpec:
        """Gel with the configured optics."""
        return self.gel.model_copy(update={"optics": self.optics})

    @property
    def train_config(self) -> TrainConfig:
        return self.training.model_copy(update={"seed": self.seed})


def load_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> RunConfig:
    """Read a YAML run config; raise ConfigError on any problem."""
    data = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping of sections")
    if seed is not None:
        data["seed"] = seed

    try:
        config = RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    log.debug(f"Loaded config (seed {config.seed}) from {path or 'environment/defaults'}")
    return config
