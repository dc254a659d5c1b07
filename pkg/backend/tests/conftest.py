"""Shared fixtures: one sensor geometry, a few reference frames and a depth table calibrated once per session."""

from pathlib import Path

import numpy as np
import pytest

from src.calibration import calibrate_depth
from src.core import PixelScale
from src.gelsim import DEFAULT_MM_PER_PIXEL, ContactState, GelSpec, make_reference, press_image, procedural_object

REPO_ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def default_config_path() -> Path:
    return REPO_ROOT / "configs" / "default.yaml"


@pytest.fixture(scope="session")
def scale() -> PixelScale:
    return PixelScale(mm_per_pixel=DEFAULT_MM_PER_PIXEL)


@pytest.fixture(scope="session")
def gel() -> GelSpec:
    return GelSpec()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def sensor_reference():
    """460x345 no-contact frame (the rectified sensing area)."""
    return make_reference(460, 345, seed=11)


@pytest.fixture(scope="session")
def small_reference():
    return make_reference(200, 150, seed=5)


@pytest.fixture(scope="session")
def ball_press(gel, scale, sensor_reference):
    """4 mm ball pressed 1 mm deep at (230, 172)."""
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale)
    contact = ContactState(press_depth=1.0, center=(230.0, 172.0))
    return press_image(gel, ball, contact, sensor_reference, scale)


@pytest.fixture(scope="session")
def depth_table(gel, scale, sensor_reference, ball_press):
    return calibrate_depth(sensor_reference, ball_press, 4.0, scale, h0=gel.h0)
