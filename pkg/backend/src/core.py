# backend/src/core.py

"""
Image and geometry types plus the pixel-level primitives every stage shares:
luminance conversion, separable Gaussian smoothing and blob detection.

Grids are row-major numpy arrays of shape (height, width). Containers copy
their input and mark it read-only, so a constructed image never changes.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import ClassVar, List, NamedTuple, Optional, Sequence, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from .errors import DimensionError, ParameterError

log = logging.getLogger(__name__)

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("grid contains non-finite values")
    arr.setflags(write=False)
    return arr


# --- Domain Types ---

@dataclass(frozen=True, eq=False)
class _Grid:
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        self._check()

    def _check(self) -> None:
        pass

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def with_data(self, data: np.ndarray):
        """Same kind of grid (and metadata) carrying new values."""
        return dataclasses.replace(self, data=data)


@dataclass(frozen=True, eq=False)
class GrayImage(_Grid):
    """Intensities in [0, 1]."""

    def _check(self) -> None:
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ParameterError("gray intensities must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class DiffImage(_Grid):
    """Signed tactile-minus-reference differences in [-1, 1]."""

    def _check(self) -> None:
        if self.data.size and (self.data.min() < -1.0 or self.data.max() > 1.0):
            raise ParameterError("difference values must lie in [-1, 1]")


@dataclass(frozen=True, eq=False)
class DepthMap(_Grid):
    """Indentation depth in mm; 0 is the undeformed surface."""

    h0: Optional[float] = None

    def _check(self) -> None:
        if self.data.size and self.data.min() < 0.0:
            raise ParameterError("depths must be non-negative")
        if self.h0 is not None and self.data.size and self.data.max() > self.h0:
            raise ParameterError(f"depths must not exceed the gel thickness {self.h0} mm")


class PixelScale(BaseModel):
    model_config = ConfigDict(frozen=True)

    mm_per_pixel: float = Field(..., gt=0, description="Millimeters on the sensing surface per pixel")

    @property
    def pixel_area(self) -> float:
        return self.mm_per_pixel ** 2


class Wrench(BaseModel):
    """6D force/torque: forces in N, torques in N·m."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    fx: float = 0.0
    fy: float = 0.0
    fz: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    COMPONENTS: ClassVar[tuple] = ("fx", "fy", "fz", "tx", "ty", "tz")

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.fz, self.tx, self.ty, self.tz], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Wrench":
        values = [float(v) for v in values]
        if len(values) != 6:
            raise DimensionError(f"a wrench has 6 components, got {len(values)}")
        return cls(**dict(zip(cls.COMPONENTS, values)))


GridT = TypeVar("GridT", bound=_Grid)


class Blob(NamedTuple):
    centroid_x: float
    centroid_y: float
    area: int


# --- Operations ---

def to_grayscale(rgb: Union[np.ndarray, Sequence[np.ndarray]]) -> GrayImage:
    """Luminance of an RGB grid, given as (H, W, 3) or as three (H, W) channels."""
    if isinstance(rgb, np.ndarray) and rgb.ndim == 3 and rgb.shape[-1] == 3:
        channels = [rgb[..., k] for k in range(3)]
    else:
        channels = [np.asarray(c, dtype=np.float64) for c in rgb]
        if len(channels) != 3:
            raise DimensionError(f"expected 3 channels, got {len(channels)}")
    shapes = {c.shape for c in channels}
    if len(shapes) != 1:
        raise DimensionError(f"channel dimensions differ: {sorted(shapes)}")
    for c in channels:
        if c.size and (np.min(c) < 0.0 or np.max(c) > 1.0):
            raise ParameterError("channel intensities must lie in [0, 1]")
    r, g, b = (np.asarray(c, dtype=np.float64) for c in channels)
    gray = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    return GrayImage(np.clip(gray, 0.0, 1.0))


def gaussian_kernel(sigma: float, kernel_radius: int) -> np.ndarray:
    """Normalized 1D Gaussian taps for offsets -radius..radius."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if kernel_radius < 1:
        raise ParameterError(f"kernel_radius must be >= 1, got {kernel_radius}")
    x = np.arange(-kernel_radius, kernel_radius + 1, dtype=np.float64)
    taps = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return taps / taps.sum()


def gaussian_blur(img: GridT, sigma: float, kernel_radius: int) -> GridT:
    """Separable blur, horizontal pass then vertical, edge-replicated borders."""
    taps = gaussian_kernel(sigma, int(kernel_radius))
    out = ndimage.correlate1d(img.data, taps, axis=1, mode="nearest")
    out = ndimage.correlate1d(out, taps, axis=0, mode="nearest")
    if isinstance(img, GrayImage):
        out = np.clip(out, 0.0, 1.0)
    elif isinstance(img, DiffImage):
        out = np.clip(out, -1.0, 1.0)
    elif isinstance(img, DepthMap):
        out = np.maximum(out, 0.0)
        if img.h0 is not None:
            out = np.minimum(out, img.h0)
    return img.with_data(out)


def detect_blobs(diff: DiffImage, threshold: float, min_area: int = 1) -> List[Blob]:
    """
    Connected regions where the reference is brighter than the tactile
    image by more than `threshold`.

    4-connected components; centroids are weighted by the intensity drop.
    Ordered by (rounded centroid row, centroid column).
    """
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must lie in (0, 1), got {threshold}")
    drop = -diff.data
    mask = drop > threshold
    labels, count = ndimage.label(mask)
    if count == 0:
        return []

    index = np.arange(1, count + 1)
    areas = ndimage.sum_labels(mask, labels, index)
    centroids = ndimage.center_of_mass(np.where(mask, drop, 0.0), labels, index)

    blobs = [
        Blob(float(cx), float(cy), int(area))
        for (cy, cx), area in zip(centroids, areas)
        if area >= min_area
    ]
    blobs.sort(key=lambda b: (math.floor(b.centroid_y + 0.5), b.centroid_x))
    log.debug(f"Detected {len(blobs)} blobs above {threshold} (of {count} components)")
    return blobs
