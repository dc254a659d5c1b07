# backend/src/calibration.py

"""
Sensor calibration: virtual-marker rectification and the single-image
intensity-to-depth table.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage
from sklearn.isotonic import IsotonicRegression

from .core import Blob, DepthMap, DiffImage, GrayImage, PixelScale, _freeze, detect_blobs
from .errors import CalibrationError, DimensionError, GeometryError, ParameterError

log = logging.getLogger(__name__)

RAW_SIZE = (640, 480)
OUT_SIZE = (460, 345)
DEFAULT_BIN_WIDTH = 1.0 / 255.0
IDW_POWER = 2.0


# --- Domain Types ---

class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rows: int = Field(5, ge=3)
    cols: int = Field(5, ge=3)
    spacing_mm: float = Field(2.0, gt=0, description="Distance between cylinder centers, mm")


class ContactCircle(NamedTuple):
    center_x: float
    center_y: float
    radius_px: float


@dataclass(frozen=True, eq=False)
class RemapField:
    """Per-output-pixel source coordinates in the raw frame, plus crop metadata."""

    map_x: np.ndarray
    map_y: np.ndarray
    crop_origin: Tuple[int, int]
    raw_width: int = RAW_SIZE[0]
    raw_height: int = RAW_SIZE[1]
    mm_per_pixel: Optional[float] = None

    def __post_init__(self):
        map_x, map_y = _freeze(self.map_x), _freeze(self.map_y)
        if map_x.shape != map_y.shape:
            raise DimensionError(f"x-map {map_x.shape} and y-map {map_y.shape} differ")
        object.__setattr__(self, "map_x", map_x)
        object.__setattr__(self, "map_y", map_y)
        object.__setattr__(self, "crop_origin", (int(self.crop_origin[0]), int(self.crop_origin[1])))

    @property
    def out_width(self) -> int:
        return int(self.map_x.shape[1])

    @property
    def out_height(self) -> int:
        return int(self.map_x.shape[0])

    @classmethod
    def identity(cls, raw_size: Tuple[int, int] = RAW_SIZE,
                 out_size: Tuple[int, int] = OUT_SIZE) -> "RemapField":
        """Centered crop without any warping."""
        (raw_w, raw_h), (out_w, out_h) = raw_size, out_size
        origin = ((raw_w - out_w) // 2, (raw_h - out_h) // 2)
        rows, cols = np.indices((out_h, out_w), dtype=np.float64)
        return cls(cols + origin[0], rows + origin[1], origin, raw_w, raw_h)


@dataclass(frozen=True, eq=False)
class IntensityDepthTable:
    """Depth (mm) for intensity-drop bins centered on k * bin_width."""

    bin_width: float
    depths: np.ndarray
    h0: Optional[float] = None

    def __post_init__(self):
        depths = np.array(self.depths, dtype=np.float64).reshape(-1)
        if not self.bin_width > 0:
            raise ParameterError("bin_width must be positive")
        if depths.size == 0 or not np.all(np.isfinite(depths)):
            raise ParameterError("depth table must be non-empty and finite")
        if depths[0] != 0.0:
            raise ParameterError("the zero-drop bin must map to depth 0")
        if np.any(np.diff(depths) < 0.0):
            raise ParameterError("depth table must be non-decreasing")
        if self.h0 is not None and depths.max() > self.h0:
            raise ParameterError(f"depths exceed the gel thickness {self.h0} mm")
        depths.setflags(write=False)
        object.__setattr__(self, "depths", depths)

    @property
    def max_drop(self) -> float:
        return (len(self.depths) - 1) * self.bin_width

    @property
    def bin_centers(self) -> np.ndarray:
        return np.arange(len(self.depths)) * self.bin_width


# --- Marker detection ---

def _drop_image(ref: GrayImage, tactile: GrayImage) -> DiffImage:
    if ref.shape != tactile.shape:
        raise DimensionError(f"reference {ref.shape} and tactile {tactile.shape} differ in size")
    return DiffImage(tactile.data - ref.data)


def detect_markers(ref: GrayImage, board: GrayImage, threshold: float = 0.05,
                   min_area: int = 10) -> List[Blob]:
    """Centroids of the cylinder imprints in a board press."""
    return detect_blobs(_drop_image(ref, board), threshold, min_area)


def _as_points(markers: Union[Sequence[Blob], np.ndarray]) -> np.ndarray:
    if isinstance(markers, np.ndarray):
        return np.asarray(markers, dtype=np.float64).reshape(-1, 2)
    return np.array([(m.centroid_x, m.centroid_y) for m in markers], dtype=np.float64).reshape(-1, 2)


def _assign_grid(points: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(rows, cols, 2) marker positions, rows by y then columns by x."""
    by_y = points[np.argsort(points[:, 1], kind="stable")]
    rows = by_y.reshape(grid.rows, grid.cols, 2)
    order = np.argsort(rows[:, :, 0], axis=1, kind="stable")
    return np.take_along_axis(rows, order[:, :, None], axis=1)


def _fit_anchor_grid(grid_pts: np.ndarray, grid: GridSpec) -> Tuple[float, float, float, float]:
    """Least-squares (cx, cy, a, b) of x = cx + aJ - bI, y = cy + bJ + aI over the 5 anchors."""
    ci, cj = grid.rows // 2, grid.cols // 2
    offsets = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)]
    anchors = np.array([grid_pts[ci + di, cj + dj] for di, dj in offsets])

    spread = np.linalg.svd(anchors - anchors.mean(axis=0), compute_uv=False)
    if spread[0] == 0.0 or spread[-1] < 1e-6 * spread[0]:
        raise CalibrationError("anchor markers are collinear; cannot fit the grid")

    design, target = [], []
    for (di, dj), (x, y) in zip(offsets, anchors):
        design.append([1.0, 0.0, dj, -di])
        target.append(x)
        design.append([0.0, 1.0, di, dj])
        target.append(y)
    solution, *_ = np.linalg.lstsq(np.array(design), np.array(target), rcond=None)
    cx, cy, a, b = (float(v) for v in solution)
    if math.hypot(a, b) < 1e-6:
        raise CalibrationError("fitted marker pitch is zero")
    return cx, cy, a, b


def _idw(query_x: np.ndarray, query_y: np.ndarray, sites: np.ndarray,
         values: np.ndarray, power: float = IDW_POWER) -> np.ndarray:
    """Inverse-distance weighted values (N, 2) at the query grid; exact at the sites."""
    dx = query_x[..., None] - sites[:, 0]
    dy = query_y[..., None] - sites[:, 1]
    dist2 = dx * dx + dy * dy
    hit = dist2 == 0.0
    with np.errstate(divide="ignore"):
        weights = np.where(hit, 0.0, dist2 ** (-power / 2.0))
    exact = hit.any(axis=-1)
    weights[exact] = hit[exact].astype(np.float64)
    weights /= weights.sum(axis=-1, keepdims=True)
    return weights @ values


# --- Rectification ---

def build_remap(markers: Union[Sequence[Blob], np.ndarray], grid: GridSpec,
                raw_size: Tuple[int, int] = RAW_SIZE,
                out_size: Tuple[int, int] = OUT_SIZE) -> Tuple[RemapField, PixelScale]:
    """
    Rectification map from the detected board markers.

    The five central markers fix an equidistant target grid; the residual
    displacement of every marker is spread over the image by IDW and the
    result is cropped to `out_size` around the fitted grid center.
    """
    points = _as_points(markers)
    expected = grid.rows * grid.cols
    if len(points) != expected:
        raise CalibrationError(f"expected {expected} markers, detected {len(points)}")

    grid_pts = _assign_grid(points, grid)
    cx, cy, a, b = _fit_anchor_grid(grid_pts, grid)
    pitch = math.hypot(a, b)

    I, J = np.indices((grid.rows, grid.cols), dtype=np.float64)
    I -= grid.rows // 2
    J -= grid.cols // 2
    targets = np.stack([cx + a * J - b * I, cy + b * J + a * I], axis=-1).reshape(-1, 2)
    displacement = grid_pts.reshape(-1, 2) - targets

    out_w, out_h = out_size
    origin = (math.floor(cx - out_w / 2.0 + 0.5), math.floor(cy - out_h / 2.0 + 0.5))
    rows, cols = np.indices((out_h, out_w), dtype=np.float64)
    qx = cols + origin[0]
    qy = rows + origin[1]
    shift = _idw(qx, qy, targets, displacement)

    scale = PixelScale(mm_per_pixel=grid.spacing_mm / pitch)
    remap = RemapField(qx + shift[..., 0], qy + shift[..., 1], origin,
                       raw_size[0], raw_size[1], scale.mm_per_pixel)
    log.info(f"Remap fitted: pitch {pitch:.3f} px, {scale.mm_per_pixel:.5f} mm/px, crop origin {origin}")
    return remap, scale


def rectify(img: GrayImage, remap: RemapField) -> GrayImage:
    if img.shape != (remap.raw_height, remap.raw_width):
        raise DimensionError(
            f"image {img.width}x{img.height} does not match remap raw size "
            f"{remap.raw_width}x{remap.raw_height}"
        )
    out = ndimage.map_coordinates(img.data, [remap.map_y, remap.map_x], order=1,
                                  mode="constant", cval=0.0)
    return GrayImage(np.clip(out, 0.0, 1.0))


# --- Depth calibration ---

def detect_contact_circle(ref: GrayImage, tactile: GrayImage, threshold: float = 0.002) -> ContactCircle:
    """Largest darkened blob, as a circle of equal area."""
    blobs = detect_blobs(_drop_image(ref, tactile), threshold)
    if not blobs:
        raise CalibrationError("no contact blob found")
    largest = max(blobs, key=lambda b: b.area)
    return ContactCircle(largest.centroid_x, largest.centroid_y, math.sqrt(largest.area / math.pi))


def sphere_depth(shape: Tuple[int, int], circle: ContactCircle, ball_radius_mm: float,
                 scale: PixelScale, h0: Optional[float] = None) -> DepthMap:
    """Analytic indentation of a ball whose contact disk is `circle`."""
    R = ball_radius_mm
    a = circle.radius_px * scale.mm_per_pixel
    if a >= R:
        raise GeometryError(f"contact radius {a:.3f} mm is not below the ball radius {R} mm")
    d0 = R - math.sqrt(R * R - a * a)

    rows, cols = np.indices(shape, dtype=np.float64)
    r = np.hypot(cols - circle.center_x, rows - circle.center_y) * scale.mm_per_pixel
    inside = r < a
    depth = np.zeros(shape)
    depth[inside] = np.sqrt(R * R - r[inside] ** 2) - (R - d0)
    depth = np.maximum(depth, 0.0)
    if h0 is not None:
        depth = np.minimum(depth, h0)
    return DepthMap(depth, h0=h0)


def calibrate_depth(ref: GrayImage, ball_press: GrayImage, ball_radius_mm: float, scale: PixelScale,
                    bin_width: float = DEFAULT_BIN_WIDTH, threshold: float = 0.002,
                    h0: Optional[float] = None) -> IntensityDepthTable:
    """Intensity-drop -> depth table from a single ball press."""
    if not bin_width > 0:
        raise ParameterError("bin_width must be positive")
    circle = detect_contact_circle(ref, ball_press, threshold)
    analytic = sphere_depth(ref.shape, circle, ball_radius_mm, scale, h0).data
    drop = ref.data - ball_press.data

    inside = (analytic > 0.0) & (drop > 0.0)
    bins = np.floor(drop[inside] / bin_width + 0.5).astype(np.int64)
    if bins.size == 0 or bins.max() < 1:
        raise CalibrationError("contact disk has no measurable intensity drop")

    n_bins = int(bins.max()) + 1
    counts = np.bincount(bins, minlength=n_bins)
    sums = np.bincount(bins, weights=analytic[inside], minlength=n_bins)
    populated = counts > 0
    populated[0] = False
    centers = np.arange(n_bins) * bin_width

    iso = IsotonicRegression(increasing=True, y_min=0.0, y_max=h0)
    fitted = iso.fit(centers[populated], sums[populated] / counts[populated],
                     sample_weight=counts[populated]).predict(centers[populated])

    depths = np.interp(centers, np.concatenate([[0.0], centers[populated]]),
                       np.concatenate([[0.0], fitted]))
    depths[0] = 0.0
    depths = np.maximum.accumulate(depths)
    if h0 is not None:
        depths = np.minimum(depths, h0)

    log.info(f"Depth table: {n_bins} bins, {int(populated.sum())} populated, "
             f"max depth {depths[-1]:.3f} mm (contact radius {circle.radius_px:.1f} px)")
    return IntensityDepthTable(bin_width, depths, h0)


def lookup_depth(table: IntensityDepthTable, drop):
    """Depth (mm) for an intensity drop; clamps at 0 and at the deepest bin."""
    depth = np.interp(drop, table.bin_centers, table.depths)
    return float(depth) if np.ndim(depth) == 0 else depth
