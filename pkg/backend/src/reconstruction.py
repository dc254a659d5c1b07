# backend/src/reconstruction.py

"""
Shape reconstruction: difference image -> depth lookup -> two Gaussian
passes -> depth map -> point cloud, and the sphere-press accuracy check.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .calibration import ContactCircle, IntensityDepthTable, lookup_depth, sphere_depth
from .core import DepthMap, DiffImage, GrayImage, PixelScale, gaussian_blur
from .errors import DimensionError, EvaluationError, GeometryError

log = logging.getLogger(__name__)


# --- Domain Types ---

class FilterParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma1: float = Field(2.0, gt=0)
    radius1: int = Field(5, ge=1)
    sigma2: float = Field(1.0, gt=0)
    radius2: int = Field(2, ge=1)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """(N, 3) points in mm: origin at the sensing-surface center, z into the gel."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise DimensionError(f"point cloud must be (N, 3), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise EvaluationError("point cloud contains non-finite coordinates")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class SpherePress:
    depth: DepthMap
    ball_radius_mm: float
    circle: Optional[ContactCircle]
    label: str = ""


class ReconReport(BaseModel):
    mae_mm: float = Field(..., ge=0)
    std_mm: float = Field(..., ge=0)
    n_images: int = Field(..., ge=0)
    n_pixels: int = 0
    per_press_mae_mm: List[float] = Field(default_factory=list)
    excluded: List[str] = Field(default_factory=list)


# --- Pipeline ---

def difference(ref: GrayImage, tactile: GrayImage) -> DiffImage:
    """Signed tactile - reference."""
    if ref.shape != tactile.shape:
        raise DimensionError(f"reference {ref.shape} and tactile {tactile.shape} differ in size")
    return DiffImage(tactile.data - ref.data)


def reconstruct(diff: DiffImage, table: IntensityDepthTable, sigma1: float = 2.0, radius1: int = 5,
                sigma2: float = 1.0, radius2: int = 2) -> DepthMap:
    drop = np.maximum(-diff.data, 0.0)
    depth = DepthMap(lookup_depth(table, drop), h0=table.h0)
    depth = gaussian_blur(depth, sigma1, radius1)
    return gaussian_blur(depth, sigma2, radius2)


def to_pointcloud(depth: DepthMap, scale: PixelScale) -> PointCloud:
    rows, cols = np.indices(depth.shape, dtype=np.float64)
    s = scale.mm_per_pixel
    x = (cols - depth.width / 2.0) * s
    y = (rows - depth.height / 2.0) * s
    return PointCloud(np.column_stack([x.ravel(), y.ravel(), depth.data.ravel()]))


def regrid(cloud: PointCloud, width: int, height: int, scale: PixelScale) -> DepthMap:
    """Depth map back from a cloud made by `to_pointcloud`, by pixel index."""
    if len(cloud) != width * height:
        raise DimensionError(f"cloud has {len(cloud)} points, expected {width * height}")
    s = scale.mm_per_pixel
    cols = np.rint(cloud.points[:, 0] / s + width / 2.0).astype(np.int64)
    rows = np.rint(cloud.points[:, 1] / s + height / 2.0).astype(np.int64)
    depth = np.zeros((height, width))
    depth[rows, cols] = cloud.points[:, 2]
    return DepthMap(depth)


# --- Evaluation ---

def eval_sphere_presses(presses: Sequence[SpherePress], scale: PixelScale) -> ReconReport:
    """MAE/Std of reconstructed vs analytic sphere depth over the contact disks."""
    errors, per_press, excluded = [], [], []
    for index, press in enumerate(presses):
        label = press.label or f"press_{index:02d}"
        if press.circle is None:
            log.warning(f"{label}: no contact circle detected, excluded")
            excluded.append(label)
            continue
        try:
            truth = sphere_depth(press.depth.shape, press.circle, press.ball_radius_mm, scale).data
        except GeometryError as exc:
            log.warning(f"{label}: {exc}, excluded")
            excluded.append(label)
            continue
        disk = truth > 0.0
        if not disk.any():
            log.warning(f"{label}: empty contact disk, excluded")
            excluded.append(label)
            continue
        err = np.abs(press.depth.data[disk] - truth[disk])
        per_press.append(float(err.mean()))
        errors.append(err)

    if not errors:
        raise EvaluationError("no press could be evaluated")
    all_err = np.concatenate(errors)
    report = ReconReport(
        mae_mm=float(all_err.mean()),
        std_mm=float(all_err.std()),
        n_images=len(errors),
        n_pixels=int(all_err.size),
        per_press_mae_mm=per_press,
        excluded=excluded,
    )
    log.info(f"✅ Sphere-press evaluation: MAE {report.mae_mm:.4f} mm, Std {report.std_mm:.4f} mm "
             f"over {report.n_images} presses")
    return report
