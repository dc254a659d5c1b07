# backend/src/gelsim.py

"""
Forward model of the translucent gel.

An object heightfield is pressed into a Winkler elastic foundation
(`indent`), the displaced volume partly reappears as a bulge around the
contact (`flow`), and the thickness field is turned into a camera image
(`render`): thinner gel reads darker, thicker gel brighter. The same
contact state yields the 6D wrench label (`synthesize_wrench`).

Conventions: pixel coordinates are (x = column, y = row); drag is in mm
along (x, y); positive twist rotates +x toward +y.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from scipy import ndimage

from .core import GrayImage, PixelScale, Wrench, _Grid
from .errors import DimensionError, ParameterError, PunchThroughError

log = logging.getLogger(__name__)

# --- Configuration ---
RAW_FRAME = (640, 480)              # camera resolution (width, height)
SENSOR_FRAME = (460, 345)           # rectified, cropped sensing area
DEFAULT_MM_PER_PIXEL = 24.0 / 460.0
OUTSIDE_HEIGHT_MM = 1000.0          # object pixels off the footprint never reach the gel
TWIST_BIAS_LIMIT = 0.3              # rad
MAX_TILT = 0.2                      # rad

ObjectKind = Literal["sphere", "cylinder", "cone", "prism_star", "superellipsoid"]
OBJECT_KINDS: Tuple[str, ...] = ("sphere", "cylinder", "cone", "prism_star", "superellipsoid")
Seed = Union[int, Sequence[int]]


# --- Domain Types ---

class OpticalModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    i_drop_max: float = Field(0.6, gt=0, le=1, description="Saturated darkening, intensity")
    lambda_d: float = Field(1.5, gt=0, description="Darkening decay length, mm")
    i_rise_max: float = Field(0.15, gt=0, le=1, description="Saturated brightening, intensity")
    lambda_b: float = Field(2.0, gt=0, description="Brightening decay length, mm")


class GelSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    h0: float = Field(5.0, gt=0, description="Base gel thickness, mm")
    k_n: float = Field(0.04, gt=0, description="Normal stiffness, N/mm^3")
    k_s: float = Field(0.02, gt=0, description="Shear stiffness, N/mm^3")
    flow_radius: float = Field(2.0, gt=0, description="Bulge decay length, mm")
    flow_fraction: float = Field(0.6, ge=0, le=1, description="Share of displaced volume that bulges")
    optics: OpticalModel = Field(default_factory=OpticalModel)


class ContactState(BaseModel):
    model_config = ConfigDict(frozen=True)

    press_depth: float = Field(0.0, ge=0, description="mm below the undeformed surface")
    drag: Tuple[float, float] = (0.0, 0.0)
    twist: float = 0.0
    center: Tuple[float, float] = (RAW_FRAME[0] / 2.0, RAW_FRAME[1] / 2.0)
    tilt: Tuple[float, float] = (0.0, 0.0)

    @field_validator("tilt")
    @classmethod
    def _tilt_in_range(cls, value):
        if max(abs(value[0]), abs(value[1])) > MAX_TILT:
            raise ValueError(f"tilt components must stay within ±{MAX_TILT} rad")
        return value


@dataclass(frozen=True, eq=False)
class ThicknessField(_Grid):
    """Per-pixel gel thickness, mm."""

    def _check(self) -> None:
        if self.data.size and self.data.min() <= 0.0:
            raise ParameterError("gel thickness must stay positive")


@dataclass(frozen=True, eq=False)
class HeightField(_Grid):
    """Object surface height above its lowest point, mm, centered in the array."""

    id: str = "object"
    mm_per_pixel: float = DEFAULT_MM_PER_PIXEL

    def _check(self) -> None:
        if self.data.size and self.data.min() != 0.0:
            raise ParameterError(f"heightfield minimum must be 0, got {self.data.min()}")
        if not self.mm_per_pixel > 0:
            raise ParameterError("heightfield pitch must be positive")

    @property
    def center(self) -> Tuple[float, float]:
        """(row, col) of the object origin."""
        return (self.height - 1) / 2.0, (self.width - 1) / 2.0


class ObjectParams(BaseModel):
    """Shape parameters; each kind reads the fields it needs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    radius_mm: float = 4.0
    slope: float = 0.5
    points: int = 5
    inner_ratio: float = 0.5
    semi_axes: Tuple[float, float, float] = (4.0, 3.0, 3.0)
    exponent: float = 2.0
    roughness_mm: float = 0.0


class Trajectory(BaseModel):
    object_id: str
    steps: List[ContactState]


@dataclass(frozen=True, eq=False)
class Frame:
    tactile: GrayImage
    reference: GrayImage
    wrench: Wrench
    object_id: str
    contact: ContactState
    trajectory_index: int
    step_index: int
    penetration: np.ndarray
    seed: Tuple[int, ...] = ()


# --- Indentation ---

def _footprint_window(obj: HeightField, contact: ContactState, scale: PixelScale,
                      width: int, height: int) -> Optional[Tuple[int, int, int, int]]:
    half = 0.5 * math.hypot(obj.width, obj.height) * obj.mm_per_pixel / scale.mm_per_pixel + 2.0
    cx, cy = contact.center
    r0, r1 = max(0, int(math.floor(cy - half))), min(height, int(math.ceil(cy + half)) + 1)
    c0, c1 = max(0, int(math.floor(cx - half))), min(width, int(math.ceil(cx + half)) + 1)
    if r0 >= r1 or c0 >= c1:
        return None
    return r0, r1, c0, c1


def _object_heights(obj: HeightField, contact: ContactState, scale: PixelScale,
                    window: Tuple[int, int, int, int]) -> np.ndarray:
    r0, r1, c0, c1 = window
    rows, cols = np.mgrid[r0:r1, c0:c1].astype(np.float64)
    cx, cy = contact.center
    ratio = scale.mm_per_pixel / obj.mm_per_pixel
    dx = (cols - cx) * ratio
    dy = (rows - cy) * ratio

    # sensor offset -> object frame: rotate by -twist
    cos_t, sin_t = math.cos(contact.twist), math.sin(contact.twist)
    u = cos_t * dx + sin_t * dy
    v = -sin_t * dx + cos_t * dy
    center_row, center_col = obj.center
    coords = [center_row + v, center_col + u]

    # membership and height are sampled separately so the rim never blends with the sentinel
    inside = obj.data < OUTSIDE_HEIGHT_MM / 2.0
    membership = ndimage.map_coordinates(inside.astype(np.float64), coords, order=1, mode="constant", cval=0.0)
    nearest = ndimage.distance_transform_edt(~inside, return_distances=False, return_indices=True)
    surface = obj.data[tuple(nearest)]
    heights = ndimage.map_coordinates(surface, coords, order=1, mode="nearest")
    heights = np.where(membership >= 0.5, heights, OUTSIDE_HEIGHT_MM)

    tilt_x, tilt_y = contact.tilt
    if tilt_x or tilt_y:
        footprint = heights < OUTSIDE_HEIGHT_MM / 2.0
        if footprint.any():
            s = scale.mm_per_pixel
            plane = (rows - cy) * s * math.tan(tilt_x) + (cols - cx) * s * math.tan(tilt_y)
            tilted = heights + plane
            tilted -= tilted[footprint].min()
            heights = np.where(footprint, tilted, heights)
    return heights


def indent(gel: GelSpec, obj: HeightField, contact: ContactState, scale: PixelScale,
           frame: Tuple[int, int] = RAW_FRAME) -> ThicknessField:
    """Gel thickness after pressing `obj` to `press_depth`, before any flow."""
    if contact.press_depth >= gel.h0:
        raise PunchThroughError(
            f"press depth {contact.press_depth} mm reaches the gel base ({gel.h0} mm)"
        )
    width, height = frame
    penetration = np.zeros((height, width), dtype=np.float64)
    if contact.press_depth > 0.0:
        window = _footprint_window(obj, contact, scale, width, height)
        if window is not None:
            r0, r1, c0, c1 = window
            heights = _object_heights(obj, contact, scale, window)
            penetration[r0:r1, c0:c1] = np.maximum(0.0, contact.press_depth - heights)
    return ThicknessField(gel.h0 - penetration)


def penetration(field: ThicknessField, gel: GelSpec) -> np.ndarray:
    """Depth pressed into the gel, mm (0 where the gel is not compressed)."""
    return np.maximum(gel.h0 - field.data, 0.0)


# --- Gel flow ---

def _biased_distance(distance: np.ndarray, contact_mask: np.ndarray, gel: GelSpec,
                     contact: ContactState, scale: PixelScale) -> np.ndarray:
    """Translate the distance field along the drag and rotate it with the twist."""
    drag_norm = math.hypot(*contact.drag)
    shift_px = min(drag_norm, gel.flow_radius) / scale.mm_per_pixel
    angle = math.copysign(min(abs(contact.twist), TWIST_BIAS_LIMIT), contact.twist)
    if shift_px == 0.0 and angle == 0.0:
        return distance

    cy, cx = ndimage.center_of_mass(contact_mask)
    tx = ty = 0.0
    if drag_norm > 0.0:
        tx = contact.drag[0] / drag_norm * shift_px
        ty = contact.drag[1] / drag_norm * shift_px

    rows, cols = np.indices(distance.shape, dtype=np.float64)
    px = cols - cx - tx
    py = rows - cy - ty
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    src_x = cx + cos_a * px + sin_a * py
    src_y = cy - sin_a * px + cos_a * py
    return ndimage.map_coordinates(distance, [src_y, src_x], order=1, mode="nearest")


def flow(pre: ThicknessField, gel: GelSpec, contact: ContactState,
         scale: PixelScale) -> ThicknessField:
    """
    Add the volume-conserving bulge around the contact.

    flow_fraction of the displaced volume is spread over the non-contact
    pixels with weight exp(-d / flow_radius), d being the (drag/twist biased)
    distance to the contact region. Contact pixels are left untouched.
    """
    depth = penetration(pre, gel)
    contact_mask = depth > 0.0
    area = scale.pixel_area
    displaced = float(depth[contact_mask].sum()) * area
    if displaced == 0.0 or gel.flow_fraction == 0.0:
        return pre

    outside = ~contact_mask
    if not outside.any():
        log.warning("Contact covers the whole frame; no room for gel flow")
        return pre

    distance = ndimage.distance_transform_edt(outside, sampling=scale.mm_per_pixel)
    distance = _biased_distance(distance, contact_mask, gel, contact, scale)
    kernel = np.where(outside, np.exp(-distance / gel.flow_radius), 0.0)
    total = float(kernel.sum()) * area
    if total <= 0.0:
        log.warning("Bulge kernel vanished outside the contact; skipping flow")
        return pre

    bulge = kernel * (gel.flow_fraction * displaced / total)
    return pre.with_data(pre.data + bulge)


# --- Optics ---

def render(thickness: ThicknessField, reference: GrayImage, gel: GelSpec) -> GrayImage:
    """Camera image of the deformed gel over `reference`."""
    if thickness.shape != reference.shape:
        raise DimensionError(
            f"thickness {thickness.shape} and reference {reference.shape} differ in size"
        )
    optics = gel.optics
    if optics.i_drop_max > float(reference.data.min()):
        log.debug("i_drop_max exceeds the darkest reference pixel; deep contacts will clamp at 0")

    t = thickness.data
    out = reference.data.copy()
    thin = t < gel.h0
    thick = t > gel.h0
    out[thin] -= optics.i_drop_max * -np.expm1(-(gel.h0 - t[thin]) / optics.lambda_d)
    out[thick] += optics.i_rise_max * -np.expm1(-(t[thick] - gel.h0) / optics.lambda_b)
    return GrayImage(np.clip(out, 0.0, 1.0))


# --- Wrench labels ---

def synthesize_wrench(pen: Union[np.ndarray, _Grid], gel: GelSpec, contact: ContactState,
                      scale: PixelScale) -> Wrench:
    """Winkler-foundation wrench of a pre-flow penetration field (mm)."""
    p = np.asarray(getattr(pen, "data", pen), dtype=np.float64)
    if p.size and p.min() < 0.0:
        raise ParameterError("penetration must be non-negative")
    contact_mask = p > 0.0
    if not contact_mask.any():
        return Wrench()

    s = scale.mm_per_pixel
    area = s * s
    rows, cols = np.nonzero(contact_mask)
    x = cols * s
    y = rows * s
    load = gel.k_n * p[contact_mask] * area          # N per pixel
    contact_area = float(contact_mask.sum()) * area  # mm^2
    dx = x - x.mean()
    dy = y - y.mean()

    # mm -> m for the torques
    return Wrench(
        fx=gel.k_s * contact.drag[0] * contact_area,
        fy=gel.k_s * contact.drag[1] * contact_area,
        fz=-float(load.sum()),
        tx=float((load * dy).sum()) / 1000.0,
        ty=-float((load * dx).sum()) / 1000.0,
        tz=gel.k_s * contact.twist * float(((dx * dx + dy * dy) * area).sum()) / 1000.0,
    )


# --- Lens distortion ---

def _check_distortion(k1: float, k2: float) -> None:
    r = np.linspace(0.0, 1.0, 1001)
    slope = 1.0 + 3.0 * k1 * r ** 2 + 5.0 * k2 * r ** 4
    if not (math.isfinite(k1) and math.isfinite(k2)) or slope.min() <= 0.0:
        raise ParameterError(f"radial model k1={k1}, k2={k2} is not invertible over the image")


def apply_distortion(img: GrayImage, k1: float, k2: float = 0.0,
                     center: Optional[Tuple[float, float]] = None) -> GrayImage:
    """
    Radially distorted copy of `img`.

    Output pixel at normalized radius r samples the input at
    r * (1 + k1 r^2 + k2 r^4); radii are normalized by the half-diagonal.
    """
    _check_distortion(k1, k2)
    h, w = img.shape
    cx, cy = center if center is not None else ((w - 1) / 2.0, (h - 1) / 2.0)
    half_diag = 0.5 * math.hypot(w, h)

    rows, cols = np.indices((h, w), dtype=np.float64)
    dx = cols - cx
    dy = rows - cy
    r2 = (dx * dx + dy * dy) / half_diag ** 2
    factor = 1.0 + k1 * r2 + k2 * r2 * r2
    out = ndimage.map_coordinates(
        img.data, [cy + dy * factor, cx + dx * factor], order=1, mode="constant", cval=0.0
    )
    return GrayImage(np.clip(out, 0.0, 1.0))


def distort_points(points: np.ndarray, k1: float, k2: float, center: Tuple[float, float],
                   half_diagonal: float, iterations: int = 30) -> np.ndarray:
    """Where features at `points` (x, y) appear in an `apply_distortion` output."""
    _check_distortion(k1, k2)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    offset = pts - np.asarray(center, dtype=np.float64)
    rho = np.hypot(offset[:, 0], offset[:, 1]) / half_diagonal

    r = rho.copy()
    for _ in range(iterations):
        g = r * (1.0 + k1 * r ** 2 + k2 * r ** 4) - rho
        r -= g / (1.0 + 3.0 * k1 * r ** 2 + 5.0 * k2 * r ** 4)

    ratio = np.divide(r, rho, out=np.ones_like(r), where=rho > 0)
    return np.asarray(center) + offset * ratio[:, None]


# --- Procedural objects ---

def _check_object_params(kind: str, params: ObjectParams) -> None:
    def in_range(name, value, lo, hi):
        if not lo <= value <= hi:
            raise ParameterError(f"{kind}: {name}={value} outside [{lo}, {hi}]")

    if kind in ("sphere", "cylinder", "cone", "prism_star"):
        in_range("radius_mm", params.radius_mm, 1.0, 8.0)
    if kind == "cone":
        in_range("slope", params.slope, 0.05, 2.0)
    if kind == "prism_star":
        in_range("points", params.points, 3, 9)
        in_range("inner_ratio", params.inner_ratio, 0.2, 0.9)
    if kind == "superellipsoid":
        for axis in params.semi_axes:
            in_range("semi_axes", axis, 1.0, 8.0)
        in_range("exponent", params.exponent, 0.5, 4.0)
    in_range("roughness_mm", params.roughness_mm, 0.0, 0.2)


def _star_mask(x: np.ndarray, y: np.ndarray, radius: float, points: int, inner: float) -> np.ndarray:
    step = math.pi / points
    angles = np.arange(2 * points + 1) * step
    radii = np.where(np.arange(2 * points + 1) % 2 == 0, radius, radius * inner)
    vx, vy = radii * np.cos(angles), radii * np.sin(angles)

    theta = np.mod(np.arctan2(y, x), 2.0 * math.pi)
    k = np.minimum((theta // step).astype(int), 2 * points - 1)
    p1x, p1y, p2x, p2y = vx[k], vy[k], vx[k + 1], vy[k + 1]
    # ray/edge intersection radius: cross(P1, P2) / cross(d, P2 - P1)
    edge = np.cos(theta) * (p2y - p1y) - np.sin(theta) * (p2x - p1x)
    boundary = (p1x * p2y - p1y * p2x) / edge
    return np.hypot(x, y) <= boundary


def procedural_object(kind: str, params: Union[ObjectParams, dict, None] = None, seed: int = 0,
                      scale: Optional[PixelScale] = None,
                      object_id: Optional[str] = None) -> HeightField:
    """Deterministic heightfield of a simple printed-object stand-in."""
    if kind not in OBJECT_KINDS:
        raise ParameterError(f"unknown object kind {kind!r}; expected one of {OBJECT_KINDS}")
    try:
        params = params if isinstance(params, ObjectParams) else ObjectParams.model_validate(params or {})
    except ValidationError as exc:
        raise ParameterError(f"invalid {kind} parameters: {exc}") from exc
    _check_object_params(kind, params)

    s = scale.mm_per_pixel if scale is not None else DEFAULT_MM_PER_PIXEL
    if kind == "superellipsoid":
        extent = max(params.semi_axes[0], params.semi_axes[1])
    else:
        extent = params.radius_mm
    n = 2 * int(math.ceil(extent / s)) + 3
    half = (n - 1) / 2.0
    rows, cols = np.indices((n, n), dtype=np.float64)
    x = (cols - half) * s
    y = (rows - half) * s
    r = np.hypot(x, y)

    heights = np.full((n, n), OUTSIDE_HEIGHT_MM)
    R = params.radius_mm
    if kind == "sphere":
        inside = r <= R
        heights[inside] = R - np.sqrt(R * R - r[inside] ** 2)
    elif kind == "cylinder":
        inside = r <= R
        heights[inside] = 0.0
    elif kind == "cone":
        inside = r <= R
        heights[inside] = params.slope * r[inside]
    elif kind == "prism_star":
        inside = _star_mask(x, y, R, params.points, params.inner_ratio)
        heights[inside] = 0.0
    else:
        a, b, c = params.semi_axes
        e = params.exponent
        q = np.abs(x / a) ** e + np.abs(y / b) ** e
        inside = q <= 1.0
        heights[inside] = c - c * (1.0 - q[inside]) ** (1.0 / e)

    if params.roughness_mm > 0.0:
        rng = np.random.default_rng(seed)
        texture = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma=0.5 / s)
        texture *= params.roughness_mm / max(float(texture.std()), 1e-12)
        heights[inside] += texture[inside]
    heights[inside] -= heights[inside].min()

    return HeightField(heights, id=object_id or f"{kind}_{seed}", mm_per_pixel=s)


def board_heightfield(rows: int, cols: int, spacing_mm: float, marker_radius_mm: float,
                      scale: Optional[PixelScale] = None, object_id: str = "calibration_board") -> HeightField:
    """Cylinder-array calibration board: flat cylinder tops at height 0."""
    if rows < 1 or cols < 1 or not spacing_mm > 0 or not 0 < marker_radius_mm < spacing_mm / 2:
        raise ParameterError("board needs positive counts and non-overlapping cylinders")
    s = scale.mm_per_pixel if scale is not None else DEFAULT_MM_PER_PIXEL
    extent = 0.5 * max(rows, cols) * spacing_mm + marker_radius_mm
    n = 2 * int(math.ceil(extent / s)) + 3
    half = (n - 1) / 2.0
    grid_r, grid_c = np.indices((n, n), dtype=np.float64)
    x = (grid_c - half) * s
    y = (grid_r - half) * s

    heights = np.full((n, n), OUTSIDE_HEIGHT_MM)
    for i in range(rows):
        for j in range(cols):
            mx = (j - (cols - 1) / 2.0) * spacing_mm
            my = (i - (rows - 1) / 2.0) * spacing_mm
            heights[np.hypot(x - mx, y - my) <= marker_radius_mm] = 0.0
    return HeightField(heights, id=object_id, mm_per_pixel=s)


def make_object_catalog(n: int, seed: int, scale: Optional[PixelScale] = None) -> List[HeightField]:
    """`n` objects cycling through every kind with seeded, in-range parameters."""
    rng = np.random.default_rng([seed, 7])
    catalog = []
    for i in range(n):
        kind = OBJECT_KINDS[i % len(OBJECT_KINDS)]
        if kind == "sphere":
            params = ObjectParams(radius_mm=rng.uniform(3.0, 6.0))
        elif kind == "cylinder":
            params = ObjectParams(radius_mm=rng.uniform(2.0, 4.0))
        elif kind == "cone":
            params = ObjectParams(radius_mm=rng.uniform(3.0, 5.0), slope=rng.uniform(0.3, 0.8))
        elif kind == "prism_star":
            params = ObjectParams(radius_mm=rng.uniform(2.5, 4.5), points=int(rng.integers(3, 8)),
                                  inner_ratio=rng.uniform(0.4, 0.7))
        else:
            params = ObjectParams(semi_axes=(rng.uniform(2.5, 4.5), rng.uniform(1.5, 3.0), rng.uniform(2.0, 5.0)),
                                  exponent=rng.uniform(0.8, 4.0))
        catalog.append(procedural_object(kind, params, seed=int(rng.integers(2 ** 31)), scale=scale,
                                         object_id=f"obj_{i:03d}_{kind}"))
    log.info(f"Built {len(catalog)} procedural objects")
    return catalog


# --- Reference frames ---

def make_reference(width: int, height: int, seed: Seed, level: float = 0.75,
                   variation: float = 0.05) -> GrayImage:
    """No-contact frame: `level` plus a smooth shading of amplitude `variation`."""
    rng = np.random.default_rng(seed)
    rows, cols = np.indices((height, width), dtype=np.float64)
    u, v = cols / width, rows / height
    shading = np.zeros((height, width))
    for _ in range(3):
        fu, fv = rng.uniform(0.3, 1.5, size=2)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        shading += np.cos(2.0 * math.pi * (fu * u + fv * v) + phase)
    shading /= max(float(np.abs(shading).max()), 1e-12)
    return GrayImage(np.clip(level + variation * shading, 0.0, 1.0))


# --- Trajectories ---

def press_trajectory(object_id: str, center: Tuple[float, float], depth: float, press_steps: int,
                     motion_steps: int = 0, drag: Tuple[float, float] = (0.0, 0.0), twist: float = 0.0,
                     tilt: Tuple[float, float] = (0.0, 0.0), release: bool = True) -> Trajectory:
    """Press ramp to `depth`, then drag/twist ramp, then an optional release frame."""
    steps = []
    for k in range(1, press_steps + 1):
        steps.append(ContactState(press_depth=depth * k / press_steps, center=center, tilt=tilt))
    for k in range(1, motion_steps + 1):
        f = k / motion_steps
        steps.append(ContactState(press_depth=depth, drag=(f * drag[0], f * drag[1]), twist=f * twist,
                                  center=center, tilt=tilt))
    if release:
        steps.append(ContactState(press_depth=0.0, center=center))
    return Trajectory(object_id=object_id, steps=steps)


def random_trajectory(rng: np.random.Generator, object_id: str, frame: Tuple[int, int],
                      scale: PixelScale, press_steps: int = 6, motion_steps: int = 6) -> Trajectory:
    """Seeded press with a random mix of drag, twist and tilt near the frame center."""
    width, height = frame
    offset = 4.0 / scale.mm_per_pixel
    center = (width / 2.0 + rng.uniform(-offset, offset), height / 2.0 + rng.uniform(-offset, offset))
    depth = rng.uniform(0.4, 1.0)
    tilt = tuple(rng.uniform(-0.05, 0.05, size=2))

    motion = rng.choice(["press", "drag", "twist", "drag_twist"])
    drag, twist = (0.0, 0.0), 0.0
    if motion in ("drag", "drag_twist"):
        heading = rng.uniform(0.0, 2.0 * math.pi)
        magnitude = rng.uniform(0.2, 1.0)
        drag = (magnitude * math.cos(heading), magnitude * math.sin(heading))
    if motion in ("twist", "drag_twist"):
        twist = rng.uniform(-TWIST_BIAS_LIMIT, TWIST_BIAS_LIMIT)
    if motion == "press":
        return press_trajectory(object_id, center, depth, press_steps + motion_steps, tilt=tilt)
    return press_trajectory(object_id, center, depth, press_steps, motion_steps, drag, twist, tilt)


# --- Sessions ---

def press_image(gel: GelSpec, obj: HeightField, contact: ContactState, reference: GrayImage,
                scale: PixelScale) -> GrayImage:
    """Single noiseless tactile frame of `obj` pressed per `contact`."""
    pre = indent(gel, obj, contact, scale, (reference.width, reference.height))
    return render(flow(pre, gel, contact, scale), reference, gel)


def simulate_session(gel: GelSpec, objects: Sequence[HeightField], schedule: Sequence[Trajectory],
                     reference: GrayImage, scale: PixelScale, seed: Seed,
                     noise_std: Optional[float] = None) -> Iterator[Frame]:
    """indent -> flow -> render (+ optional noise) and the wrench, frame by frame."""
    by_id = {obj.id: obj for obj in objects}
    rng = np.random.default_rng(seed)
    seed_key = tuple(int(v) for v in np.atleast_1d(seed))
    frame_size = (reference.width, reference.height)

    for t_index, trajectory in enumerate(schedule):
        obj = by_id.get(trajectory.object_id)
        if obj is None:
            raise ParameterError(f"schedule references unknown object {trajectory.object_id!r}")
        for s_index, contact in enumerate(trajectory.steps):
            pre = indent(gel, obj, contact, scale, frame_size)
            post = flow(pre, gel, contact, scale)
            tactile = render(post, reference, gel)
            if noise_std:
                noisy = tactile.data + rng.normal(0.0, noise_std, size=tactile.shape)
                tactile = GrayImage(np.clip(noisy, 0.0, 1.0))
            pen = penetration(pre, gel)
            pen.setflags(write=False)
            yield Frame(
                tactile=tactile,
                reference=reference,
                wrench=synthesize_wrench(pen, gel, contact, scale),
                object_id=obj.id,
                contact=contact,
                trajectory_index=t_index,
                step_index=s_index,
                penetration=pen,
                seed=seed_key,
            )
