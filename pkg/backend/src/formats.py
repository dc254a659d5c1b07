# backend/src/formats.py

"""
On-disk formats.

  - gray frames: PFM (float, lossless) or any 8-bit image Pillow reads
  - triples / visualizations: PGM (P5) + JSON sidecar, PPM (P6)
  - depth maps: PFM; point clouds: ASCII PLY
  - depth table: JSON; remap: PFM pair + JSON header
  - manifests: JSON lines (normalization header, then one sample per line)
  - regressor params: one JSON header line, then little-endian float32
  - loss curves: CSV
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from .calibration import IntensityDepthTable, RemapField
from .core import DepthMap, GrayImage, to_grayscale
from .deformation import DeformationTriple
from .errors import ConfigError
from .force_dataset import DatasetManifest, Normalization, Sample
from .force_regressor import RegressorParams, param_layout, unflatten
from .reconstruction import PointCloud

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


# --- JSON ---

def load_json(file_path: PathLike) -> Dict[str, Any]:
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {file_path}: {e}") from e


def dumps_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def save_json(data: Any, file_path: PathLike) -> None:
    """Sorted keys, no timestamps: identical data gives identical bytes."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(dumps_json(data))
    log.debug(f"Saved {file_path}")


# --- PFM ---

def write_pfm(file_path: PathLike, data: np.ndarray) -> None:
    """Single-channel PFM, little-endian, rows stored bottom to top."""
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ConfigError(f"PFM writer expects a 2D array, got {arr.shape}")
    height, width = arr.shape
    with open(file_path, "wb") as f:
        f.write(f"Pf\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr[::-1]).tobytes())


def read_pfm(file_path: PathLike) -> np.ndarray:
    with open(file_path, "rb") as f:
        kind = f.readline().strip()
        if kind != b"Pf":
            raise ConfigError(f"{file_path}: not a single-channel PFM (header {kind!r})")
        try:
            width, height = (int(v) for v in f.readline().split())
            scale = float(f.readline().strip())
        except ValueError as e:
            raise ConfigError(f"{file_path}: malformed PFM header") from e
        dtype = "<f4" if scale < 0 else ">f4"
        raw = np.frombuffer(f.read(), dtype=dtype)
    if raw.size != width * height:
        raise ConfigError(f"{file_path}: expected {width * height} samples, found {raw.size}")
    return raw.reshape(height, width)[::-1].astype(np.float64)


# --- Gray images ---

def write_gray(file_path: PathLike, img: GrayImage) -> None:
    """PFM for .pfm paths, 8-bit through Pillow otherwise."""
    if Path(file_path).suffix.lower() == ".pfm":
        write_pfm(file_path, img.data)
    else:
        write_pgm(file_path, img)


def read_gray(file_path: PathLike) -> GrayImage:
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    if path.suffix.lower() == ".pfm":
        return GrayImage(np.clip(read_pfm(path), 0.0, 1.0))
    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA"):
            return to_grayscale(np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0)
        return GrayImage(np.asarray(im.convert("L"), dtype=np.float64) / 255.0)


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(file_path: PathLike, img: GrayImage) -> None:
    Image.fromarray(_to_bytes(img.data)).save(file_path, format="PPM")


def write_ppm(file_path: PathLike, rgb: np.ndarray) -> None:
    Image.fromarray(_to_bytes(rgb)).save(file_path, format="PPM")


def write_triple(out_dir: PathLike, stem: str, triple: DeformationTriple) -> Dict[str, str]:
    """Three PGM channels plus a JSON sidecar naming them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for channel in ("darker", "brighter", "reference"):
        name = f"{stem}_{channel}.pgm"
        write_pgm(out_dir / name, getattr(triple, channel))
        files[channel] = name
    sidecar = {"channels": files, "width": triple.shape[1], "height": triple.shape[0], "scale": "intensity/255"}
    save_json(sidecar, out_dir / f"{stem}.json")
    return files


# --- Point clouds ---

def write_ply(file_path: PathLike, cloud: PointCloud) -> None:
    header = "\n".join([
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float32 x",
        "property float32 y",
        "property float32 z",
        "end_header",
    ])
    np.savetxt(file_path, cloud.points.astype(np.float32), fmt="%.6g", header=header,
               delimiter=" ", comments="")


def read_ply(file_path: PathLike) -> PointCloud:
    with open(file_path, "r", encoding="ascii") as f:
        count = None
        for line in f:
            line = line.strip()
            if line.startswith("element vertex"):
                count = int(line.split()[-1])
            if line == "end_header":
                break
        else:
            raise ConfigError(f"{file_path}: PLY header has no end_header")
        points = np.loadtxt(f, dtype=np.float64, ndmin=2) if count else np.zeros((0, 3))
    if count is None or len(points) != count:
        raise ConfigError(f"{file_path}: vertex count does not match the header")
    return PointCloud(points.reshape(-1, 3))


def write_depth(file_path: PathLike, depth: DepthMap) -> None:
    write_pfm(file_path, depth.data)


# --- Calibration artifacts ---

def table_to_dict(table: IntensityDepthTable) -> Dict[str, Any]:
    return {"bin_width": table.bin_width, "depths": [float(v) for v in table.depths], "h0": table.h0}


def write_table(file_path: PathLike, table: IntensityDepthTable) -> None:
    save_json(table_to_dict(table), file_path)


def read_table(file_path: PathLike) -> IntensityDepthTable:
    data = load_json(file_path)
    try:
        return IntensityDepthTable(float(data["bin_width"]), data["depths"], data.get("h0"))
    except KeyError as e:
        raise ConfigError(f"{file_path}: missing field {e}") from e


def write_remap(file_path: PathLike, remap: RemapField) -> None:
    """`file_path` is the JSON header; the maps land next to it as <stem>_x.pfm / <stem>_y.pfm."""
    path = Path(file_path)
    x_name, y_name = f"{path.stem}_x.pfm", f"{path.stem}_y.pfm"
    write_pfm(path.with_name(x_name), remap.map_x)
    write_pfm(path.with_name(y_name), remap.map_y)
    save_json({
        "crop_origin": list(remap.crop_origin),
        "out_width": remap.out_width,
        "out_height": remap.out_height,
        "raw_width": remap.raw_width,
        "raw_height": remap.raw_height,
        "mm_per_pixel": remap.mm_per_pixel,
        "x_map": x_name,
        "y_map": y_name,
    }, path)


def read_remap(file_path: PathLike) -> RemapField:
    path = Path(file_path)
    header = load_json(path)
    map_x = read_pfm(path.with_name(header["x_map"]))
    map_y = read_pfm(path.with_name(header["y_map"]))
    if map_x.shape != (header["out_height"], header["out_width"]):
        raise ConfigError(f"{path}: map size does not match the header")
    return RemapField(map_x, map_y, tuple(header["crop_origin"]), header["raw_width"],
                      header["raw_height"], header.get("mm_per_pixel"))


# --- Manifests ---

def write_manifest(file_path: PathLike, manifest: DatasetManifest) -> None:
    lines = [json.dumps({"normalization": manifest.normalization.model_dump()}, sort_keys=True)]
    lines += [json.dumps(s.model_dump(), sort_keys=True) for s in manifest.samples]
    Path(file_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(file_path: PathLike) -> DatasetManifest:
    lines = [line for line in Path(file_path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise ConfigError(f"{file_path}: empty manifest")
    try:
        header = json.loads(lines[0])
        samples = [Sample.model_validate(json.loads(line)) for line in lines[1:]]
        return DatasetManifest(samples=samples, normalization=Normalization.model_validate(header["normalization"]))
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        raise ConfigError(f"{file_path}: malformed manifest: {e}") from e


# --- Regressor parameters ---

def write_params(file_path: PathLike, params: RegressorParams, extra: Optional[Dict[str, Any]] = None) -> None:
    header = {
        "format": "float32-le",
        "layout": [[name, list(shape)] for name, shape in param_layout()],
        "input_shape": list(params.input_shape),
        **(extra or {}),
    }
    with open(file_path, "wb") as f:
        f.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        f.write(params.flatten().astype("<f4").tobytes())


def read_params(file_path: PathLike) -> Tuple[RegressorParams, Dict[str, Any]]:
    with open(file_path, "rb") as f:
        try:
            header = json.loads(f.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ConfigError(f"{file_path}: malformed parameter header") from e
        vector = np.frombuffer(f.read(), dtype="<f4")
    expected = [[name, list(shape)] for name, shape in param_layout()]
    if header.get("layout") != expected:
        raise ConfigError(f"{file_path}: parameter layout does not match this regressor")
    return unflatten(vector, tuple(header["input_shape"])), header


# --- Tables ---

def write_loss_curve(file_path: PathLike, records: Iterable[Any]) -> pd.DataFrame:
    frame = pd.DataFrame([r.model_dump() for r in records], columns=["epoch", "train_loss", "held_out_mae"])
    frame.to_csv(file_path, index=False)
    return frame
