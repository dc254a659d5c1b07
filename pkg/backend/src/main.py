# backend/src/main.py

"""
Command-line front end: one command per pipeline stage.

    python -m src.main simulate-calibration --config configs/default.yaml --out runs/calib
    python -m src.main calibrate --ref runs/calib/raw/reference.pfm --ball runs/calib/raw/ball.pfm \
        --board runs/calib/raw/board.pfm --out runs/calib/model
    python -m src.main reconstruct --table runs/calib/model/table.json --remap runs/calib/model/remap.json \
        --ref ... --tactile ... --out runs/recon
    python -m src.main simulate-dataset --config configs/default.yaml --out runs/data
    python -m src.main train --manifest runs/data/manifest.jsonl --out runs/model
    python -m src.main evaluate --manifest runs/data/manifest.jsonl --params runs/model/params.bin --out runs/eval

Exit codes: 0 success, 2 usage/config, 3 empty result, 4 calibration
failure, 5 numeric failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

# --- Load .env file BEFORE any other modules are imported ---
from dotenv import load_dotenv
load_dotenv()

import numpy as np
from tqdm import tqdm

from . import formats
from .calibration import RemapField, build_remap, calibrate_depth, detect_markers, rectify
from .core import GrayImage, PixelScale
from .deformation import compose_triple, visualize
from .errors import GelSenseError, ParameterError
from .force_dataset import DatasetManifest, collect_dataset, split_by_object, split_standard
from .force_training import evaluate, evaluate_constant, train
from .gelsim import (
    ContactState, Frame, apply_distortion, board_heightfield, make_object_catalog, make_reference,
    press_image, procedural_object, random_trajectory, simulate_session,
)
from .reconstruction import difference, reconstruct, to_pointcloud
from .settings import RunConfig, load_config

log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# --- Helpers ---

def _distort(img: GrayImage, config: RunConfig) -> GrayImage:
    k1, k2 = config.sensor.distortion_k1, config.sensor.distortion_k2
    if k1 == 0.0 and k2 == 0.0:
        return img
    return apply_distortion(img, k1, k2)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_remap(path: Optional[str]) -> Optional[RemapField]:
    return formats.read_remap(path) if path else None


def _split(manifest: DatasetManifest, args, config: RunConfig) -> Tuple[DatasetManifest, DatasetManifest]:
    if args.split == "standard":
        n_test = args.n_test if args.n_test is not None else max(1, min(config.collection.n_test, len(manifest) // 10))
        return split_standard(manifest, n_test, config.seed)

    test_ids: List[str] = args.test_objects.split(",") if args.test_objects else list(config.collection.test_objects)
    if not test_ids:
        test_ids = manifest.object_ids[::10]
    return split_by_object(manifest, test_ids)


# --- Commands ---

def cmd_simulate_calibration(args, config: RunConfig) -> int:
    """Raw (distorted) reference, ball press, board press and evaluation presses."""
    out = _out_dir(args)
    raw_dir = out / "raw"
    raw_dir.mkdir(exist_ok=True)
    gel, scale = config.gel_spec, config.sensor.scale
    raw_w, raw_h = config.sensor.raw_size
    center = (raw_w / 2.0, raw_h / 2.0)
    cal = config.calibration

    reference = make_reference(raw_w, raw_h, config.seed, config.sensor.reference_level,
                               config.sensor.reference_variation)
    ball = procedural_object("sphere", {"radius_mm": cal.ball_radius_mm}, scale=scale, object_id="calibration_ball")
    board = board_heightfield(cal.grid.rows, cal.grid.cols, cal.grid.spacing_mm, cal.marker_radius_mm, scale)

    scenes = {
        "reference.pfm": reference,
        "ball.pfm": press_image(gel, ball, ContactState(press_depth=cal.ball_press_depth_mm, center=center),
                                reference, scale),
        "board.pfm": press_image(gel, board, ContactState(press_depth=cal.board_press_depth_mm, center=center),
                                 reference, scale),
    }

    # evaluation presses with a different ball, kept inside the cropped sensing area
    rng = np.random.default_rng([config.seed, 20])
    eval_ball = procedural_object("sphere", {"radius_mm": cal.eval_ball_radius_mm}, scale=scale, object_id="eval_ball")
    margin_x = (config.sensor.width / 2.0) * 0.6
    margin_y = (config.sensor.height / 2.0) * 0.6
    presses = []
    for k in range(cal.n_eval_presses):
        contact = ContactState(
            press_depth=float(rng.uniform(0.3, 0.8)),
            center=(center[0] + float(rng.uniform(-margin_x, margin_x)),
                    center[1] + float(rng.uniform(-margin_y, margin_y))),
        )
        name = f"eval_{k:02d}.pfm"
        scenes[name] = press_image(gel, eval_ball, contact, reference, scale)
        presses.append({"file": name, "press_depth_mm": contact.press_depth, "center": list(contact.center)})

    for name, img in tqdm(scenes.items(), desc="write scenes", disable=None):
        formats.write_gray(raw_dir / name, _distort(img, config))
    formats.save_json({
        "ball_radius_mm": cal.ball_radius_mm,
        "eval_ball_radius_mm": cal.eval_ball_radius_mm,
        "presses": presses,
        "distortion": [config.sensor.distortion_k1, config.sensor.distortion_k2],
    }, out / "scene.json")
    print(f"wrote {len(scenes)} raw frames to {raw_dir}")
    return 0


def cmd_calibrate(args, config: RunConfig) -> int:
    out = _out_dir(args)
    cal = config.calibration
    ref = formats.read_gray(args.ref)
    ball = formats.read_gray(args.ball)

    if args.board:
        markers = detect_markers(ref, formats.read_gray(args.board), cal.marker_threshold, cal.marker_min_area)
        remap, scale = build_remap(markers, cal.grid, (ref.width, ref.height), config.sensor.size)
    else:
        remap = RemapField.identity((ref.width, ref.height), config.sensor.size)
        remap = RemapField(remap.map_x, remap.map_y, remap.crop_origin, remap.raw_width, remap.raw_height,
                           config.sensor.mm_per_pixel)
        scale = config.sensor.scale

    table = calibrate_depth(rectify(ref, remap), rectify(ball, remap), cal.ball_radius_mm, scale,
                            cal.bin_width, cal.contact_threshold, h0=config.gel.h0)
    formats.write_table(out / "table.json", table)
    formats.write_remap(out / "remap.json", remap)
    print(f"mm_per_pixel {scale.mm_per_pixel:.6f}")
    return 0


def cmd_reconstruct(args, config: RunConfig) -> int:
    if not Path(args.table).is_file():
        raise FileNotFoundError(f"depth table not found: {args.table}")
    out = _out_dir(args)
    table = formats.read_table(args.table)
    remap = _load_remap(args.remap)
    ref, tactile = formats.read_gray(args.ref), formats.read_gray(args.tactile)
    if remap is not None:
        ref, tactile = rectify(ref, remap), rectify(tactile, remap)
    mm_per_pixel = remap.mm_per_pixel if remap is not None and remap.mm_per_pixel else config.sensor.mm_per_pixel

    f = config.recon
    depth = reconstruct(difference(ref, tactile), table, f.sigma1, f.radius1, f.sigma2, f.radius2)
    formats.write_depth(out / "depth.pfm", depth)
    formats.write_ply(out / "cloud.ply", to_pointcloud(depth, PixelScale(mm_per_pixel=mm_per_pixel)))
    print(f"max depth {float(depth.data.max()):.4f} mm")
    return 0


def cmd_visualize(args, config: RunConfig) -> int:
    out = _out_dir(args)
    remap = _load_remap(args.remap)
    ref, tactile = formats.read_gray(args.ref), formats.read_gray(args.tactile)
    if remap is not None:
        ref, tactile = rectify(ref, remap), rectify(tactile, remap)
    triple = compose_triple(ref, tactile)
    formats.write_triple(out, "triple", triple)
    formats.write_ppm(out / "deformation.ppm", visualize(triple, args.gain))
    print(f"wrote deformation view to {out / 'deformation.ppm'}")
    return 0


def _session_streams(config: RunConfig) -> Iterator[Tuple[str, Iterator[Frame]]]:
    scale, gel, sensor, col = config.sensor.scale, config.gel_spec, config.sensor, config.collection
    catalog = make_object_catalog(col.n_objects, config.seed, scale)
    for k, obj in enumerate(catalog):
        rng = np.random.default_rng([config.seed, k, 1])
        schedule = [
            random_trajectory(rng, obj.id, sensor.size, scale, col.press_steps, col.motion_steps)
            for _ in range(col.trajectories_per_object)
        ]
        reference = make_reference(sensor.width, sensor.height, [config.seed, k, 2],
                                   sensor.reference_level, sensor.reference_variation)
        yield obj.id, simulate_session(gel, [obj], schedule, reference, scale, [config.seed, k, 3],
                                       sensor.noise_std or None)


def cmd_simulate_dataset(args, config: RunConfig) -> int:
    out = _out_dir(args)
    col = config.collection
    manifest = collect_dataset(_session_streams(config), out, col.epsilon, col.gate_scale, col.energy_threshold)
    formats.write_manifest(out / "manifest.jsonl", manifest)
    print(f"{len(manifest)} samples")
    return 0


def cmd_train(args, config: RunConfig) -> int:
    out = _out_dir(args)
    manifest = formats.read_manifest(args.manifest)
    train_set, test_set = _split(manifest, args, config)
    # the selected epoch is scored on the same split evaluate reports, so that MAE reads optimistic
    result = train(train_set, config.train_config, test_set, Path(args.manifest).parent)

    formats.write_params(out / "params.bin", result.params, {
        "seed": config.seed,
        "normalization": train_set.normalization.model_dump(),
        "selected_epoch": result.selected_epoch,
        "split": args.split,
    })
    formats.write_loss_curve(out / "loss_curve.csv", result.loss_curve)
    formats.save_json({
        "selected_epoch": result.selected_epoch,
        "n_train": len(train_set),
        "n_test": len(test_set),
        "selected_on": "test",
        "split": args.split,
        "train_config": config.train_config.model_dump(),
    }, out / "train_summary.json")
    print(f"selected epoch {result.selected_epoch}")
    return 0


def cmd_evaluate(args, config: RunConfig) -> int:
    out = _out_dir(args)
    manifest = formats.read_manifest(args.manifest)
    _, test_set = _split(manifest, args, config)
    norm = test_set.normalization

    if args.baseline:
        report = evaluate_constant(test_set, norm)
        name = "baseline_report.json"
    else:
        if not args.params:
            raise ParameterError("--params is required unless --baseline is given")
        params, header = formats.read_params(args.params)
        report = evaluate(params, test_set, norm, Path(args.manifest).parent, header.get("selected_epoch"))
        name = "eval_report.json"

    formats.save_json({"split": args.split, **report.model_dump()}, out / name)
    print(" ".join(f"{c}={m:.5g}" for c, m in zip(report.components, report.mae)))
    return 0


# --- Argument parsing ---

def _add_split_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="JSON-lines manifest from simulate-dataset")
    parser.add_argument("--split", choices=["standard", "object"], default="standard")
    parser.add_argument("--n-test", type=int, default=None, help="Test samples for the standard split")
    parser.add_argument("--test-objects", default=None, help="Comma-separated object ids for the object split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gelsense", description="Simulated vision-based tactile sensing pipeline")
    parser.add_argument("--config", default=None, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the configured seed")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-calibration", help="Render raw calibration and evaluation frames")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_calibration)

    p = sub.add_parser("calibrate", help="Fit the rectification map and the depth table")
    p.add_argument("--ref", required=True)
    p.add_argument("--ball", required=True)
    p.add_argument("--board", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("reconstruct", help="Depth map and point cloud of one tactile frame")
    p.add_argument("--table", required=True)
    p.add_argument("--remap", default=None)
    p.add_argument("--ref", required=True)
    p.add_argument("--tactile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("visualize", help="Darker/brighter deformation channels")
    p.add_argument("--remap", default=None)
    p.add_argument("--ref", required=True)
    p.add_argument("--tactile", required=True)
    p.add_argument("--gain", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("simulate-dataset", help="Simulate sessions and collect gated samples")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_dataset)

    p = sub.add_parser("train", help="Train the wrench regressor")
    _add_split_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="Per-component MAE/Std on the test split")
    _add_split_args(p)
    p.add_argument("--params", default=None)
    p.add_argument("--baseline", action="store_true", help="Score the constant-mean predictor instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        config = load_config(args.config, args.seed)
        return args.func(args, config)
    except GelSenseError as e:
        log.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (FileNotFoundError, IsADirectoryError) as e:
        log.debug("missing input", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
