"""
Reconstruction Benchmark: closed-loop depth accuracy

Renders raw (distorted) calibration frames, fits the rectification map from
the board press, calibrates the depth table with the large ball, then scores
the reconstruction of presses made with a smaller ball against the analytic
sphere depth.
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from src.calibration import build_remap, calibrate_depth, detect_contact_circle, detect_markers, rectify
from src.errors import CalibrationError
from src.gelsim import ContactState, apply_distortion, board_heightfield, make_reference, press_image, procedural_object
from src.reconstruction import SpherePress, difference, eval_sphere_presses, reconstruct
from src.settings import RunConfig

from utils import calculate_confidence_interval, calculate_statistics, save_json

logger = logging.getLogger(__name__)


class ReconstructionBenchmark:
    """Calibrate once, then reconstruct a batch of sphere presses."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.gel = config.gel_spec
        self.scale = config.sensor.scale
        raw_w, raw_h = config.sensor.raw_size
        self.center = (raw_w / 2.0, raw_h / 2.0)
        self.reference = make_reference(raw_w, raw_h, config.seed, config.sensor.reference_level,
                                        config.sensor.reference_variation)

    def _raw(self, img):
        k1, k2 = self.config.sensor.distortion_k1, self.config.sensor.distortion_k2
        return apply_distortion(img, k1, k2) if (k1 or k2) else img

    def calibrate(self):
        """Remap from the board press, depth table from the calibration ball."""
        cal = self.config.calibration
        board = board_heightfield(cal.grid.rows, cal.grid.cols, cal.grid.spacing_mm, cal.marker_radius_mm, self.scale)
        board_img = press_image(self.gel, board, ContactState(press_depth=cal.board_press_depth_mm, center=self.center),
                                self.reference, self.scale)
        raw_ref = self._raw(self.reference)
        markers = detect_markers(raw_ref, self._raw(board_img), cal.marker_threshold, cal.marker_min_area)
        remap, fitted = build_remap(markers, cal.grid, self.config.sensor.raw_size, self.config.sensor.size)
        logger.info(f"📐 Fitted {fitted.mm_per_pixel:.5f} mm/px (configured {self.scale.mm_per_pixel:.5f})")

        ball = procedural_object("sphere", {"radius_mm": cal.ball_radius_mm}, scale=self.scale)
        ball_img = press_image(self.gel, ball, ContactState(press_depth=cal.ball_press_depth_mm, center=self.center),
                               self.reference, self.scale)
        table = calibrate_depth(rectify(raw_ref, remap), rectify(self._raw(ball_img), remap), cal.ball_radius_mm,
                                fitted, cal.bin_width, cal.contact_threshold, h0=self.gel.h0)
        return remap, fitted, table

    def run(self, n_presses: Optional[int] = None) -> Dict[str, Any]:
        cal, sensor, f = self.config.calibration, self.config.sensor, self.config.recon
        n_presses = n_presses or cal.n_eval_presses
        remap, fitted, table = self.calibrate()
        raw_ref = self._raw(self.reference)
        rect_ref = rectify(raw_ref, remap)

        rng = np.random.default_rng([self.config.seed, 20])
        ball = procedural_object("sphere", {"radius_mm": cal.eval_ball_radius_mm}, scale=self.scale)
        margin_x, margin_y = 0.6 * sensor.width / 2.0, 0.6 * sensor.height / 2.0
        presses: List[SpherePress] = []
        press_log = []
        for k in tqdm(range(n_presses), desc="Reconstructing presses", disable=None):
            contact = ContactState(
                press_depth=float(rng.uniform(0.3, 0.8)),
                center=(self.center[0] + float(rng.uniform(-margin_x, margin_x)),
                        self.center[1] + float(rng.uniform(-margin_y, margin_y))),
            )
            tactile = rectify(self._raw(press_image(self.gel, ball, contact, self.reference, self.scale)), remap)
            depth = reconstruct(difference(rect_ref, tactile), table, f.sigma1, f.radius1, f.sigma2, f.radius2)
            try:
                circle = detect_contact_circle(rect_ref, tactile, cal.contact_threshold)
            except CalibrationError as e:
                logger.warning(f"press_{k:02d}: {e}")
                circle = None
            presses.append(SpherePress(depth, cal.eval_ball_radius_mm, circle, f"press_{k:02d}"))
            press_log.append({"label": f"press_{k:02d}", "press_depth_mm": contact.press_depth,
                              "peak_depth_mm": float(depth.data.max())})

        report = eval_sphere_presses(presses, fitted)
        low, high = calculate_confidence_interval(report.per_press_mae_mm)
        return {
            "summary": {"MAE_mm": report.mae_mm, "Std_mm": report.std_mm, "n_images": report.n_images,
                        "n_pixels": report.n_pixels},
            "per_press_statistics": calculate_statistics(report.per_press_mae_mm),
            "per_press_mae_ci95": [low, high],
            "mm_per_pixel": fitted.mm_per_pixel,
            "table_max_drop": table.max_drop,
            "excluded": report.excluded,
            "presses": press_log,
        }


def run_recon_benchmark(config: RunConfig, output_path: str, n_presses: Optional[int] = None) -> Dict[str, Any]:
    """Run the benchmark and save its JSON results."""
    results = ReconstructionBenchmark(config).run(n_presses)
    save_json(results, output_path)
    return results
