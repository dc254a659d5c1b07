"""Tests for board rectification and the single-press intensity-to-depth table."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.calibration import (
    ContactCircle, GridSpec, IntensityDepthTable, RemapField, build_remap, calibrate_depth, detect_contact_circle,
    lookup_depth, rectify, sphere_depth,
)
from src.core import GrayImage
from src.errors import CalibrationError, DimensionError, GeometryError, ParameterError
from src.gelsim import make_reference


def _grid_markers(pitch=38.3, center=(320.3, 240.2), angle=0.0):
    c, s = np.cos(angle), np.sin(angle)
    points = []
    for i in range(-2, 3):
        for j in range(-2, 3):
            points.append((center[0] + pitch * (c * j - s * i), center[1] + pitch * (s * j + c * i)))
    return np.array(points)


# --- Types ---

def test_grid_needs_three_rows_and_columns():
    with pytest.raises(ValidationError):
        GridSpec(rows=2)


def test_table_invariants():
    IntensityDepthTable(0.1, [0.0, 0.2, 0.2, 0.5], h0=5.0)
    with pytest.raises(ParameterError):
        IntensityDepthTable(0.1, [0.1, 0.2])
    with pytest.raises(ParameterError):
        IntensityDepthTable(0.1, [0.0, 0.3, 0.2])
    with pytest.raises(ParameterError):
        IntensityDepthTable(0.1, [0.0, 6.0], h0=5.0)


# --- Lookup ---

def test_lookup_clamps_and_interpolates():
    table = IntensityDepthTable(0.1, [0.0, 0.4, 0.6])
    assert lookup_depth(table, 0.0) == 0.0
    assert lookup_depth(table, -0.3) == 0.0
    assert lookup_depth(table, table.max_drop) == pytest.approx(0.6)
    assert lookup_depth(table, 0.9) == pytest.approx(0.6)
    assert lookup_depth(table, 0.15) == pytest.approx(0.5)


def test_lookup_is_monotone(depth_table, rng):
    drops = np.sort(rng.uniform(0.0, 1.0, size=1000))
    assert np.all(np.diff(lookup_depth(depth_table, drops)) >= 0.0)


# --- Rectification ---

def test_exact_grid_gives_an_identity_crop():
    remap, scale = build_remap(_grid_markers(), GridSpec())
    assert (remap.out_width, remap.out_height) == (460, 345)
    assert remap.crop_origin == (90, 68)
    rows, cols = np.indices((345, 460), dtype=np.float64)
    np.testing.assert_allclose(remap.map_x, cols + 90, atol=1e-6)
    np.testing.assert_allclose(remap.map_y, rows + 68, atol=1e-6)
    assert scale.mm_per_pixel == pytest.approx(2.0 / 38.3)
    assert scale.mm_per_pixel == pytest.approx(0.0522, abs=1e-4)


def test_rotated_grid_has_no_residual_displacement():
    markers = _grid_markers(angle=np.deg2rad(3.0))
    remap, scale = build_remap(markers, GridSpec())
    assert scale.mm_per_pixel == pytest.approx(2.0 / 38.3, rel=1e-9)
    # the fitted grid passes through every marker, so the map is a pure crop
    rows, cols = np.indices((345, 460), dtype=np.float64)
    np.testing.assert_allclose(remap.map_x, cols + remap.crop_origin[0], atol=1e-6)


def test_wrong_marker_count_fails_calibration():
    with pytest.raises(CalibrationError):
        build_remap(_grid_markers()[:24], GridSpec())


def test_collinear_anchors_fail_calibration():
    line = np.array([(10.0 + 5 * k, 10.0 + 5 * k) for k in range(25)])
    with pytest.raises(CalibrationError):
        build_remap(line, GridSpec())


def test_identity_remap_is_a_bit_exact_center_crop():
    raw = make_reference(640, 480, seed=4)
    remap = RemapField.identity()
    out = rectify(raw, remap)
    assert out.shape == (345, 460)
    x0, y0 = remap.crop_origin
    assert np.array_equal(out.data, raw.data[y0:y0 + 345, x0:x0 + 460])


def test_rectify_checks_the_raw_size():
    with pytest.raises(DimensionError):
        rectify(GrayImage(np.zeros((100, 100))), RemapField.identity())


# --- Depth calibration ---

def test_contact_circle_of_the_ball_press(sensor_reference, ball_press, scale):
    circle = detect_contact_circle(sensor_reference, ball_press)
    assert circle.center_x == pytest.approx(230.0, abs=0.05)
    assert circle.center_y == pytest.approx(172.0, abs=0.05)
    # 4 mm ball at 1 mm: contact radius sqrt(7) mm
    assert circle.radius_px * scale.mm_per_pixel == pytest.approx(np.sqrt(7.0), abs=0.02)


def test_sphere_depth_peaks_at_the_indentation(scale):
    circle = ContactCircle(50.0, 40.0, 40.0)
    depth = sphere_depth((80, 100), circle, 4.0, scale)
    a = 40.0 * scale.mm_per_pixel
    assert depth.data.max() == pytest.approx(4.0 - np.sqrt(16.0 - a * a))
    assert depth.data[0, 0] == 0.0


def test_over_press_is_a_geometry_error(scale):
    with pytest.raises(GeometryError):
        sphere_depth((10, 10), ContactCircle(5.0, 5.0, 100.0), 4.0, scale)


def test_flat_press_has_no_contact(sensor_reference, scale):
    with pytest.raises(CalibrationError):
        calibrate_depth(sensor_reference, sensor_reference, 4.0, scale)


def test_table_is_anchored_and_monotone(depth_table, gel):
    assert depth_table.depths[0] == 0.0
    assert np.all(np.diff(depth_table.depths) >= 0.0)
    assert depth_table.depths.max() <= gel.h0
    assert depth_table.depths.max() == pytest.approx(1.0, abs=0.05)


def test_table_reproduces_its_own_calibration_press(depth_table, sensor_reference, ball_press, scale):
    circle = detect_contact_circle(sensor_reference, ball_press)
    truth = sphere_depth(sensor_reference.shape, circle, 4.0, scale).data
    disk = truth > 0.0
    recovered = lookup_depth(depth_table, (sensor_reference.data - ball_press.data)[disk])
    assert np.abs(recovered - truth[disk]).mean() < 0.03


def test_table_follows_the_inverse_darkening_curve(depth_table, gel):
    optics = gel.optics
    drops = depth_table.bin_centers[1:]
    inverse = -optics.lambda_d * np.log1p(-drops / optics.i_drop_max)
    assert np.abs(depth_table.depths[1:] - inverse).max() < 0.02


def test_common_brightness_offset_does_not_change_the_table(depth_table, sensor_reference, ball_press, scale, gel):
    shifted = calibrate_depth(GrayImage(sensor_reference.data + 0.125), GrayImage(ball_press.data + 0.125),
                              4.0, scale, h0=gel.h0)
    drops = np.linspace(0.0, depth_table.max_drop, 200)
    np.testing.assert_allclose(lookup_depth(shifted, drops), lookup_depth(depth_table, drops), atol=5e-3)
