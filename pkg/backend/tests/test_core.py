"""Tests for the shared image types, grayscale conversion, Gaussian blur and blob detection."""

import numpy as np
import pytest

from src.core import (
    DepthMap, DiffImage, GrayImage, PixelScale, Wrench, detect_blobs, gaussian_blur, gaussian_kernel, to_grayscale,
)
from src.errors import DimensionError, ParameterError


# --- Types ---

def test_gray_image_rejects_out_of_range_intensities():
    with pytest.raises(ParameterError):
        GrayImage(np.full((4, 4), 1.2))
    with pytest.raises(ParameterError):
        GrayImage(np.full((4, 4), -0.1))


def test_grids_are_read_only_copies():
    values = np.full((3, 5), 0.5)
    img = GrayImage(values)
    values[0, 0] = 0.0
    assert img.data[0, 0] == 0.5
    assert (img.width, img.height) == (5, 3)
    with pytest.raises(ValueError):
        img.data[0, 0] = 0.1


def test_grids_must_be_two_dimensional_and_finite():
    with pytest.raises(DimensionError):
        GrayImage(np.zeros(9))
    with pytest.raises(ParameterError):
        DepthMap(np.array([[0.0, np.nan]]))


def test_diff_and_depth_ranges():
    DiffImage(np.array([[-1.0, 1.0]]))
    with pytest.raises(ParameterError):
        DiffImage(np.array([[-1.5, 0.0]]))
    with pytest.raises(ParameterError):
        DepthMap(np.array([[-0.01]]))
    with pytest.raises(ParameterError):
        DepthMap(np.array([[6.0]]), h0=5.0)


def test_pixel_scale_must_be_positive():
    assert PixelScale(mm_per_pixel=0.5).pixel_area == 0.25
    with pytest.raises(ValueError):
        PixelScale(mm_per_pixel=0.0)


def test_wrench_array_conversion():
    w = Wrench.from_array([1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(w.as_array(), [1, 2, 3, 4, 5, 6])
    assert Wrench().as_array().sum() == 0.0
    with pytest.raises(DimensionError):
        Wrench.from_array([1, 2, 3])
    with pytest.raises(ValueError):
        Wrench(fx=float("inf"))


# --- Grayscale ---

def test_equal_channels_give_the_same_gray():
    rgb = np.full((6, 7, 3), 0.5)
    gray = to_grayscale(rgb)
    np.testing.assert_allclose(gray.data, 0.5, atol=1e-12)


def test_black_maps_to_zero():
    assert to_grayscale(np.zeros((2, 2, 3))).data.max() == 0.0


def test_pure_red_uses_the_luma_weight():
    gray = to_grayscale(np.array([[[1.0, 0.0, 0.0]]]))
    assert gray.data[0, 0] == pytest.approx(0.299)


def test_grayscale_is_idempotent_on_gray_inputs(rng):
    gray = rng.uniform(0.0, 1.0, size=(5, 8))
    once = to_grayscale([gray, gray, gray])
    twice = to_grayscale([once.data, once.data, once.data])
    np.testing.assert_allclose(twice.data, once.data, atol=1e-12)


def test_mismatched_channels_are_rejected():
    with pytest.raises(DimensionError):
        to_grayscale([np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 5))])


# --- Gaussian blur ---

def test_blur_keeps_a_constant_image():
    img = GrayImage(np.full((20, 30), 0.37))
    out = gaussian_blur(img, 2.0, 5)
    np.testing.assert_allclose(out.data, 0.37, atol=1e-9)
    assert out.shape == img.shape


def test_impulse_center_is_the_squared_center_tap():
    data = np.zeros((15, 15))
    data[7, 7] = 1.0
    out = gaussian_blur(GrayImage(data), 1.0, 3)
    w0 = gaussian_kernel(1.0, 3)[3]
    assert out.data[7, 7] == pytest.approx(w0 ** 2, rel=1e-12)


def test_blur_preserves_the_mass_of_an_interior_impulse():
    data = np.zeros((21, 21))
    data[10, 10] = 1.0
    out = gaussian_blur(DepthMap(data), 1.5, 4)
    assert out.data.sum() == pytest.approx(1.0, rel=1e-6)
    assert isinstance(out, DepthMap)


def test_blur_rejects_bad_parameters():
    img = GrayImage(np.zeros((5, 5)))
    with pytest.raises(ParameterError):
        gaussian_blur(img, 0.0, 3)
    with pytest.raises(ParameterError):
        gaussian_blur(img, 1.0, 0)


def test_blur_is_deterministic(rng):
    img = GrayImage(rng.uniform(size=(30, 40)))
    a = gaussian_blur(img, 2.0, 5)
    b = gaussian_blur(img, 2.0, 5)
    assert np.array_equal(a.data, b.data)


# --- Blob detection ---

def _disk_drop(shape, centers, radius, drop):
    rows, cols = np.indices(shape)
    data = np.zeros(shape)
    for cx, cy in centers:
        data[np.hypot(cols - cx, rows - cy) <= radius] = -drop
    return DiffImage(data)


def test_no_contact_gives_no_blobs():
    assert detect_blobs(DiffImage(np.zeros((50, 60))), 0.1) == []


def test_single_disk_centroid():
    diff = _disk_drop((160, 200), [(100, 80)], 5, 0.3)
    blobs = detect_blobs(diff, 0.1)
    assert len(blobs) == 1
    assert blobs[0].centroid_x == pytest.approx(100, abs=0.1)
    assert blobs[0].centroid_y == pytest.approx(80, abs=0.1)
    assert blobs[0].area > 70


def test_grid_of_disks_is_found_in_row_major_order():
    centers = [(40 + 40 * j, 40 + 40 * i) for i in range(5) for j in range(5)]
    blobs = detect_blobs(_disk_drop((240, 240), centers, 6, 0.3), 0.1)
    assert len(blobs) == 25
    found = np.array([(b.centroid_x, b.centroid_y) for b in blobs])
    np.testing.assert_allclose(found, np.array(centers, dtype=float), atol=0.2)


def test_diagonal_neighbours_are_separate_components():
    data = np.zeros((6, 6))
    data[2, 2] = data[3, 3] = -0.5
    assert len(detect_blobs(DiffImage(data), 0.1)) == 2


def test_min_area_filters_small_components():
    diff = _disk_drop((100, 100), [(30, 30), (70, 70)], 4, 0.3)
    data = diff.data.copy()
    data[5, 90] = -0.3
    blobs = detect_blobs(DiffImage(data), 0.1, min_area=10)
    assert len(blobs) == 2


def test_brightening_is_not_a_blob():
    assert detect_blobs(DiffImage(np.full((10, 10), 0.5)), 0.1) == []


def test_threshold_must_lie_in_the_open_unit_interval():
    with pytest.raises(ParameterError):
        detect_blobs(DiffImage(np.zeros((4, 4))), 0.0)
    with pytest.raises(ParameterError):
        detect_blobs(DiffImage(np.zeros((4, 4))), 1.0)
