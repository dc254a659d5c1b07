"""Tests for the gel forward model: indentation, flow, optics, wrench labels, distortion and sessions."""

import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import ndimage

from src.core import GrayImage, Wrench
from src.errors import DimensionError, ParameterError, PunchThroughError
from src.gelsim import (
    ContactState, GelSpec, HeightField, ThicknessField, apply_distortion, board_heightfield, distort_points, flow,
    indent, make_object_catalog, make_reference, penetration, press_image, press_trajectory, procedural_object,
    random_trajectory, render, simulate_session, synthesize_wrench,
)

FRAME = (201, 201)
CENTER = (100.0, 100.0)


def _radius_mm(shape, center, scale):
    rows, cols = np.indices(shape, dtype=np.float64)
    return np.hypot(cols - center[0], rows - center[1]) * scale.mm_per_pixel


# --- Indentation ---

def test_zero_press_leaves_the_gel_flat(gel, scale):
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale)
    field = indent(gel, ball, ContactState(press_depth=0.0, center=CENTER), scale, FRAME)
    assert np.all(field.data == gel.h0)


def test_flat_cylinder_is_piecewise_constant(gel, scale):
    cylinder = procedural_object("cylinder", {"radius_mm": 3.0}, scale=scale)
    field = indent(gel, cylinder, ContactState(press_depth=0.5, center=CENTER), scale, FRAME)
    r = _radius_mm(field.shape, CENTER, scale)
    inside = r < 3.0 - 2 * scale.mm_per_pixel
    outside = r > 3.0 + 2 * scale.mm_per_pixel
    np.testing.assert_allclose(field.data[inside], gel.h0 - 0.5)
    np.testing.assert_allclose(field.data[outside], gel.h0)


def test_sphere_penetration_matches_sphere_plane_geometry(gel, scale):
    R, d = 4.0, 1.0
    ball = procedural_object("sphere", {"radius_mm": R}, scale=scale)
    field = indent(gel, ball, ContactState(press_depth=d, center=CENTER), scale, FRAME)
    r = _radius_mm(field.shape, CENTER, scale)
    expected = np.where(r <= R, np.maximum(0.0, np.sqrt(np.maximum(R * R - r * r, 0.0)) - (R - d)), 0.0)
    np.testing.assert_allclose(penetration(field, gel), expected, atol=1e-9)


def test_press_reaching_the_base_is_a_punch_through(gel, scale):
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale)
    with pytest.raises(PunchThroughError):
        indent(gel, ball, ContactState(press_depth=gel.h0, center=CENTER), scale, FRAME)


def test_tilt_is_bounded():
    with pytest.raises(ValidationError):
        ContactState(press_depth=0.5, tilt=(0.3, 0.0))


# --- Flow ---

def test_flow_without_contact_is_the_identity(gel, scale):
    pre = ThicknessField(np.full((40, 50), gel.h0))
    assert flow(pre, gel, ContactState(), scale) is pre


def test_symmetric_press_gives_a_symmetric_bulge(gel, scale):
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale)
    contact = ContactState(press_depth=0.8, center=CENTER)
    pre = indent(gel, ball, contact, scale, FRAME)
    bulge = flow(pre, gel, contact, scale).data - pre.data
    assert bulge.min() >= 0.0
    np.testing.assert_allclose(bulge, bulge[::-1, :], atol=1e-9)
    np.testing.assert_allclose(bulge, bulge[:, ::-1], atol=1e-9)


@pytest.mark.parametrize("drag,twist", [((0.0, 0.0), 0.0), ((0.6, -0.3), 0.0), ((0.0, 0.0), 0.25), ((0.4, 0.4), -0.2)])
def test_bulge_volume_is_the_flow_fraction_of_the_displaced_volume(gel, scale, drag, twist):
    cone = procedural_object("cone", {"radius_mm": 3.0, "slope": 0.5}, scale=scale)
    contact = ContactState(press_depth=0.9, center=CENTER, drag=drag, twist=twist)
    pre = indent(gel, cone, contact, scale, FRAME)
    post = flow(pre, gel, contact, scale)
    displaced = penetration(pre, gel).sum() * scale.pixel_area
    bulge = (post.data - pre.data).sum() * scale.pixel_area
    assert bulge == pytest.approx(gel.flow_fraction * displaced, rel=1e-6)


def test_contact_pixels_are_untouched_by_flow(gel, scale):
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale)
    contact = ContactState(press_depth=0.8, center=CENTER, drag=(0.5, 0.0))
    pre = indent(gel, ball, contact, scale, FRAME)
    post = flow(pre, gel, contact, scale)
    in_contact = pre.data < gel.h0
    assert np.array_equal(post.data[in_contact], pre.data[in_contact])


def _rotated(field, center, angle):
    """`field` turned by `angle` (+x toward +y) about `center` = (row, col)."""
    cy, cx = center
    rows, cols = np.indices(field.shape, dtype=np.float64)
    px, py = cols - cx, rows - cy
    c, s = math.cos(angle), math.sin(angle)
    return ndimage.map_coordinates(field, [cy - s * px + c * py, cx + c * px + s * py], order=1, mode="nearest")


@pytest.fixture(scope="module")
def star_press(gel, scale):
    star = procedural_object("prism_star", {"radius_mm": 2.5, "points": 5, "inner_ratio": 0.5}, scale=scale)
    return indent(gel, star, ContactState(press_depth=0.5, center=CENTER), scale, FRAME)


def test_twist_turns_the_bulge_of_an_asymmetric_contact(gel, scale, star_press):
    angle = 0.25
    contact_mask = penetration(star_press, gel) > 0.0
    center = ndimage.center_of_mass(contact_mask)
    plain = flow(star_press, gel, ContactState(press_depth=0.5, center=CENTER), scale).data - star_press.data
    twisted = flow(star_press, gel, ContactState(press_depth=0.5, center=CENTER, twist=angle), scale).data
    twisted -= star_press.data

    distance = ndimage.distance_transform_edt(~contact_mask, sampling=scale.mm_per_pixel)
    ring = (distance > 0.2) & (distance < 1.5)
    ring &= (_rotated(distance, center, angle) > 0.2) & (_rotated(distance, center, -angle) > 0.2)
    assert ring.sum() > 1000

    def error(expected):
        return float(np.abs(twisted - expected)[ring].mean())

    ahead = error(_rotated(plain, center, angle))
    assert ahead < 0.5 * error(plain)
    assert ahead < 0.5 * error(_rotated(plain, center, -angle))


@pytest.mark.parametrize("excess, limit", [(0.6, 0.3), (-0.9, -0.3)])
def test_twist_bias_saturates(gel, scale, star_press, excess, limit):
    clamped = flow(star_press, gel, ContactState(press_depth=0.5, center=CENTER, twist=limit), scale)
    beyond = flow(star_press, gel, ContactState(press_depth=0.5, center=CENTER, twist=excess), scale)
    assert np.array_equal(beyond.data, clamped.data)
    plain = flow(star_press, gel, ContactState(press_depth=0.5, center=CENTER), scale)
    assert not np.array_equal(beyond.data, plain.data)


def test_zero_flow_fraction_adds_no_bulge(scale):
    gel = GelSpec(flow_fraction=0.0)
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale)
    contact = ContactState(press_depth=0.5, center=CENTER)
    pre = indent(gel, ball, contact, scale, FRAME)
    assert np.array_equal(flow(pre, gel, contact, scale).data, pre.data)


# --- Optics ---

def test_flat_gel_renders_the_reference_exactly(gel, small_reference):
    flat = ThicknessField(np.full(small_reference.shape, gel.h0))
    assert np.array_equal(render(flat, small_reference, gel).data, small_reference.data)


def test_darkening_at_one_decay_length(gel):
    thickness = ThicknessField(np.array([[gel.h0 - gel.optics.lambda_d]]))
    out = render(thickness, GrayImage(np.array([[0.8]])), gel)
    assert out.data[0, 0] == pytest.approx(0.8 - 0.6 * (1.0 - math.exp(-1.0)), abs=1e-12)
    assert out.data[0, 0] == pytest.approx(0.4207, abs=1e-4)


def test_rendering_is_strictly_monotone_in_thickness(gel):
    reference = GrayImage(np.full((1, 100), 0.8))
    thinner = render(ThicknessField(np.linspace(gel.h0 - 0.01, 0.5, 100)[None, :]), reference, gel).data[0]
    thicker = render(ThicknessField(np.linspace(gel.h0 + 0.01, gel.h0 + 1.0, 100)[None, :]), reference, gel).data[0]
    assert np.all(np.diff(thinner) < 0.0)
    assert np.all(np.diff(thicker) > 0.0)


def test_render_rejects_mismatched_sizes(gel):
    with pytest.raises(DimensionError):
        render(ThicknessField(np.full((4, 4), 5.0)), GrayImage(np.full((4, 5), 0.5)), gel)


# --- Wrench labels ---

def _disk(shape, center, radius_mm, value, scale):
    return np.where(_radius_mm(shape, center, scale) <= radius_mm, value, 0.0)


def test_no_penetration_gives_a_zero_wrench(gel, scale):
    assert synthesize_wrench(np.zeros((10, 10)), gel, ContactState(), scale) == Wrench()


def test_flat_disk_normal_force(gel, scale):
    pen = _disk((161, 161), (80, 80), 3.0, 0.5, scale)
    w = synthesize_wrench(pen, gel, ContactState(press_depth=0.5), scale)
    assert w.fz == pytest.approx(-gel.k_n * 0.5 * math.pi * 9.0, rel=0.02)
    assert w.fz == pytest.approx(-0.5655, rel=0.02)
    for value in (w.fx, w.fy, w.tx, w.ty, w.tz):
        assert abs(value) < 1e-9


def test_twisted_disk_torque_uses_the_polar_moment(gel, scale):
    a = 3.0
    pen = _disk((161, 161), (80, 80), a, 0.5, scale)
    w = synthesize_wrench(pen, gel, ContactState(press_depth=0.5, twist=0.1), scale)
    expected = gel.k_s * 0.1 * (math.pi * a ** 4 / 2.0) / 1000.0
    assert w.tz == pytest.approx(expected, rel=0.02)


def test_indented_cylinder_wrench_with_twist_and_subpixel_center(gel, scale):
    a, d, twist = 3.0, 0.5, 0.1
    cylinder = procedural_object("cylinder", {"radius_mm": a}, scale=scale)
    contact = ContactState(press_depth=d, twist=twist, center=(100.4, 100.7))
    pen = penetration(indent(gel, cylinder, contact, scale, FRAME), gel)
    w = synthesize_wrench(pen, gel, contact, scale)
    assert w.fz == pytest.approx(-gel.k_n * d * math.pi * a * a, rel=0.02)
    assert w.tz == pytest.approx(gel.k_s * twist * (math.pi * a ** 4 / 2.0) / 1000.0, rel=0.02)


@pytest.mark.parametrize("twist, center", [(0.01, CENTER), (0.0, (100.5, 100.3)), (0.2, (99.8, 100.25))])
def test_normal_force_ignores_rotation_and_placement(gel, scale, twist, center):
    cylinder = procedural_object("cylinder", {"radius_mm": 2.5}, scale=scale)
    upright = ContactState(press_depth=0.5, center=CENTER)
    moved = ContactState(press_depth=0.5, twist=twist, center=center)
    fz = [synthesize_wrench(penetration(indent(gel, cylinder, c, scale, FRAME), gel), gel, c, scale).fz
          for c in (upright, moved)]
    assert fz[1] == pytest.approx(fz[0], rel=0.01)


def test_flat_top_keeps_its_depth_up_to_the_rim(gel, scale):
    cylinder = procedural_object("cylinder", {"radius_mm": 2.5}, scale=scale)
    contact = ContactState(press_depth=0.5, twist=0.05, center=(100.5, 100.5))
    pen = penetration(indent(gel, cylinder, contact, scale, FRAME), gel)
    assert set(np.unique(pen)) <= {0.0, 0.5}


def test_drag_gives_shear_over_the_contact_area(gel, scale):
    pen = _disk((161, 161), (80, 80), 3.0, 0.5, scale)
    area = float((pen > 0).sum()) * scale.pixel_area
    w = synthesize_wrench(pen, gel, ContactState(press_depth=0.5, drag=(0.4, -0.2)), scale)
    assert w.fx == pytest.approx(gel.k_s * 0.4 * area)
    assert w.fy == pytest.approx(gel.k_s * -0.2 * area)


def test_symmetric_press_has_no_shear_or_torque(gel, scale):
    ball = procedural_object("sphere", {"radius_mm": 3.0}, scale=scale)
    contact = ContactState(press_depth=0.7, center=CENTER)
    w = synthesize_wrench(penetration(indent(gel, ball, contact, scale, FRAME), gel), gel, contact, scale)
    assert w.fz < 0.0
    for value in (w.fx, w.fy, w.tx, w.ty, w.tz):
        assert abs(value) < 1e-9


def test_tilted_flat_press_produces_in_plane_torque(gel, scale):
    cylinder = procedural_object("cylinder", {"radius_mm": 3.0}, scale=scale)
    contact = ContactState(press_depth=0.3, center=CENTER, tilt=(0.05, 0.0))
    w = synthesize_wrench(penetration(indent(gel, cylinder, contact, scale, FRAME), gel), gel, contact, scale)
    assert abs(w.tx) > 1e-6


def test_negative_penetration_is_rejected(gel, scale):
    with pytest.raises(ParameterError):
        synthesize_wrench(np.full((3, 3), -0.1), gel, ContactState(), scale)


# --- Lens distortion ---

def test_zero_coefficients_are_the_identity(small_reference):
    out = apply_distortion(small_reference, 0.0, 0.0)
    np.testing.assert_allclose(out.data, small_reference.data, atol=1e-9)


def test_distortion_fixes_the_center_pixel():
    img = make_reference(201, 151, seed=2)
    out = apply_distortion(img, 0.1)
    assert out.data[75, 100] == pytest.approx(img.data[75, 100], abs=1e-12)


def _line_residual(img, rows, col_range):
    c0, c1 = col_range
    cols = np.arange(c0, c1, dtype=np.float64)
    centers = np.array([(img.data[r, c0:c1] * cols).sum() / img.data[r, c0:c1].sum() for r in rows])
    fit = np.polyval(np.polyfit(rows, centers, 1), rows)
    return float(np.abs(centers - fit).max())


def test_lines_through_the_center_stay_straight_and_others_bow():
    data = np.zeros((161, 201))
    data[:, 99:102] = 1.0
    data[:, 169:172] = 1.0
    out = apply_distortion(GrayImage(data), 0.2)
    rows = np.arange(20, 141)
    assert _line_residual(out, rows, (90, 111)) < 0.1
    assert _line_residual(out, rows, (130, 201)) > 0.5


def test_non_invertible_distortion_is_rejected(small_reference):
    with pytest.raises(ParameterError):
        apply_distortion(small_reference, -0.5)


def test_distorted_points_land_on_the_warped_feature():
    rows, cols = np.indices((241, 321), dtype=np.float64)
    data = np.exp(-((cols - 250) ** 2 + (rows - 60) ** 2) / (2 * 3.0 ** 2))
    out = apply_distortion(GrayImage(data), 0.08)
    mass = out.data
    found = ((cols * mass).sum() / mass.sum(), (rows * mass).sum() / mass.sum())
    predicted = distort_points(np.array([[250.0, 60.0]]), 0.08, 0.0, (160.0, 120.0), 0.5 * math.hypot(321, 241))[0]
    assert np.hypot(*(np.array(found) - predicted)) < 0.2


# --- Procedural objects ---

def test_sphere_heights(scale):
    R = 4.0
    ball = procedural_object("sphere", {"radius_mm": R}, scale=scale)
    cr, cc = ball.center
    s = ball.mm_per_pixel
    assert ball.data[int(cr), int(cc)] == 0.0
    r = 30 * s
    assert ball.data[int(cr), int(cc) + 30] == pytest.approx(R - math.sqrt(R * R - r * r), abs=1e-12)


def test_objects_are_deterministic_per_seed(scale):
    params = {"radius_mm": 3.0, "roughness_mm": 0.05}
    a = procedural_object("sphere", params, seed=3, scale=scale)
    b = procedural_object("sphere", params, seed=3, scale=scale)
    c = procedural_object("sphere", params, seed=4, scale=scale)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_superellipsoid_with_exponent_two_is_an_ellipsoid(scale):
    a, b, c = 4.0, 3.0, 2.5
    obj = procedural_object("superellipsoid", {"semi_axes": (a, b, c), "exponent": 2.0}, scale=scale)
    cr, cc = obj.center
    rows, cols = np.indices(obj.shape, dtype=np.float64)
    x = (cols - cc) * obj.mm_per_pixel
    y = (rows - cr) * obj.mm_per_pixel
    q = (x / a) ** 2 + (y / b) ** 2
    inside = q <= 1.0
    np.testing.assert_allclose(obj.data[inside], c - c * np.sqrt(1.0 - q[inside]), atol=1e-9)


@pytest.mark.parametrize("kind", ["sphere", "cylinder", "cone", "prism_star", "superellipsoid"])
def test_every_kind_is_based_at_zero(kind, scale):
    obj = procedural_object(kind, None, seed=1, scale=scale)
    assert isinstance(obj, HeightField)
    assert obj.data.min() == 0.0


def test_star_footprint_lies_between_its_radii(scale):
    star = procedural_object("prism_star", {"radius_mm": 4.0, "points": 5, "inner_ratio": 0.5}, scale=scale)
    area = float((star.data == 0.0).sum()) * star.mm_per_pixel ** 2
    assert math.pi * 2.0 ** 2 < area < math.pi * 4.0 ** 2


def test_out_of_range_parameters_are_rejected(scale):
    with pytest.raises(ParameterError):
        procedural_object("sphere", {"radius_mm": 10.0}, scale=scale)
    with pytest.raises(ParameterError):
        procedural_object("prism_star", {"points": 12}, scale=scale)
    with pytest.raises(ParameterError):
        procedural_object("torus", None, scale=scale)
    with pytest.raises(ParameterError):
        procedural_object("sphere", {"colour": "red"}, scale=scale)


def test_catalog_cycles_kinds_with_stable_ids(scale):
    first = make_object_catalog(7, seed=3, scale=scale)
    again = make_object_catalog(7, seed=3, scale=scale)
    assert [o.id for o in first][:3] == ["obj_000_sphere", "obj_001_cylinder", "obj_002_cone"]
    assert first[5].id == "obj_005_sphere"
    assert all(np.array_equal(a.data, b.data) for a, b in zip(first, again))


def test_board_has_one_flat_top_per_marker(scale):
    board = board_heightfield(5, 5, 2.0, 0.6, scale)
    _, count = ndimage.label(board.data == 0.0)
    assert count == 25


# --- Trajectories and sessions ---

def test_press_trajectory_ramps_then_releases():
    traj = press_trajectory("obj", (50.0, 40.0), 0.9, press_steps=3, motion_steps=2, drag=(0.4, 0.0), twist=0.1)
    depths = [s.press_depth for s in traj.steps]
    assert depths == pytest.approx([0.3, 0.6, 0.9, 0.9, 0.9, 0.0])
    assert traj.steps[4].drag == pytest.approx((0.4, 0.0))
    assert traj.steps[4].twist == pytest.approx(0.1)


def test_random_trajectories_are_seeded(scale):
    a = random_trajectory(np.random.default_rng(5), "obj", (460, 345), scale)
    b = random_trajectory(np.random.default_rng(5), "obj", (460, 345), scale)
    assert a == b
    assert a.steps[-1].press_depth == 0.0


def test_empty_schedule_gives_no_frames(gel, scale, small_reference):
    assert list(simulate_session(gel, [], [], small_reference, scale, seed=0)) == []


def test_single_step_frame_composes_the_stages(gel, scale, small_reference):
    ball = procedural_object("sphere", {"radius_mm": 3.0}, scale=scale, object_id="ball")
    contact = ContactState(press_depth=0.6, center=(100.0, 75.0))
    frames = list(simulate_session(gel, [ball], [press_trajectory("ball", contact.center, 0.6, 1, release=False)],
                                   small_reference, scale, seed=0))
    assert len(frames) == 1
    frame = frames[0]
    pre = indent(gel, ball, frame.contact, scale, (200, 150))
    assert frame.wrench == synthesize_wrench(penetration(pre, gel), gel, frame.contact, scale)
    assert np.array_equal(frame.tactile.data, press_image(gel, ball, frame.contact, small_reference, scale).data)
    assert frame.object_id == "ball"


def test_press_ramp_force_grows_strictly(gel, scale, small_reference):
    ball = procedural_object("sphere", {"radius_mm": 4.0}, scale=scale, object_id="ball")
    schedule = [press_trajectory("ball", (100.0, 75.0), 1.0, 10, release=False)]
    forces = [abs(f.wrench.fz) for f in simulate_session(gel, [ball], schedule, small_reference, scale, seed=0)]
    assert len(forces) == 10
    assert np.all(np.diff(forces) > 0.0)


def test_sessions_with_noise_are_reproducible(gel, scale, small_reference):
    ball = procedural_object("sphere", {"radius_mm": 3.0}, scale=scale, object_id="ball")
    schedule = [press_trajectory("ball", (100.0, 75.0), 0.5, 2)]
    a = list(simulate_session(gel, [ball], schedule, small_reference, scale, seed=[1, 2], noise_std=0.005))
    b = list(simulate_session(gel, [ball], schedule, small_reference, scale, seed=[1, 2], noise_std=0.005))
    assert all(np.array_equal(x.tactile.data, y.tactile.data) for x, y in zip(a, b))
    assert not np.array_equal(a[0].tactile.data, press_image(gel, ball, a[0].contact, small_reference, scale).data)


def test_unknown_object_in_schedule(gel, scale, small_reference):
    schedule = [press_trajectory("ghost", (100.0, 75.0), 0.5, 1)]
    with pytest.raises(ParameterError):
        list(simulate_session(gel, [], schedule, small_reference, scale, seed=0))
