import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polycascade.geometry import (
    BezierCurve,
    BezierDelta,
    Box,
    DegenerateGeometryError,
    TextPolygon,
    bernstein_basis,
    bezier_delta_for,
    bezier_from_box,
    box_to_poly,
    buffer_polyline,
    default_bezier_delta,
    flip_y,
    polygon_width,
    polyline_tangents,
    sample_polyline,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
positive = st.floats(0.1, 1e3, allow_nan=False, allow_infinity=False)
unit = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw):
    return Box(draw(finite), draw(finite), draw(positive), draw(positive))


# -- bernstein ---------------------------------------------------------------


@pytest.mark.parametrize("t, expected", [
    (0.0, [1, 0, 0, 0]),
    (1.0, [0, 0, 0, 1]),
    (0.5, [0.125, 0.375, 0.375, 0.125]),
])
def test_bernstein_values(t, expected):
    np.testing.assert_allclose(bernstein_basis(t), expected, atol=1e-15)


@pytest.mark.parametrize("t", [-1e-9, 1.0000001, math.nan])
def test_bernstein_domain(t):
    with pytest.raises(ValueError):
        bernstein_basis(t)


@given(st.floats(0, 1))
def test_bernstein_partition_of_unity(t):
    assert abs(bernstein_basis(t).sum() - 1.0) < 1e-12


# -- control points ----------------------------------------------------------


def test_zero_offsets_collapse_to_center():
    curve = bezier_from_box(Box(10, 10, 4, 2), BezierDelta.zeros())
    np.testing.assert_array_equal(curve.ctrl, np.full((4, 2), 10.0))


def test_offsets_scale_with_box():
    dp = [(-0.5, 0), (-1 / 6, 0), (1 / 6, 0), (0.5, 0)]
    curve = bezier_from_box(Box(0, 0, 2, 2), BezierDelta(dp, 0))
    np.testing.assert_allclose(curve.ctrl[:, 0], [-1, -1 / 3, 1 / 3, 1], rtol=1e-15)
    np.testing.assert_array_equal(curve.ctrl[:, 1], 0)


def test_single_offset():
    dp = np.zeros((4, 2))
    dp[0] = (0.1, -0.25)
    curve = bezier_from_box(Box(5, 5, 10, 4), BezierDelta(dp, 0))
    np.testing.assert_allclose(curve.ctrl[0], [6, 4])


@given(boxes(), st.lists(unit, min_size=8, max_size=8), st.floats(0.1, 10))
def test_control_points_scale_equivariant(box, offsets, k):
    delta = BezierDelta(np.reshape(offsets, (4, 2)), 0.0)
    center = np.array([box.cx, box.cy])
    scaled = Box(box.cx, box.cy, box.w * k, box.h * k)
    lhs = bezier_from_box(scaled, delta).ctrl
    rhs = center + k * (bezier_from_box(box, delta).ctrl - center)
    scale = max(1.0, np.abs(lhs).max())
    assert np.abs(lhs - rhs).max() / scale < 1e-12


# -- sampling ----------------------------------------------------------------


def test_degenerate_curve_samples():
    pts = sample_polyline(BezierCurve(np.full((4, 2), 10.0)), 8)
    np.testing.assert_array_equal(pts, np.full((8, 2), 10.0))


def test_collinear_equally_spaced_controls():
    pts = sample_polyline(BezierCurve([[0, 0], [1, 0], [2, 0], [3, 0]]), 3)
    np.testing.assert_allclose(pts, [[0, 0], [1.5, 0], [3, 0]], atol=1e-15)


def test_arch_midpoint():
    pts = sample_polyline(BezierCurve([[0, 0], [0, 1], [1, 1], [1, 0]]), 3)
    # 0.125*(0,0) + 0.375*(0,1) + 0.375*(1,1) + 0.125*(1,0)
    np.testing.assert_allclose(pts[1], [0.5, 0.75])


def test_sample_count_domain():
    with pytest.raises(ValueError):
        sample_polyline(BezierCurve(np.zeros((4, 2))), 1)


@given(st.lists(finite, min_size=8, max_size=8), st.integers(2, 20))
def test_endpoints_exact(coords, S):
    curve = BezierCurve(np.reshape(coords, (4, 2)))
    pts = sample_polyline(curve, S)
    assert pts.shape == (S, 2)
    assert np.array_equal(pts[0], curve.ctrl[0])
    assert np.array_equal(pts[-1], curve.ctrl[3])


def test_sampling_matches_bernstein_sum():
    rng = np.random.default_rng(0)
    ctrl = rng.normal(size=(4, 2))
    pts = sample_polyline(BezierCurve(ctrl), 6)
    for s in range(6):
        expected = bernstein_basis(s / 5) @ ctrl
        np.testing.assert_allclose(pts[s], expected, atol=1e-14)


# -- width and buffering -----------------------------------------------------


@pytest.mark.parametrize("w, h, dwp, expected", [
    (4, 9, 0.0, 6.0),
    (1, 1, math.log(2), 2.0),
    (2, 8, -math.log(2), 2.0),
])
def test_polygon_width(w, h, dwp, expected):
    assert polygon_width(Box(0, 0, w, h), dwp) == pytest.approx(expected, rel=1e-15)


def test_buffer_horizontal_line():
    line = np.stack([np.arange(8.0), np.zeros(8)], axis=1)
    poly = buffer_polyline(line, 2.0)
    np.testing.assert_allclose(poly.top, np.stack([np.arange(8.0), np.ones(8)], axis=1))
    np.testing.assert_allclose(poly.bot, np.stack([np.arange(8.0), -np.ones(8)], axis=1))


def test_buffer_vertical_line():
    line = np.array([[0, 0], [0, 1], [0, 2]], dtype=float)
    poly = buffer_polyline(line, 2.0)
    np.testing.assert_allclose(poly.top, [[-1, 0], [-1, 1], [-1, 2]], atol=1e-15)
    np.testing.assert_allclose(poly.bot, [[1, 0], [1, 1], [1, 2]], atol=1e-15)


def test_buffer_zero_width_limit():
    rng = np.random.default_rng(1)
    line = np.cumsum(rng.normal(size=(8, 2)), axis=0)
    poly = buffer_polyline(line, 1e-12)
    np.testing.assert_allclose(poly.top, line, atol=1e-9)
    np.testing.assert_allclose(poly.bot, line, atol=1e-9)


@pytest.mark.parametrize("wp", [0.0, -1.0])
def test_buffer_rejects_nonpositive_width(wp):
    with pytest.raises(ValueError):
        buffer_polyline(np.array([[0.0, 0], [1, 0]]), wp)


def test_tangent_fallback_uses_nearest_segment():
    line = np.array([[0, 0], [0, 0], [1, 0], [1, 0], [1, 1]], dtype=float)
    tan = polyline_tangents(line)
    np.testing.assert_allclose(tan[0], [1, 0])  # forward difference is zero -> segment 1
    # central difference at 3 spans segments 2 and 3: (1,1)-(1,0)
    np.testing.assert_allclose(tan[3], [0, 1])
    assert np.allclose(np.hypot(tan[:, 0], tan[:, 1]), 1)


def test_all_coincident_is_degenerate():
    with pytest.raises(DegenerateGeometryError):
        buffer_polyline(np.zeros((8, 2)), 1.0)


@settings(max_examples=200)
@given(boxes(), st.lists(unit, min_size=8, max_size=8), st.floats(-2, 2))
def test_buffer_invariants(box, offsets, dwp):
    delta = BezierDelta(np.reshape(offsets, (4, 2)), dwp)
    line = sample_polyline(bezier_from_box(box, delta), 8)
    seg = np.hypot(*np.diff(line, axis=0).T)
    if seg.max() < 1e-6 * max(box.w, box.h):
        return
    wp = polygon_width(box, dwp)
    poly = buffer_polyline(line, wp)
    np.testing.assert_allclose((poly.top + poly.bot) / 2, line, atol=1e-9 * max(1, np.abs(line).max()))
    widths = np.hypot(*(poly.top - poly.bot).T)
    np.testing.assert_allclose(widths, wp, rtol=1e-9)
    tan = polyline_tangents(line)
    off = poly.top - line
    assert np.all(tan[:, 0] * off[:, 1] - tan[:, 1] * off[:, 0] > 0)


# -- composite ---------------------------------------------------------------


def test_box_to_poly_composes_components():
    dp = [(-0.5, 0), (-1 / 6, 0), (1 / 6, 0), (0.5, 0)]
    box = Box(0, 0, 2, 2)
    # sqrt(2*2) * exp(ln 0.5) = 1
    poly = box_to_poly(box, BezierDelta(dp, math.log(0.5)), S=2)
    np.testing.assert_allclose(poly.top, [[-1, 0.5], [1, 0.5]], atol=1e-15)
    np.testing.assert_allclose(poly.bot, [[-1, -0.5], [1, -0.5]], atol=1e-15)


def test_box_to_poly_zero_delta_is_degenerate():
    with pytest.raises(DegenerateGeometryError):
        box_to_poly(Box(3, 4, 5, 6), BezierDelta.zeros())


def test_default_s_gives_16_vertices():
    poly = box_to_poly(Box(50, 50, 40, 10), default_bezier_delta(Box(50, 50, 40, 10)))
    assert poly.top.shape == (8, 2) and poly.bot.shape == (8, 2)
    assert poly.ring().shape == (16, 2)


def test_default_delta_spreads_along_longer_axis():
    tall = Box(0, 0, 2, 10)
    poly = box_to_poly(tall, default_bezier_delta(tall))
    center = poly.centerline
    np.testing.assert_allclose(center[:, 0], 0, atol=1e-12)
    np.testing.assert_allclose(center[[0, -1], 1], [-5, 5])
    assert np.hypot(*(poly.top - poly.bot).T) == pytest.approx(np.full(8, 1.0))


@given(boxes(), st.lists(unit, min_size=8, max_size=8), st.floats(-2, 2))
def test_bezier_delta_for_roundtrip(box, coords, dwp):
    ctrl = np.reshape(coords, (4, 2)) * 50
    delta = bezier_delta_for(box, ctrl, 3.0)
    curve = bezier_from_box(box, delta)
    np.testing.assert_allclose(curve.ctrl, ctrl, atol=1e-9 * max(1, abs(box.cx), abs(box.cy), box.w, box.h))
    assert polygon_width(box, delta.dwp) == pytest.approx(3.0, rel=1e-12)


def test_box_validation():
    with pytest.raises(ValueError):
        Box(0, 0, 0, 1)
    with pytest.raises(ValueError):
        Box(math.inf, 0, 1, 1)


def test_polygon_json_roundtrip():
    poly = TextPolygon([[0, 1], [2, 3]], [[4, 5], [6, 7]])
    assert TextPolygon.from_json(poly.to_json()) == poly


def test_flip_y_is_involution():
    pts = np.array([[1.0, 2.0], [3.0, 40.0]])
    np.testing.assert_array_equal(flip_y(flip_y(pts, 50), 50), pts)
    np.testing.assert_array_equal(flip_y(pts, 50)[:, 1], [48, 10])
