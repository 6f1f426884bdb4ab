import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obbkit.geometry import (GeometryError, canonicalize_rect, external_hbox, is_degenerate, midpoint_from_quad,
                             parallelogram_to_rect, quad_area, quads_equal_up_to_rotation, rect_to_quad,
                             vertices_from_midpoint)

from .conftest import random_rects


@pytest.mark.parametrize("box, expected", [
    ((0, 0, 4, 2, 0, 0), ((0, -1), (2, 0), (0, 1), (-2, 0))),
    ((0, 0, 4, 2, 1, 0.5), ((1, -1), (2, 0.5), (-1, 1), (-2, -0.5))),
    ((10, 20, 6, 4, -3, 2), ((7, 18), (13, 22), (13, 22), (7, 18))),
])
def test_vertices_from_midpoint_examples(box, expected):
    np.testing.assert_allclose(vertices_from_midpoint(box), expected, atol=1e-12)


def test_boundary_offsets_give_flagged_degenerate_quad():
    q = vertices_from_midpoint((10, 20, 6, 4, -3, 2))
    # all four points on the line y = 18 + 4/6 (x - 7)
    x, y = q[:, 0], q[:, 1]
    np.testing.assert_allclose(y, 18 + (4 / 6) * (x - 7))
    assert is_degenerate(q)
    assert not is_degenerate(vertices_from_midpoint((0, 0, 4, 2, 1, 0.5)))


@pytest.mark.parametrize("bad", [(0, 0, 4, 2, 3, 0), (0, 0, 4, 2, 0, -1.5), (np.nan, 0, 4, 2, 0, 0),
                                 (0, 0, 0, 2, 0, 0)])
def test_vertices_from_midpoint_rejects_invalid(bad):
    with pytest.raises(GeometryError):
        vertices_from_midpoint(bad)


@pytest.mark.parametrize("quad, expected", [
    (((0, -1), (2, 0), (0, 1), (-2, 0)), (0, 0, 4, 2, 0, 0)),
    (((-1, -1), (1, -1), (1, 1), (-1, 1)), (0, 0, 2, 2, -1, -1)),
    (((1, -1), (2, 0.5), (-1, 1), (-2, -0.5)), (0, 0, 4, 2, 1, 0.5)),
])
def test_midpoint_from_quad_examples(quad, expected):
    got = midpoint_from_quad(quad)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    assert quads_equal_up_to_rotation(vertices_from_midpoint(got), quad)


def test_axis_aligned_tie_break_reproduces_quad_for_every_start_vertex():
    square = np.array([(-1, -1), (1, -1), (1, 1), (-1, 1)], float)
    for k in range(4):
        q = np.roll(square, k, axis=0)
        assert quads_equal_up_to_rotation(vertices_from_midpoint(midpoint_from_quad(q)), q, tol=1e-12)


def test_midpoint_from_quad_rejects_zero_area():
    with pytest.raises(GeometryError):
        midpoint_from_quad(((7, 18), (13, 22), (13, 22), (7, 18)))


def test_parallelogram_to_rect_square_fixed_point():
    r = parallelogram_to_rect(((1, 0), (0, 1), (-1, 0), (0, -1)))
    np.testing.assert_allclose(r, (0, 0, math.sqrt(2), math.sqrt(2), -math.pi / 4), atol=1e-12)


def test_parallelogram_to_rect_extends_short_diagonal():
    q = np.array(((0, -1), (2, 0), (0, 1), (-2, 0)), float)
    r = parallelogram_to_rect(q)
    np.testing.assert_allclose(r, (0, 0, 2 * math.sqrt(2), 2 * math.sqrt(2), -math.pi / 4), atol=1e-12)
    # independent check: the expected square has vertices (0,-2),(2,0),(0,2),(-2,0)
    sq = rect_to_quad(r)
    assert quads_equal_up_to_rotation(sq, ((0, -2), (2, 0), (0, 2), (-2, 0)), tol=1e-9)
    sides = np.roll(sq, -1, axis=0) - sq
    np.testing.assert_allclose(np.linalg.norm(sides, axis=1), 2 * math.sqrt(2))
    np.testing.assert_allclose([sides[i] @ sides[(i + 1) % 4] for i in range(4)], 0, atol=1e-12)


def test_parallelogram_to_rect_keeps_rectangles():
    r = (5, 5, 4, 2, math.pi / 6)
    np.testing.assert_allclose(parallelogram_to_rect(rect_to_quad(r)), r, atol=1e-9)


@pytest.mark.parametrize("quad", [((0, 0), (2, 0), (3, 1), (0, 1)), ((0, 0), (0, 0), (0, 0), (0, 0))])
def test_parallelogram_to_rect_rejects(quad):
    with pytest.raises(GeometryError):
        parallelogram_to_rect(quad)


def test_rect_to_quad_examples():
    np.testing.assert_allclose(rect_to_quad((0, 0, 4, 2, 0)), ((-2, -1), (2, -1), (2, 1), (-2, 1)))
    sq = rect_to_quad(canonicalize_rect((0, 0, 2, 2, math.pi / 4)))
    s2 = math.sqrt(2)
    assert quads_equal_up_to_rotation(sq, ((0, -s2), (s2, 0), (0, s2), (-s2, 0)), tol=1e-12)
    r = canonicalize_rect((3, 4, 4, 2, math.pi / 2))
    assert r[4] == pytest.approx(-math.pi / 2)
    assert quads_equal_up_to_rotation(rect_to_quad(r), ((4, 2), (4, 6), (2, 6), (2, 2)), tol=1e-12)


def test_rect_to_quad_is_counter_clockwise():
    q = rect_to_quad(random_rects(np.random.default_rng(0), 50))
    x, y = q[..., 0], q[..., 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1, -1) - np.roll(x, -1, -1) * y, axis=-1)
    assert np.all(signed > 0)


@pytest.mark.parametrize("quad, expected", [
    (((0, -1), (2, 0), (0, 1), (-2, 0)), (0, 0, 4, 2)),
    (((-1, -1), (1, -1), (1, 1), (-1, 1)), (0, 0, 2, 2)),
    (((1, 1), (5, 3), (3, 7), (-1, 5)), (2, 4, 6, 6)),
])
def test_external_hbox_examples(quad, expected):
    np.testing.assert_allclose(external_hbox(quad), expected)


finite = st.floats(-1e3, 1e3, allow_nan=False)
size = st.floats(0.5, 500)
frac = st.floats(-0.5, 0.5)
angle = st.floats(-math.pi, math.pi)


@given(finite, finite, size, size, frac, frac)
def test_midpoint_roundtrip(cx, cy, w, h, fa, fb):
    b = np.array([cx, cy, w, h, fa * w, fb * h])
    q = vertices_from_midpoint(b)
    if quad_area(q) < 1e-6 * w * h:
        return
    back = midpoint_from_quad(q)
    # corner-contact boxes are equal only up to the tie-break relabelling
    assert quads_equal_up_to_rotation(vertices_from_midpoint(back), q)
    if 0.5 - abs(fa) > 1e-6 and 0.5 - abs(fb) > 1e-6:
        np.testing.assert_allclose(back, b, atol=1e-6)


@given(finite, finite, size, size, frac, frac)
def test_parallelogram_closure(cx, cy, w, h, fa, fb):
    q = vertices_from_midpoint((cx, cy, w, h, fa * w, fb * h))
    np.testing.assert_allclose(q[0] + q[2], q[1] + q[3], rtol=0, atol=1e-12 * (1 + abs(cx) + abs(cy)))


@given(finite, finite, size, size, frac, frac)
@settings(max_examples=200)
def test_rectification_equal_diagonals_and_no_shrink(cx, cy, w, h, fa, fb):
    q = vertices_from_midpoint((cx, cy, w, h, fa * w, fb * h))
    if quad_area(q) < 1e-3 * w * h:
        return
    r = parallelogram_to_rect(q)
    rq = rect_to_quad(r)
    d1 = np.linalg.norm(rq[2] - rq[0])
    d2 = np.linalg.norm(rq[3] - rq[1])
    assert abs(d1 - d2) <= 1e-9 * max(d1, 1.0)
    assert r[2] * r[3] >= quad_area(q) * (1 - 1e-9)
    assert r[2] >= r[3] and -math.pi / 2 <= r[4] < math.pi / 2


@given(finite, finite, size, size, angle)
def test_rect_roundtrip_idempotent(cx, cy, w, h, t):
    q1 = rect_to_quad(canonicalize_rect((cx, cy, w, h, t)))
    q2 = rect_to_quad(parallelogram_to_rect(q1))
    assert quads_equal_up_to_rotation(q1, q2, tol=1e-6)


@given(finite, finite, size, size, angle)
def test_external_hbox_contains_rect(cx, cy, w, h, t):
    r = canonicalize_rect((cx, cy, w, h, t))
    hb = external_hbox(rect_to_quad(r))
    tol = 1e-9 * (1 + r[2])
    assert hb[2] >= r[3] - tol
    assert hb[2] >= r[2] * abs(math.cos(r[4])) - tol
