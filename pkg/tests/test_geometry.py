import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vppflex.geometry import Hull, convex_hull, hull_area, hull_contains, hull_contains_many, shoelace_area


def test_unit_square_with_interior_points():
    pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5), (0.2, 0.7), (0.5, 0.0)]
    hull = convex_hull(pts)
    assert len(hull.vertices) == 4
    assert hull.area_kw_kvar == 1.0 and hull_area(hull) == 1.0
    assert shoelace_area(hull.vertices) == 1.0


def test_collinear_points_are_degenerate():
    hull = convex_hull([(0, 0), (1, 1), (2, 2)])
    assert hull.vertices == ((0.0, 0.0), (2.0, 2.0))
    assert hull.is_degenerate and hull_area(hull) == 0.0
    assert hull_contains(hull, (1, 1)) and not hull_contains(hull, (1, 1.1))


def test_single_point_and_empty():
    hull = convex_hull([(3, -4)])
    assert hull.vertices == ((3.0, -4.0),) and hull.area_kw_kvar == 0.0
    assert hull_contains(hull, (3, -4)) and not hull_contains(hull, (3, -3.9))
    with pytest.raises(ValueError, match="empty"):
        convex_hull([])


def test_disc_points_all_inside():
    rng = np.random.default_rng(0)
    r, th = np.sqrt(rng.random(1000)) * 50, rng.random(1000) * 2 * np.pi
    pts = np.column_stack([r * np.cos(th) - 2500, r * np.sin(th) - 1000])
    hull = convex_hull(pts)
    assert hull_contains_many(hull, pts).all()
    assert hull_contains(hull, hull.centroid)
    for v in hull.vertices:
        assert hull_contains(hull, v)
    assert not hull_contains(hull, (-2500 + 100, -1000))
    assert hull.area_kw_kvar < math.pi * 50**2


def test_vertices_counter_clockwise_and_convex():
    rng = np.random.default_rng(1)
    hull = convex_hull(rng.normal(size=(300, 2)))
    v = np.array(hull.vertices)
    a, b, c = v, np.roll(v, -1, axis=0), np.roll(v, -2, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    assert np.all(cross > 0)


def test_matches_scipy():
    spatial = pytest.importorskip("scipy.spatial")
    rng = np.random.default_rng(2)
    for n in (10, 100, 2000):
        pts = rng.uniform(-3000, 500, size=(n, 2))
        ref = spatial.ConvexHull(pts)
        hull = convex_hull(pts)
        assert hull.area_kw_kvar == pytest.approx(ref.volume, rel=1e-12)
        assert {tuple(p) for p in pts[ref.vertices]} == set(hull.vertices)


def test_json_roundtrip():
    hull = convex_hull([(0, 0), (2, 0), (1, 3)])
    again = Hull.from_json(hull.to_json(note="approximation"))
    assert again == hull


points = st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)), min_size=1, max_size=60)


@settings(max_examples=80)
@given(points)
def test_idempotent_and_contains_inputs(pts):
    hull = convex_hull(pts)
    assert convex_hull(hull.vertices) == hull
    assert hull_contains_many(hull, np.array(pts)).all()
    assert hull.area_kw_kvar >= 0


@settings(max_examples=60)
@given(points, st.randoms(use_true_random=False))
def test_permutation_invariant(pts, rnd):
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert convex_hull(shuffled) == convex_hull(pts)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)), min_size=3, max_size=40),
       st.integers(-5000, 5000), st.integers(-5000, 5000), st.integers(1, 8))
def test_translation_and_scaling(pts, dx, dy, k):
    base = convex_hull(pts).area_kw_kvar
    moved = convex_hull([(x + dx, y + dy) for x, y in pts]).area_kw_kvar
    scaled = convex_hull([(k * x, k * y) for x, y in pts]).area_kw_kvar
    assert moved == pytest.approx(base, abs=1e-6)
    assert scaled == pytest.approx(k * k * base, abs=1e-6)


def test_far_point_rejected():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(200, 2)) * 10
    hull = convex_hull(pts)
    r = np.max(np.hypot(pts[:, 0], pts[:, 1]))
    for ang in np.linspace(0, 2 * np.pi, 12, endpoint=False):
        assert not hull_contains(hull, (2 * r * np.cos(ang), 2 * r * np.sin(ang)))
