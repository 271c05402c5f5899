import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatline.errors import Disconnected, FlatlineError, GluingMismatch, SingularityHit
from flatline.slit_torus import build_slit_torus, slit_torus_polygons
from flatline.surface import (
    Arc, Holonomy, SurfacePoint, apply_flow, arc_pieces, birkhoff_average, cast_ray,
    cast_vertical_ray, direction_vector, flow_matrix, normalize_area, rotate_to_vertical,
    rotation_to_vertical, sample_points, validate_surface,
)

from conftest import GOLDEN

TWO_PI = 2 * math.pi


def square(glue_reversed=False):
    g = [[[0, 0], [0, 2]], [[0, 1], [0, 3]]]
    poly = [(0, 0), (1, 0), (1, 1), (0, 1)]
    if glue_reversed:
        # a rectangle whose "opposite" sides have different lengths
        poly = [(0, 0), (2, 0), (2, 1), (0, 1)]
        g = [[[0, 0], [0, 1]], [[0, 2], [0, 3]]]
    return {"polygons": [poly], "gluings": g}


def test_torus_invariants(torus):
    assert torus.genus == 1
    assert len(torus.singularities) == 1
    assert torus.singularities[0].angle == pytest.approx(TWO_PI, abs=1e-12)
    assert torus.singularities[0].is_marked
    assert torus.area == pytest.approx(1.0, abs=1e-12)


def test_slit_torus_gauss_bonnet(slit_half):
    S = slit_half.surface
    assert S.genus == 2
    assert S.area == pytest.approx(2.0, abs=1e-12)
    assert sorted(round(c.angle / TWO_PI) for c in S.singularities) == [2, 2]
    # total excess 2 pi (2g - 2)
    assert sum(c.angle - TWO_PI for c in S.singularities) == pytest.approx(TWO_PI * 2)


def test_gluing_mismatch():
    with pytest.raises(GluingMismatch):
        validate_surface(square(glue_reversed=True))


def test_bad_descriptions():
    with pytest.raises(FlatlineError):
        validate_surface({"polygons": []})
    with pytest.raises(GluingMismatch):
        validate_surface({"polygons": [[(0, 0), (1, 0), (1, 1), (0, 1)]],
                          "gluings": [[[0, 0], [0, 2]]]})
    with pytest.raises(FlatlineError):
        # clockwise
        validate_surface({"polygons": [[(0, 0), (0, 1), (1, 1), (1, 0)]],
                          "gluings": [[[0, 0], [0, 2]], [[0, 1], [0, 3]]]})


def test_disconnected():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    desc = {"polygons": [sq, sq],
            "gluings": [[[0, 0], [0, 2]], [[0, 1], [0, 3]], [[1, 0], [1, 2]], [[1, 1], [1, 3]]]}
    with pytest.raises(Disconnected):
        validate_surface(desc)


def test_hexagon_torus():
    hexa = [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    ok = {"polygons": [hexa], "gluings": [[[0, 0], [0, 3]], [[0, 1], [0, 4]], [[0, 2], [0, 5]]]}
    S = validate_surface(ok)
    assert S.genus == 1
    assert len(S.singularities) == 2  # two classes of angle 2 pi each


def test_round_trip_dict(slit_half):
    S = slit_half.surface
    S2 = validate_surface(S.to_dict())
    assert S2.gluings == S.gluings
    assert all(np.array_equal(a, b) for a, b in zip(S.polygons, S2.polygons))


def test_normalize_area(slit_half):
    N = normalize_area(slit_half.surface)
    assert N.area == pytest.approx(1.0, abs=1e-12)
    assert validate_surface({**slit_half.surface.to_dict(), "normalize_area": True}).area == \
        pytest.approx(1.0, abs=1e-12)


def test_flow_oracles(torus):
    assert np.array_equal(flow_matrix(0), np.eye(2))
    assert apply_flow(torus, 0) is torus
    h = Holonomy(1.0, 1.0).flowed(2 * math.log(2))
    assert (h.h, h.v) == pytest.approx((2.0, 0.5), abs=1e-12)


@given(st.floats(-8, 8), st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_flow_preserves_area(t, lam):
    S = build_slit_torus(lam).surface
    assert apply_flow(S, t).area == pytest.approx(S.area, abs=1e-12 * max(1.0, S.area))


def test_flow_area_7_3(slit_half):
    assert apply_flow(slit_half.surface, 7.3).area == pytest.approx(2.0, abs=1e-12)


def test_rotation_oracles(torus):
    assert np.array_equal(rotation_to_vertical("vertical"), np.eye(2))
    assert rotate_to_vertical(torus, "vertical") is torus
    R = rotation_to_vertical("horizontal")
    assert R @ np.array([1.0, 0.0]) == pytest.approx([0.0, 1.0])


@given(st.floats(0.01, math.pi - 0.01))
@settings(max_examples=30, deadline=None)
def test_rotate_back(theta):
    d = (math.cos(theta), math.sin(theta))
    R = rotation_to_vertical(d)
    assert R @ np.array(d) == pytest.approx([0.0, 1.0], abs=1e-12)
    assert R.T @ R == pytest.approx(np.eye(2), abs=1e-12)


def test_direction_vector():
    assert direction_vector("2/3") == pytest.approx((3 / math.sqrt(13), 2 / math.sqrt(13)))
    assert direction_vector(float("inf")) == (0.0, 1.0)


def test_ray_one_wrap(torus):
    rec = cast_vertical_ray(torus, SurfacePoint(0, 0.3, 0.2), 1.0)
    assert not rec.hit
    assert rec.end.x == pytest.approx(0.3)
    assert rec.end.y == pytest.approx(0.2)
    assert sum(math.hypot(s[3] - s[1], s[4] - s[2]) for s in rec.segments) == pytest.approx(1.0)


def test_ray_hits_cone_point(slit_half):
    S = slit_half.surface
    # the slit runs from (0, 0) to (0.5, 0); start 0.25 below its end (0.5, 1) ~ (0.5, 0)
    p = SurfacePoint(0, 0.5, 0.75)
    rec = cast_vertical_ray(S, p, 1.0)
    assert rec.hit
    assert rec.hit_at == pytest.approx(0.25, abs=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.1, 20.0),
       st.floats(0.05, math.pi - 0.05))
@settings(max_examples=50, deadline=None)
def test_ray_length_conserved(x, y, length, theta):
    S = build_slit_torus("1/3").surface
    d = (math.cos(theta), math.sin(theta))
    try:
        rec = cast_ray(S, SurfacePoint(0, x, y), length, d)
    except FlatlineError:
        return
    total = sum(math.hypot(s[3] - s[1], s[4] - s[2]) for s in rec.segments)
    expect = rec.hit_at if rec.hit else length
    assert total == pytest.approx(expect, rel=1e-9, abs=1e-9)


def test_birkhoff_torus_golden(torus):
    d = direction_vector(GOLDEN)
    arc = Arc(SurfacePoint(0, 0.0, 0.5), 1.0, (1.0, 0.0))
    est = birkhoff_average(torus, SurfacePoint(0, 0.123, 0.377), arc, 1000.0, direction=d)
    # every unit of flow along slope phi crosses the horizontal circle sin(theta) times
    assert est.average == pytest.approx(d[1], rel=0.02)


def test_birkhoff_empty_arc(torus):
    arc = Arc(SurfacePoint(0, 0.0, 0.5), 0.0)
    assert birkhoff_average(torus, SurfacePoint(0, 0.1, 0.1), arc, 100.0).average == 0
    assert arc_pieces(torus, arc)[0].size == 0


def test_birkhoff_converges(slit_half):
    S = slit_half.surface
    d = direction_vector(GOLDEN)
    arc = Arc(SurfacePoint(0, 0.0, 0.25), 1.0, (1.0, 0.0))
    pieces = arc_pieces(S, arc)
    p = SurfacePoint(0, 0.2113, 0.731)
    a1 = birkhoff_average(S, p, arc, 1e3, pieces, d).average
    a2 = birkhoff_average(S, p, arc, 1e4, pieces, d).average
    # the crossing discrepancy of a rotation by a badly approximable number is O(log T / T)
    assert abs(a1 - a2) < 20 * math.log(1e3) / 1e3


def test_birkhoff_singularity(slit_half):
    arc = Arc(SurfacePoint(0, 0.0, 0.25), 1.0, (1.0, 0.0))
    with pytest.raises(SingularityHit) as exc:
        birkhoff_average(slit_half.surface, SurfacePoint(0, 0.5, 0.75), arc, 10.0)
    assert exc.value.args


def test_sample_points_inside(slit_half):
    S = slit_half.surface
    pts = sample_points(S, 200, np.random.default_rng(0))
    assert all(S.contains(p) for p in pts)


def test_slit_polygons_shape():
    desc = slit_torus_polygons(0.5)
    assert len(desc["polygons"]) == 2
    assert validate_surface(desc).area == pytest.approx(2.0)
