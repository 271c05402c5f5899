import numpy as np
import pytest

from flatline.delaunay import LARGE, MEDIUM, delaunay_triangulate
from flatline.errors import HypothesisFailure, SingularityInInterior
from flatline.network import (
    build_network, chart_of, clip_convex, clip_segment, embed_square, k_reachable, k_visible,
)
from flatline.slit_torus import build_slit_torus
from flatline.surface import SurfacePoint, apply_flow, normalize_area


@pytest.fixture(scope="module")
def S():
    return build_slit_torus("1/2").surface


def test_clip_helpers():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    tri = np.array([[0.5, -1], [2, 0.5], [0.5, 2]], dtype=float)
    out = clip_convex(sq, tri)
    assert len(out) >= 3
    iv = clip_segment(np.array([-1.0, 0.5]), np.array([2.0, 0.5]), sq)
    assert iv == pytest.approx((1 / 3, 2 / 3))


def test_torus_squares(torus):
    c = SurfacePoint(0, 0.5, 0.5)
    sq = embed_square(torus, c, 0.5)
    assert sq.embedded and sq.side == 0.5
    big = embed_square(torus, c, 1.5)
    assert not big.embedded
    assert big.obstruction == (1.0, 0.0)


def test_square_with_cone_point(S):
    with pytest.raises(SingularityInInterior):
        embed_square(S, SurfacePoint(0, 0.5, 0.02), 0.1)
    sq = embed_square(S, SurfacePoint(0, 0.5, 0.02), 0.1, strict=False)
    assert sq.singular and not sq.immersed


def test_central_squares_embedded():
    X = normalize_area(build_slit_torus(0.45).surface)
    rep = build_network(X, eps=0.01, delta=0.2, samples=200)
    central = [s for s, k in zip(rep.squares, rep.kinds) if k == "central"]
    assert central and all(s.embedded and s.side == pytest.approx(0.2) for s in central)
    assert rep.shrunk == 0


def test_visible_inside(S):
    sq = embed_square(S, SurfacePoint(0, 0.75, 0.5), 0.3)
    p = chart_of(S).locate(SurfacePoint(0, 0.75, 0.55))
    assert k_visible(S, p, sq, 1.0) == (True, (1, 0.0))


def test_visible_closed_boundary(S):
    sq = embed_square(S, SurfacePoint(0, 0.75, 0.5), 0.3)
    ch = chart_of(S)
    at = ch.locate(SurfacePoint(0, 0.75, 0.65 + 0.3))
    ok, (orient, d) = k_visible(S, at, sq, 1.0)
    assert ok and orient == -1 and d == pytest.approx(0.3)
    beyond = ch.locate(SurfacePoint(0, 0.75, 0.65 + 0.3 + 1e-6))
    assert k_visible(S, beyond, sq, 1.0) == (False, None)


def test_visible_blocked_by_cone(S):
    # square just above the slit end (0.5, 0) on sheet 0; from sheet 1 the vertical through
    # x = 0.5 runs into the cone point both ways, while x = 0.49 passes through the slit
    sq = embed_square(S, SurfacePoint(0, 0.5, 0.1), 0.08)
    ch = chart_of(S)
    blocked = ch.locate(SurfacePoint(1, 0.5, 0.95))
    assert k_visible(S, blocked, sq, 100.0) == (False, None)
    ok, (orient, d) = k_visible(S, ch.locate(SurfacePoint(1, 0.49, 0.95)), sq, 100.0)
    assert ok and orient == 1 and d == pytest.approx(0.11)


def test_reachable_self(S):
    A = embed_square(S, SurfacePoint(0, 0.25, 0.5), 0.1)
    assert k_reachable(S, A, A, 1.0)


def test_reachable_across_slit(S):
    # the same column on the two sheets: the corridor through the slit is 0.9 long
    A = embed_square(S, SurfacePoint(0, 0.25, 0.5), 0.1)
    C = embed_square(S, SurfacePoint(1, 0.25, 0.5), 0.1)
    assert not k_reachable(S, A, C, 1.0)
    assert k_reachable(S, A, C, 10.0)
    assert k_reachable(S, C, A, 10.0)
    B = embed_square(S, SurfacePoint(1, 0.75, 0.5), 0.1)
    assert not k_reachable(S, A, B, 10.0)
    assert not k_reachable(S, B, A, 10.0)


def test_shared_long_edge_reachable():
    X = normalize_area(build_slit_torus(0.4).surface)
    rep = build_network(X, eps=0.01, delta=0.2, K=1.0, samples=200)
    # each edge square is joined to the central squares on both sides of its edge
    deg = np.zeros(len(rep.squares), dtype=int)
    for a, b in rep.edges:
        deg[a] += 1
        deg[b] += 1
    for k, d in zip(rep.kinds, deg):
        if k == "edge":
            assert d == 2


def test_no_short_edges_full_coverage():
    X = normalize_area(build_slit_torus(0.5).surface)
    rep = build_network(X, eps=0.01, delta=0.2, samples=2000)
    assert set(rep.triangle_classes) <= {MEDIUM, LARGE}
    assert rep.kinds.count("central") == len(rep.triangle_classes)
    assert rep.coverage == 1.0 and not rep.uncovered
    assert rep.connected


def test_flowed_network():
    X = apply_flow(normalize_area(build_slit_torus(0.45).surface), 0.4)
    rep = build_network(X, eps=0.01, delta=0.2, samples=10000)
    assert rep.connected and rep.coverage == 1.0
    assert rep.summary()["squares"] == len(rep.squares)


def test_gap_violation():
    X = normalize_area(build_slit_torus(0.5).surface)
    with pytest.raises(HypothesisFailure):
        build_network(X, eps=0.25, delta=0.6, samples=100)


def test_l3_too_short():
    # the slit (length 0.035) is a short edge, so the gap holds but l3 = 0.07
    X = normalize_area(build_slit_torus(0.05).surface)
    tri = delaunay_triangulate(X)
    with pytest.raises(HypothesisFailure, match="l3"):
        build_network(X, triangulation=tri, eps=0.05, delta=0.2, samples=100)
