import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatline.connections import enumerate_on, triangulation_of
from flatline.errors import RayBudgetExceeded, VerticalSaddleConnection
from flatline.slit_torus import build_slit_torus
from flatline.strips import (
    buffered_square_from_strip, decompose_strips, find_base, pz_check, pz_from_matrix,
    pz_surface, strip_width_bound_check, time_sequence,
)
from flatline.surface import SurfacePoint, normalize_area, rotate_to_vertical

from conftest import GOLDEN


def bases(X, L=2.0, n=6):
    tri = triangulation_of(X)
    return tri, [c for c in enumerate_on(tri, L) if abs(c.h) > 1e-12][:n]


def test_torus_one_strip(torus):
    tri, cs = bases(torus, 1.0)
    dec = decompose_strips(tri, cs[0])
    assert (cs[0].h, cs[0].v) == (1.0, 0.0)
    assert dec.m == 1
    assert dec.strips[0].width == pytest.approx(1.0)
    assert dec.strips[0].area == pytest.approx(1.0, abs=1e-12)
    bs = buffered_square_from_strip(dec)
    assert bs.alpha == pytest.approx(1.0) and bs.square.embedded


def test_torus_rotated(torus):
    X = rotate_to_vertical(torus, GOLDEN)
    tri, cs = bases(X, 1.5)
    dec = decompose_strips(tri, cs[0])
    assert dec.m == 1
    assert sum(s.area for s in dec.strips) == pytest.approx(1.0, abs=1e-9)


@pytest.fixture(scope="module")
def golden_slit():
    return rotate_to_vertical(build_slit_torus("1/2").surface, GOLDEN)


def test_slit_partition(golden_slit):
    tri, cs = bases(golden_slit)
    assert len(cs) >= 5
    ms = set()
    for g in cs:
        dec = decompose_strips(tri, g)
        ms.add(dec.m)
        assert sum(s.area for s in dec.strips) == pytest.approx(2.0, abs=1e-9)
        assert sum(s.width for s in dec.strips) == pytest.approx(abs(g.h), abs=1e-12)
        for s in dec.strips:
            assert s.width > 0 and s.height > 0
            assert all(z >= 0 for z in s.zippers)
            assert s.area <= s.width * s.height * (1 + 1e-12)
    assert ms == {5}


@given(st.floats(0.05, 0.95), st.floats(0.1, 3.0))
@settings(max_examples=15, deadline=None)
def test_m_depends_on_stratum_only(lam, slope):
    X = rotate_to_vertical(build_slit_torus(lam).surface, slope)
    tri, cs = bases(X, 2.0, 3)
    for g in cs:
        try:
            dec = decompose_strips(tri, g)
        except (VerticalSaddleConnection, RayBudgetExceeded):
            # vertical base, or a direction so near a periodic one that a return exceeds the budget
            continue
        assert dec.m == 5
        assert sum(s.area for s in dec.strips) == pytest.approx(X.area, abs=1e-9)


@pytest.mark.slow
def test_long_return_needs_budget():
    # near-periodic direction: one strip returns only after length ~9.3e4
    X = rotate_to_vertical(build_slit_torus(0.8718022277470399).surface, 2.4631911485725855)
    tri, cs = bases(X, 2.0, 1)
    with pytest.raises(RayBudgetExceeded):
        decompose_strips(tri, cs[0])
    dec = decompose_strips(tri, cs[0], budget=1e5)
    assert dec.m == 5
    assert max(s.height for s in dec.strips) > 9e4
    assert sum(s.area for s in dec.strips) == pytest.approx(X.area, abs=1e-9)


def test_vertical_base_rejected(slit_half):
    tri = triangulation_of(slit_half.surface)
    vert = [c for c in enumerate_on(tri, 1.0) if abs(c.h) < 1e-12]
    with pytest.raises(VerticalSaddleConnection):
        decompose_strips(tri, vert[0])


def test_buffered_square(golden_slit):
    tri, cs = bases(golden_slit)
    dec = decompose_strips(tri, cs[0])
    bs = buffered_square_from_strip(dec)
    # pigeonhole over m strips on an area-2 surface
    assert bs.alpha >= 2.0 / dec.m - 1e-12
    assert bs.overlap <= 1
    assert bs.square.embedded


def test_buffered_contains(golden_slit):
    tri, cs = bases(golden_slit)
    bs = buffered_square_from_strip(decompose_strips(tri, cs[0]))
    t, shift, piece = next(p for p in bs.square.pieces if len(p[2]) >= 3)
    c = np.mean(np.asarray(piece), axis=0) - shift
    assert bs.contains(SurfacePoint(int(t), float(c[0]), float(c[1])))


def test_find_base(golden_slit):
    tri, cs = bases(golden_slit)
    g = cs[0]
    b = find_base(tri, g.h, g.v)
    assert b is not None


def test_width_bound_golden():
    X = rotate_to_vertical(normalize_area(build_slit_torus("1/2").surface), GOLDEN)
    rep = strip_width_bound_check(X, np.arange(2.0, 31.0, 2.0), 0.5)
    assert not rep.errors
    widths = np.array([r[1] for r in rep.rows])
    # bounded type: widths stay bounded away from zero, far above any power decay
    assert widths.min() > 0.005
    assert all(r[4] == 5 for r in rep.rows)
    assert rep.delta_fit <= 0.5


def test_width_bound_rational():
    X = rotate_to_vertical(normalize_area(build_slit_torus("1/2").surface), "2/3")
    rep = strip_width_bound_check(X, [1.0, 2.0], 0.5)
    assert rep.errors and all("VerticalSaddleConnection" in m for _, m in rep.errors)


def test_time_sequence_first_step():
    ts = time_sequence(1, 10, 3)
    # fixed point of t = 10 + log t
    x = 10.0
    for _ in range(100):
        x = 10 + math.log(x)
    assert ts.times[1] == pytest.approx(x, abs=1e-12)
    assert ts.times[1] == pytest.approx(12.5284, abs=1e-3)
    assert np.all(np.diff(ts.times) > 0)


def test_time_sequence_small_eps():
    eps, t0 = 1e-6, 10.0
    ts = time_sequence(eps, t0, 5)
    n = np.arange(6)
    assert ts.times == pytest.approx(t0 + n * eps * math.log(t0), abs=1e-10)


@given(st.floats(0.01, 1.0), st.floats(1.5, 1e4))
@settings(max_examples=30, deadline=None)
def test_time_sequence_recurrence(eps, t0):
    ts = time_sequence(eps, t0, 200)
    assert np.max(np.abs(ts.residuals())) < 1e-10
    assert np.all(np.diff(ts.times) > 0)
    assert ts.doubling_ok()


def test_time_sequence_bad_args():
    with pytest.raises(ValueError):
        time_sequence(1, 1.0, 5)
    with pytest.raises(ValueError):
        time_sequence(0, 10, 5)


def test_pz_nested():
    rep = pz_check(lambda n, x: x < 0.3, 5, samples=10 ** 5, seed=1)
    assert rep.K_hat == pytest.approx(1 / 0.3, rel=0.02)


def test_pz_independent():
    rep = pz_check(lambda n, x: (np.floor(x * 2 ** (n + 1)) % 2) == 1, 10, samples=10 ** 5)
    assert rep.K_hat == pytest.approx(1.0, abs=0.05)
    assert rep.measures == pytest.approx([0.5] * 10, abs=0.01)


def test_pz_io_fraction():
    rep = pz_check(lambda n, x: (np.floor(x * 2 ** (n + 1)) % 2) == 1, 50, samples=20000, k=3)
    assert rep.io_fraction >= 1 / rep.K_hat - 0.01


def test_pz_from_matrix_single():
    rep = pz_from_matrix(np.array([[True, False, False, False]]))
    assert rep.K_hat == pytest.approx(4.0)


@pytest.mark.slow
def test_pz_surface_bound():
    X = rotate_to_vertical(normalize_area(build_slit_torus("1/2").surface), GOLDEN)
    rep = pz_surface(X, 1.0, 2.0, 6, samples=10000, seed=0)
    assert all(rep.extra["square_embedded"])
    assert max(rep.extra["overlaps"]) <= 1
    assert rep.K_hat <= rep.extra["bound"] + 3 * rep.K_sigma
    # each A_n is a pulled-back square, so its measure is the square's area
    sides = np.array(rep.extra["sides"])
    assert np.array(rep.measures) == pytest.approx(sides ** 2, abs=0.02)
