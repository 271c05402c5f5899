import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatline.connections import divergence_profile, enumerate_connections
from flatline.slit_torus import (
    LatticeVector, analyze_plant, birkhoff_experiment, build_slit_torus, classify_holonomy,
    denominator_rational, exchange, involution_point, lattice_holonomies, parse_real,
    plant_direction, recovered, shortest_sequence,
)
from flatline.surface import sample_points

from conftest import GOLDEN

POW2 = [2 ** j for j in range(2, 21)]


def test_build_invariants(slit_half):
    S = slit_half.surface
    assert S.genus == 2 and S.area == pytest.approx(2.0)
    assert [round(c.angle / (2 * math.pi)) for c in S.singularities] == [2, 2]
    assert slit_half.rational
    assert not build_slit_torus("sqrt2-1").rational


def test_involution_swaps_sheets(slit_half):
    S = slit_half.surface
    for p in sample_points(S, 50, np.random.default_rng(3)):
        q = involution_point(p)
        assert q.poly != p.poly and (q.x, q.y) == (p.x, p.y)
        assert involution_point(q) == p


def test_parse_real():
    assert parse_real("1/2") == (Fraction(1, 2), True)
    assert parse_real(0.5) == (Fraction(1, 2), True)
    v, exact = parse_real("1.6180339887")
    assert not exact and isinstance(v, mpmath.mpf)
    v, exact = parse_real("golden")
    assert not exact and abs(v - GOLDEN) < 1e-15
    assert denominator_rational(Fraction(3, 7))
    assert not denominator_rational(parse_real("sqrt2-1")[0])


def test_lattice_labels():
    lam = Fraction(3, 10)
    for kind, m, n in lattice_holonomies(lam, 3.0):
        if kind == "loop":
            assert math.gcd(m, n) == 1
    assert LatticeVector(2, 4, 1).separating
    assert not LatticeVector(1, 4, 1).separating
    assert not LatticeVector(1, 0, 0).separating
    assert LatticeVector(2, 4, -1).label == (-2, -4)


@pytest.mark.parametrize("lam", ["1/2", "3/10", "sqrt2-1"])
def test_kernel_holonomies_in_lattice(lam):
    st_ = build_slit_torus(lam)
    got = {classify_holonomy(c, st_) for c in enumerate_connections(st_.surface, 1.2)}
    assert got == lattice_holonomies(st_.lam, 1.2)


def test_rational_slope_periodic(slit_half):
    an = shortest_sequence(slit_half, "2/3", J=10)
    assert an.terminated and an.verdict == "PERIODIC"


def test_golden_ue(slit_half):
    an = shortest_sequence(slit_half, "golden", J=12)
    assert an.verdict == "UE"
    ts = [e.t for e in an.sequence]
    assert all(a < b for a, b in zip(ts, ts[1:]))


def test_short_window_inconclusive():
    an = shortest_sequence(build_slit_torus("sqrt2-1"), "golden", J=2)
    assert an.verdict == "INCONCLUSIVE"


def test_irrational_golden_evidence():
    an = shortest_sequence(build_slit_torus("sqrt2-1"), "golden", J=40)
    assert an.verdict == "UE_EVIDENCE"


def test_sequence_matches_profile(slit_half):
    an = shortest_sequence(slit_half, "golden", J=12)
    prof = divergence_profile(slit_half.surface, GOLDEN, (0, 12), 0.05, norm="sup")
    seq_t = [e.t for e in an.sequence if 0 < e.t < 12]
    bp_t = [b[0] for b in prof.breakpoints]
    assert bp_t == pytest.approx(seq_t, abs=1e-9)
    lam = float(slit_half.lam)
    for e, (_, (h, v), _) in zip([e for e in an.sequence if 0 < e.t < 12], prof.breakpoints):
        x, y = e.vector.xy(lam)
        assert math.hypot(x, y) == pytest.approx(math.hypot(h, v), rel=1e-9)


@pytest.fixture(scope="module")
def plant():
    return plant_direction("sqrt2-1", POW2, dps=200)


def test_plant_structure(plant):
    lam = mpmath.sqrt(2) - 1
    with mpmath.workdps(200):
        for j, b in enumerate(plant.b):
            w0, w1, v = plant.w[j], plant.w[j + 1], plant.v[j]
            assert (w1[0] - w0[0], w1[1] - w0[1]) == (2 * b * v[0], 2 * b * v[1])
            assert w1[0] % 2 == 0 and w1[1] % 2 == 0
            # area exchange symmetry
            assert abs(exchange(v, w0, lam) - exchange(v, w1, lam)) < 1e-9


def test_plant_round_trip(plant):
    an = analyze_plant(plant)
    ws, bs = recovered(an)
    assert bs == plant.b
    assert ws == plant.w
    assert an.verdict == "NONERGODIC_EVIDENCE"


def test_plant_validation():
    with pytest.raises(ValueError):
        plant_direction("sqrt2-1", [1, 2], w1=(1, 0))
    with pytest.raises(ValueError):
        plant_direction("sqrt2-1", [0, 2])


@given(st.lists(st.integers(1, 6), min_size=3, max_size=6))
@settings(max_examples=15, deadline=None)
def test_plant_round_trip_small(b):
    p = plant_direction("sqrt2-1", b, dps=120)
    ws, bs = recovered(analyze_plant(p))
    assert bs[:p.reached] == p.b
    assert ws[:p.reached + 1] == p.w


def test_birkhoff_ue_one_cluster(slit_half):
    rep = birkhoff_experiment(slit_half, "golden", starts=6, T=2000.0)
    assert len(rep.clusters) == 1 and rep.spread <= 0.05


def test_birkhoff_zero_time(slit_half):
    rep = birkhoff_experiment(slit_half, "golden", starts=4, T=0.0)
    assert len(rep.clusters) == 1
    assert rep.statistic == [0.0] * 4
