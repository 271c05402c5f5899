"""Vertical strips, buffered squares, the slow time sequence and the PZ harness.

A non-vertical saddle connection gamma is cut by the downward critical
leaves of the cone points. Each piece of gamma between two consecutive
cuts flows upward as a parallelogram of constant return time until it
comes back to gamma; these parallelograms are the vertical strips.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .connections import enumerate_on
from .errors import FlatlineError, RayBudgetExceeded, VerticalSaddleConnection
from .network import (Chart, EmbeddedSquare, _bbox, _boxes_meet, _inside_convex, _poly_area,
                      clip_convex, develop)
from .surface import SurfacePoint, apply_flow, cast_ray, normalize_area

HIT_TOL = 1e-9


@dataclass
class GammaPiece:
    """Part of gamma inside one triangle, in that triangle's chart."""

    t: int
    p0: np.ndarray
    p1: np.ndarray
    s0: float  # parameter along gamma, 0 at its start and 1 at its end
    s1: float


@dataclass
class VerticalStrip:
    s_left: float  # gamma parameters of the bottom edge
    s_right: float
    width: float
    height: float  # return time, constant over the strip
    zippers: tuple  # heights of the cone points on the left and right sides

    @property
    def area(self):
        return self.width * self.height


@dataclass
class StripDecomposition:
    chart: Chart
    gamma: object
    pieces: list
    strips: list
    cuts: list  # (s, height, cone class) for every cut of gamma
    area: float

    @property
    def m(self):
        return len(self.strips)

    def summary(self):
        return {
            "m": self.m,
            "widths": [s.width for s in self.strips],
            "heights": [s.height for s in self.strips],
            "areas": [s.area for s in self.strips],
            "area_sum": sum(s.area for s in self.strips),
            "surface_area": self.area,
            "gamma": {"h": self.gamma.h, "v": self.gamma.v},
        }


@dataclass
class BufferedSquare:
    square: EmbeddedSquare
    buffer: object  # the developed buffer rectangle
    alpha: float  # buffer area
    overlap: int  # how many times the buffer overlaps itself
    strip: VerticalStrip = None

    def contains(self, point):
        """Whether a chart point lies in the square."""
        return bool(self.contains_many([point.poly], [[point.x, point.y]])[0])

    def contains_many(self, poly, xy):
        """Vectorised membership of chart points (triangles, coordinates)."""
        poly = np.asarray(poly)
        xy = np.asarray(xy, dtype=np.float64)
        out = np.zeros(len(poly), dtype=bool)
        for t, shift, piece in self.square.pieces:
            if len(piece) < 3:
                continue
            sel = np.flatnonzero((poly == t) & ~out)
            if not len(sel):
                continue
            loc = np.asarray(piece) - shift
            inside = np.ones(len(sel), dtype=bool)
            for a, b in zip(loc, np.roll(loc, -1, axis=0)):
                e = b - a
                inside &= e[0] * (xy[sel, 1] - a[1]) - e[1] * (xy[sel, 0] - a[0]) >= 0
            out[sel[inside]] = True
        return out


# gamma

def gamma_pieces(tri, conn):
    """Chart pieces of the saddle connection ``conn`` (found on ``tri``)."""
    t, k = conn.root
    d = np.array([conn.h, conn.v], dtype=np.float64)
    total = float(np.hypot(*d))
    u_hat = d / total
    origin = tri.corners(t)[k]
    base = tri.corners(t) - origin
    cur, entry, travelled = t, None, 0.0
    pieces = []
    for _ in range(len(conn.path) + 2):
        best = None
        for j in range(3):
            if j == entry:
                continue
            a, b = base[j], base[(j + 1) % 3]
            e = b - a
            den = u_hat[0] * e[1] - u_hat[1] * e[0]
            if abs(den) < 1e-15:
                continue
            s = (a[0] * e[1] - a[1] * e[0]) / den
            u = (a[0] * u_hat[1] - a[1] * u_hat[0]) / den
            if s <= travelled + 1e-12 or u < -1e-9 or u > 1 + 1e-9:
                continue
            if best is None or s < best[0]:
                best = (s, j, u)
        if best is None:
            raise FlatlineError("lost while tracing the base connection")
        s, j, u = best
        s = min(s, total)
        shift = tri.corners(cur) - base  # developed -> chart of cur
        p0 = travelled * u_hat + shift[0]
        p1 = s * u_hat + shift[0]
        pieces.append(GammaPiece(int(cur), p0, p1, travelled / total, s / total))
        if s >= total * (1 - 1e-9):
            return pieces
        t2, j2 = (int(x) for x in tri.nbr[cur, j])
        start = base[(j + 1) % 3]
        c2 = np.zeros((3, 2))
        c2[j2] = start
        c2[(j2 + 1) % 3] = start + tri.vec[t2, j2]
        c2[(j2 + 2) % 3] = c2[(j2 + 1) % 3] + tri.vec[t2, (j2 + 1) % 3]
        base, cur, entry, travelled = c2, t2, j2, s
    raise FlatlineError("base connection trace did not terminate")


def _gamma_point(pieces, s):
    for pc in pieces:
        if pc.s0 - 1e-15 <= s <= pc.s1 + 1e-15:
            f = (s - pc.s0) / (pc.s1 - pc.s0)
            p = pc.p0 + f * (pc.p1 - pc.p0)
            return SurfacePoint(pc.t, float(p[0]), float(p[1]))
    raise FlatlineError("parameter outside the base connection")


def _first_gamma_hit(chart, start, orient, pieces, budget):
    """Distance and gamma parameter of the first vertical hit on gamma.

    Raises VerticalSaddleConnection if a cone point comes first and
    RayBudgetExceeded past ``budget``.
    """
    by_t = {}
    for pc in pieces:
        by_t.setdefault(pc.t, []).append(pc)
    done = 0.0
    chunk = 4.0
    point = start
    while done < budget:
        length = min(chunk, budget - done)
        rec = cast_ray(chart.surface, point, length, (0.0, float(orient)))
        for poly, xa, ya, xb, yb in rec.segments:
            p, q = np.array([xa, ya]), np.array([xb, yb])
            r = q - p
            seg_len = float(np.hypot(*r))
            best = None
            for pc in by_t.get(int(poly), ()):
                e = pc.p1 - pc.p0
                den = r[0] * e[1] - r[1] * e[0]
                if abs(den) < 1e-300:
                    continue
                w = pc.p0 - p
                a = (w[0] * e[1] - w[1] * e[0]) / den
                b = (w[0] * r[1] - w[1] * r[0]) / den
                if -1e-12 <= a <= 1 + 1e-12 and -1e-12 <= b <= 1 + 1e-12:
                    dist = done + a * seg_len
                    if dist > HIT_TOL and (best is None or dist < best[0]):
                        best = (dist, pc.s0 + b * (pc.s1 - pc.s0))
            if best is not None:
                return best
            done += seg_len
        if rec.hit:
            raise VerticalSaddleConnection(
                f"vertical leaf meets cone point {rec.singularity} before the base connection")
        point = rec.end
        chunk *= 2
    raise RayBudgetExceeded(f"no return to the base connection within length {budget}")


def _down_prongs(chart):
    """(triangle, corner) of every downward prong at a cone point of angle > 2 pi."""
    tri = chart.tri
    out = []
    d = np.array([0.0, -1.0])
    for t in range(tri.n_triangles):
        P = tri.corners(t)
        for k in range(3):
            if not chart.cone[tri.cls[t, k]]:
                continue
            a = P[(k + 1) % 3] - P[k]
            b = P[(k + 2) % 3] - P[k]
            for e in (a, b):
                if e[1] < 0 and abs(e[0]) <= 1e-12 * abs(e[1]):
                    raise VerticalSaddleConnection("a vertical edge leaves a cone point downward")
            if a[0] * d[1] - a[1] * d[0] >= 0 and d[0] * b[1] - d[1] * b[0] > 0:
                out.append((t, k))
    return out


def decompose_strips(surface_or_tri, gamma, budget=1e4, recenter=True):
    """Vertical strips determined by the saddle connection ``gamma``.

    ``gamma`` must come from :func:`flatline.connections.enumerate_on` on
    the triangulation given (or on the Delaunay triangulation cached for
    the surface).
    """
    from .connections import triangulation_of
    from .triangulation import Triangulation
    tri = surface_or_tri if isinstance(surface_or_tri, Triangulation) \
        else triangulation_of(surface_or_tri)
    if abs(gamma.h) < 1e-12:
        raise VerticalSaddleConnection("the base connection is vertical")
    if hasattr(gamma, "pieces"):
        pieces = gamma.pieces
    else:
        # charts near the origin keep flowed coordinates well conditioned
        if recenter:
            tri = _recentered(tri)
        pieces = gamma_pieces(tri, gamma)
    chart = Chart(tri)
    cuts = []
    for t, k in _down_prongs(chart):
        corner = tri.corners(t)[k]
        dist, s = _first_gamma_hit(chart, SurfacePoint(t, float(corner[0]), float(corner[1])),
                                   -1, pieces, budget)
        cuts.append((s, dist, int(tri.cls[t, k])))
    cuts.sort()
    inner = [c for c in cuts if 1e-12 < c[0] < 1 - 1e-12]
    bounds = [(0.0, 0.0)] + [(s, a) for s, a, _ in inner] + [(1.0, 0.0)]
    strips = []
    width = abs(gamma.h)
    for (sl, al), (sr, ar) in zip(bounds, bounds[1:]):
        if sr - sl <= 1e-15:
            continue
        mid = _gamma_point(pieces, 0.5 * (sl + sr))
        tau, _ = _first_gamma_hit(chart, mid, 1, pieces, budget)
        strips.append(VerticalStrip(sl, sr, (sr - sl) * width, tau, (al, ar)))
    return StripDecomposition(chart, gamma, pieces, strips, cuts, tri.total_area())


def _multiplicity(rect):
    """Largest number of pieces of a developed rectangle over one point."""
    by_t = {}
    for t, shift, poly in rect.pieces:
        if len(poly) >= 3 and _poly_area(poly) > 1e-14:
            by_t.setdefault(t, []).append([np.asarray(p) - shift for p in poly])
    worst = 1
    for polys in by_t.values():
        boxes = [_bbox(p) for p in polys]
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                if not _boxes_meet(boxes[i], boxes[j]):
                    continue
                inter = clip_convex(polys[i], polys[j])
                if _poly_area(inter) <= 1e-14:
                    continue
                c = np.mean(inter, axis=0)
                n = sum(_inside_convex(p, c[0], c[1], tol=0.0) for p in polys)
                worst = max(worst, n)
    return worst


def buffered_square_from_strip(dec):
    """Square of side the width of the largest strip, inside its buffer.

    The buffer is the smallest rectangle containing the strip: it has the
    strip's width and height the return time plus the rise of gamma across
    the strip.
    """
    strip = max(dec.strips, key=lambda s: s.area)
    w = strip.width
    rise = abs(dec.gamma.v / dec.gamma.h) * w
    mid = _gamma_point(dec.pieces, 0.5 * (strip.s_left + strip.s_right))
    rec = cast_ray(dec.chart.surface, mid, strip.height / 2, (0.0, 1.0))
    center = rec.end
    buf = develop(dec.chart, center, w, strip.height + rise)
    sq = develop(dec.chart, center, w, min(w, strip.height + rise), cls=EmbeddedSquare)
    sq.anchor = center
    return BufferedSquare(sq, buf, w * (strip.height + rise), _multiplicity(buf) - 1, strip)


# width bound

@dataclass
class WidthBoundReport:
    delta: float
    rows: list  # (t, min width, t**-delta, ok, m)
    violations: list
    errors: list  # (t, message)
    delta_fit: float

    def summary(self):
        return {"delta": self.delta, "rows": self.rows, "violations": len(self.violations),
                "errors": self.errors, "delta_fit": self.delta_fit}


def shortest_base(tri, kappa=None):
    """Shortest non-vertical saddle connection on ``tri`` (length <= kappa if given)."""
    L = min(tri.edge_length(t, i) for t in range(tri.n_triangles) for i in range(3))
    while True:
        cands = [c for c in enumerate_on(tri, L) if abs(c.h) > 1e-12]
        if cands:
            return cands[0]
        if kappa is not None and L > kappa:
            return None
        L *= 1.5


def strip_width_bound_check(surface, ts, delta, kappa=None, budget=1e4):
    """Minimal strip width on the flowed surfaces against ``t**-delta``.

    ``surface`` should already be rotated so that the direction of
    interest is vertical. The base connection at each time is the
    shortest non-vertical one.
    """
    from .delaunay import delaunay_triangulate
    rows, viol, errs = [], [], []
    for t in ts:
        X = normalize_area(apply_flow(surface, t))
        tri = delaunay_triangulate(X)
        g = shortest_base(tri, kappa)
        if g is None:
            errs.append((float(t), "no base connection below kappa"))
            continue
        try:
            dec = decompose_strips(tri, g, budget)
        except (VerticalSaddleConnection, RayBudgetExceeded) as e:
            errs.append((float(t), f"{type(e).__name__}: {e}"))
            continue
        wmin = min(s.width for s in dec.strips)
        bound = float(t) ** -delta
        ok = wmin >= bound
        rows.append((float(t), wmin, bound, ok, dec.m))
        if not ok:
            viol.append((float(t), wmin, bound, {"h": g.h, "v": g.v}))
    fit = math.nan
    good = [(r[0], r[1]) for r in rows if r[0] > 1]
    if len(good) >= 2:
        x = np.log([g[0] for g in good])
        y = np.log([g[1] for g in good])
        fit = float(-np.polyfit(x, y, 1)[0])
    return WidthBoundReport(delta, rows, viol, errs, fit)


# time sequence

@dataclass
class TimeSequence:
    eps: float
    t0: float
    times: np.ndarray
    low: np.ndarray = None  # rounding error of ``times``: t_k = times[k] + low[k]

    def residuals(self):
        t = self.times
        lo = np.zeros_like(t) if self.low is None else self.low
        # hi parts are within a factor 2 of each other, so the difference is exact
        return (t[1:] - t[:-1]) + (lo[1:] - lo[:-1]) - self.eps * np.log(t[1:])

    def growth(self):
        """t_n / (n log n log log n) for n >= 3."""
        n = np.arange(len(self.times))
        sel = n >= 3
        nn = n[sel].astype(np.float64)
        return self.times[sel] / (nn * np.log(nn) * np.log(np.log(nn)))

    def doubling_ok(self):
        t = self.times
        return bool(np.all(t[1:] < 2 * t[:-1]))


def _next_step(t, eps):
    """Step d = eps log(t + d) by Newton, for the recurrence x = t + eps log x."""
    d = eps * math.log(t)
    for _ in range(100):
        x = t + d
        f = d - eps * math.log(x)
        dd = f / (1.0 - eps / x)
        d -= dd
        if abs(dd) <= 1e-16 * max(d, 1.0):
            break
    return d


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def time_sequence(eps, t0, n):
    """t_0..t_n with t_{k+1} = t_k + eps log t_{k+1}."""
    if not t0 > 1:
        raise ValueError("t0 must exceed 1")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    # a double-double running sum keeps the residual far below the ulp of t_n
    out = np.empty(n + 1)
    low = np.zeros(n + 1)
    out[0] = t0
    for k in range(n):
        d = _next_step(out[k] + low[k], eps)
        hi, lo = _two_sum(out[k], d)
        out[k + 1], low[k + 1] = _two_sum(hi, lo + low[k])
    return TimeSequence(float(eps), float(t0), out, low)


# quasi-independence

@dataclass
class PZReport:
    K_hat: float
    K_sigma: float
    measures: list
    partial_sums: list
    io_fraction: float
    io_threshold: int
    window: int
    samples: int
    pair: tuple
    extra: dict = field(default_factory=dict)

    def summary(self):
        return {"K_hat": self.K_hat, "K_sigma": self.K_sigma, "measures": self.measures,
                "partial_sums": self.partial_sums, "io_fraction": self.io_fraction,
                "io_threshold": self.io_threshold, "window": self.window,
                "samples": self.samples, "pair": list(self.pair), **self.extra}


def pz_from_matrix(member, k=10, window=50):
    """Estimates from a (sets, samples) boolean membership matrix."""
    member = np.asarray(member, dtype=bool)[:window]
    n_sets, N = member.shape
    meas = member.mean(axis=1)
    f = member.astype(np.float64)
    inter = (f @ f.T) / N
    best, pair, sig = 0.0, (0, 0), 0.0
    for i in range(n_sets):
        for j in range(i + 1, n_sets):
            if meas[i] <= 0 or meas[j] <= 0:
                continue
            r = inter[i, j] / (meas[i] * meas[j])
            if r > best:
                best, pair = r, (i, j)
                # binomial error of the intersection estimate, propagated
                sig = math.sqrt(max(inter[i, j] * (1 - inter[i, j]), 1.0 / N) / N) / (meas[i] * meas[j])
    if n_sets == 1 and meas[0] > 0:
        best, pair = 1.0 / meas[0], (0, 0)
        sig = math.sqrt(meas[0] * (1 - meas[0]) / N) / meas[0] ** 2
    counts = member.sum(axis=0)
    io = float(np.mean(counts >= min(k, n_sets)))
    return PZReport(float(best), float(sig), meas.tolist(), np.cumsum(meas).tolist(), io,
                    int(min(k, n_sets)), int(n_sets), int(N), pair)


def pz_check(indicator, n_sets, samples=10 ** 5, seed=0, sampler=None, k=10, window=50):
    """Monte Carlo quasi-independence estimates.

    ``indicator(n, points)`` returns the membership of the sample points in
    A_n; ``sampler(rng, N)`` draws the points (uniform on [0, 1) by default).
    """
    rng = np.random.default_rng(seed)
    pts = sampler(rng, samples) if sampler is not None else rng.random(samples)
    n_sets = min(n_sets, window)
    member = np.array([np.asarray(indicator(n, pts), dtype=bool) for n in range(n_sets)])
    return pz_from_matrix(member, k, window)


@dataclass
class BaseConnection:
    """A saddle connection given directly by its chart pieces."""

    h: float
    v: float
    pieces: list


def find_base(tri, h, v):
    """A saddle connection of holonomy (h, v) on ``tri``, found by ray casting.

    Every corner whose sector contains the direction is tried; the first
    ray that ends on a cone point exactly at the right length wins.
    """
    chart = Chart(tri)
    L = math.hypot(h, v)
    d = np.array([h, v]) / L
    for t in range(tri.n_triangles):
        P = tri.corners(t)
        for k in range(3):
            if np.allclose(tri.vec[t, k], (h, v), rtol=0, atol=1e-12 * L):
                return BaseConnection(float(h), float(v),
                                      [GammaPiece(t, P[k].copy(), P[(k + 1) % 3].copy(), 0.0, 1.0)])
    for t in range(tri.n_triangles):
        P = tri.corners(t)
        for k in range(3):
            a = P[(k + 1) % 3] - P[k]
            b = P[(k + 2) % 3] - P[k]
            if not (a[0] * d[1] - a[1] * d[0] > 0 and d[0] * b[1] - d[1] * b[0] > 0):
                continue
            rec = cast_ray(chart.surface, SurfacePoint(t, float(P[k][0]), float(P[k][1])),
                           L * (1 + 1e-9), (float(d[0]), float(d[1])))
            if rec.hit and abs(rec.hit_at - L) <= 1e-7 * L:
                pieces, done = [], 0.0
                for poly, xa, ya, xb, yb in rec.segments:
                    ln = math.hypot(xb - xa, yb - ya)
                    pieces.append(GammaPiece(int(poly), np.array([xa, ya]), np.array([xb, yb]),
                                             done / L, min(1.0, (done + ln) / L)))
                    done += ln
                return BaseConnection(float(h), float(v), pieces)
    raise FlatlineError(f"no saddle connection with holonomy ({h}, {v})")


def _recentered(tri):
    out = tri.copy()
    out.pos = np.array([-(tri.vec[t, 0] + tri.vec[t, 1]) / 3 for t in range(tri.n_triangles)])
    return out


def flowed_triangulation(tri, t):
    """The triangulation carried to time t, charts recentred.

    Returns (triangulation, shift) where a point p of triangle k in the
    old chart maps to flow(p) + shift[k].
    """
    a, b = math.exp(t / 2), math.exp(-t / 2)
    out = tri.copy()
    out.vec = tri.vec * np.array([a, b])
    scaled = tri.pos * np.array([a, b])
    out = _recentered(out)
    return out, out.pos - scaled


def flowed_square(base, t, carrier=None, budget=1e4):
    """Buffered square on the flowed Delaunay triangulation at time t.

    ``base`` is a triangulation of the area-one surface with the direction
    of interest vertical. The base connection is the shortest non-vertical
    edge of the Delaunay triangulation at time t. Points of ``carrier``
    (in ``base`` charts) are moved to the final charts in place.
    """
    from .delaunay import make_delaunay
    ftri, shift = flowed_triangulation(base, t)
    if carrier is not None:
        a, b = math.exp(t / 2), math.exp(-t / 2)
        carrier.xy = carrier.xy * np.array([a, b]) + shift[carrier.poly]
    make_delaunay(ftri, carrier=carrier)
    old = ftri.pos.copy()
    ftri = _recentered(ftri)
    if carrier is not None:
        carrier.recenter(old, ftri)
    h, v = min((ftri.vec[k, i] for k in range(ftri.n_triangles) for i in range(3)
                if abs(ftri.vec[k, i, 0]) > 1e-12), key=lambda e: float(np.hypot(*e)))
    if v < 0 or (v == 0 and h < 0):
        h, v = -h, -v
    g = find_base(ftri, float(h), float(v))
    dec = decompose_strips(ftri, g, budget)
    return buffered_square_from_strip(dec)


def pz_surface(surface, eps, t0, n, samples=20000, seed=0, k=10, window=50, budget=1e4):
    """PZ estimates for A_n = {x : f_{t_n} x in S_n} with buffered squares S_n.

    Sample points are drawn on ``surface`` (area one, direction of interest
    vertical) and carried forward through the flow and the edge flips.
    """
    from .delaunay import PointCarrier, delaunay_triangulate
    from .surface import sample_points
    ts = time_sequence(eps, t0, n).times[1:]
    base = _recentered(delaunay_triangulate(surface))
    rng = np.random.default_rng(seed)
    pts = sample_points(base.to_surface(), int(samples), rng)
    poly = np.array([p.poly for p in pts])
    xy = np.array([[p.x, p.y] for p in pts])
    member = np.zeros((len(ts), len(pts)), dtype=bool)
    built = []
    for i, t in enumerate(ts):
        car = PointCarrier(poly, xy)
        bs = flowed_square(base, float(t), car, budget)
        built.append((float(t), bs))
        member[i] = bs.contains_many(car.poly, car.xy)
    rep = pz_from_matrix(member, k, window)
    sides = np.array([bs.square.width for _, bs in built])
    alpha = min(bs.alpha for _, bs in built)
    c = float(np.min(sides * ts ** (eps / 2)))
    rep.extra = {"times": ts.tolist(), "sides": sides.tolist(), "alpha": alpha, "c": c,
                 "bound": (4 + c * c) / (alpha * c * c),
                 "overlaps": [bs.overlap for _, bs in built],
                 "square_embedded": [bs.square.embedded for _, bs in built]}
    return rep
