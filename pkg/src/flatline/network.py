"""Embedded squares, K-visibility and K-reachability, and K-networks.

All geometry happens on a triangulated copy of the surface. A point is a
:class:`SurfacePoint` whose ``poly`` is a triangle index and whose
coordinates are in that triangle's chart (``tri.corners(t)``). Rectangles
are axis-parallel and developed triangle by triangle from their center.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import delaunay as dl
from .connections import l3
from .errors import (CoverageGap, FlatlineError, GenusTooSmall, HypothesisFailure,
                     NotConnected, SingularityInInterior)
from .surface import (TWO_PI, TOL, FlatSurface, SurfacePoint, cast_ray, point_in_polygon,
                      sample_points)
from .triangulation import Triangulation, from_surface

AREA_TOL = 1e-14


# planar helpers

def _cross(a, b):
    return float(a[0] * b[1] - a[1] * b[0])


def _poly_area(p):
    if len(p) < 3:
        return 0.0
    x, y = np.asarray(p).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject, clipper):
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW ``clipper``."""
    out = [np.asarray(p, dtype=np.float64) for p in subject]
    n = len(clipper)
    for i in range(n):
        a, b = np.asarray(clipper[i]), np.asarray(clipper[(i + 1) % n])
        e = b - a
        inp, out = out, []
        if not inp:
            break
        prev = inp[-1]
        sp = _cross(e, prev - a)
        for cur in inp:
            sc = _cross(e, cur - a)
            if sc >= 0:
                if sp < 0:
                    out.append(prev + (cur - prev) * (sp / (sp - sc)))
                out.append(cur)
            elif sp >= 0:
                out.append(prev + (cur - prev) * (sp / (sp - sc)))
            prev, sp = cur, sc
    return out


def _rect_poly(x0, x1, y0, y1):
    return [np.array([x0, y0]), np.array([x1, y0]), np.array([x1, y1]), np.array([x0, y1])]


def clip_segment(p, q, poly):
    """Parameter interval [s0, s1] of segment p->q inside the convex CCW ``poly``."""
    s0, s1 = 0.0, 1.0
    d = q - p
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        e = b - a
        num = _cross(e, p - a)
        den = _cross(e, d)
        if abs(den) < 1e-300:
            if num < 0:
                return None
            continue
        s = -num / den
        if den > 0:
            s0 = max(s0, s)
        else:
            s1 = min(s1, s)
        if s0 > s1:
            return None
    return s0, s1


# charts

class Chart:
    """A triangulation with its triangle surface and point location."""

    def __init__(self, tri, surface=None):
        self.tri = tri
        self.surface = tri.to_surface()
        self.source = surface
        angles = np.zeros(int(tri.cls.max()) + 1)
        for t in range(tri.n_triangles):
            for k in range(3):
                angles[tri.cls[t, k]] += tri.angle(t, k)
        self.cone = angles > TWO_PI + 1e-6  # genuine singularities; marked points excluded

    def locate(self, point):
        """Triangle-chart point for a point of the source surface."""
        if self.source is None or not hasattr(self.tri, "poly_of"):
            return point
        for t in np.flatnonzero(self.tri.poly_of == point.poly):
            if point_in_polygon(self.tri.corners(int(t)), point.x, point.y):
                return SurfacePoint(int(t), point.x, point.y)
        raise FlatlineError("point is not on the surface")

    def move(self, t, p, q):
        """Follow the straight segment p -> q from triangle ``t``.

        Returns the end as a chart point, or None if the segment meets a
        cone point.
        """
        d = np.asarray(q, dtype=np.float64) - np.asarray(p, dtype=np.float64)
        ln = float(np.hypot(*d))
        if ln < 1e-15:
            return SurfacePoint(int(t), float(p[0]), float(p[1]))
        rec = cast_ray(self.surface, SurfacePoint(int(t), float(p[0]), float(p[1])), ln,
                       (d[0] / ln, d[1] / ln))
        if rec.hit:
            return None
        return rec.end


def chart_of(surface):
    """Chart on the polygon triangulation of ``surface`` (cached)."""
    if isinstance(surface, Chart):
        return surface
    if isinstance(surface, Triangulation):
        return Chart(surface)
    cache = surface.__dict__.setdefault("_cache", {})
    if "chart" not in cache:
        cache["chart"] = Chart(from_surface(surface), surface)
    return cache["chart"]


# rectangles

@dataclass
class Rect:
    """Axis-parallel rectangle developed from its center.

    ``pieces`` lists (triangle, shift, polygon) with the polygon in the
    developed plane of the center's chart; subtracting ``shift`` gives
    triangle-chart coordinates.
    """

    chart: Chart
    center: SurfacePoint
    width: float
    height: float
    pieces: list = field(default_factory=list)
    singular: bool = False  # a cone point in the open interior
    obstruction: tuple = None  # translate of a self-overlap

    @property
    def immersed(self):
        return not self.singular

    @property
    def embedded(self):
        return not self.singular and self.obstruction is None

    def bounds(self):
        c = self.center
        return (c.x - self.width / 2, c.x + self.width / 2,
                c.y - self.height / 2, c.y + self.height / 2)

    def point(self, x, y):
        """Surface point of the developed point (x, y), or None."""
        for t, shift, poly in self.pieces:
            if _inside_convex(poly, x, y):
                return SurfacePoint(int(t), float(x - shift[0]), float(y - shift[1]))
        return None

    def grid(self, n, inset=1e-9):
        """n x n sample points, boundary included up to ``inset``."""
        x0, x1, y0, y1 = self.bounds()
        out = []
        for a in np.linspace(0, 1, n):
            for b in np.linspace(0, 1, n):
                x = x0 + inset + a * (x1 - x0 - 2 * inset)
                y = y0 + inset + b * (y1 - y0 - 2 * inset)
                p = self.point(x, y)
                if p is not None:
                    out.append(p)
        return out

    def local_pieces(self, t):
        return [np.array(poly) - shift for tt, shift, poly in self.pieces if tt == t]


@dataclass
class EmbeddedSquare(Rect):
    anchor: SurfacePoint = None

    @property
    def side(self):
        return self.width


def _inside_convex(poly, x, y, tol=1e-12):
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) < -tol:
            return False
    return True


def develop(chart, center, width, height, budget=100000, tol=TOL, cls=Rect):
    """Develop the rectangle of the given size centered at a chart point."""
    tri = chart.tri
    rect = cls(chart, center, float(width), float(height))
    x0, x1, y0, y1 = rect.bounds()
    box = _rect_poly(x0, x1, y0, y1)
    start = (int(center.poly), (0.0, 0.0))
    stack = [start]
    seen = {(start[0], 0, 0)}
    while stack:
        if len(seen) > budget:
            raise FlatlineError("rectangle development exceeded its budget")
        t, shift = stack.pop()
        shift = np.array(shift)
        P = tri.corners(t) + shift
        for k in range(3):
            vx, vy = P[k]
            if chart.cone[tri.cls[t, k]] and x0 + tol < vx < x1 - tol and y0 + tol < vy < y1 - tol:
                rect.singular = True
        piece = clip_convex(box, list(P))
        if _poly_area(piece) > AREA_TOL or (t, shift.tolist()) == (start[0], [0.0, 0.0]):
            rect.pieces.append((t, shift, piece))
        for k in range(3):
            a, b = P[k], P[(k + 1) % 3]
            seg = clip_segment(a, b, box)
            if seg is None or (seg[1] - seg[0]) * float(np.hypot(*(b - a))) <= 1e-12:
                continue
            # skip edges lying on the rectangle boundary
            mid = a + (b - a) * (0.5 * (seg[0] + seg[1]))
            if not (x0 + tol < mid[0] < x1 - tol and y0 + tol < mid[1] < y1 - tol):
                continue
            t2, k2 = (int(x) for x in tri.nbr[t, k])
            shift2 = b - tri.corners(t2)[k2]
            key = (t2, round(shift2[0] / 1e-9), round(shift2[1] / 1e-9))
            if key not in seen:
                seen.add(key)
                stack.append((t2, tuple(shift2)))
        if rect.singular:
            break
    if not rect.singular:
        rect.obstruction = _overlap(rect)
    return rect


def _bbox(poly):
    a = np.asarray(poly)
    return a.min(axis=0), a.max(axis=0)


def _boxes_meet(b1, b2, tol=1e-12):
    return bool(np.all(b1[0] < b2[1] - tol) and np.all(b2[0] < b1[1] - tol))


def _overlap(rect):
    by_t = {}
    for t, shift, poly in rect.pieces:
        by_t.setdefault(t, []).append((shift, [np.asarray(p) - shift for p in poly]))
    best = None
    for t, items in by_t.items():
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                (sa, pa), (sb, pb) = items[i], items[j]
                if len(pa) < 3 or len(pb) < 3 or not _boxes_meet(_bbox(pa), _bbox(pb)):
                    continue
                if _poly_area(clip_convex(pa, pb)) > AREA_TOL:
                    u = sb - sa
                    if u[1] < -1e-12 or (abs(u[1]) <= 1e-12 and u[0] < 0):
                        u = -u
                    key = (float(np.hypot(*u)), abs(float(u[1])))
                    if best is None or key < best[0]:
                        best = (key, (float(u[0]), float(u[1])))
    return None if best is None else best[1]


def embed_square(surface, anchor, side, strict=True):
    """Axis-parallel square of the given side centered at ``anchor``.

    ``surface`` is a FlatSurface (anchor in polygon coordinates), a
    Triangulation or a Chart (anchor in triangle-chart coordinates). The
    square is certified embedded when its development has no two pieces of
    one triangle overlapping; otherwise ``obstruction`` holds the
    offending translate. A cone point in the open square raises
    :class:`SingularityInInterior` (or sets ``singular`` when not strict).
    """
    if side <= 0:
        raise ValueError("side must be positive")
    chart = chart_of(surface)
    center = chart.locate(anchor)
    sq = develop(chart, center, side, side, cls=EmbeddedSquare)
    sq.anchor = anchor
    if sq.singular and strict:
        raise SingularityInInterior("a cone point lies inside the square")
    return sq


def largest_embedded_side(chart, center, hi, iters=40):
    """Largest side (up to ``hi``) of an embedded square at ``center``, by bisection."""
    lo = 0.0
    if develop(chart, center, hi, hi).embedded:
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if develop(chart, center, mid, mid).embedded:
            lo = mid
        else:
            hi = mid
    return lo


# visibility and reachability

def vertical_distance(chart, point, rect, limit):
    """Shortest vertical distance (either way) from ``point`` to ``rect``, up to ``limit``.

    Returns (distance, orientation) or (inf, 0).
    """
    best = (math.inf, 0)
    for orient in (1, -1):
        rec = cast_ray(chart.surface, point, max(limit, 1e-300), (0.0, float(orient)))
        done = 0.0
        for poly, xa, ya, xb, yb in rec.segments:
            p, q = np.array([xa, ya]), np.array([xb, yb])
            seg_len = float(np.hypot(*(q - p)))
            for loc in rect.local_pieces(int(poly)):
                if len(loc) < 3:
                    continue
                iv = clip_segment(p, q, loc)
                if iv is not None:
                    d = done + iv[0] * seg_len
                    if d < best[0]:
                        best = (d, orient)
            done += seg_len
            if done >= best[0]:
                break
    return best


def k_visible(surface, point, square, K):
    """Whether ``point`` is K-visible from ``square`` (closed inequality).

    Returns (visible, witness) with witness (orientation, distance).
    """
    chart = square.chart if isinstance(square, Rect) else chart_of(surface)
    limit = K * square.height
    slack = limit * (1 + 1e-12) + 1e-12
    d, orient = vertical_distance(chart, point, square, slack)
    if d <= slack:
        return True, (orient, d)
    return False, None


def _visible_all(chart, points, rect, K):
    slack = K * rect.height * (1 + 1e-12) + 1e-12
    for p in points:
        if vertical_distance(chart, p, rect, slack)[0] > slack:
            return False
    return True


def _hull_bounds(A, B, offset):
    ax0, ax1, ay0, ay1 = A.bounds()
    bx0, bx1, by0, by1 = B.bounds()
    dx = A.center.x + offset[0] - B.center.x
    dy = A.center.y + offset[1] - B.center.y
    return min(ax0, bx0 + dx), max(ax1, bx1 + dx), min(ay0, by0 + dy), max(ay1, by1 + dy)


def _rect_in_chart(A, x0, x1, y0, y1):
    c = A.chart.move(A.center.poly, (A.center.x, A.center.y),
                     ((x0 + x1) / 2, (y0 + y1) / 2))
    if c is None:
        return None
    return develop(A.chart, c, x1 - x0, y1 - y0)


def hull_rect(A, B, offset):
    """Rectangle spanning A and B when B's center sits at A's center + ``offset``.

    Returns the developed rectangle in A's chart (possibly singular).
    """
    return _rect_in_chart(A, *_hull_bounds(A, B, offset))


def corridor_rects(A, B, offset, steps=8):
    """Immersed horizontal bands across the x-span of A and B.

    Bands run over the full x-range of the pair and over a grid of
    y-intervals around it, so every vertical line through A or B meets
    them; tall bands come first.
    """
    x0, x1, y0, y1 = _hull_bounds(A, B, offset)
    h = y1 - y0
    ys = np.linspace(y0 - h, y1 + h, 3 * steps + 1)
    spans = sorted(((ys[i], ys[j]) for i in range(len(ys)) for j in range(i + 1, len(ys))),
                   key=lambda s: s[0] - s[1])
    out = []
    for lo, hi in spans:
        R = _rect_in_chart(A, x0, x1, lo, hi)
        if R is not None and R.immersed:
            out.append(R)
    return out


def reach_witness(A, B, K, samples=5, offsets=()):
    """A rectangle from which every sampled point of A and B is K-visible.

    Candidates are A, B and, for each given center offset of B relative
    to A, the immersed rectangle spanning both.
    """
    chart = A.chart
    pts = A.grid(samples) + B.grid(samples)
    cands = [A, B]
    for off in offsets:
        R = hull_rect(A, B, off)
        if R is not None and R.immersed:
            cands.append(R)
    for R in sorted(cands, key=lambda r: -r.height):
        if _visible_all(chart, pts, R, K):
            return R
    for off in offsets:
        for R in corridor_rects(A, B, off):
            if _visible_all(chart, pts, R, K):
                return R
    return None


def k_reachable(surface, A, B, K, samples=5, offsets=()):
    """Whether squares A and B are K-reachable (symmetric by construction)."""
    if A is B:
        return True
    return reach_witness(A, B, K, samples, offsets) is not None or \
        reach_witness(B, A, K, samples, tuple((-o[0], -o[1]) for o in offsets)) is not None


# networks

@dataclass
class NetworkReport:
    squares: list
    kinds: list  # "central" or "edge" per square
    edges: list  # reachable pairs (i, j)
    connected: bool
    coverage: float
    samples: int
    uncovered: list
    witnesses: list
    triangle_classes: list
    shrunk: int
    l3: object
    K: float
    K_prime: float
    config: dict = field(default_factory=dict)

    def summary(self):
        return {
            "squares": len(self.squares),
            "central": self.kinds.count("central"),
            "edge": self.kinds.count("edge"),
            "graph_edges": len(self.edges),
            "connected": self.connected,
            "coverage": self.coverage,
            "samples": self.samples,
            "uncovered": len(self.uncovered),
            "shrunk_squares": self.shrunk,
            "triangles": {c: self.triangle_classes.count(c) for c in sorted(set(self.triangle_classes))},
            "l3": {"value": self.l3.value, "exact": self.l3.exact} if self.l3 is not None else None,
            "K": self.K,
            "K_prime": self.K_prime,
        }


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(n)})


def _square_at(chart, t, p, side):
    """Embedded square of side ``side`` at chart point p of triangle t, shrunk if needed."""
    c = chart.move(t, chart.tri.corners(t).mean(axis=0), p)
    if c is None:
        return None, True
    sq = develop(chart, c, side, side, cls=EmbeddedSquare)
    if sq.embedded:
        return sq, False
    s = largest_embedded_side(chart, c, side)
    if s <= 0:
        return None, True
    return develop(chart, c, s, s, cls=EmbeddedSquare), True


def _edge_square(chart, t, i, side):
    """Square containing the midpoint of edge (t, i), pushed off the edge if needed."""
    tri = chart.tri
    P = tri.corners(t)
    a, b = P[i], P[(i + 1) % 3]
    m = 0.5 * (a + b)
    e = (b - a) / float(np.hypot(*(b - a)))
    nrm = np.array([-e[1], e[0]])  # into triangle t
    reach = side / (2 * max(abs(nrm[0]), abs(nrm[1])))
    best = None
    for frac in np.linspace(0.0, 1.0, 21):
        for sgn in ((1,) if frac == 0 else (1, -1)):
            c = m + sgn * frac * reach * nrm
            if sgn > 0:
                cp = chart.move(t, m + 1e-9 * nrm, c)
            else:
                t2, i2 = (int(x) for x in tri.nbr[t, i])
                Q = tri.corners(t2)
                shift = Q[(i2 + 1) % 3] - a  # chart of t2 = chart of t + shift
                cp = chart.move(t2, m + shift - 1e-9 * nrm, c + shift)
            if cp is None:
                continue
            sq = develop(chart, cp, side, side, cls=EmbeddedSquare)
            if sq.embedded:
                return sq, False, sgn * frac * reach * nrm
            if best is None:
                best = (cp, sgn * frac * reach * nrm)
    if best is None:
        return None, True, None
    s = largest_embedded_side(chart, best[0], side)
    if s <= 0:
        return None, True, None
    return develop(chart, best[0], s, s, cls=EmbeddedSquare), True, best[1]


def coverage_witness(chart, point, small, eps, length):
    """Vertical sub-segment of length >= eps outside the small triangles.

    Searches the upward then downward segment of the given length from
    ``point``. Returns (orientation, start distance, run length) or None.
    """
    for orient in (1, -1):
        rec = cast_ray(chart.surface, point, length, (0.0, float(orient)))
        done, run_start, run = 0.0, None, 0.0
        for poly, xa, ya, xb, yb in rec.segments:
            ln = math.hypot(xb - xa, yb - ya)
            if small[int(poly)]:
                run_start, run = None, 0.0
            else:
                if run_start is None:
                    run_start = done
                run += ln
                if run >= eps:
                    return orient, run_start, run
            done += ln
    return None


def recheck_witness(chart, point, small, witness):
    """Independently re-cast a coverage witness and confirm its triangles."""
    orient, start, run = witness
    rec = cast_ray(chart.surface, point, start + run, (0.0, float(orient)))
    done = 0.0
    for poly, xa, ya, xb, yb in rec.segments:
        ln = math.hypot(xb - xa, yb - ya)
        if done + ln > start + 1e-12 and done < start + run - 1e-12 and small[int(poly)]:
            return False
        done += ln
    return not rec.hit and abs(done - (start + run)) < 1e-7 * max(1.0, done)


def build_network(surface, triangulation=None, eps=0.01, delta=0.2, K=1.0, samples=10000,
                  seed=0, K_prime=None, l3_cutoff=None, min_coverage=0.999, strict=True,
                  reach_samples=5):
    """Central and long-edge squares of side ``delta`` and their reachability graph.

    Hypotheses: no Delaunay edge length in [eps, delta) and a separating
    system bound l3 > 2 delta. Coverage of ``samples`` uniform points is
    checked with the vertical-segment harness: a vertical segment of
    length ``K_prime * eps`` must contain a sub-segment of length ``eps``
    outside the small triangles (points outside them count as covered).
    """
    tri = triangulation if triangulation is not None else dl.delaunay_triangulate(surface)
    classes = dl.classify(tri, eps, delta)
    if not classes.hypothesis_ok:
        raise HypothesisFailure("edge-length gap violated: intermediate Delaunay edges")
    cert = None
    if isinstance(surface, FlatSurface):
        try:
            cert = l3(surface, "euclid", cutoff=l3_cutoff or 2 * delta * 1.5)
        except GenusTooSmall:
            cert = None
        if cert is not None and cert.value <= 2 * delta:
            raise HypothesisFailure(f"l3 = {cert.value:.6g} is not above 2 delta")
    chart = Chart(tri)
    tcls = classes.triangles
    n_small = tcls.count(dl.SMALL)
    if K_prime is None:
        K_prime = 4 * n_small + 2
    squares, kinds = [], []
    shrunk = 0
    central = {}
    for t in range(tri.n_triangles):
        if tcls[t] == dl.SMALL:
            continue
        cc, _ = dl.circumcircle(tri.corners(t))
        sq, sh = _square_at(chart, t, cc, delta)
        shrunk += sh
        if sq is not None:
            central[t] = (len(squares), cc)
            squares.append(sq)
            kinds.append("central")
    edge_sq = {}
    for t, i in tri.edges():
        if classes.edges[(t, i)] != dl.LONG:
            continue
        sq, sh, off = _edge_square(chart, t, i, delta)
        shrunk += sh
        if sq is not None:
            P = tri.corners(t)
            m = 0.5 * (P[i] + P[(i + 1) % 3])
            edge_sq[(t, i)] = (len(squares), m + off)
            squares.append(sq)
            kinds.append("edge")
    # reachability along the construction: central square of a triangle and
    # the squares of its long edges, offsets measured in the triangle's chart
    edges = []
    for (t, i), (j, c_edge_t) in edge_sq.items():
        t2, i2 = (int(x) for x in tri.nbr[t, i])
        for tt, center_in_tt in ((t, c_edge_t), (t2, None)):
            if tt not in central:
                continue
            k, cc = central[tt]
            if center_in_tt is None:
                P = tri.corners(t)
                Q = tri.corners(t2)
                shift = Q[(i2 + 1) % 3] - P[i]
                center_in_tt = c_edge_t + shift
            off = tuple(center_in_tt - cc)
            if k_reachable(chart, squares[k], squares[j], K, reach_samples, (off,)):
                edges.append((k, j))
    connected = _components(len(squares), edges) == 1 if squares else False
    # coverage
    small = [c == dl.SMALL for c in tcls]
    rng = np.random.default_rng(seed)
    pts = sample_points(chart.surface, int(samples), rng)
    covered, uncovered, witnesses = 0, [], []
    for p in pts:
        if not small[p.poly]:
            covered += 1
            continue
        w = coverage_witness(chart, p, small, eps, K_prime * eps)
        if w is None:
            uncovered.append(p)
        else:
            covered += 1
            witnesses.append((p, w))
    coverage = covered / len(pts) if pts else 1.0
    rep = NetworkReport(squares, kinds, edges, connected, coverage, len(pts), uncovered,
                        witnesses, tcls, shrunk, cert, K, K_prime,
                        {"eps": eps, "delta": delta, "K": K, "samples": samples, "seed": seed})
    if strict:
        if not connected:
            err = NotConnected("reachability graph is not connected")
            err.report = rep
            raise err
        if coverage < min_coverage:
            err = CoverageGap(f"coverage {coverage:.4f} below {min_coverage}",
                              [(p.poly, p.x, p.y) for p in uncovered[:20]])
            err.report = rep
            raise err
    return rep
