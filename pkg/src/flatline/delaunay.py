"""Flat Delaunay triangulations by edge flips, with edge/triangle classes
and detection of wide cylinders crossed by long edges.
"""

from collections import deque
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import FlipBudgetExceeded
from .triangulation import Triangulation, from_surface

ANGLE_TOL = 1e-9


def is_locally_delaunay(tri, t, i, tol=ANGLE_TOL):
    """Opposite angles across edge (t, i) sum to at most pi + tol."""
    return tri.opposite_angle_sum(t, i) <= math.pi + tol


class PointCarrier:
    """Chart points of a triangulation carried along through edge flips.

    ``poly`` and ``xy`` hold triangle indices and chart coordinates; pass
    the carrier to :func:`make_delaunay` to keep them valid.
    """

    def __init__(self, poly, xy):
        self.poly = np.asarray(poly, dtype=np.int64).copy()
        self.xy = np.asarray(xy, dtype=np.float64).copy()

    def flip(self, tri, t, i):
        """Flip edge (t, i) of ``tri`` and relocate the affected points."""
        t2, i2 = (int(x) for x in tri.nbr[t, i])
        A_t = tri.corners(t)[i]
        A_t2 = tri.corners(t2)[(i2 + 1) % 3]
        in2 = self.poly == t2
        self.xy[in2] += A_t - A_t2
        self.poly[in2] = t
        a, b = tri.flip(t, i)
        # both new triangles live in the chart of the old t
        C, A, D = tri.corners(a)
        sel = np.flatnonzero(self.poly == a)
        e = D - C
        side = e[0] * (self.xy[sel, 1] - C[1]) - e[1] * (self.xy[sel, 0] - C[0])
        self.poly[sel[side > 0]] = b
        return a, b

    def recenter(self, old_pos, tri):
        self.xy += (tri.pos - old_pos)[self.poly]


def make_delaunay(tri, max_flips=10 ** 6, tol=ANGLE_TOL, carrier=None):
    """Flip edges of ``tri`` in place until every edge is locally Delaunay.

    Edges are examined in (triangle, index) order and re-queued after each
    flip, so the output is a deterministic function of the input. Edges
    whose opposite angles sum to pi within ``tol`` (co-circular quads) are
    left as they are. A :class:`PointCarrier` keeps its points located.
    """
    queue = deque(tri.edges())
    queued = set(queue)
    start = tri.flips
    while queue:
        t, i = queue.popleft()
        queued.discard((t, i))
        t2, i2 = (int(x) for x in tri.nbr[t, i])
        if (t2, i2) < (t, i):
            t, i, t2, i2 = t2, i2, t, i
        if is_locally_delaunay(tri, t, i, tol):
            continue
        if tri.flips - start >= max_flips:
            raise FlipBudgetExceeded(f"more than {max_flips} flips")
        a, b = tri.flip(t, i) if carrier is None else carrier.flip(tri, t, i)
        for tt in (a, b):
            for j in range(2):
                e = (tt, j)
                o = tuple(int(x) for x in tri.nbr[tt, j])
                key = min(e, o)
                if key not in queued:
                    queued.add(key)
                    queue.append(key)
    return tri


def delaunay_triangulate(surface, max_flips=10 ** 6):
    """Complete Delaunay triangulation of a surface by its cone points.

    Starts from the ear-clipped polygon decomposition and flips.
    """
    if isinstance(surface, Triangulation):
        tri = surface.copy()
    else:
        tri = from_surface(surface)
    return make_delaunay(tri, max_flips)


def circumcircle(p):
    """Center and radius of the circle through the rows of ``p`` (3 x 2)."""
    a, b, c = p
    bx, by = b - a
    cx, cy = c - a
    d = 2.0 * (bx * cy - by * cx)
    ux = (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d
    uy = (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d
    center = a + np.array([ux, uy])
    return center, math.hypot(ux, uy)


def _seg_dist(c, a, b):
    e = b - a
    ee = float(e @ e)
    s = 0.0 if ee == 0 else min(1.0, max(0.0, float((c - a) @ e) / ee))
    return float(np.hypot(*(a + s * e - c)))


def circumdisk_violations(tri, margin=1e-9, budget=200000):
    """Cone points strictly inside developed circumdisks.

    Each circumdisk is developed by unfolding triangles across edges that
    meet the open disk. Returns a list of (triangle, developed point,
    distance, radius) for every cone point closer than ``radius - margin``.
    """
    out = []
    for t in range(tri.n_triangles):
        pts = tri.corners(t)
        center, r = circumcircle(pts)
        lim = r - margin
        stack = []
        for j in range(3):
            a, b = pts[j], pts[(j + 1) % 3]
            if _seg_dist(center, a, b) < lim:
                stack.append((int(tri.nbr[t, j, 0]), int(tri.nbr[t, j, 1]), b, a))
        steps = 0
        while stack:
            steps += 1
            if steps > budget:
                out.append((t, None, math.nan, r))
                break
            tf, jf, a, b = stack.pop()
            # edge jf of tf runs a -> b
            k1, k2 = (jf + 1) % 3, (jf + 2) % 3
            c = b + tri.vec[tf, k1]
            dist = float(np.hypot(*(c - center)))
            if dist < lim:
                out.append((t, c.copy(), dist, r))
                continue
            if _seg_dist(center, b, c) < lim:
                stack.append((int(tri.nbr[tf, k1, 0]), int(tri.nbr[tf, k1, 1]), c, b))
            if _seg_dist(center, c, a) < lim:
                stack.append((int(tri.nbr[tf, k2, 0]), int(tri.nbr[tf, k2, 1]), a, c))
    return out


def expected_triangle_count(surface):
    """Triangles in any triangulation by the cone points: 2(V - chi)."""
    return 2 * (surface.n_classes - surface.euler)


# classification

SHORT, LONG, INTERMEDIATE = "short", "long", "intermediate"
SMALL, MEDIUM, LARGE, FLAGGED = "small", "medium", "large", "flagged"


@dataclass
class EdgeClasses:
    eps: float
    delta: float
    edges: dict  # (t, i) canonical -> class
    triangles: list  # per triangle class
    hypothesis_ok: bool
    lengths: dict = field(default_factory=dict)

    def edge_class(self, tri, t, i):
        o = tuple(int(x) for x in tri.nbr[t, i])
        return self.edges[min((t, i), o)]


def edge_class(length, eps, delta):
    if length < eps:
        return SHORT
    if length >= delta:
        return LONG
    return INTERMEDIATE


def classify_triangle(classes):
    """Class of a triangle from its three edge classes."""
    if INTERMEDIATE in classes:
        return FLAGGED
    n_short = sum(c == SHORT for c in classes)
    if n_short == 3:
        return SMALL
    if n_short == 1:
        return MEDIUM
    if n_short == 0:
        return LARGE
    # two short edges and one long edge cannot close up when 2 eps < delta
    return FLAGGED


def classify(tri, eps, delta):
    """Edge classes (short < eps, long >= delta) and triangle classes."""
    if not 2 * eps < delta:
        raise ValueError("classification needs 2*eps < delta")
    edges, lengths = {}, {}
    for t, i in tri.edges():
        ln = tri.edge_length(t, i)
        lengths[(t, i)] = ln
        edges[(t, i)] = edge_class(ln, eps, delta)
    ec = EdgeClasses(eps, delta, edges, [], True, lengths)
    for t in range(tri.n_triangles):
        tc = classify_triangle([ec.edge_class(tri, t, i) for i in range(3)])
        ec.triangles.append(tc)
    ec.hypothesis_ok = FLAGGED not in ec.triangles
    return ec


def large_triangle_report(tri, delta):
    """Worst area / delta^4 ratio among triangles with all edges >= delta.

    The expected lower bound is 1/12 on area-one surfaces; this is a
    measurement, not an assertion.
    """
    worst = math.inf
    count = 0
    for t in range(tri.n_triangles):
        if all(tri.edge_length(t, i) >= delta for i in range(3)):
            count += 1
            worst = min(worst, tri.area(t) / delta ** 4)
    return {"large_triangles": count, "worst_ratio": worst, "bound": 1.0 / 12.0,
            "violations": int(count > 0 and worst < 1.0 / 12.0)}


# cylinders

@dataclass(frozen=True)
class Cylinder:
    core_holonomy: tuple
    height: float
    circumference: float
    circumdisk_diameter: float = math.nan

    @property
    def modulus(self):
        return self.height / self.circumference


def _cross2(a, b):
    return float(a[0] * b[1] - a[1] * b[0])


def closed_leaf(tri, t, i, d, max_length, tol=1e-9):
    """Follow the leaf in unit direction ``d`` from the midpoint of edge (t, i).

    Returns (holonomy, height) when the leaf closes up at the midpoint
    before ``max_length`` without meeting a cone point, else None. The
    height is the width of the band of parallel closed leaves: every
    triangle meeting the open cylinder crosses each of its leaves, so the
    nearest developed vertices on either side of the leaf bound it.
    """
    d = np.asarray(d, dtype=np.float64)
    P = tri.corners(t)
    A, B = P[i], P[(i + 1) % 3]
    edge = B - A
    side = _cross2(edge, d)
    if abs(side) < tol * float(np.hypot(*edge)):
        return None
    if side < 0:
        # enter the triangle on the other side of the edge
        t, i = (int(x) for x in tri.nbr[t, i])
        P = tri.corners(t)
        A, B = P[i], P[(i + 1) % 3]
    p0 = 0.5 * (A + B)
    t0, i0 = t, i
    cur_t, entry, Q = t, i, P
    travelled = 0.0
    up, down = math.inf, math.inf
    for _ in range(100000):
        for k in range(3):
            s = _cross2(d, Q[k] - p0)
            if s > tol:
                up = min(up, s)
            elif s < -tol:
                down = min(down, -s)
            else:
                # a cone point on the leaf itself
                if float(np.dot(Q[k] - p0, d)) > tol:
                    return None
        # exit edge: the one (not the entry) that the leaf leaves through
        best = None
        for k in range(3):
            if k == entry:
                continue
            a, b = Q[k], Q[(k + 1) % 3]
            e = b - a
            den = _cross2(d, e)
            if abs(den) < 1e-15:
                continue
            u = _cross2(a - p0, d) / den
            s_ = _cross2(a - p0, e) / den
            if -tol <= u <= 1 + tol and s_ > 1e-12 and (best is None or s_ < best[1]):
                best = (k, s_, u)
        if best is None:
            return None
        k, s_, u = best
        travelled = s_
        if travelled > max_length:
            return None
        elen = float(np.hypot(*(Q[(k + 1) % 3] - Q[k])))
        if u * elen < tol or (1 - u) * elen < tol:
            return None
        t2, k2 = (int(x) for x in tri.nbr[cur_t, k])
        if (t2, k2) == (t0, i0) and abs(u - 0.5) * elen < 1e-7 * max(1.0, travelled):
            hol = travelled * d
            return (float(hol[0]), float(hol[1])), up + down
        # develop the neighbour so that its edge k2 lies on our edge k (reversed)
        a, b = Q[k], Q[(k + 1) % 3]
        R = np.empty((3, 2))
        R[k2] = b
        R[(k2 + 1) % 3] = b + tri.vec[t2, k2]
        R[(k2 + 2) % 3] = R[(k2 + 1) % 3] + tri.vec[t2, (k2 + 1) % 3]
        cur_t, entry, Q = t2, k2, R
    return None


def closed_geodesic_bands(tri, t, i, max_length):
    """Closed leaves through the midpoint of edge (t, i), one per direction.

    Candidate directions are those of saddle connections no longer than
    ``max_length``: a cylinder's boundary is made of saddle connections
    parallel to its core. Yields (holonomy, height, circumference).
    """
    from .connections import enumerate_on
    seen = []
    for c in enumerate_on(tri, max_length):
        ln = math.hypot(c.h, c.v)
        d = (c.h / ln, c.v / ln)
        if any(abs(_cross2(d, e)) < 1e-9 for e in seen):
            continue
        seen.append(d)
        res = closed_leaf(tri, t, i, d, max_length)
        if res is not None:
            hol, height = res
            yield hol, height, math.hypot(*hol)


def detect_cylinder(tri, t, i, scale=1.0, mu0=2.0):
    """Maximal cylinder crossed by the Delaunay edge (t, i), if wide enough.

    The core is a closed leaf through the edge midpoint whose direction is
    that of a saddle connection shorter than the circumdisk diameter ``d``
    of the triangles on either side of the edge. ``d`` is reported with the
    cylinder. Returns None for edges no longer than sqrt(2/pi) * scale or
    when no cylinder of modulus above ``mu0`` is crossed.
    """
    length = tri.edge_length(t, i)
    if length <= math.sqrt(2.0 / math.pi) * scale:
        return None
    t2, i2 = (int(x) for x in tri.nbr[t, i])
    diam = 0.0
    for tt in (t, t2):
        _, r = circumcircle(tri.corners(tt))
        diam = max(diam, 2 * r)
    best = None
    for hol, height, circ in closed_geodesic_bands(tri, t, i, diam):
        if height / circ > mu0 and (best is None or height / circ > best.modulus):
            best = Cylinder(hol, height, circ, diam)
    return best
