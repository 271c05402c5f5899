"""Translation surfaces as glued planar polygons.

A surface is a list of counterclockwise polygons together with a perfect
matching of their edges by translations. Edge ``i`` of a polygon runs from
vertex ``i`` to vertex ``i + 1``. Glued edges carry opposite vectors.

All incidence predicates use the absolute tolerance :data:`TOL`.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import (BadConeAngle, Disconnected, FlatlineError, GluingMismatch,
                     SingularityHit, ZeroDirection)

TOL = 1e-9
TWO_PI = 2.0 * math.pi


def norm(h, v, kind="euclid"):
    """Length of the vector (h, v) in the ``euclid`` or ``sup`` norm."""
    if kind == "euclid":
        return math.hypot(h, v)
    if kind == "sup":
        return max(abs(h), abs(v))
    raise ValueError(f"unknown norm {kind!r}")


@dataclass(frozen=True)
class Holonomy:
    h: float
    v: float

    def length(self, kind="euclid"):
        return norm(self.h, self.v, kind)

    def flowed(self, t):
        return Holonomy(math.exp(t / 2) * self.h, math.exp(-t / 2) * self.v)


@dataclass(frozen=True)
class ConePoint:
    """A vertex class with its total angle."""

    vertex_class: int
    angle: float
    location: tuple  # (polygon, vertex) of one representative

    @property
    def order(self):
        return int(round(self.angle / TWO_PI))

    @property
    def is_marked(self):
        return self.order == 1


@dataclass(frozen=True)
class SurfacePoint:
    """A point given in the coordinates of one polygon."""

    poly: int
    x: float
    y: float


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _signed_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(a, b, c, d):
    """Proper or touching intersection of closed segments ab and cd."""
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    if (o1 > TOL and o2 < -TOL or o1 < -TOL and o2 > TOL) and \
            (o3 > TOL and o4 < -TOL or o3 < -TOL and o4 > TOL):
        return True
    return False


def _is_simple(p):
    n = len(p)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]):
                return False
    return True


def _interior_angle(p, i):
    n = len(p)
    a = p[(i + 1) % n] - p[i]
    b = p[(i - 1) % n] - p[i]
    ang = math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])
    if ang <= 0:
        ang += TWO_PI
    return ang


class FlatSurface:
    """Validated, immutable translation surface.

    Build instances with :func:`validate_surface`.
    """

    def __init__(self, polygons, gluings):
        polys = []
        for p in polygons:
            arr = np.array(p, dtype=np.float64).reshape(-1, 2)
            arr.setflags(write=False)
            polys.append(arr)
        self.polygons = tuple(polys)
        self.gluings = tuple(sorted(
            (tuple(map(int, a)), tuple(map(int, b))) for a, b in gluings))
        self._build()

    # construction
    def _build(self):
        polys = self.polygons
        if not polys:
            raise FlatlineError("surface has no polygons")
        sizes = [len(p) for p in polys]
        for k, p in enumerate(polys):
            if len(p) < 3:
                raise FlatlineError(f"polygon {k} has fewer than 3 vertices")
            if _signed_area(p) <= TOL:
                raise FlatlineError(f"polygon {k} is not counterclockwise")
            if not _is_simple(p):
                raise FlatlineError(f"polygon {k} is not simple")
        pstart = np.zeros(len(polys) + 1, dtype=np.int64)
        pstart[1:] = np.cumsum(sizes)
        nv = int(pstart[-1])
        verts = np.concatenate(polys).astype(np.float64)
        pofv = np.repeat(np.arange(len(polys), dtype=np.int64), sizes)
        glue = np.full(nv, -1, dtype=np.int64)

        def gid(pe):
            pi, ei = pe
            if not (0 <= pi < len(polys) and 0 <= ei < sizes[pi]):
                raise GluingMismatch(f"edge {pe} does not exist")
            return int(pstart[pi] + ei)

        for a, b in self.gluings:
            ga, gb = gid(a), gid(b)
            if ga == gb or glue[ga] >= 0 or glue[gb] >= 0:
                raise GluingMismatch(f"edge glued twice in {a}<->{b}")
            glue[ga], glue[gb] = gb, ga
        if np.any(glue < 0):
            missing = int(np.flatnonzero(glue < 0)[0])
            raise GluingMismatch(f"edge {self.edge_of(missing, pofv, pstart)} is unglued")

        def nxt(g):
            p = pofv[g]
            return int(pstart[p] + (g - pstart[p] + 1) % sizes[p])

        evec = np.array([verts[nxt(g)] - verts[g] for g in range(nv)])
        for g in range(nv):
            if np.max(np.abs(evec[g] + evec[glue[g]])) > TOL:
                raise GluingMismatch(
                    f"edges {self.edge_of(g, pofv, pstart)} and "
                    f"{self.edge_of(int(glue[g]), pofv, pstart)} are not opposite")

        uf = _UnionFind(len(polys))
        for g in range(nv):
            uf.union(int(pofv[g]), int(pofv[glue[g]]))
        if len({uf.find(k) for k in range(len(polys))}) > 1:
            raise Disconnected("polygons do not form a connected surface")

        vf = _UnionFind(nv)
        for g in range(nv):
            # start of g is the end of its partner, and vice versa
            g2 = int(glue[g])
            vf.union(g, nxt(g2))
        roots = sorted({vf.find(g) for g in range(nv)})
        rid = {r: k for k, r in enumerate(roots)}
        vclass = np.array([rid[vf.find(g)] for g in range(nv)], dtype=np.int64)
        angles = np.zeros(len(roots))
        for g in range(nv):
            p = int(pofv[g])
            angles[vclass[g]] += _interior_angle(polys[p], g - int(pstart[p]))
        cones = []
        for c, ang in enumerate(angles):
            ratio = ang / TWO_PI
            if abs(ratio - round(ratio)) > TOL or round(ratio) < 1:
                raise BadConeAngle(f"vertex class {c} has angle {ang!r}")
            rep = int(np.flatnonzero(vclass == c)[0])
            cones.append(ConePoint(c, float(round(ratio) * TWO_PI),
                                   (int(pofv[rep]), rep - int(pstart[pofv[rep]]))))

        n_edges = nv // 2
        self.euler = len(roots) - n_edges + len(polys)
        if self.euler % 2:
            raise FlatlineError("odd Euler characteristic")
        self.genus = (2 - self.euler) // 2
        excess = sum(c.angle - TWO_PI for c in cones)
        if abs(excess - TWO_PI * (2 * self.genus - 2)) > 1e-6:
            raise BadConeAngle("Gauss-Bonnet check failed")

        for arr in (verts, pstart, pofv, glue, vclass, evec):
            arr.setflags(write=False)
        self.verts, self.pstart, self.pofv = verts, pstart, pofv
        self.glue, self.vclass, self.edge_vectors = glue, vclass, evec
        self.singularities = tuple(cones)
        self.area = float(sum(_signed_area(p) for p in polys))

    @staticmethod
    def edge_of(g, pofv, pstart):
        p = int(pofv[g])
        return (p, int(g - pstart[p]))

    # accessors
    @property
    def n_classes(self):
        return len(self.singularities)

    def vertex_class(self, poly, vertex):
        return int(self.vclass[self.pstart[poly] + vertex])

    def to_dict(self):
        return {
            "polygons": [p.tolist() for p in self.polygons],
            "gluings": [[list(a), list(b)] for a, b in self.gluings],
        }

    def transformed(self, mat):
        """New surface with every coordinate mapped by the 2x2 matrix."""
        mat = np.asarray(mat, dtype=np.float64)
        if np.linalg.det(mat) <= 0:
            raise FlatlineError("transformation must preserve orientation")
        return FlatSurface([p @ mat.T for p in self.polygons], self.gluings)

    def contains(self, point, tol=TOL):
        """Whether ``point`` lies in the closed polygon it names."""
        return point_in_polygon(self.polygons[point.poly], point.x, point.y, tol)

    def __repr__(self):
        return (f"FlatSurface(polygons={len(self.polygons)}, genus={self.genus}, "
                f"cones={[round(c.angle / TWO_PI) for c in self.singularities]}, "
                f"area={self.area:.6g})")


def point_in_polygon(p, x, y, tol=TOL):
    """Closed point-in-polygon test by winding number with edge tolerance."""
    n = len(p)
    wind = 0
    for i in range(n):
        ax, ay = p[i]
        bx, by = p[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        el = math.hypot(ex, ey)
        cr = ex * (y - ay) - ey * (x - ax)
        dot = ex * (x - ax) + ey * (y - ay)
        if abs(cr) <= tol * el and -tol * el <= dot <= el * el + tol * el:
            return True
        if ay <= y:
            if by > y and cr > 0:
                wind += 1
        elif by <= y and cr < 0:
            wind -= 1
    return wind != 0


def validate_surface(desc):
    """Parse and check a surface description.

    Parameters
    ----------
    desc : dict or FlatSurface
        Mapping with ``polygons`` (lists of counterclockwise vertex pairs),
        ``gluings`` (pairs ``[[pi, ei], [pj, ej]]``) and optional
        ``normalize_area``.

    Returns
    -------
    FlatSurface
    """
    if isinstance(desc, FlatSurface):
        return desc
    try:
        polygons = desc["polygons"]
        gluings = desc["gluings"]
    except (KeyError, TypeError) as exc:
        raise FlatlineError(f"bad surface description: {exc}") from None
    surf = FlatSurface(polygons, [(tuple(a), tuple(b)) for a, b in gluings])
    if desc.get("normalize_area", False):
        surf = normalize_area(surf)
    return surf


def normalize_area(surface):
    """Rescale to area one."""
    s = 1.0 / math.sqrt(surface.area)
    return surface.transformed([[s, 0.0], [0.0, s]])


def flow_matrix(t):
    return np.array([[math.exp(t / 2), 0.0], [0.0, math.exp(-t / 2)]])


def apply_flow(surface, t):
    """Teichmueller flow: (x, y) -> (e^{t/2} x, e^{-t/2} y)."""
    if t == 0:
        return surface
    return surface.transformed(flow_matrix(t))


def direction_vector(theta):
    """Normalize a direction given as a vector or as a slope dy/dx.

    ``"vertical"`` and ``float('inf')`` give (0, 1). Strings ``"a/b"`` are
    read as the slope a/b, i.e. the vector (b, a).
    """
    if isinstance(theta, str):
        s = theta.strip().lower()
        if s in ("vertical", "inf"):
            return (0.0, 1.0)
        if s == "horizontal":
            return (1.0, 0.0)
        if "/" in s:
            a, b = s.split("/")
            return _unit(float(b), float(a))
        return direction_vector(float(s))
    if np.ndim(theta) == 0:
        if math.isinf(theta):
            return (0.0, 1.0)
        return _unit(1.0, float(theta))
    x, y = (float(c) for c in theta)
    return _unit(x, y)


def _unit(x, y):
    r = math.hypot(x, y)
    if r == 0 or not math.isfinite(r):
        raise ZeroDirection("direction must be a nonzero finite vector")
    return (x / r, y / r)


def rotation_to_vertical(theta):
    """Rotation matrix sending the direction ``theta`` to (0, 1)."""
    ux, uy = direction_vector(theta)
    return np.array([[uy, -ux], [ux, uy]])


def rotate_to_vertical(surface, theta):
    """Rotate the surface so that ``theta`` becomes the vertical direction."""
    mat = rotation_to_vertical(theta)
    if np.array_equal(mat, np.eye(2)):
        return surface
    return surface.transformed(mat)


@dataclass
class CrossingRecord:
    """Result of :func:`cast_vertical_ray`."""

    segments: list  # (polygon, x0, y0, x1, y1)
    length: float
    singularity: int = -1  # vertex class hit, -1 if none
    hit_at: float = math.nan
    perturbed: bool = False
    end: SurfacePoint = None

    @property
    def polygons(self):
        return [int(s[0]) for s in self.segments]

    @property
    def hit(self):
        return self.singularity >= 0


def _on_parallel_edge(surface, point, dx, dy):
    p = surface.polygons[point.poly]
    n = len(p)
    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        e = b - a
        el = math.hypot(*e)
        if abs(e[0] * dy - e[1] * dx) > 1e-12 * el:
            continue
        cr = e[0] * (point.y - a[1]) - e[1] * (point.x - a[0])
        if abs(cr) <= 1e-12 * el:
            return True
    return False


def _across_edge(surface, point, tol):
    """The same point seen from the polygon glued along the edge it lies on."""
    p0 = int(surface.pstart[point.poly])
    n = int(surface.pstart[point.poly + 1]) - p0
    best, arg = math.inf, None
    for i in range(n):
        a = surface.verts[p0 + i]
        b = surface.verts[p0 + (i + 1) % n]
        e = b - a
        el2 = float(e @ e)
        u = float((point.x - a[0]) * e[0] + (point.y - a[1]) * e[1]) / el2
        if not -tol <= u <= 1 + tol:
            continue
        d = abs(float(e[0] * (point.y - a[1]) - e[1] * (point.x - a[0]))) / math.sqrt(el2)
        if d < best:
            best, arg = d, (p0 + i, u)
    if arg is None or best > 1e3 * tol:
        return None
    g, u = arg
    h = int(surface.glue[g])
    q = int(surface.pofv[h])
    q0 = int(surface.pstart[q])
    m = int(surface.pstart[q + 1]) - q0
    a = surface.verts[h]
    b = surface.verts[q0 + (h - q0 + 1) % m]
    x, y = a + (1.0 - u) * (b - a)
    return SurfacePoint(q, float(x), float(y))


def cast_ray(surface, point, length, direction, max_steps=None, tol=TOL):
    """Straight ray of unit direction ``direction`` from ``point``."""
    dx, dy = direction_vector(direction)
    perturbed = False
    if _on_parallel_edge(surface, point, dx, dy):
        # tolerance-ambiguous: nudge sideways, deterministically
        point = SurfacePoint(point.poly, point.x + 1e-12 * dy, point.y - 1e-12 * dx)
        perturbed = True
    if max_steps is None:
        max_steps = _step_budget(surface, length)
    status, nseg, segs, hit, travelled = kernels.cast_ray(
        surface.verts, surface.pstart, surface.pofv, surface.glue, surface.vclass,
        point.poly, point.x, point.y, dx, dy, float(length), int(max_steps), tol)
    if status == kernels.RAY_LOST and nseg == 0:
        # start on an edge facing away from the ray: restart across it
        other = _across_edge(surface, point, tol)
        if other is not None:
            point = other
            status, nseg, segs, hit, travelled = kernels.cast_ray(
                surface.verts, surface.pstart, surface.pofv, surface.glue, surface.vclass,
                point.poly, point.x, point.y, dx, dy, float(length), int(max_steps), tol)
    if status == kernels.RAY_LOST:
        raise FlatlineError(f"ray from {point} left its polygon")
    if status == kernels.RAY_BUDGET:
        raise FlatlineError("ray step budget exhausted")
    segments = [(int(s[0]), float(s[1]), float(s[2]), float(s[3]), float(s[4]))
                for s in segs[:nseg]]
    last = segments[-1]
    rec = CrossingRecord(segments, float(travelled), int(hit),
                         float(travelled) if hit >= 0 else math.nan, perturbed,
                         SurfacePoint(last[0], last[3], last[4]))
    return rec


def cast_vertical_ray(surface, point, length, orientation=+1, **kw):
    """Vertical geodesic segment from ``point``; ``orientation`` is +1 (up) or -1."""
    return cast_ray(surface, point, length, (0.0, 1.0 if orientation > 0 else -1.0), **kw)


def _step_budget(surface, length):
    # a straight segment crosses at most ~length / (min polygon width) edges
    widths = []
    for p in surface.polygons:
        span = p.max(axis=0) - p.min(axis=0)
        widths.append(max(min(span), 1e-6))
    h = min(widths)
    return int(min(4 * len(surface.verts) * (length / h + 2), 5e7)) + 64


@dataclass(frozen=True)
class Arc:
    """Straight arc on the surface: start point, unit direction, length."""

    start: SurfacePoint
    length: float
    direction: tuple = (1.0, 0.0)


def arc_pieces(surface, arc):
    """Split an arc into per-polygon pieces (polygon, x0, y0, x1, y1)."""
    if arc.length <= 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 4))
    rec = cast_ray(surface, arc.start, arc.length, arc.direction)
    if rec.hit:
        raise SingularityHit("arc runs into a cone point", rec.hit_at, rec.singularity)
    polys = np.array([s[0] for s in rec.segments], dtype=np.int64)
    segs = np.array([s[1:] for s in rec.segments], dtype=np.float64)
    return polys, segs


@dataclass(frozen=True)
class BirkhoffEstimate:
    start: SurfacePoint
    arc: Arc
    T: float
    crossings: int
    average: float


def birkhoff_average(surface, start, arc, T, pieces=None, direction=(0.0, 1.0)):
    """Crossings of ``arc`` by the upward vertical segment of length T.

    ``direction`` replaces the vertical by another unit flow direction,
    which is the same as rotating the surface first.

    Raises :class:`SingularityHit` carrying the partial length if the
    segment runs into a cone point.
    """
    if T <= 0:
        return BirkhoffEstimate(start, arc, float(T), 0, 0.0)
    if pieces is None:
        pieces = arc_pieces(surface, arc)
    apoly, aseg = pieces
    status, count, travelled, hit = kernels.birkhoff_count(
        surface.verts, surface.pstart, surface.pofv, surface.glue, surface.vclass,
        start.poly, start.x, start.y, float(direction[0]), float(direction[1]), float(T),
        apoly, aseg,
        _step_budget(surface, T), TOL)
    if status == kernels.RAY_SINGULAR:
        raise SingularityHit(f"vertical flow hits cone point {hit}", float(travelled), int(hit))
    if status != kernels.RAY_OK:
        raise FlatlineError("vertical flow could not be followed")
    return BirkhoffEstimate(start, arc, float(T), int(count), count / float(T))


def sample_points(surface, n, rng):
    """Uniform random points on the surface (area-weighted polygons)."""
    areas = np.array([_signed_area(p) for p in surface.polygons])
    which = rng.choice(len(areas), size=n, p=areas / areas.sum())
    out = []
    for k in which:
        p = surface.polygons[k]
        lo, hi = p.min(axis=0), p.max(axis=0)
        while True:
            x, y = rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1])
            if point_in_polygon(p, x, y, tol=0.0):
                out.append(SurfacePoint(int(k), float(x), float(y)))
                break
    return out


# standard examples

def square_torus():
    """Unit square with opposite sides glued, one marked point."""
    return validate_surface({
        "polygons": [[(0, 0), (1, 0), (1, 1), (0, 1)]],
        "gluings": [[[0, 0], [0, 2]], [[0, 1], [0, 3]]],
    })
