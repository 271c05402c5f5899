"""Geodesic triangulations of translation surfaces by their cone points.

A triangulation is stored triangle-wise. Triangle ``t`` has corners
``0, 1, 2`` in counterclockwise order, edge ``i`` runs from corner ``i`` to
corner ``i + 1`` with vector ``vec[t, i]``, and ``nbr[t, i] = (t2, i2)`` is
the edge glued to it (its vector is ``-vec[t, i]``).
"""

import math

import numpy as np

from .errors import FlatlineError
from .surface import TOL, FlatSurface


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def ear_clip(poly):
    """Triangulate a simple counterclockwise polygon.

    Ears are tried in order starting from vertex 1, so a strictly convex
    polygon comes out as the fan from vertex 0. Straight (angle pi)
    vertices are never used as ear tips, which avoids degenerate triangles.

    Returns a list of vertex index triples.
    """
    idx = list(range(len(poly)))
    out = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        found = False
        for k in range(1, n + 1):
            k %= n
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % n]
            pa, pb, pc = poly[a], poly[b], poly[c]
            if _cross(pb - pa, pc - pb) <= TOL:
                continue
            inside = False
            for j in idx:
                if j in (a, b, c):
                    continue
                q = poly[j]
                if (_cross(pb - pa, q - pa) >= -TOL and _cross(pc - pb, q - pb) >= -TOL
                        and _cross(pa - pc, q - pc) >= -TOL):
                    inside = True
                    break
            if inside:
                continue
            out.append((a, b, c))
            del idx[k]
            found = True
            break
        guard += 1
        if not found or guard > 10 * len(poly):
            raise FlatlineError("ear clipping failed on a degenerate polygon")
    a, b, c = idx
    if _cross(poly[b] - poly[a], poly[c] - poly[b]) <= TOL:
        raise FlatlineError("ear clipping left a degenerate triangle")
    out.append((a, b, c))
    return out


class Triangulation:
    """Mutable triangulation; flips act in place."""

    def __init__(self, vec, cls, nbr, pos):
        self.vec = np.array(vec, dtype=np.float64)
        self.cls = np.array(cls, dtype=np.int64)
        self.nbr = np.array(nbr, dtype=np.int64)
        self.pos = np.array(pos, dtype=np.float64)
        self.flips = 0

    @property
    def n_triangles(self):
        return len(self.vec)

    def copy(self):
        t = Triangulation(self.vec, self.cls, self.nbr, self.pos)
        t.flips = self.flips
        return t

    # geometry
    def corners(self, t):
        """Developed corner coordinates of triangle ``t`` in its chart."""
        p0 = self.pos[t]
        p1 = p0 + self.vec[t, 0]
        p2 = p1 + self.vec[t, 1]
        return np.array([p0, p1, p2])

    def area(self, t):
        return 0.5 * _cross(self.vec[t, 0], -self.vec[t, 2])

    def total_area(self):
        return float(sum(self.area(t) for t in range(self.n_triangles)))

    def angle(self, t, k):
        """Interior angle at corner ``k``."""
        a = self.vec[t, k]
        b = -self.vec[t, (k + 2) % 3]
        return math.atan2(_cross(a, b), float(np.dot(a, b)))

    def edge_length(self, t, i):
        return float(math.hypot(*self.vec[t, i]))

    def edges(self):
        """One (t, i) representative per undirected edge, canonical order."""
        out = []
        for t in range(self.n_triangles):
            for i in range(3):
                t2, i2 = self.nbr[t, i]
                if (t, i) <= (int(t2), int(i2)):
                    out.append((t, i))
        return out

    def check(self):
        """Consistency of the gluing data."""
        for t in range(self.n_triangles):
            if abs(float(np.sum(self.vec[t, :, 0]))) > 1e-7 or \
                    abs(float(np.sum(self.vec[t, :, 1]))) > 1e-7:
                raise FlatlineError(f"triangle {t} does not close")
            if self.area(t) <= 0:
                raise FlatlineError(f"triangle {t} is degenerate")
            for i in range(3):
                t2, i2 = self.nbr[t, i]
                if tuple(self.nbr[t2, i2]) != (t, i):
                    raise FlatlineError("adjacency is not an involution")
                if np.max(np.abs(self.vec[t, i] + self.vec[t2, i2])) > 1e-7:
                    raise FlatlineError("glued edges are not opposite")

    # local moves
    def opposite_angle_sum(self, t, i):
        t2, i2 = self.nbr[t, i]
        return self.angle(t, (i + 2) % 3) + self.angle(t2, (i2 + 2) % 3)

    def flip(self, t, i):
        """Flip edge ``i`` of triangle ``t``; returns the two triangles."""
        t2, i2 = (int(x) for x in self.nbr[t, i])
        if t2 == t:
            raise FlatlineError("cannot flip an edge glued to its own triangle")
        vec, cls, nbr = self.vec, self.cls, self.nbr
        # t: A=i, B=i+1, C=i+2; t2: B=i2, A=i2+1, D=i2+2
        j1, j2 = (i + 1) % 3, (i + 2) % 3
        k1, k2 = (i2 + 1) % 3, (i2 + 2) % 3
        e_bc, e_ca = vec[t, j1].copy(), vec[t, j2].copy()
        e_ad, e_db = vec[t2, k1].copy(), vec[t2, k2].copy()
        cA, cB, cC, cD = cls[t, i], cls[t, j1], cls[t, j2], cls[t2, k2]
        n_bc, n_ca = tuple(nbr[t, j1]), tuple(nbr[t, j2])
        n_ad, n_db = tuple(nbr[t2, k1]), tuple(nbr[t2, k2])
        # convexity of the quadrilateral A, D, B, C
        if _cross(e_ca, e_ad) <= 1e-15 or _cross(e_db, e_bc) <= 1e-15:
            raise FlatlineError("flip of a non-convex quadrilateral")
        posA = self.pos[t] + (vec[t, 0] if i >= 1 else 0) + (vec[t, 1] if i >= 2 else 0)
        posC = posA - e_ca
        e_dc = -e_ca - e_ad  # D -> C
        # new t = (C, A, D), new t2 = (D, B, C)
        vec[t] = [e_ca, e_ad, e_dc]
        cls[t] = [cC, cA, cD]
        vec[t2] = [e_db, e_bc, -e_dc]
        cls[t2] = [cD, cB, cC]
        self.pos[t] = posC
        self.pos[t2] = posA + e_ad
        links = {(t, 0): n_ca, (t, 1): n_ad, (t2, 0): n_db, (t2, 1): n_bc}
        # self-references among the four outer edges must be remapped
        remap = {(t, j2): (t, 0), (t2, k1): (t, 1), (t2, k2): (t2, 0), (t, j1): (t2, 1)}
        for key, target in links.items():
            target = remap.get(tuple(int(x) for x in target), tuple(int(x) for x in target))
            nbr[key] = target
            nbr[target] = key
        nbr[t, 2] = (t2, 2)
        nbr[t2, 2] = (t, 2)
        self.flips += 1
        return t, t2

    # conversion
    def to_surface(self):
        """The triangulated surface as a :class:`FlatSurface` of triangles."""
        polys = [self.corners(t) for t in range(self.n_triangles)]
        glu = [((t, i), (int(self.nbr[t, i, 0]), int(self.nbr[t, i, 1])))
               for t, i in self.edges()]
        return FlatSurface(polys, glu)

    def to_dict(self):
        return {
            "triangles": [self.corners(t).tolist() for t in range(self.n_triangles)],
            "classes": self.cls.tolist(),
            "adjacency": self.nbr.tolist(),
            "flips": self.flips,
        }


def from_surface(surface):
    """Triangulate each polygon by ear clipping and glue along the surface.

    Corner classes are the vertex classes of ``surface``.
    """
    vec, cls, nbr, pos, owner = [], [], [], [], []
    # (poly, edge) -> (triangle, edge) carrying that polygon edge
    carrier = {}
    for p, poly in enumerate(surface.polygons):
        n = len(poly)
        tris = ear_clip(poly)
        base = len(vec)
        diag = {}
        for k, (a, b, c) in enumerate(tris):
            t = base + k
            corners = (a, b, c)
            vec.append([poly[b] - poly[a], poly[c] - poly[b], poly[a] - poly[c]])
            cls.append([surface.vertex_class(p, v) for v in corners])
            nbr.append([[-1, -1]] * 3)
            pos.append(poly[a])
            owner.append(p)
            for i in range(3):
                u, w = corners[i], corners[(i + 1) % 3]
                if w == (u + 1) % n:
                    carrier[(p, u)] = (t, i)
                else:
                    diag[(u, w)] = (t, i)
        for (u, w), (t, i) in diag.items():
            t2, i2 = diag[(w, u)]
            nbr[t][i] = [t2, i2]
    for (pa, ea), (pb, eb) in surface.gluings:
        ta, ia = carrier[(pa, ea)]
        tb, ib = carrier[(pb, eb)]
        nbr[ta][ia] = [tb, ib]
        nbr[tb][ib] = [ta, ia]
    tri = Triangulation(vec, cls, nbr, pos)
    tri.check()
    # charts coincide with polygon coordinates until the first flip
    tri.poly_of = np.array(owner, dtype=np.int64)
    return tri
