"""Saddle connections: enumeration, the lengths l1 <= l2 <= l3, the
divergence profile d(t) = -2 log l1(X_t) and Diophantine diagnostics.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np

from . import kernels
from .delaunay import delaunay_triangulate, make_delaunay
from .errors import BudgetExceeded, FlatlineError, GenusTooSmall
from .surface import TWO_PI, Holonomy, apply_flow, norm, rotate_to_vertical

DEFAULT_BUDGET = 10 ** 7
ANGTOL = 1e-12


@dataclass(frozen=True)
class SaddleConnection:
    """A saddle connection in its canonical orientation (v > 0, or v = 0 and h > 0)."""

    start: int  # vertex class
    end: int
    holonomy: Holonomy
    length: float
    path: tuple = ()  # triangles crossed, in order
    root: tuple = (-1, -1)  # (triangle, corner) it leaves from

    @property
    def h(self):
        return self.holonomy.h

    @property
    def v(self):
        return self.holonomy.v


def triangulation_of(surface):
    """Delaunay triangulation of ``surface``, cached on the instance."""
    cache = surface.__dict__.setdefault("_cache", {})
    if "delaunay" not in cache:
        cache["delaunay"] = delaunay_triangulate(surface)
    return cache["delaunay"]


def _canonical(h, v, scale):
    tol = 1e-12 * max(1.0, scale)
    return v > tol or (abs(v) <= tol and h > 0)


def enumerate_on(tri, L, norm_kind="euclid", budget=DEFAULT_BUDGET, canonical=True):
    """Saddle connections of length at most ``L`` on a triangulation."""
    if L <= 0:
        return []
    radius = L * math.sqrt(2.0) if norm_kind == "sup" else L
    radius *= 1.0 + 1e-12
    found, parent, ntri, status = kernels.enumerate_wedges(
        tri.vec, tri.cls, tri.nbr, float(radius), int(budget), ANGTOL)
    if status:
        raise BudgetExceeded(f"more than {budget} unfolded triangles")
    scale = float(np.max(np.abs(tri.vec)))
    out = []
    for row in found:
        t, k, h, v, end, node = row
        t, k, node = int(t), int(k), int(node)
        if canonical and not _canonical(h, v, scale):
            continue
        ln = norm(h, v, norm_kind)
        if ln > L * (1 + 1e-12):
            continue
        path = []
        while node >= 0:
            path.append(int(ntri[node]))
            node = int(parent[node])
        out.append(SaddleConnection(int(tri.cls[t, k]), int(end), Holonomy(float(h), float(v)),
                                    ln, tuple(reversed(path)), (t, k)))
    out.sort(key=lambda c: (round(c.length, 12), c.h, c.v, c.start, c.end, c.root))
    return out


def enumerate_connections(surface, L, norm="euclid", budget=DEFAULT_BUDGET):
    """All saddle connections with ``norm(holonomy) <= L``, each once, sorted by length."""
    if not surface.singularities:
        raise FlatlineError("surface has no cone points")
    return enumerate_on(triangulation_of(surface), L, norm, budget)


def _shortest_edge(tri, norm_kind):
    return min(norm(*tri.vec[t, i], norm_kind) for t in range(tri.n_triangles)
               for i in range(3))


def shortest_connections(tri, norm_kind="euclid", budget=DEFAULT_BUDGET):
    """All connections realizing the minimum length on a triangulation."""
    # every edge is a saddle connection, so the shortest edge bounds l1
    bound = _shortest_edge(tri, norm_kind)
    L = bound / 2.0
    while True:
        cands = enumerate_on(tri, min(L, bound), norm_kind, budget)
        if cands:
            m = cands[0].length
            return [c for c in cands if c.length <= m * (1 + 1e-12)]
        L *= 2.0


def l1(surface, norm="euclid"):
    """Length of the shortest saddle connection."""
    return shortest_connections(triangulation_of(surface), norm)[0].length


# closed curves and separating systems

@dataclass
class LengthBound:
    value: float
    exact: bool
    witness: tuple = ()


def l2(surface, norm="euclid", cutoff=2.0):
    """Shortest closed curve that bounds no disk, certified below ``cutoff``.

    Candidates are saddle connection loops and pairs of distinct
    connections between two cone points (neither bounds a disk, by
    Gauss-Bonnet). Longer simple cycles have length at least 3 l1, so the
    result is certified whenever it does not exceed that; cylinder core
    curves have the length of a boundary cycle and are covered too.
    """
    conns = enumerate_connections(surface, cutoff, norm)
    best, wit = math.inf, ()
    for c in conns:
        if c.start == c.end and c.length < best:
            best, wit = c.length, (c,)
    for a, b in combinations(conns, 2):
        if {a.start, a.end} == {b.start, b.end} and a.start != a.end:
            if a.length + b.length < best:
                best, wit = a.length + b.length, (a, b)
    if best > cutoff:
        return LengthBound(cutoff, False)
    short = l1(surface, norm)
    exact = surface.n_classes <= 2 or best <= 3 * short * (1 + 1e-12)
    return LengthBound(best, exact, wit)


def l3(surface, norm="euclid", cutoff=2.0, max_subset=3):
    """Shortest separating system, certified below ``cutoff``.

    Brute force over sets of at most ``max_subset`` pairwise disjoint
    connections of total length at most ``cutoff``; a set separates when
    at least two complementary components are not disks.
    """
    if surface.genus < 2:
        raise GenusTooSmall("separating systems need genus at least 2")
    tri = triangulation_of(surface)
    conns = enumerate_on(tri, cutoff, norm)
    traces = [trace_connection(tri, c) for c in conns]
    best, wit = math.inf, ()
    idx = range(len(conns))
    for k in range(1, max_subset + 1):
        for sub in combinations(idx, k):
            total = sum(conns[j].length for j in sub)
            if total > cutoff * (1 + 1e-12) or total >= best:
                continue
            if not _pairwise_disjoint([traces[j] for j in sub]):
                continue
            comps = complement_components(tri, [traces[j] for j in sub])
            if sum(1 for c in comps if c["euler"] != 1) >= 2:
                best, wit = total, tuple(conns[j] for j in sub)
    if best > cutoff:
        return LengthBound(cutoff, False)
    short = conns[0].length if conns else cutoff
    exact = best <= (max_subset + 1) * short * (1 + 1e-12)
    return LengthBound(best, exact, wit)


# tracing connections through triangles

@dataclass
class Trace:
    """A connection cut into chords of triangles.

    ``chords`` holds (triangle, p_in, p_out) with perimeter keys
    (s, sub): edge points have s = edge + u and sub = 0, corner points have
    s = corner and sub in (0, 1) ordering chords around the corner.
    ``edge`` is set instead when the connection is a triangulation edge.
    """

    chords: list = field(default_factory=list)
    edge: tuple = None


def _corner_key(tri, t, k, d):
    """Perimeter key of a chord leaving corner k of t in direction d."""
    a = tri.vec[t, k]
    alpha = tri.angle(t, k)
    phi = math.atan2(a[0] * d[1] - a[1] * d[0], a[0] * d[0] + a[1] * d[1])
    if phi < 0:
        phi += TWO_PI
    return (float(k), 1.0 - phi / alpha)


def trace_connection(tri, conn):
    """Chords of ``conn`` in the triangles it crosses."""
    t, k = conn.root
    d = np.array([conn.h, conn.v])
    if len(conn.path) == 1:
        # found as the first edge of its root sector
        return Trace(edge=(t, k))
    chords = []
    origin = tri.corners(t)[k]
    p_in = _corner_key(tri, t, k, d)
    # walk triangle by triangle
    cur = t
    base = tri.corners(t) - origin  # corners of cur relative to the start
    total = float(np.hypot(*d))
    u_hat = d / total
    travelled = 0.0
    entry = None
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
            raise FlatlineError("lost while tracing a connection")
        s, j, u = best
        if s >= total * (1 - 1e-9):
            # reached the end cone point at a corner of cur
            ends = [m for m in range(3) if np.allclose(base[m], d, atol=1e-7 * max(1, total))]
            if not ends:
                raise FlatlineError("connection does not end at a corner")
            m = ends[0]
            key_out = _corner_key(tri, cur, m, -d)
            chords.append((cur, p_in, key_out))
            return Trace(chords=chords)
        chords.append((cur, p_in, (j + u, 0.0)))
        t2, j2 = (int(x) for x in tri.nbr[cur, j])
        # develop t2 so that its edge j2 matches edge j of cur
        start = base[(j + 1) % 3]
        c2 = np.zeros((3, 2))
        c2[j2] = start
        c2[(j2 + 1) % 3] = start + tri.vec[t2, j2]
        c2[(j2 + 2) % 3] = c2[(j2 + 1) % 3] + tri.vec[t2, (j2 + 1) % 3]
        base = c2
        cur, entry = t2, j2
        travelled = s
        p_in = (j2 + (1.0 - u), 0.0)
    raise FlatlineError("connection trace did not terminate")


def _interleave(a, b, c, d):
    """Whether chord (c, d) crosses chord (a, b) strictly."""
    lo, hi = min(a, b), max(a, b)
    return (lo < c < hi) != (lo < d < hi) and c not in (a, b) and d not in (a, b)


def _pairwise_disjoint(traces):
    edges = set()
    for tr in traces:
        if tr.edge is not None:
            e = tr.edge
            if e in edges:
                return False
            edges.add(e)
    by_tri = {}
    for n, tr in enumerate(traces):
        for t, p, q in tr.chords:
            by_tri.setdefault(t, []).append((n, p, q))
    return _chords_ok(by_tri, edges, traces)


def _edge_pair(tri, t, i):
    o = (int(tri.nbr[t, i, 0]), int(tri.nbr[t, i, 1]))
    return (t, i), o


def _chords_ok(by_tri, edge_set, traces):
    for t, chords in by_tri.items():
        for x in range(len(chords)):
            for y in range(x + 1, len(chords)):
                n1, p1, q1 = chords[x]
                n2, p2, q2 = chords[y]
                if n1 == n2:
                    continue
                if p1 in (p2, q2) or q1 in (p2, q2):
                    return False
                if _interleave(p1, q1, p2, q2):
                    return False
    return True


def complement_components(tri, traces):
    """Components of the surface cut along the traced connections.

    Returns one dict per component with its area-free Euler characteristic
    ``euler`` computed by Gauss-Bonnet from the boundary corner angles.
    """
    nt = tri.n_triangles
    gamma_edges = set()
    for tr in traces:
        if tr.edge is not None:
            a, b = _edge_pair(tri, *tr.edge)
            gamma_edges.add(a)
            gamma_edges.add(b)
    pts = [[] for _ in range(nt)]  # perimeter keys per triangle
    chords = [[] for _ in range(nt)]
    for tr in traces:
        for t, p, q in tr.chords:
            pts[t].extend([p, q])
            chords[t].append((p, q))
    offs, order = [], []
    total = 0
    for t in range(nt):
        srt = sorted(set(pts[t]))
        order.append(srt)
        offs.append(total)
        total += max(1, len(srt))
    parent = list(range(total))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    def arc_at(t, key):
        # arc containing the perimeter location ``key``: after the last point < key
        srt = order[t]
        if not srt:
            return offs[t]
        m = len(srt)
        idx = -1
        for n, p in enumerate(srt):
            if p < key:
                idx = n
        return offs[t] + (idx % m)

    for t in range(nt):
        srt = order[t]
        m = len(srt)
        pos = {p: n for n, p in enumerate(srt)}
        for p, q in chords[t]:
            a, b = pos[p], pos[q]
            union(offs[t] + a, offs[t] + (b - 1) % m)
            union(offs[t] + (a - 1) % m, offs[t] + b)
    # across edges
    for t in range(nt):
        for j in range(3):
            if (t, j) in gamma_edges:
                continue
            t2, j2 = (int(x) for x in tri.nbr[t, j])
            cuts = sorted([p[0] - j for p in order[t] if p[1] == 0.0 and j < p[0] < j + 1])
            bounds = [0.0] + cuts + [1.0]
            for u0, u1 in zip(bounds[:-1], bounds[1:]):
                mid = 0.5 * (u0 + u1)
                union(arc_at(t, (j + mid, 0.0)), arc_at(t2, (j2 + 1.0 - mid, 0.0)))
    # corner pieces: (arc, cone class, angle)
    pieces = []
    sector_starts = []  # (arc, cone class) for the piece CCW of each cut end
    for t in range(nt):
        for k in range(3):
            alpha = tri.angle(t, k)
            subs = sorted(p[1] for p in order[t] if p[0] == float(k) and p[1] > 0.0)
            bnd = [0.0] + subs + [1.0]
            cone = int(tri.cls[t, k])
            for b0, b1 in zip(bnd[:-1], bnd[1:]):
                pieces.append((arc_at(t, (float(k), 0.5 * (b0 + b1))), cone, alpha * (b1 - b0)))
            for n, sb in enumerate(subs):
                b0 = bnd[n]
                sector_starts.append((arc_at(t, (float(k), 0.5 * (b0 + sb))), cone))
            if (t, k) in gamma_edges:
                sector_starts.append((arc_at(t, (float(k), 0.5 * (bnd[-2] + 1.0))), cone))
    on_gamma = {c for _, c in sector_starts}
    comps = {}
    for arc, cone, ang in pieces:
        r = find(arc)
        d = comps.setdefault(r, {"angle": 0.0, "sectors": 0, "interior": set()})
        d["angle"] += ang
        if cone not in on_gamma:
            d["interior"].add(cone)
    for arc, cone in sector_starts:
        comps[find(arc)]["sectors"] += 1
    out = []
    for r, d in sorted(comps.items()):
        # 2 pi chi = sum over interior cones (2 pi) + sum over sectors (pi) - angles
        twopi_chi = TWO_PI * len(d["interior"]) + math.pi * d["sectors"] - d["angle"]
        out.append({"euler": int(round(twopi_chi / TWO_PI)), "sectors": d["sectors"],
                    "interior_cones": sorted(d["interior"])})
    return out


# divergence profile

@dataclass
class DivergenceProfile:
    times: np.ndarray
    l1: np.ndarray
    d: np.ndarray
    realizers: list  # holonomy on the rotated unflowed surface, per grid time
    breakpoints: list = field(default_factory=list)  # (t*, SaddleConnection-like, l1 at t*)
    norm: str = "sup"

    def log_l1(self):
        return np.log(self.l1)

    def to_csv(self):
        rows = ["t,l1,d,realizer_h,realizer_v"]
        for t, a, b, (h, v) in zip(self.times, self.l1, self.d, self.realizers):
            rows.append(f"{t:.12g},{a:.12g},{b:.12g},{h:.12g},{v:.12g}")
        return "\n".join(rows) + "\n"


def flowed_length(h, v, t, norm_kind="sup"):
    return norm(math.exp(t / 2) * h, math.exp(-t / 2) * v, norm_kind)


def bottom_time(h, v):
    """Time at which e^{t/2}|h| = e^{-t/2}|v|: the minimum of the sup length."""
    return math.log(abs(v) / abs(h))


def divergence_profile(surface, theta, t_range, step, norm="sup", budget=DEFAULT_BUDGET):
    """Sample l1(X_t) and d(t) along the geodesic of direction ``theta``.

    The Delaunay triangulation is carried along the flow and re-flipped at
    each grid time, and every connection of minimal length there is
    pulled back to the unflowed surface. Breakpoints are the local minima
    of l1: the bottoms of realizing connections, where e^{t/2}|h| =
    e^{-t/2}|v|.
    """
    t0, t1 = float(t_range[0]), float(t_range[1])
    X = rotate_to_vertical(surface, theta)
    times = np.arange(t0, t1 + 0.5 * step, step)
    tri = delaunay_triangulate(apply_flow(X, times[0]))
    cur = times[0]
    vals, reals, seen = [], [], {}
    for t in times:
        if t != cur:
            f = np.array([math.exp((t - cur) / 2), math.exp(-(t - cur) / 2)])
            tri.vec *= f
            tri.pos *= f
            make_delaunay(tri)
            cur = t
        # candidates slightly above the minimum guard the grid neighbourhood
        short = shortest_connections(tri, norm, budget)
        c = short[0]
        h0, v0 = c.h * math.exp(-t / 2), c.v * math.exp(t / 2)
        vals.append(c.length)
        reals.append((h0, v0))
        for s in short:
            key = (round(s.h * math.exp(-t / 2), 9), round(s.v * math.exp(t / 2), 9))
            seen.setdefault(key, (s.h * math.exp(-t / 2), s.v * math.exp(t / 2)))
    l1v = np.array(vals)
    prof = DivergenceProfile(times, l1v, -2.0 * np.log(l1v), reals, [], norm)
    prof.breakpoints = _breakpoints(prof, list(seen.values()))
    return prof


def envelope(vectors, t, norm_kind="sup"):
    """min over holonomies of their flowed length at time t."""
    return min(flowed_length(h, v, t, norm_kind) for h, v in vectors)


def _breakpoints(prof, vectors):
    """Local minima of l1 between grid samples, refined to exact bottoms."""
    out = []
    if prof.norm != "sup":
        return out
    lo, hi = prof.times[0], prof.times[-1]
    for h, v in sorted(set(vectors)):
        if h == 0 or v == 0:
            continue
        ts = bottom_time(h, v)
        if not (lo < ts < hi):
            continue
        val = math.sqrt(abs(h * v))
        # it is a breakpoint only if this vector is shortest at its bottom
        if val <= envelope(vectors, ts, "sup") * (1 + 1e-12):
            out.append((ts, (h, v), val))
    out.sort()
    return out


# Diophantine diagnostics

@dataclass
class DiophantineReport:
    eps: float
    v_bound: float
    c_best: float
    h0_best: float
    minimizer: tuple
    violations: list


def diophantine_check(surface, theta, eps, v_bound, h0=None, budget=DEFAULT_BUDGET):
    """Best c' with h(g) > c' / (v(g) (log v(g))^eps) over enumerated connections.

    Connections are taken on the surface rotated so that ``theta`` is
    vertical, with e < v(g) <= v_bound and h(g) < h0 (default: all).
    A connection with h = 0 gives c' = 0 and is reported as a violation.
    """
    if eps <= 0 or v_bound <= math.e:
        raise ValueError("need eps > 0 and v_bound > e")
    X = rotate_to_vertical(surface, theta)
    conns = _thin_connections(X, v_bound, h0 if h0 is not None else 1.0, budget)
    c_best, arg, viol = math.inf, None, []
    for h, v in conns:
        h, v = abs(h), abs(v)
        if v <= math.e or v > v_bound:
            continue
        if h0 is not None and h >= h0:
            continue
        val = h * v * math.log(v) ** eps
        if h <= 1e-12 * v:
            viol.append((h, v))
            val = 0.0
        if val < c_best:
            c_best, arg = val, (h, v)
    if arg is None:
        c_best = math.inf
    return DiophantineReport(eps, v_bound, c_best, h0 if h0 is not None else math.inf,
                             arg, viol)


def _thin_connections(X, v_bound, h_max, budget):
    """Holonomies with |v| <= v_bound and |h| <= h_max.

    Flows to the time where such vectors have bounded sup length, so that
    the wedge enumeration stays small.
    """
    t = max(0.0, math.log(v_bound / h_max))
    Y = apply_flow(X, t)
    L = math.exp(-t / 2) * v_bound
    L = max(L, math.exp(t / 2) * h_max)
    tri = delaunay_triangulate(Y)
    out = []
    for c in enumerate_on(tri, L, "sup", budget):
        out.append((c.h * math.exp(-t / 2), c.v * math.exp(t / 2)))
    return out
