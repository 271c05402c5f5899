"""Hot loops over flat arrays.

Every function here is decorated with :func:`flatline._accel.njit` and
only uses scalar arithmetic and numpy arrays, so it runs unchanged with
or without numba.

Surface arrays (see :class:`flatline.surface.FlatSurface`):

verts : (N, 2) float64
    All polygon vertices, polygons concatenated.
pstart : (P + 1,) int64
    Offset of the first vertex of each polygon.
pofv : (N,) int64
    Polygon owning each vertex.
glue : (N,) int64
    Edge ``g`` runs from vertex ``g`` to the next vertex of its polygon;
    ``glue[g]`` is the edge it is identified with.
vclass : (N,) int64
    Vertex class (cone point) of each vertex.
"""

import numpy as np

from ._accel import njit

# status codes returned by the ray kernels
RAY_OK = 0
RAY_SINGULAR = 1
RAY_BUDGET = 2
RAY_LOST = 3


@njit
def _exit_edge(verts, pstart, cur, entry, px, py, dx, dy):
    """First edge of polygon ``cur`` crossed by the ray ``p + s d``, s > 0.

    Returns (global edge id, s, u) with u the exit parameter along the edge,
    or (-1, inf, 0) if nothing is hit.
    """
    s0 = pstart[cur]
    n = pstart[cur + 1] - s0
    best_e = -1
    best_s = np.inf
    best_u = 0.0
    for k in range(n):
        g = s0 + k
        if g == entry:
            continue
        h = s0 + (k + 1) % n
        ax = verts[g, 0]
        ay = verts[g, 1]
        ex = verts[h, 0] - ax
        ey = verts[h, 1] - ay
        den = dx * ey - dy * ex
        elen = np.sqrt(ex * ex + ey * ey)
        if abs(den) <= 1e-14 * elen:
            continue
        wx = ax - px
        wy = ay - py
        s = (wx * ey - wy * ex) / den
        u = (wx * dy - wy * dx) / den
        if s <= 1e-13:
            continue
        if u < -1e-12 or u > 1.0 + 1e-12:
            continue
        if s < best_s:
            best_s = s
            best_e = g
            best_u = u
    return best_e, best_s, best_u


@njit
def _next_vertex(pstart, pofv, g):
    p = pofv[g]
    s0 = pstart[p]
    n = pstart[p + 1] - s0
    return s0 + (g - s0 + 1) % n


@njit
def cast_ray(verts, pstart, pofv, glue, vclass, poly, px, py, dx, dy,
             length, max_steps, tol):
    """Follow a straight ray of given length across the glued polygons.

    Returns
    -------
    status : int
        One of RAY_OK, RAY_SINGULAR, RAY_BUDGET, RAY_LOST.
    nseg : int
        Number of recorded pieces.
    segs : (max_steps, 5) float64
        Pieces as (polygon, x0, y0, x1, y1).
    hit_class : int
        Vertex class reached when status is RAY_SINGULAR, else -1.
    travelled : float
        Length covered before stopping.
    """
    segs = np.empty((max_steps, 5))
    cur = poly
    entry = -1
    remaining = length
    travelled = 0.0
    for step in range(max_steps):
        g, s, u = _exit_edge(verts, pstart, cur, entry, px, py, dx, dy)
        if g < 0:
            return RAY_LOST, step, segs, -1, travelled
        if s >= remaining:
            segs[step, 0] = cur
            segs[step, 1] = px
            segs[step, 2] = py
            segs[step, 3] = px + remaining * dx
            segs[step, 4] = py + remaining * dy
            return RAY_OK, step + 1, segs, -1, length
        h = _next_vertex(pstart, pofv, g)
        ex = verts[h, 0] - verts[g, 0]
        ey = verts[h, 1] - verts[g, 1]
        elen = np.sqrt(ex * ex + ey * ey)
        qx = px + s * dx
        qy = py + s * dy
        segs[step, 0] = cur
        segs[step, 1] = px
        segs[step, 2] = py
        segs[step, 3] = qx
        segs[step, 4] = qy
        if abs(u) * elen < tol:
            return RAY_SINGULAR, step + 1, segs, vclass[g], travelled + s
        if abs(1.0 - u) * elen < tol:
            return RAY_SINGULAR, step + 1, segs, vclass[h], travelled + s
        travelled += s
        remaining -= s
        g2 = glue[g]
        h2 = _next_vertex(pstart, pofv, g2)
        # the start of g2 matches the end of g
        px = verts[h2, 0] + u * (verts[g2, 0] - verts[h2, 0])
        py = verts[h2, 1] + u * (verts[g2, 1] - verts[h2, 1])
        cur = pofv[g2]
        entry = g2
    return RAY_BUDGET, max_steps, segs, -1, travelled


@njit
def _count_hits(cur, px, py, qx, qy, arc_poly, arc_seg):
    """Transversal intersections of segment pq with arc pieces in ``cur``.

    Half-open on both segments so that shared endpoints count once.
    """
    c = 0
    rx = qx - px
    ry = qy - py
    for k in range(arc_poly.shape[0]):
        if arc_poly[k] != cur:
            continue
        ax = arc_seg[k, 0]
        ay = arc_seg[k, 1]
        sx = arc_seg[k, 2] - ax
        sy = arc_seg[k, 3] - ay
        den = rx * sy - ry * sx
        if den == 0.0:
            continue
        wx = ax - px
        wy = ay - py
        a = (wx * sy - wy * sx) / den
        b = (wx * ry - wy * rx) / den
        if 0.0 <= a < 1.0 and 0.0 <= b < 1.0:
            c += 1
    return c


@njit
def birkhoff_count(verts, pstart, pofv, glue, vclass, poly, px, py, dx, dy,
                   length, arc_poly, arc_seg, max_steps, tol):
    """Count crossings of arc pieces by a straight ray, without storing it.

    Returns (status, crossings, travelled, hit_class).
    """
    cur = poly
    entry = -1
    remaining = length
    travelled = 0.0
    count = 0
    for step in range(max_steps):
        g, s, u = _exit_edge(verts, pstart, cur, entry, px, py, dx, dy)
        if g < 0:
            return RAY_LOST, count, travelled, -1
        if s >= remaining:
            count += _count_hits(cur, px, py, px + remaining * dx,
                                 py + remaining * dy, arc_poly, arc_seg)
            return RAY_OK, count, length, -1
        qx = px + s * dx
        qy = py + s * dy
        count += _count_hits(cur, px, py, qx, qy, arc_poly, arc_seg)
        h = _next_vertex(pstart, pofv, g)
        ex = verts[h, 0] - verts[g, 0]
        ey = verts[h, 1] - verts[g, 1]
        elen = np.sqrt(ex * ex + ey * ey)
        if abs(u) * elen < tol:
            return RAY_SINGULAR, count, travelled + s, vclass[g]
        if abs(1.0 - u) * elen < tol:
            return RAY_SINGULAR, count, travelled + s, vclass[h]
        travelled += s
        remaining -= s
        g2 = glue[g]
        h2 = _next_vertex(pstart, pofv, g2)
        px = verts[h2, 0] + u * (verts[g2, 0] - verts[h2, 0])
        py = verts[h2, 1] + u * (verts[g2, 1] - verts[h2, 1])
        cur = pofv[g2]
        entry = g2
    return RAY_BUDGET, count, travelled, -1


@njit
def _grow(a, n):
    b = np.empty((max(2 * a.shape[0], n),) + a.shape[1:], dtype=a.dtype)
    b[:a.shape[0]] = a
    return b


@njit
def _seg_dist2(ax, ay, bx, by):
    """Squared distance from the origin to segment ab."""
    ex = bx - ax
    ey = by - ay
    ee = ex * ex + ey * ey
    s = 0.0
    if ee > 0.0:
        s = -(ax * ex + ay * ey) / ee
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
    qx = ax + s * ex
    qy = ay + s * ey
    return qx * qx + qy * qy


@njit
def enumerate_wedges(vec, cls, nbr, radius, budget, angtol):
    """Straight segments from cone points to cone points up to ``radius``.

    Every (triangle, corner) sector is swept by a half-open wedge that is
    unfolded across edges; a cone point strictly inside the wedge is a
    saddle connection and splits the wedge.

    Returns
    -------
    found : (k, 6) float64
        Rows (start triangle, start corner, h, v, end class, node).
    parent : (m,) int64
        Parent node of each unfolding node (-1 for sector roots).
    ntri : (m,) int64
        Triangle of each node.
    status : int
        0 on success, 1 when the budget was exceeded.
    """
    r2 = radius * radius
    found = np.empty((64, 6))
    nfound = 0
    parent = np.empty(256, dtype=np.int64)
    ntri = np.empty(256, dtype=np.int64)
    nnode = 0
    # stack rows: t, i, parent node (as float), ax, ay, bx, by, lox, loy, hix, hiy
    stack = np.empty((256, 11))
    nt = vec.shape[0]
    for t in range(nt):
        for k in range(3):
            k1 = (k + 1) % 3
            p1x = vec[t, k, 0]
            p1y = vec[t, k, 1]
            p2x = p1x + vec[t, k1, 0]
            p2y = p1y + vec[t, k1, 1]
            if nnode >= parent.shape[0]:
                parent = _grow(parent, nnode + 1)
                ntri = _grow(ntri, nnode + 1)
            root = nnode
            parent[root] = -1
            ntri[root] = t
            nnode += 1
            if p1x * p1x + p1y * p1y <= r2:
                if nfound >= found.shape[0]:
                    found = _grow(found, nfound + 1)
                found[nfound, 0] = t
                found[nfound, 1] = k
                found[nfound, 2] = p1x
                found[nfound, 3] = p1y
                found[nfound, 4] = cls[t, k1]
                found[nfound, 5] = root
                nfound += 1
            if _seg_dist2(p1x, p1y, p2x, p2y) >= r2:
                continue
            sp = 0
            stack[0, 0] = nbr[t, k1, 0]
            stack[0, 1] = nbr[t, k1, 1]
            stack[0, 2] = root
            stack[0, 3] = p1x
            stack[0, 4] = p1y
            stack[0, 5] = p2x
            stack[0, 6] = p2y
            stack[0, 7] = p1x
            stack[0, 8] = p1y
            stack[0, 9] = p2x
            stack[0, 10] = p2y
            sp = 1
            while sp > 0:
                sp -= 1
                tf = int(stack[sp, 0])
                itf = int(stack[sp, 1])
                par = int(stack[sp, 2])
                ax = stack[sp, 3]
                ay = stack[sp, 4]
                bx = stack[sp, 5]
                by = stack[sp, 6]
                lox = stack[sp, 7]
                loy = stack[sp, 8]
                hix = stack[sp, 9]
                hiy = stack[sp, 10]
                if nnode >= budget:
                    return found[:nfound], parent[:nnode], ntri[:nnode], 1
                if nnode >= parent.shape[0]:
                    parent = _grow(parent, nnode + 1)
                    ntri = _grow(ntri, nnode + 1)
                node = nnode
                parent[node] = par
                ntri[node] = tf
                nnode += 1
                j1 = (itf + 1) % 3
                j2 = (itf + 2) % 3
                cx = ax + vec[tf, j1, 0]
                cy = ay + vec[tf, j1, 1]
                cn = np.sqrt(cx * cx + cy * cy)
                cl = (lox * cy - loy * cx) / (np.sqrt(lox * lox + loy * loy) * cn)
                ch = (cx * hiy - cy * hix) / (np.sqrt(hix * hix + hiy * hiy) * cn)
                if sp + 2 >= stack.shape[0]:
                    stack = _grow(stack, sp + 3)
                if cl > angtol and ch > angtol:
                    if cx * cx + cy * cy <= r2:
                        if nfound >= found.shape[0]:
                            found = _grow(found, nfound + 1)
                        found[nfound, 0] = t
                        found[nfound, 1] = k
                        found[nfound, 2] = cx
                        found[nfound, 3] = cy
                        found[nfound, 4] = cls[tf, j2]
                        found[nfound, 5] = node
                        nfound += 1
                    # sub-wedge (lo, C) across edge A->C
                    if _seg_dist2(ax, ay, cx, cy) < r2:
                        stack[sp, 0] = nbr[tf, j1, 0]
                        stack[sp, 1] = nbr[tf, j1, 1]
                        stack[sp, 2] = node
                        stack[sp, 3] = ax
                        stack[sp, 4] = ay
                        stack[sp, 5] = cx
                        stack[sp, 6] = cy
                        stack[sp, 7] = lox
                        stack[sp, 8] = loy
                        stack[sp, 9] = cx
                        stack[sp, 10] = cy
                        sp += 1
                    # sub-wedge (C, hi) across edge C->B
                    if _seg_dist2(cx, cy, bx, by) < r2:
                        stack[sp, 0] = nbr[tf, j2, 0]
                        stack[sp, 1] = nbr[tf, j2, 1]
                        stack[sp, 2] = node
                        stack[sp, 3] = cx
                        stack[sp, 4] = cy
                        stack[sp, 5] = bx
                        stack[sp, 6] = by
                        stack[sp, 7] = cx
                        stack[sp, 8] = cy
                        stack[sp, 9] = hix
                        stack[sp, 10] = hiy
                        sp += 1
                elif cl <= angtol:
                    # C on or beyond the low ray: the wedge leaves through CB
                    if _seg_dist2(cx, cy, bx, by) < r2:
                        stack[sp, 0] = nbr[tf, j2, 0]
                        stack[sp, 1] = nbr[tf, j2, 1]
                        stack[sp, 2] = node
                        stack[sp, 3] = cx
                        stack[sp, 4] = cy
                        stack[sp, 5] = bx
                        stack[sp, 6] = by
                        stack[sp, 7] = lox
                        stack[sp, 8] = loy
                        stack[sp, 9] = hix
                        stack[sp, 10] = hiy
                        sp += 1
                else:
                    if _seg_dist2(ax, ay, cx, cy) < r2:
                        stack[sp, 0] = nbr[tf, j1, 0]
                        stack[sp, 1] = nbr[tf, j1, 1]
                        stack[sp, 2] = node
                        stack[sp, 3] = ax
                        stack[sp, 4] = ay
                        stack[sp, 5] = cx
                        stack[sp, 6] = cy
                        stack[sp, 7] = lox
                        stack[sp, 8] = loy
                        stack[sp, 9] = hix
                        stack[sp, 10] = hiy
                        sp += 1
    return found[:nfound], parent[:nnode], ntri[:nnode], 0
