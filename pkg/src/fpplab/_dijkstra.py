"""Numba kernels for cutoff-bounded Dijkstra over a uniform-cell index.

The graph is implicit: every pair of sample points within the cutoff radius is
an edge with weight |a-b|^alpha.  Candidate neighbors are enumerated from grid
cells overlapping the cutoff ball; the kernels work on cell-sorted copies of
the point array so each cell scan is contiguous in memory.  Heap ties are
broken by vertex index, making the search fully deterministic.

The planar case gets a dedicated kernel (plain nested cell loops, scalar
coordinates); higher dimensions use an odometer over cell boxes.
"""

import numpy as np
from numba import njit

__all__ = ["run_dijkstra", "run_audit"]


@njit(cache=True, nogil=True, inline="always")
def _less(c1, n1, c2, n2):
    return c1 < c2 or (c1 == c2 and n1 < n2)


@njit(cache=True, nogil=True)
def _dijkstra_2d(points, cell_start, ncells, strides, lo, cell_size,
                 src, dst, radius, alpha, cap, tmask, tcount):
    n = points.shape[0]
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, np.int64)
    settled = np.zeros(n, np.uint8)
    half_alpha = 0.5 * alpha
    is_sq = alpha == 2.0
    r2 = radius * radius
    lo0 = lo[0]
    lo1 = lo[1]
    n0 = ncells[0]
    n1 = ncells[1]
    s0 = strides[0]
    s1 = strides[1]

    hc = np.empty(cap)
    hn = np.empty(cap, np.int64)
    dist[src] = 0.0
    hc[0] = 0.0
    hn[0] = src
    size = 1
    ok = True

    while size > 0:
        top_c = hc[0]
        u = hn[0]
        size -= 1
        hc[0] = hc[size]
        hn[0] = hn[size]
        i = 0
        while True:
            l = 2 * i + 1
            r_ = l + 1
            m = i
            if l < size and _less(hc[l], hn[l], hc[m], hn[m]):
                m = l
            if r_ < size and _less(hc[r_], hn[r_], hc[m], hn[m]):
                m = r_
            if m == i:
                break
            hc[i], hc[m] = hc[m], hc[i]
            hn[i], hn[m] = hn[m], hn[i]
            i = m
        if settled[u] == 1 or top_c > dist[u]:
            continue
        settled[u] = 1
        if u == dst:
            break
        if tcount > 0 and tmask[u] == 1:
            tcount -= 1
            if tcount == 0:
                break
        du = dist[u]
        px = points[u, 0]
        py = points[u, 1]

        cl0 = int(np.floor((px - radius - lo0) / cell_size))
        ch0 = int(np.floor((px + radius - lo0) / cell_size))
        cl1 = int(np.floor((py - radius - lo1) / cell_size))
        ch1 = int(np.floor((py + radius - lo1) / cell_size))
        if cl0 < 0:
            cl0 = 0
        if ch0 > n0 - 1:
            ch0 = n0 - 1
        if cl1 < 0:
            cl1 = 0
        if ch1 > n1 - 1:
            ch1 = n1 - 1

        for c0 in range(cl0, ch0 + 1):
            base = c0 * s0
            for c1 in range(cl1, ch1 + 1):
                flat = base + c1 * s1
                for w_ in range(cell_start[flat], cell_start[flat + 1]):
                    if settled[w_] == 1:
                        continue
                    tx = points[w_, 0] - px
                    ty = points[w_, 1] - py
                    d2 = tx * tx + ty * ty
                    if d2 > r2:
                        continue
                    if is_sq:
                        nd = du + d2
                    else:
                        nd = du + d2 ** half_alpha
                    if nd < dist[w_]:
                        if size >= cap:
                            ok = False
                            size = 0
                            break
                        dist[w_] = nd
                        prev[w_] = u
                        hc[size] = nd
                        hn[size] = w_
                        i = size
                        size += 1
                        while i > 0:
                            p = (i - 1) // 2
                            if _less(hc[i], hn[i], hc[p], hn[p]):
                                hc[i], hc[p] = hc[p], hc[i]
                                hn[i], hn[p] = hn[p], hn[i]
                                i = p
                            else:
                                break

    return dist, prev, ok


@njit(cache=True, nogil=True)
def _dijkstra_nd(points, cell_start, ncells, strides, lo, cell_size,
                 src, dst, radius, alpha, cap, tmask, tcount):
    n, d = points.shape
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, np.int64)
    settled = np.zeros(n, np.uint8)
    half_alpha = 0.5 * alpha
    is_sq = alpha == 2.0
    r2 = radius * radius

    hc = np.empty(cap)
    hn = np.empty(cap, np.int64)
    dist[src] = 0.0
    hc[0] = 0.0
    hn[0] = src
    size = 1
    ok = True

    c_lo = np.empty(d, np.int64)
    c_hi = np.empty(d, np.int64)
    cur = np.empty(d, np.int64)
    pu = np.empty(d)

    while size > 0:
        top_c = hc[0]
        u = hn[0]
        size -= 1
        hc[0] = hc[size]
        hn[0] = hn[size]
        i = 0
        while True:
            l = 2 * i + 1
            r_ = l + 1
            m = i
            if l < size and _less(hc[l], hn[l], hc[m], hn[m]):
                m = l
            if r_ < size and _less(hc[r_], hn[r_], hc[m], hn[m]):
                m = r_
            if m == i:
                break
            hc[i], hc[m] = hc[m], hc[i]
            hn[i], hn[m] = hn[m], hn[i]
            i = m
        if settled[u] == 1 or top_c > dist[u]:
            continue
        settled[u] = 1
        if u == dst:
            break
        if tcount > 0 and tmask[u] == 1:
            tcount -= 1
            if tcount == 0:
                break
        du = dist[u]

        for a in range(d):
            pu[a] = points[u, a]
            cl = int(np.floor((pu[a] - radius - lo[a]) / cell_size))
            ch = int(np.floor((pu[a] + radius - lo[a]) / cell_size))
            if cl < 0:
                cl = 0
            if ch > ncells[a] - 1:
                ch = ncells[a] - 1
            if cl > ch:
                cl = ch
            c_lo[a] = cl
            c_hi[a] = ch
            cur[a] = cl

        while True:
            flat = 0
            for a in range(d):
                flat += cur[a] * strides[a]
            for w_ in range(cell_start[flat], cell_start[flat + 1]):
                if settled[w_] == 1:
                    continue
                d2 = 0.0
                for a in range(d):
                    t = points[w_, a] - pu[a]
                    d2 += t * t
                if d2 > r2:
                    continue
                if is_sq:
                    nd = du + d2
                else:
                    nd = du + d2 ** half_alpha
                if nd < dist[w_]:
                    if size >= cap:
                        ok = False
                        size = 0
                        break
                    dist[w_] = nd
                    prev[w_] = u
                    hc[size] = nd
                    hn[size] = w_
                    i = size
                    size += 1
                    while i > 0:
                        p = (i - 1) // 2
                        if _less(hc[i], hn[i], hc[p], hn[p]):
                            hc[i], hc[p] = hc[p], hc[i]
                            hn[i], hn[p] = hn[p], hn[i]
                            i = p
                        else:
                            break
            a = d - 1
            while a >= 0:
                cur[a] += 1
                if cur[a] <= c_hi[a]:
                    break
                cur[a] = c_lo[a]
                a -= 1
            if a < 0:
                break

    return dist, prev, ok


def run_dijkstra(points, cell_start, ncells, strides, lo, cell_size,
                 src, dst, radius, alpha, tmask=None, tcount=-1):
    """Dispatch to the planar or generic kernel, retrying with a larger heap
    if the fixed capacity overflows (capacity growth inside the hot loop would
    defeat register allocation).

    When a target mask is given the search stops as soon as all ``tcount``
    masked points are settled; their distances are then final, others may not
    be.
    """
    kern = _dijkstra_2d if points.shape[1] == 2 else _dijkstra_nd
    if tmask is None:
        tmask = np.zeros(points.shape[0], dtype=np.uint8)
        tcount = -1
    cap = 32 * points.shape[0] + 4096
    while True:
        dist, prev, ok = kern(points, cell_start, ncells, strides, lo, cell_size,
                              src, dst, radius, alpha, cap, tmask, tcount)
        if ok:
            return dist, prev
        cap *= 4


@njit(cache=True, nogil=True)
def _audit_nd(points, cell_start, ncells, strides, lo, cell_size,
              path_pts, alpha, tol):
    d = points.shape[1]
    half_alpha = 0.5 * alpha
    is_sq = alpha == 2.0
    max_out = 256
    out_edge = np.empty(max_out, np.int64)
    out_wit = np.empty(max_out, np.int64)
    n_out = 0

    c_lo = np.empty(d, np.int64)
    c_hi = np.empty(d, np.int64)
    cur = np.empty(d, np.int64)

    for e in range(path_pts.shape[0] - 1):
        l2 = 0.0
        for a in range(d):
            t = path_pts[e + 1, a] - path_pts[e, a]
            l2 += t * t
        if is_sq:
            direct = l2
        else:
            direct = l2 ** half_alpha
        radius = np.sqrt(l2)
        r2 = l2

        for a in range(d):
            v = path_pts[e, a]
            cl = int(np.floor((v - radius - lo[a]) / cell_size))
            ch = int(np.floor((v + radius - lo[a]) / cell_size))
            if cl < 0:
                cl = 0
            if ch > ncells[a] - 1:
                ch = ncells[a] - 1
            if cl > ch:
                cl = ch
            c_lo[a] = cl
            c_hi[a] = ch
            cur[a] = cl

        while True:
            flat = 0
            for a in range(d):
                flat += cur[a] * strides[a]
            for z in range(cell_start[flat], cell_start[flat + 1]):
                daz = 0.0
                for a in range(d):
                    t = points[z, a] - path_pts[e, a]
                    daz += t * t
                if daz > r2 or daz == 0.0:
                    continue
                dzb = 0.0
                for a in range(d):
                    t = path_pts[e + 1, a] - points[z, a]
                    dzb += t * t
                if dzb == 0.0:
                    continue
                if is_sq:
                    via = daz + dzb
                else:
                    via = daz ** half_alpha + dzb ** half_alpha
                if via < direct - tol and n_out < max_out:
                    out_edge[n_out] = e
                    out_wit[n_out] = z
                    n_out += 1
            a = d - 1
            while a >= 0:
                cur[a] += 1
                if cur[a] <= c_hi[a]:
                    break
                cur[a] = c_lo[a]
                a -= 1
            if a < 0:
                break

    return out_edge[:n_out], out_wit[:n_out]


def run_audit(points, cell_start, ncells, strides, lo, cell_size,
              path_pts, alpha, tol):
    """Improving two-hop witnesses for consecutive path edges.

    For each edge (a, b) of the path, scans sample points z with
    |a-z|^alpha + |z-b|^alpha < |a-b|^alpha - tol.  Any witness must lie
    within |a-b| of a, so scanning that ball is exhaustive.  Returns parallel
    arrays (edge index, witness index in sorted space).
    """
    return _audit_nd(points, cell_start, ncells, strides, lo, cell_size,
                     path_pts, alpha, tol)
