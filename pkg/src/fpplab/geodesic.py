"""Exact power-weighted shortest paths between Poisson points.

Passage times are infima of path costs sum |p_i - p_{i-1}|^alpha over finite
point sequences, between the sample points nearest the query locations.  The
engine runs Dijkstra restricted to edges of length <= r and escalates r until
the result is provably equal to the complete-graph optimum:

* once the best cost T found at radius r satisfies T**(1/alpha) <= r, any
  absent edge alone would cost more than T, so no larger radius can improve
  the path (stabilization certificate);
* every geodesic edge is additionally audited for improving two-hop witnesses.

``certified`` records that both held.  A brute-force all-pairs oracle of a
different algorithm family cross-checks the engine on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._dijkstra import run_audit, run_dijkstra
from .errors import EmptySampleError, FppError, OracleSizeError
from .points import SpatialGrid, nearest_index

__all__ = [
    "GeodesicOptions",
    "GeodesicResult",
    "validate_alpha",
    "edge_cost",
    "passage_time",
    "passage_time_via",
    "geodesic_via",
    "single_source",
    "SourceDistances",
    "brute_force_passage_time",
    "max_jump",
    "ball_crossing",
    "audit_local_optimality",
    "recompute_cost",
    "write_geodesic_csv",
    "write_geodesic_json",
]


def validate_alpha(alpha: float) -> float:
    """Check the edge-cost exponent is strictly greater than one."""
    alpha = float(alpha)
    if not alpha > 1.0:
        raise ValueError(f"alpha must be > 1 (distance exponent), got {alpha}")
    return alpha


def edge_cost(a, b, alpha: float) -> float:
    """Cost |a-b|^alpha of the single edge from a to b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d2 = float(np.dot(a - b, a - b))
    return d2 if alpha == 2.0 else d2 ** (0.5 * alpha)


@dataclass(frozen=True)
class GeodesicOptions:
    """Search knobs for the certified engine.

    ``initial_cutoff`` defaults to 4 * intensity**(-1/d) * sqrt(log(1+N)).
    Samples of at most ``exact_threshold`` points are searched over the
    complete graph directly.
    """

    initial_cutoff: float | None = None
    exact_threshold: int = 256
    max_rounds: int = 64
    audit_tol: float = 1e-9


DEFAULT_OPTIONS = GeodesicOptions()


@dataclass(frozen=True)
class GeodesicResult:
    """An optimal path with its certification record.

    ``cutoff_radius`` is the final search radius; ``edge_bound`` is the proven
    upper bound cost**(1/alpha) on any geodesic edge length.  The boundary
    monitor ``boundary_clear`` records that every path vertex keeps at least
    min(cutoff_radius, edge_bound) distance from the box boundary.
    """

    cost: float
    path: np.ndarray
    path_indices: np.ndarray
    cutoff_radius: float
    edge_bound: float
    certified: bool
    boundary_clear: bool


@dataclass(frozen=True)
class SourceDistances:
    """Per-point distances from one source.

    Entries are exact (complete-graph) distances for the targets the search
    was certified over; the search may stop once those settle, so other
    entries can be unfinished upper bounds.
    """

    source_index: int
    dist: np.ndarray
    prev: np.ndarray
    cutoff_radius: float
    edge_bound: float
    stabilized: bool


def _default_cutoff(sample) -> float:
    n = max(sample.count, 1)
    return 4.0 * sample.intensity ** (-1.0 / sample.dimension) * math.sqrt(math.log1p(n))


def _kernel_args(index: SpatialGrid):
    s = index.owner
    return (index.points_sorted, index.cell_start, index.ncells,
            index.strides, s.region.lo, index.cell_size)


def _binning_for(index: SpatialGrid, radius: float) -> SpatialGrid:
    """Index re-binned so cells match the search radius.

    Query cost scales with the number of cell loads per pop; re-bin once the
    radius spans many cells.  Pure performance: results are radius-exact under
    any binning.
    """
    from .points import build_index

    if radius / index.cell_size <= 6.0 or index.owner.count < 512:
        return index
    return build_index(index.owner, radius / 3.0)


def _run_kernel(index: SpatialGrid, src: int, dst: int, r: float, alpha: float,
                targets=None):
    """One bounded search; src/dst and the returned arrays are in original
    point-index space regardless of the binning used.  With ``targets`` the
    search stops once every target is settled (their distances are final,
    others may not be)."""
    binning = _binning_for(index, r)
    src_s = int(binning.inv_order[src])
    dst_s = int(binning.inv_order[dst]) if dst >= 0 else -1
    tmask = None
    tcount = -1
    if targets is not None:
        tmask = np.zeros(binning.owner.count, dtype=np.uint8)
        tmask[binning.inv_order[targets]] = 1
        tcount = int(tmask.sum())
    dist_s, prev_s = run_dijkstra(*_kernel_args(binning), src_s, dst_s, r, alpha,
                                  tmask, tcount)
    n = dist_s.shape[0]
    dist = np.empty(n)
    dist[binning.order] = dist_s
    prev = np.full(n, -1, dtype=np.int64)
    has = prev_s >= 0
    prev[binning.order[has]] = binning.order[prev_s[has]]
    return dist, prev


def _certified_search(index: SpatialGrid, src: int, dst: int, targets: np.ndarray,
                      alpha: float, opts: GeodesicOptions):
    """Escalate the cutoff radius until the stabilization certificate closes.

    The radius never more than doubles per round, and drops straight to the
    certificate radius T**(1/alpha) once that is within reach.
    """
    sample = index.owner
    diam = sample.region.diameter
    if sample.count <= opts.exact_threshold:
        r = diam
    else:
        r0 = opts.initial_cutoff if opts.initial_cutoff is not None else _default_cutoff(sample)
        r = min(r0, diam)
    rounds = 0
    while True:
        dist, prev = _run_kernel(index, src, dst, r, alpha,
                                 targets=targets if dst < 0 else None)
        worst = float(np.max(dist[targets]))
        needed = worst ** (1.0 / alpha) if math.isfinite(worst) else math.inf
        if r >= diam or needed <= r:
            return dist, prev, r, needed, True
        rounds += 1
        if rounds > opts.max_rounds:
            return dist, prev, r, needed, False
        r = min(diam, needed if needed <= 2.0 * r else 2.0 * r)


def _walk_back(prev: np.ndarray, src: int, dst: int) -> np.ndarray:
    out = [dst]
    while out[-1] != src:
        p = prev[out[-1]]
        if p < 0:
            raise FppError("no path recorded to destination (internal error)")
        out.append(int(p))
    return np.asarray(out[::-1], dtype=np.int64)


def _finish(index: SpatialGrid, path_idx: np.ndarray, cost: float, radius: float,
            edge_bound: float, stabilized: bool, alpha: float, opts: GeodesicOptions) -> GeodesicResult:
    sample = index.owner
    path = sample.points[path_idx].copy()
    viol_e, _ = run_audit(*_kernel_args(index), path, alpha, opts.audit_tol)
    margin = float(sample.region.boundary_distance(path).min())
    clear = margin >= min(radius, edge_bound)
    return GeodesicResult(
        cost=float(cost), path=path, path_indices=path_idx, cutoff_radius=float(radius),
        edge_bound=float(edge_bound), certified=bool(stabilized and viol_e.size == 0),
        boundary_clear=bool(clear),
    )


def passage_time(index: SpatialGrid, x, y, alpha: float,
                 opts: GeodesicOptions = DEFAULT_OPTIONS) -> GeodesicResult:
    """Certified minimum-cost path between the sample points nearest x and y."""
    alpha = validate_alpha(alpha)
    if index.owner.count == 0:
        raise EmptySampleError("passage time over an empty sample")
    src = nearest_index(index, x)
    dst = nearest_index(index, y)
    if src == dst:
        return _finish(index, np.asarray([src], dtype=np.int64), 0.0,
                       0.0, 0.0, True, alpha, opts)
    targets = np.asarray([dst], dtype=np.int64)
    dist, prev, r, needed, stab = _certified_search(index, src, dst, targets, alpha, opts)
    if not math.isfinite(dist[dst]):
        if not stab:
            raise FppError("certification budget exhausted before the cutoff graph "
                           "connected the endpoints; raise max_rounds")
        raise FppError("no path found in a nonempty sample (internal error)")
    path_idx = _walk_back(prev, src, dst)
    return _finish(index, path_idx, dist[dst], r, needed, stab, alpha, opts)


def single_source(index: SpatialGrid, x, alpha: float, target_points=None,
                  target_indices=None,
                  opts: GeodesicOptions = DEFAULT_OPTIONS) -> SourceDistances:
    """Certified distances from the point nearest ``x`` to the whole sample.

    Certification covers the supplied targets (default: every point): the
    cutoff escalates until the largest target distance is stable.  Targets
    can be given as locations (``target_points``) or directly as sample point
    indices (``target_indices``).
    """
    alpha = validate_alpha(alpha)
    if index.owner.count == 0:
        raise EmptySampleError("single-source search over an empty sample")
    src = nearest_index(index, x)
    if target_indices is not None:
        targets = np.asarray(target_indices, dtype=np.int64).ravel()
    elif target_points is None:
        targets = np.arange(index.owner.count, dtype=np.int64)
    else:
        targets = np.asarray(
            [nearest_index(index, t) for t in np.atleast_2d(np.asarray(target_points, dtype=np.float64))],
            dtype=np.int64,
        )
    dist, prev, r, needed, stab = _certified_search(index, src, -1, targets, alpha, opts)
    return SourceDistances(src, dist, prev, float(r), float(needed), bool(stab))


def geodesic_via(index: SpatialGrid, a, y, b, alpha: float,
                 opts: GeodesicOptions = DEFAULT_OPTIONS) -> GeodesicResult:
    """Optimal constrained path from a to b through y (one search from y)."""
    alpha = validate_alpha(alpha)
    sd = single_source(index, y, alpha, target_points=[a, b], opts=opts)
    ai = nearest_index(index, a)
    bi = nearest_index(index, b)
    cost = float(sd.dist[ai] + sd.dist[bi])
    if not math.isfinite(cost):
        raise FppError("no constrained path found in a nonempty sample (internal error)")
    leg_a = _walk_back(sd.prev, sd.source_index, ai)[::-1]  # a -> y
    leg_b = _walk_back(sd.prev, sd.source_index, bi)        # y -> b
    path_idx = np.concatenate([leg_a, leg_b[1:]]).astype(np.int64)
    return _finish(index, path_idx, cost, sd.cutoff_radius, sd.edge_bound,
                   sd.stabilized, alpha, opts)


def passage_time_via(index: SpatialGrid, a, y, b, alpha: float,
                     opts: GeodesicOptions = DEFAULT_OPTIONS) -> float:
    """T(a,y) + T(y,b): passage time constrained to pass through y."""
    return geodesic_via(index, a, y, b, alpha, opts).cost


def _linear_nearest(pts: np.ndarray, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    d2 = np.einsum("ij,ij->i", pts - x, pts - x)
    ties = np.flatnonzero(d2 == d2.min())
    if ties.size == 1:
        return int(ties[0])
    sub = pts[ties]
    return int(ties[np.lexsort(sub.T[::-1])[0]])


def brute_force_passage_time(points, x, y, alpha: float, bound: int = 64):
    """All-pairs relaxation oracle on the complete graph (no index, no pruning).

    Independent of the Dijkstra engine by construction; refuses instances
    above ``bound`` points.  Returns (cost, path vertex array).
    """
    alpha = validate_alpha(alpha)
    pts = np.asarray(points, dtype=np.float64)
    pts = pts.reshape(-1, pts.shape[-1])
    n = pts.shape[0]
    if n == 0:
        raise EmptySampleError("oracle needs at least one point")
    if n > bound:
        raise OracleSizeError(f"oracle refuses {n} > {bound} points")
    si = _linear_nearest(pts, x)
    ti = _linear_nearest(pts, y)
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    w = d2 if alpha == 2.0 else d2 ** (0.5 * alpha)
    np.fill_diagonal(w, 0.0)
    nxt = np.broadcast_to(np.arange(n, dtype=np.int64), (n, n)).copy()
    for k in range(n):
        alt = w[:, k][:, None] + w[k, :][None, :]
        mask = alt < w
        w = np.where(mask, alt, w)
        nxt = np.where(mask, np.broadcast_to(nxt[:, k][:, None], (n, n)), nxt)
    path = [si]
    while path[-1] != ti:
        path.append(int(nxt[path[-1], ti]))
    return float(w[si, ti]), pts[np.asarray(path)]


def max_jump(g: GeodesicResult) -> float:
    """Longest Euclidean step along the path (0 for single-vertex paths)."""
    if g.path.shape[0] < 2:
        return 0.0
    steps = np.diff(g.path, axis=0)
    return float(np.sqrt(np.einsum("ij,ij->i", steps, steps).max()))


def ball_crossing(g: GeodesicResult, center, radius: float):
    """First and last path indices inside the closed ball, or None."""
    center = np.asarray(center, dtype=np.float64)
    d2 = np.einsum("ij,ij->i", g.path - center, g.path - center)
    inside = np.flatnonzero(d2 <= radius * radius)
    if inside.size == 0:
        return None
    return int(inside[0]), int(inside[-1])


def audit_local_optimality(g: GeodesicResult, index: SpatialGrid, alpha: float,
                           tol: float = 1e-9) -> list[tuple[int, int]]:
    """Improving two-hop witnesses for consecutive path edges (must be empty).

    Returns (edge index, witness sample index) pairs for every sample point z
    with |a-z|^alpha + |z-b|^alpha < |a-b|^alpha - tol on some edge (a, b).
    """
    alpha = validate_alpha(alpha)
    viol_e, viol_w = run_audit(*_kernel_args(index), g.path, alpha, tol)
    return [(int(e), int(index.order[w])) for e, w in zip(viol_e, viol_w)]


def recompute_cost(g: GeodesicResult, alpha: float) -> float:
    """Re-sum the edge costs of the stored path."""
    total = 0.0
    for i in range(g.path.shape[0] - 1):
        total += edge_cost(g.path[i], g.path[i + 1], alpha)
    return total


def with_boundary_requirement(g: GeodesicResult, margin: float, region) -> GeodesicResult:
    """Re-evaluate the boundary monitor against an explicit margin."""
    m = float(region.boundary_distance(g.path).min())
    return replace(g, boundary_clear=bool(m >= margin))


def write_geodesic_csv(g: GeodesicResult, path) -> None:
    """One vertex per row, for plotting."""
    d = g.path.shape[1]
    with open(path, "w") as fh:
        fh.write(",".join(f"x{i}" for i in range(d)) + "\n")
        for row in g.path:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_geodesic_json(g: GeodesicResult, path) -> None:
    """Cost, certification record, and the vertex list."""
    import json

    payload = {
        "cost": g.cost,
        "certified": g.certified,
        "cutoff_radius": g.cutoff_radius,
        "edge_bound": g.edge_bound,
        "boundary_clear": g.boundary_clear,
        "vertices": [[float(v) for v in row] for row in g.path],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
