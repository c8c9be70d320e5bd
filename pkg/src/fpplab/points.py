"""Homogeneous Poisson point clouds in boxes, with a uniform-cell spatial index.

Samples are generated by drawing a Poisson count for the box volume and then
i.i.d. uniform positions, which is exact for a homogeneous process.  All
randomness is seeded; identical arguments reproduce identical point lists
bit for bit.  The spatial index is an axis-aligned uniform grid supporting
exact nearest-point and closed-ball queries (verified against linear scans in
the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySampleError, InvalidRegionError
from .seeds import substream

__all__ = [
    "BoxRegion",
    "PoissonSample",
    "SpatialGrid",
    "ball_volume",
    "sample_poisson",
    "build_index",
    "nearest",
    "ball_points",
    "resample_region",
    "plant_resample_event",
    "extend_sample",
    "write_sample_csv",
    "read_sample_csv",
]


def ball_volume(radius: float, d: int) -> float:
    """Volume of the Euclidean ball of the given radius in d dimensions."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * radius**d


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box ``[lo, hi]`` with strictly positive volume."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise InvalidRegionError("lo and hi must be 1-d vectors of equal length")
        if not np.all(lo < hi):
            raise InvalidRegionError(f"degenerate region: need lo<hi per axis, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dimension(self) -> int:
        return self.lo.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of ``pts`` lying inside the closed box."""
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def contains_ball(self, center: np.ndarray, radius: float) -> bool:
        center = np.asarray(center, dtype=np.float64)
        return bool(np.all(center - radius >= self.lo) and np.all(center + radius <= self.hi))

    def boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance from each point to the box boundary (negative if outside)."""
        pts = np.atleast_2d(pts)
        return np.minimum((pts - self.lo).min(axis=1), (self.hi - pts).min(axis=1))

    def scaled(self, factor: float) -> "BoxRegion":
        """Box scaled about its center by ``factor``."""
        c = 0.5 * (self.lo + self.hi)
        half = 0.5 * factor * (self.hi - self.lo)
        return BoxRegion(c - half, c + half)


@dataclass(frozen=True)
class PoissonSample:
    """A seeded realization of a unit-rate-like Poisson cloud in a box.

    ``points`` is an (N, d) float array.  ``provenance`` records how the
    realization was produced ("poisson" for a direct draw; resampling and
    planting operations write their own tags).  Direct draws regenerate
    identically from (region, intensity, seed, dimension).
    """

    points: np.ndarray
    region: BoxRegion
    intensity: float
    seed: int
    dimension: int
    provenance: str = "poisson"

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64).reshape(-1, self.dimension))
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def with_extra_point(self, p) -> "PoissonSample":
        """Copy of the sample with one extra point appended (for perturbation tests)."""
        p = np.asarray(p, dtype=np.float64).reshape(1, self.dimension)
        return PoissonSample(
            np.vstack([self.points, p]), self.region, self.intensity, self.seed,
            self.dimension, provenance=self.provenance + "+point",
        )


def _duplicate_rows(pts: np.ndarray) -> np.ndarray:
    """Mask of rows equal to an earlier row (later occurrences flagged)."""
    mask = np.zeros(pts.shape[0], dtype=bool)
    if pts.shape[0] < 2:
        return mask
    order = np.lexsort(pts.T[::-1])
    eq = np.all(pts[order[1:]] == pts[order[:-1]], axis=1)
    mask[order[1:][eq]] = True
    return mask


def sample_poisson(region: BoxRegion, intensity: float, seed: int, d: int) -> PoissonSample:
    """Draw a homogeneous Poisson cloud of the given intensity in ``region``.

    The count is Poisson(intensity * volume) and positions are i.i.d. uniform.
    Coincident points (possible only through floating point) are re-drawn so
    all stored points are distinct.
    """
    if d < 2:
        raise InvalidRegionError(f"dimension must be >= 2, got {d}")
    if region.dimension != d:
        raise InvalidRegionError(f"region dimension {region.dimension} != d={d}")
    if not intensity > 0:
        raise InvalidRegionError(f"intensity must be positive, got {intensity}")
    rng = np.random.default_rng(seed & (2**64 - 1))
    count = int(rng.poisson(intensity * region.volume))
    span = region.hi - region.lo
    pts = region.lo + rng.random((count, d)) * span
    while True:
        dup = _duplicate_rows(pts)
        if not dup.any():
            break
        pts[dup] = region.lo + rng.random((int(dup.sum()), d)) * span
    return PoissonSample(pts, region, float(intensity), int(seed), d)


@dataclass
class SpatialGrid:
    """Uniform-cell index over a sample.

    Points are binned by ``floor((p - lo) / cell_size)`` (top boundary clipped
    into the last cell), stored in a CSR-style layout: ``order`` lists point
    indices grouped by cell and ``cell_start`` delimits each cell's slice.
    ``points_sorted`` is the cell-grouped copy of the coordinates (row k is
    point ``order[k]``) used by the search kernels; ``inv_order`` maps a point
    index to its row there.
    """

    owner: PoissonSample
    cell_size: float
    ncells: np.ndarray = field(repr=False)
    strides: np.ndarray = field(repr=False)
    cell_start: np.ndarray = field(repr=False)
    order: np.ndarray = field(repr=False)
    points_sorted: np.ndarray = field(repr=False)
    inv_order: np.ndarray = field(repr=False)

    @property
    def buckets(self) -> dict:
        """Materialized {cell coordinates: list of point indices} view."""
        out: dict[tuple, list] = {}
        cells = self._cell_of(self.owner.points)
        for i, c in enumerate(map(tuple, cells)):
            out.setdefault(c, []).append(i)
        return out

    def _cell_of(self, pts: np.ndarray) -> np.ndarray:
        rel = (np.atleast_2d(pts) - self.owner.region.lo) / self.cell_size
        cells = np.floor(rel).astype(np.int64)
        return np.clip(cells, 0, self.ncells - 1)

    def _candidates_in_cells(self, c_lo: np.ndarray, c_hi: np.ndarray) -> np.ndarray:
        """Point indices in the inclusive cell range [c_lo, c_hi]."""
        d = self.ncells.shape[0]
        axes = [np.arange(c_lo[i], c_hi[i] + 1, dtype=np.int64) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.zeros(mesh[0].shape, dtype=np.int64)
        for i in range(d):
            flat += mesh[i] * self.strides[i]
        flat = flat.ravel()
        chunks = [self.order[self.cell_start[f]:self.cell_start[f + 1]] for f in flat]
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)


def build_index(sample: PoissonSample, cell_size: float) -> SpatialGrid:
    """Index a sample with cubic cells of the given edge length."""
    if not cell_size > 0:
        raise InvalidRegionError(f"cell_size must be positive, got {cell_size}")
    region = sample.region
    d = region.dimension
    span = region.hi - region.lo
    ncells = np.maximum(1, np.ceil(span / cell_size - 1e-12).astype(np.int64))
    total = int(np.prod(ncells))
    if total > 80_000_000:
        raise InvalidRegionError(f"grid would need {total} cells; increase cell_size")
    strides = np.ones(d, dtype=np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * ncells[i + 1]
    rel = np.floor((sample.points - region.lo) / cell_size).astype(np.int64)
    np.clip(rel, 0, ncells - 1, out=rel)
    flat = rel @ strides
    order = np.argsort(flat, kind="stable").astype(np.int64)
    counts = np.bincount(flat, minlength=total)
    cell_start = np.zeros(total + 1, dtype=np.int64)
    np.cumsum(counts, out=cell_start[1:])
    inv_order = np.empty_like(order)
    inv_order[order] = np.arange(order.shape[0], dtype=np.int64)
    points_sorted = np.ascontiguousarray(sample.points[order])
    return SpatialGrid(sample, float(cell_size), ncells, strides, cell_start, order,
                       points_sorted, inv_order)


def _lex_smallest(pts: np.ndarray) -> int:
    """Row index of the lexicographically smallest row."""
    return int(np.lexsort(pts.T[::-1])[0])


def nearest(index: SpatialGrid, x) -> np.ndarray:
    """Sample point closest to ``x``; exact ties broken lexicographically."""
    i = nearest_index(index, x)
    return index.owner.points[i].copy()


def nearest_index(index: SpatialGrid, x) -> int:
    """Index of the sample point closest to ``x`` (lexicographic tie-break)."""
    pts = index.owner.points
    if pts.shape[0] == 0:
        raise EmptySampleError("nearest-point query on an empty sample")
    x = np.asarray(x, dtype=np.float64)
    center = index._cell_of(x)[0]
    cs = index.cell_size
    max_ring = int(np.max(np.maximum(center, index.ncells - 1 - center)))
    best_i = -1
    best_d2 = np.inf
    for k in range(max_ring + 1):
        if best_i >= 0 and (k - 1) * cs > 0 and ((k - 1) * cs) ** 2 > best_d2:
            break
        c_lo = np.maximum(center - k, 0)
        c_hi = np.minimum(center + k, index.ncells - 1)
        cand = index._candidates_in_cells(c_lo, c_hi)
        if k > 0:
            # keep only the new shell: drop cells already scanned at ring k-1
            p_lo = np.maximum(center - (k - 1), 0)
            p_hi = np.minimum(center + (k - 1), index.ncells - 1)
            cells = index._cell_of(pts[cand])
            inner = np.all((cells >= p_lo) & (cells <= p_hi), axis=1)
            cand = cand[~inner]
        if cand.size == 0:
            continue
        diff = pts[cand] - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        ring_min = d2.min()
        if ring_min < best_d2:
            ties = cand[d2 == ring_min]
            best_i = int(ties[_lex_smallest(pts[ties])]) if ties.size > 1 else int(ties[0])
            best_d2 = ring_min
        elif ring_min == best_d2 and best_i >= 0:
            ties = np.append(cand[d2 == ring_min], best_i)
            best_i = int(ties[_lex_smallest(pts[ties])])
    return best_i


def ball_points(index: SpatialGrid, x, r: float) -> np.ndarray:
    """All sample points within closed Euclidean distance ``r`` of ``x``."""
    return index.owner.points[ball_indices(index, x, r)].copy()


def ball_indices(index: SpatialGrid, x, r: float) -> np.ndarray:
    """Indices of sample points with |p - x| <= r, in ascending index order."""
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    pts = index.owner.points
    if pts.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    lo_cell = index._cell_of(x - r)[0]
    hi_cell = index._cell_of(x + r)[0]
    cand = index._candidates_in_cells(lo_cell, hi_cell)
    if cand.size == 0:
        return cand
    diff = pts[cand] - x
    d2 = np.einsum("ij,ij->i", diff, diff)
    hit = cand[d2 <= r * r]
    return np.sort(hit)


def has_point_within(index: SpatialGrid, x, r: float) -> bool:
    """Whether any sample point lies within closed distance ``r`` of ``x``."""
    return ball_indices(index, x, r).size > 0


def resample_region(sample: PoissonSample, center, radius: float, seed2: int) -> PoissonSample:
    """Replace the configuration inside the closed ball by an independent draw.

    Points outside the ball are preserved bitwise; points inside come from a
    fresh full-box draw seeded by ``seed2`` restricted to the ball, so the
    output has the same distribution as the input.
    """
    if not radius > 0:
        raise InvalidRegionError(f"radius must be positive, got {radius}")
    center = np.asarray(center, dtype=np.float64)
    clipped = np.clip(center, sample.region.lo, sample.region.hi)
    if np.linalg.norm(clipped - center) > radius:
        raise InvalidRegionError("resampling ball does not intersect the region")
    fresh = sample_poisson(sample.region, sample.intensity, seed2, sample.dimension)
    r2 = radius * radius
    d2_old = np.einsum("ij,ij->i", sample.points - center, sample.points - center)
    d2_new = np.einsum("ij,ij->i", fresh.points - center, fresh.points - center)
    outside = sample.points[d2_old > r2]
    inside = fresh.points[d2_new <= r2]
    return PoissonSample(
        np.vstack([outside, inside]), sample.region, sample.intensity, int(seed2),
        sample.dimension, provenance=f"{sample.provenance}|resampled(r={radius:g})",
    )


def _uniform_in_ball(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    """m i.i.d. uniform points in the unit ball, by rejection from the cube."""
    out = np.empty((m, d))
    got = 0
    while got < m:
        cand = rng.random((2 * (m - got) + 8, d)) * 2.0 - 1.0
        keep = cand[np.einsum("ij,ij->i", cand, cand) <= 1.0]
        take = min(keep.shape[0], m - got)
        out[got:got + take] = keep[:take]
        got += take
    return out


def plant_resample_event(region: BoxRegion, seed: int, seed2: int) -> tuple[PoissonSample, PoissonSample]:
    """Draw a coupled pair (original, resampled) conditioned on the planted gap event.

    The original cloud is a unit-intensity draw with the radius-2 ball at the
    origin cleared.  The resampled cloud keeps everything outside that ball
    and replaces the inside by at least one uniform point in the unit ball
    (count Poisson(Vol B(1)) conditioned >= 1) and nothing in the annulus.
    """
    d = region.dimension
    if not region.contains_ball(np.zeros(d), 2.0):
        raise InvalidRegionError("region must contain the radius-2 ball at the origin")
    base = sample_poisson(region, 1.0, seed, d)
    d2 = np.einsum("ij,ij->i", base.points, base.points)
    cleared = base.points[d2 > 4.0]
    original = PoissonSample(cleared, region, 1.0, int(seed), d, provenance="poisson|void-ball-2")
    rng = np.random.default_rng(substream(seed2, 1) & (2**64 - 1))
    lam = ball_volume(1.0, d)
    m = 0
    while m < 1:
        m = int(rng.poisson(lam))
    inner = _uniform_in_ball(rng, m, d)
    resampled = PoissonSample(
        np.vstack([cleared, inner]), region, 1.0, int(seed2), d,
        provenance="poisson|void-ball-2|planted-inner",
    )
    return original, resampled


def extend_sample(sample: PoissonSample, new_region: BoxRegion, seed2: int) -> PoissonSample:
    """Extend a sample to a larger box, preserving existing points bitwise.

    Fresh points are drawn on the new box and thinned to the shell outside the
    old box; the union is exactly a Poisson cloud on the new box.
    """
    old = sample.region
    if not (np.all(new_region.lo <= old.lo) and np.all(new_region.hi >= old.hi)):
        raise InvalidRegionError("new region must contain the current region")
    fresh = sample_poisson(new_region, sample.intensity, seed2, sample.dimension)
    shell = fresh.points[~old.contains(fresh.points)]
    return PoissonSample(
        np.vstack([sample.points, shell]), new_region, sample.intensity, sample.seed,
        sample.dimension, provenance=f"{sample.provenance}|extended",
    )


def write_sample_csv(sample: PoissonSample, path) -> None:
    """Flat CSV dump: header row ``d,count`` then one coordinate row per point."""
    with open(path, "w") as fh:
        fh.write(f"{sample.dimension},{sample.count}\n")
        for row in sample.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_sample_csv(path) -> tuple[np.ndarray, int]:
    """Read back a sample CSV; returns (points, dimension)."""
    with open(path) as fh:
        d, count = (int(v) for v in fh.readline().split(","))
        pts = np.loadtxt(fh, delimiter=",", ndmin=2)
    if pts.shape != (count, d):
        raise ValueError(f"corrupt sample file: expected {(count, d)}, got {pts.shape}")
    return pts, d
