"""Empirical bench for the probabilistic events behind the fluctuation bound.

Each operation instantiates one ingredient — midpoint detour gains, strict
argmin events over a family of well-separated midpoint candidates, separation
and concentration events, per-site coverage/linearity/cheap-detour membership,
entry-jump bounds, corridor (ubiquity) events with closed-form probabilities,
the planted resampling pair, and distributional rotation checks — estimates
its probability by seeded Monte Carlo, and attaches whatever closed form or
inequality makes it falsifiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import ks_2samp

from .errors import CampaignError, GateError, InvalidRegionError
from .geodesic import (
    DEFAULT_OPTIONS,
    GeodesicOptions,
    GeodesicResult,
    ball_crossing,
    geodesic_via,
    passage_time,
    single_source,
    validate_alpha,
)
from .points import (
    BoxRegion,
    PoissonSample,
    ball_volume,
    build_index,
    extend_sample,
    has_point_within,
    nearest_index,
    plant_resample_event,
    sample_poisson,
)
from .seeds import mix64
from .streamstats import StreamStats

__all__ = [
    "BenchParams",
    "EventEstimate",
    "MidpointFamily",
    "build_midpoints",
    "verify_midpoints",
    "midpoint_gain",
    "midpoint_argmin",
    "separation_concentration",
    "SiteEvents",
    "site_events",
    "coverage_event",
    "JumpCheck",
    "entry_jump_check",
    "CorridorResult",
    "corridor_event",
    "crossing_witness_check",
    "canonical_crossing_witnesses",
    "ResamplingReport",
    "resampling_variance_experiment",
    "RotationReport",
    "rotation_invariance_test",
    "TriangleReport",
    "triangle_symmetry_experiment",
]

VOID_TRUNCATION = 1e-12  # coverage radii are scanned until the void probability drops below this


@dataclass(frozen=True)
class BenchParams:
    """Scale parameters shared by the bench events.

    ``k_n = theta * log(phi_n)`` is the detour budget; ``c_delta of delta``
    fixes the crossing-ball radius ``c_delta * k_n``; ``c_ubiq`` is the
    corridor ball radius.  ``theta_gate`` is the largest theta for which the
    corridor lower bound is claimed; the shipped default stays at 0.9 of it.
    """

    theta: float
    delta: float
    c_ubiq: float
    phi_n: float

    def __post_init__(self):
        if not (self.theta > 0 and self.delta > 0 and 0 < self.c_ubiq <= 0.25):
            raise ValueError("need theta > 0, delta > 0, 0 < c_ubiq <= 1/4")
        if not self.phi_n >= 1.0:
            raise ValueError(f"phi_n must be >= 1, got {self.phi_n}")

    @property
    def c_delta(self) -> float:
        return 4.0 * (1.0 + 1.0 / self.delta)

    @property
    def k_n(self) -> float:
        return self.theta * math.log(self.phi_n)

    def theta_gate(self, d: int) -> float:
        return 2.0 ** (-8 * d) * self.c_ubiq**d / self.c_delta

    def gate_ok(self, d: int) -> bool:
        return self.theta < self.theta_gate(d)

    def k_count(self, K: float | None = None) -> int:
        """Number of corridor balls along a unit direction (counts k = 0)."""
        K = self.c_delta * self.k_n if K is None else float(K)
        if K < 1.0:
            return 0
        return max(0, int(math.floor((K - 1.0) / (2.0 * self.c_ubiq))) + 1)

    @classmethod
    def with_gated_theta(cls, d: int, phi_n: float, delta: float = 0.5,
                         c_ubiq: float = 0.2, fraction: float = 0.9) -> "BenchParams":
        c_delta = 4.0 * (1.0 + 1.0 / delta)
        gate = 2.0 ** (-8 * d) * c_ubiq**d / c_delta
        return cls(fraction * gate, delta, c_ubiq, phi_n)


@dataclass(frozen=True)
class EventEstimate:
    """Monte Carlo frequency of a named event."""

    name: str
    hits: int
    trials: int
    analytic_bound: float | None = None

    @property
    def p_hat(self) -> float:
        return self.hits / self.trials if self.trials else math.nan

    @property
    def ci95(self) -> float:
        if not self.trials:
            return math.nan
        p = self.p_hat
        return 1.959963984540054 * math.sqrt(max(p * (1 - p), 0.0) / self.trials)

    def sigma(self) -> float:
        """Binomial standard error at the analytic value when available."""
        p = self.analytic_bound if self.analytic_bound is not None else self.p_hat
        return math.sqrt(max(p * (1 - p), 1.0 / self.trials) / self.trials)


@dataclass(frozen=True)
class MidpointFamily:
    """Well-separated midpoint candidates on the bisecting hyperplane.

    Explicit construction: points k*s*e2 for k = 1..floor(sqrt(phi_n)) with
    s = sqrt(n/phi_n), optionally mirrored to ±k*s*e2 (same count).
    """

    n: float
    phi_n: float
    points: np.ndarray
    spacing: float


def build_midpoints(n: float, phi_n: float, d: int, symmetric: bool = False) -> MidpointFamily:
    if phi_n < 1.0:
        raise ValueError(f"phi_n must be >= 1 for a nonempty family, got {phi_n}")
    m = int(math.floor(math.sqrt(phi_n)))
    if m < 1:
        raise ValueError("empty midpoint family")
    s = math.sqrt(n) / math.sqrt(phi_n)
    if symmetric:
        # mirror pairs +-k*s*e2; the norm cap then needs phi_n >= 4 for m > 2
        mags = (np.arange(m) // 2 + 1).astype(np.float64)
        signs = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        ks = mags * signs
    else:
        ks = np.arange(1, m + 1, dtype=np.float64)
    pts = np.zeros((m, d))
    pts[:, 1] = ks * s
    return MidpointFamily(float(n), float(phi_n), pts, float(s))


def verify_midpoints(fam: MidpointFamily) -> bool:
    """Re-evaluate the three family conditions directly."""
    pts = fam.points
    m = pts.shape[0]
    if m != int(math.floor(math.sqrt(fam.phi_n))):
        return False
    s = math.sqrt(fam.n) / math.sqrt(fam.phi_n)
    eps = 1e-9 * max(1.0, s)
    for i in range(m):
        for j in range(i + 1, m):
            if np.linalg.norm(pts[i] - pts[j]) < s - eps:
                return False
    norms = np.linalg.norm(pts, axis=1)
    return bool(np.all(norms >= s - eps) and np.all(norms <= math.sqrt(fam.n) + eps))


def _corridor_box(n: float, d: int, pad: float, transverse: float = 0.0) -> BoxRegion:
    lo = np.full(d, -(pad + transverse))
    hi = np.full(d, pad + transverse)
    lo[0] = -n - pad
    hi[0] = n + pad
    return BoxRegion(lo, hi)


def _certified_via(region_builder, n, alpha, d, replica_seed, intensity, opts,
                   max_box_doublings, compute):
    """Shared retry loop: enlarge the box until ``compute`` returns a fully
    certified, boundary-clear outcome; None past the budget."""
    scale = 1.0
    sample = sample_poisson(region_builder(scale), intensity, mix64(replica_seed, 0), d)
    for attempt in range(max_box_doublings + 1):
        index = build_index(sample, intensity ** (-1.0 / d))
        out, ok = compute(index)
        if ok:
            return out
        if attempt == max_box_doublings:
            return None
        scale *= 2.0
        sample = extend_sample(sample, region_builder(scale), mix64(replica_seed, attempt + 1))


def midpoint_gain(n: float, alpha: float, d: int, replicas: int, seed: int,
                  intensity: float = 1.0, opts: GeodesicOptions = DEFAULT_OPTIONS,
                  exclusion_budget: float = 0.01) -> tuple[StreamStats, np.ndarray]:
    """Per-replica detour excess T(-n e1, 0, n e1) - T(-n e1, n e1).

    The constrained path is a valid unconstrained path, so the excess is
    nonnegative exactly, realization by realization.  Twice its mean bounds
    the non-random fluctuation at n from below.
    """
    validate_alpha(alpha)
    origin = np.zeros(d)
    a = np.zeros(d)
    b = np.zeros(d)
    a[0] = -n
    b[0] = n

    def compute(index):
        via = geodesic_via(index, a, origin, b, alpha, opts)
        direct = passage_time(index, a, b, alpha, opts)
        ok = via.certified and direct.certified and via.boundary_clear and direct.boundary_clear
        return (via.cost - direct.cost), ok

    stats = StreamStats(units="detour-excess")
    vals = []
    excluded = 0
    for r in range(replicas):
        out = _certified_via(lambda s: _corridor_box(n, d, s * n / 2.0), n, alpha, d,
                             mix64(seed, r), intensity, opts, 2, compute)
        if out is None:
            excluded += 1
            continue
        stats.push(out)
        vals.append(out)
    if excluded > exclusion_budget * replicas:
        raise CampaignError(f"{excluded}/{replicas} midpoint replicas excluded")
    return stats, np.asarray(vals)


def _via_times_for_targets(index, a, b, targets, alpha, opts):
    """T(a, y, b) for every y in targets, via two one-source searches."""
    sd_a = single_source(index, a, alpha, target_points=targets, opts=opts)
    sd_b = single_source(index, b, alpha, target_points=targets, opts=opts)
    t_idx = [nearest_index(index, y) for y in targets]
    via = np.array([sd_a.dist[i] + sd_b.dist[i] for i in t_idx])
    direct = float(sd_a.dist[nearest_index(index, b)])
    ok = sd_a.stabilized and sd_b.stabilized
    return via, direct, ok


def midpoint_argmin(n: float, fam: MidpointFamily, alpha: float, replicas: int,
                    seed: int, d: int = 2, intensity: float = 1.0,
                    opts: GeodesicOptions = DEFAULT_OPTIONS) -> tuple[list[EventEstimate], int]:
    """Strict-argmin frequencies of the constrained times over the family.

    Per replica, T(-n e1, y, n e1) is computed for every candidate y; the
    event for y fires when y is the unique strict minimizer.  Exact ties fire
    nothing and are counted separately.  At most one event fires per replica,
    so the frequencies sum to at most 1.
    """
    validate_alpha(alpha)
    m = fam.points.shape[0]
    a = np.zeros(d)
    b = np.zeros(d)
    a[0] = -n
    b[0] = n
    max_t = float(np.abs(fam.points[:, 1]).max())
    hits = np.zeros(m, dtype=np.int64)
    ties = 0
    used = 0
    for r in range(replicas):
        def compute(index):
            via, _, ok = _via_times_for_targets(index, a, b, fam.points, alpha, opts)
            return via, ok

        via = _certified_via(lambda s: _corridor_box(n, d, s * n / 2.0, transverse=max_t),
                             n, alpha, d, mix64(seed, r), intensity, opts, 2, compute)
        if via is None:
            continue
        used += 1
        order = np.argsort(via, kind="stable")
        if m > 1 and via[order[0]] == via[order[1]]:
            ties += 1
            continue
        hits[order[0]] += 1
    return (
        [EventEstimate(f"argmin[y{i}]", int(hits[i]), used) for i in range(m)],
        ties,
    )


@dataclass(frozen=True)
class SeparationConcentration:
    separation: EventEstimate
    concentration: EventEstimate
    sep_threshold: float
    conc_threshold: float


def separation_concentration(n: float, fam: MidpointFamily, alpha: float,
                             replicas: int, seed: int, d: int = 2,
                             intensity: float = 1.0,
                             opts: GeodesicOptions = DEFAULT_OPTIONS,
                             sep_threshold: float | None = None,
                             conc_threshold: float | None = None) -> SeparationConcentration:
    """Frequencies of the pairwise-separation and concentration events.

    Separation: every pair a != b drawn from the family plus the origin has
    T(a,b) >= sqrt(n) * phi_n**(-3/5).  Concentration: for every family point
    and the origin, both anchored times T(+-n e1, y) sit within
    sqrt(n) * phi_n**(-2/3) of their campaign means (plug-in means from the
    same replicas).  Thresholds can be overridden (0 makes both certain).
    """
    validate_alpha(alpha)
    pts = np.vstack([fam.points, np.zeros((1, d))])
    m = pts.shape[0]
    a = np.zeros(d)
    b = np.zeros(d)
    a[0] = -n
    b[0] = n
    sep_thr = math.sqrt(n) * fam.phi_n ** (-0.6) if sep_threshold is None else sep_threshold
    conc_thr = math.sqrt(n) * fam.phi_n ** (-2.0 / 3.0) if conc_threshold is None else conc_threshold
    max_t = float(np.abs(pts[:, 1]).max())

    pair_t = []     # replica -> (m, m) matrix of T(y_i, y_j)
    anchor_t = []   # replica -> (2, m) matrix of T(-+n e1, y_j)
    for r in range(replicas):
        def compute(index):
            srcs = [single_source(index, p, alpha, target_points=pts, opts=opts) for p in pts]
            t_idx = [nearest_index(index, p) for p in pts]
            pair = np.array([[s.dist[j] for j in t_idx] for s in srcs])
            sd_a = single_source(index, a, alpha, target_points=pts, opts=opts)
            sd_b = single_source(index, b, alpha, target_points=pts, opts=opts)
            anchor = np.array([[sd_a.dist[j] for j in t_idx], [sd_b.dist[j] for j in t_idx]])
            ok = all(s.stabilized for s in srcs) and sd_a.stabilized and sd_b.stabilized
            return (pair, anchor), ok

        out = _certified_via(lambda s: _corridor_box(n, d, s * n / 2.0, transverse=max_t),
                             n, alpha, d, mix64(seed, r), intensity, opts, 2, compute)
        if out is None:
            continue
        pair_t.append(out[0])
        anchor_t.append(out[1])

    trials = len(pair_t)
    if trials == 0:
        raise CampaignError("no usable replicas for the separation/concentration events")
    anchor_mean = np.mean(anchor_t, axis=0)
    sep_hits = 0
    conc_hits = 0
    iu = np.triu_indices(m, k=1)
    for pair, anchor in zip(pair_t, anchor_t):
        sep_hits += int(np.all(pair[iu] >= sep_thr))
        conc_hits += int(np.all(np.abs(anchor - anchor_mean).max(axis=0) <= conc_thr))
    return SeparationConcentration(
        EventEstimate("separation", sep_hits, trials),
        EventEstimate("concentration", conc_hits, trials),
        float(sep_thr), float(conc_thr),
    )


@dataclass(frozen=True)
class SiteEvents:
    """Membership of one site in the three per-site good events."""

    covered: bool          # every lattice ball of the scanned radii holds a point
    linear_cost: bool      # passage times grow at least delta-linearly over lattice pairs
    cheap_detour: bool     # routing through the site costs less than k_n extra
    checked_balls: int
    checked_pairs: int
    detour_excess: float


def coverage_radius_limit(d: int) -> int:
    """Largest integer radius parameter scanned in the coverage event: beyond
    it the single-ball void probability is below the truncation threshold."""
    limit = -math.log(VOID_TRUNCATION)
    ell = 1
    while ball_volume(math.sqrt(ell), d) < limit:
        ell += 1
    return ell


def _lattice_ball(center: np.ndarray, radius: float, d: int) -> np.ndarray:
    """Integer lattice points within Euclidean ``radius`` of ``center``."""
    if radius < 0:
        return np.empty((0, d), dtype=np.int64)
    lo = np.ceil(center - radius).astype(np.int64)
    hi = np.floor(center + radius).astype(np.int64)
    if np.any(hi < lo):
        return np.empty((0, d), dtype=np.int64)
    axes = [np.arange(lo[i], hi[i] + 1) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.einsum("ij,ij->i", pts - center, pts - center) <= radius * radius
    return pts[keep]


def coverage_event(index, y, params: BenchParams, alpha: float,
                   enforce_region: bool = True) -> tuple[bool, int]:
    """The coverage half of the site events, on its own.

    Scans integer radius parameters from ceil(k_n**(1/(2 alpha))) up to the
    truncation limit; for each, every lattice center within c_delta*k_n + ell
    of y must have a sample point within sqrt(ell).  Returns (held, number of
    balls checked).
    """
    validate_alpha(alpha)
    y = np.asarray(y, dtype=np.float64)
    d = y.shape[0]
    ck = params.c_delta * params.k_n
    ell_max = coverage_radius_limit(d)
    if enforce_region:
        reach = ck + ell_max + math.sqrt(ell_max)
        if not index.owner.region.contains_ball(y, reach):
            raise InvalidRegionError(
                f"coverage check needs the ball of radius {reach:.3g} around the site inside the box")
    ell_min = max(1, math.ceil(params.k_n ** (1.0 / (2.0 * alpha))))
    covered = True
    checked = 0
    for ell in range(ell_min, ell_max + 1):
        for x in _lattice_ball(y, ck + ell, d):
            checked += 1
            if not has_point_within(index, x.astype(np.float64), math.sqrt(ell)):
                covered = False
                break
        if not covered:
            break
    return bool(covered), checked


def site_events(index, y, params: BenchParams, n: float, alpha: float,
                delta: float | None = None,
                detour_excess: float | None = None,
                opts: GeodesicOptions = DEFAULT_OPTIONS) -> SiteEvents:
    """Evaluate the coverage / linear-cost / cheap-detour events at site y.

    Coverage scans integer radii from ceil(k_n**(1/(2 alpha))) up to the
    truncation limit; for each, every lattice center within
    c_delta*k_n + radius of y must have a sample point within sqrt(radius).
    Linear cost checks T(a,b) >= delta*|a-b| over lattice pairs a, b within
    2*c_delta*k_n of y at separation >= k_n.  Cheap detour compares
    T(-n e1, y, n e1) against T(-n e1, n e1) + k_n (passing a precomputed
    excess skips those searches).
    """
    validate_alpha(alpha)
    delta = params.delta if delta is None else float(delta)
    y = np.asarray(y, dtype=np.float64)
    d = y.shape[0]
    region = index.owner.region
    ck = params.c_delta * params.k_n
    ell_max = coverage_radius_limit(d)
    reach = max(2.0 * ck, ck + ell_max + math.sqrt(ell_max))
    if not region.contains_ball(y, reach):
        raise InvalidRegionError(
            f"site events need the ball of radius {reach:.3g} around the site inside the box")

    covered, checked_balls = coverage_event(index, y, params, alpha, enforce_region=False)

    lattice = _lattice_ball(y, 2.0 * ck, d).astype(np.float64)
    linear_cost = True
    checked_pairs = 0
    if lattice.shape[0] >= 2:
        diffs = lattice[:, None, :] - lattice[None, :, :]
        sep = np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))
        need = np.argwhere(np.triu(sep >= params.k_n, k=1))
        if need.size:
            src_of = np.array([nearest_index(index, p) for p in lattice])
            dists = {}
            w_opts = opts
            for i in np.unique(need[:, 0]):
                # certify only over the lattice's own nearest points: the pair
                # checks read no other distances.  After the first source the
                # discovered radius warm-starts the rest (the certificate
                # still escalates if a later source needs more).
                sd = single_source(index, lattice[i], alpha, target_indices=src_of, opts=w_opts)
                dists[int(i)] = sd.dist
                if w_opts.initial_cutoff is None:
                    w_opts = replace(opts, initial_cutoff=max(1.2 * sd.edge_bound, 1.0))
            for i, j in need:
                checked_pairs += 1
                if dists[int(i)][src_of[j]] < delta * sep[i, j]:
                    linear_cost = False
                    break

    if detour_excess is None:
        a = np.zeros(d)
        b = np.zeros(d)
        a[0] = -n
        b[0] = n
        via = geodesic_via(index, a, y, b, alpha, opts)
        direct = passage_time(index, a, b, alpha, opts)
        detour_excess = via.cost - direct.cost
    cheap_detour = bool(detour_excess < params.k_n)
    return SiteEvents(bool(covered), bool(linear_cost), cheap_detour,
                      checked_balls, checked_pairs, float(detour_excess))


@dataclass(frozen=True)
class JumpCheck:
    """Entry/exit jump lengths where a constrained geodesic meets the site ball."""

    applicable: bool
    gated: bool            # False when the coverage event failed: nothing is asserted
    bound: float
    entry_jump: float | None
    exit_jump: float | None
    violations: int


def entry_jump_check(g: GeodesicResult, y, params: BenchParams, alpha: float,
                     covered: bool) -> JumpCheck:
    """Check the entry and exit jumps into the ball of radius c_delta*k_n.

    The bound k_n**(1/(2 alpha)) + 1 is asserted only on sites where the
    coverage event holds; elsewhere the check reports not-gated and asserts
    nothing.  Paths that never meet the ball are not applicable.
    """
    validate_alpha(alpha)
    bound = params.k_n ** (1.0 / (2.0 * alpha)) + 1.0
    cross = ball_crossing(g, y, params.c_delta * params.k_n)
    if cross is None:
        return JumpCheck(False, covered, bound, None, None, 0)
    s, t = cross
    entry = float(np.linalg.norm(g.path[s] - g.path[s - 1])) if s >= 1 else None
    exit_ = float(np.linalg.norm(g.path[t + 1] - g.path[t])) if t + 1 < g.path.shape[0] else None
    violations = 0
    if covered:
        for jump in (entry, exit_):
            if jump is not None and jump > bound:
                violations += 1
    return JumpCheck(True, covered, bound, entry, exit_, violations)


def canonical_crossing_witnesses(g: GeodesicResult, y, params: BenchParams):
    """Witness displacements floor(entry vertex) - y and floor(exit vertex) - y."""
    cross = ball_crossing(g, y, params.c_delta * params.k_n)
    if cross is None:
        raise ValueError("geodesic does not meet the site ball")
    y = np.asarray(y, dtype=np.float64)
    s, t = cross
    return np.floor(g.path[s]) - y, np.floor(g.path[t]) - y


def crossing_witness_check(g: GeodesicResult, y, z1, z2, params: BenchParams) -> bool:
    """Whether the entry/exit vertices lie within d of the witness sites y+z1, y+z2."""
    cross = ball_crossing(g, y, params.c_delta * params.k_n)
    if cross is None:
        raise ValueError("geodesic does not meet the site ball")
    y = np.asarray(y, dtype=np.float64)
    d = float(y.shape[0])
    s, t = cross
    return bool(np.linalg.norm(g.path[s] - (y + np.asarray(z1))) <= d
                and np.linalg.norm(g.path[t] - (y + np.asarray(z2))) <= d)


@dataclass(frozen=True)
class CorridorResult:
    """Monte Carlo vs closed form for the corridor (ubiquity) event."""

    estimate: EventEstimate
    analytic: float
    k_count: int
    ball_volume: float
    gate_bound: float | None   # exp(-(1/16) log phi_n) when the theta gate was asserted

    @property
    def mc_consistent(self) -> bool:
        return abs(self.estimate.p_hat - self.analytic) <= 3.0 * self.estimate.sigma()

    @property
    def gate_bound_holds(self) -> bool | None:
        if self.gate_bound is None:
            return None
        return self.analytic >= self.gate_bound


def corridor_event(n: float, y, z, params: BenchParams, replicas: int, seed: int,
                   d: int = 2, K_override: float | None = None,
                   assert_gate: bool = False) -> CorridorResult:
    """Estimate the probability that every corridor ball holds a point.

    Balls of radius c_ubiq sit at y + 2*c_ubiq*k*unit(z) for the k_count
    values of k.  Their interiors are disjoint (spacing = twice the radius),
    so void events are independent and the closed form is
    (1 - exp(-Vol(ball)))**k_count.  With ``assert_gate`` the theta gate must
    hold (GateError otherwise) and the corridor lower bound
    exp(-(1/16) log phi_n) is attached for comparison.
    """
    if assert_gate:
        if K_override is not None:
            raise GateError("the gate bound applies only to the ungated ball count")
        if not params.gate_ok(d):
            raise GateError(
                f"theta={params.theta:.3g} is not below the gate {params.theta_gate(d):.3g}")
    y = np.asarray(y, dtype=np.float64).reshape(d)
    z = np.asarray(z, dtype=np.float64).reshape(d)
    nz = np.linalg.norm(z)
    if nz == 0:
        raise ValueError("direction z must be nonzero")
    unit = z / nz
    c = params.c_ubiq
    kc = params.k_count(K_override)
    vol = ball_volume(c, d)
    analytic = (1.0 - math.exp(-vol)) ** kc
    centers = np.array([y + 2.0 * c * k * unit for k in range(kc)]) if kc else np.zeros((0, d))
    if kc:
        lo = centers.min(axis=0) - c - 0.5
        hi = centers.max(axis=0) + c + 0.5
        box = BoxRegion(lo, hi)
    hits = 0
    for r in range(replicas):
        if kc == 0:
            hits += 1
            continue
        s = sample_poisson(box, 1.0, mix64(seed, r), d)
        index = build_index(s, 1.0) if s.count else None
        good = True
        for ctr in centers:
            if index is None or not has_point_within(index, ctr, c):
                good = False
                break
        hits += int(good)
    gate_bound = math.exp(-math.log(params.phi_n) / 16.0) if assert_gate else None
    est = EventEstimate("corridor", hits, replicas, analytic_bound=analytic)
    return CorridorResult(est, float(analytic), kc, float(vol), gate_bound)


@dataclass(frozen=True)
class ResamplingReport:
    """Planted-pair passage-time gaps and the implied variance lower bound."""

    n: float
    alpha: float
    d: int
    diffs: np.ndarray
    claimed_gap: float
    violations: int
    p_event_closed_form: float
    implied_var_lb: float
    mean_sq_diff: float

    @property
    def replicas(self) -> int:
        return self.diffs.shape[0]


def resampling_variance_experiment(n: float, alpha: float, d: int, replicas: int,
                                   seed: int, strict: bool = True,
                                   opts: GeodesicOptions | None = None) -> ResamplingReport:
    """Draw planted (original, resampled) pairs and compare passage times.

    Each pair is conditioned on the planted gap event: the original cloud has
    the radius-2 ball at the origin empty; the resampled cloud instead starts
    within the unit ball and must pay an exit jump of length >= 1.  The
    claimed per-replica gap is resampled minus original >= 1; violations are
    counted (and raise CampaignError with a replica dump in strict mode — the
    claim is falsifiable and this experiment exists to test it).  The closed
    form for the event probability multiplies the three independent void /
    occupancy probabilities; times the claimed unit gap it implies a variance
    lower bound, reported alongside the empirical mean squared gap.
    """
    validate_alpha(alpha)
    if opts is None:
        opts = GeodesicOptions(exact_threshold=4096)
    w = max(n / 2.0, 2.5)
    lo = np.full(d, -w)
    hi = np.full(d, w)
    hi[0] = n + w
    region = BoxRegion(lo, hi)
    origin = np.zeros(d)
    target = np.zeros(d)
    target[0] = n
    diffs = np.empty(replicas)
    claimed = 1.0 - 1e-9
    violating = []
    for r in range(replicas):
        s_orig, s_res = plant_resample_event(region, mix64(seed, 2 * r), mix64(seed, 2 * r + 1))
        g_orig = passage_time(build_index(s_orig, 1.0), origin, target, alpha, opts)
        g_res = passage_time(build_index(s_res, 1.0), origin, target, alpha, opts)
        diffs[r] = g_res.cost - g_orig.cost
        if diffs[r] < claimed:
            violating.append((r, float(g_orig.cost), float(g_res.cost)))
    vol1 = ball_volume(1.0, d)
    vol2 = ball_volume(2.0, d)
    p_event = math.exp(-vol2) * (1.0 - math.exp(-vol1)) * math.exp(-(vol2 - vol1))
    report = ResamplingReport(
        float(n), float(alpha), int(d), diffs, claimed, len(violating),
        p_event, p_event * 1.0, float(np.mean(diffs**2)),
    )
    if strict and violating:
        head = "; ".join(f"r={r}: T={a:.4f} resampled={b:.4f}" for r, a, b in violating[:10])
        raise CampaignError(
            f"{len(violating)}/{replicas} planted replicas violate the unit gap claim "
            f"(first: {head}); full diffs in the report")
    return report


def _orthonormal_frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis whose first row is u."""
    d = u.shape[0]
    m = np.eye(d)
    m[0] = u
    q, _ = np.linalg.qr(m.T)
    if np.dot(q[:, 0], u) < 0:
        q[:, 0] *= -1
    return q.T


def _rotated_window_time(n, u, alpha, d, replica_seed, opts, pad=None):
    """T(0, n*u) in a window shaped like the axis box but aligned with u.

    Samples the bounding box and thins to the rotated rectangle, so the
    window's law is the axis construction rotated: the resulting time is
    distributed exactly as the axis-direction one.  Returns None when the
    result is uncertified or strays near the window boundary.
    """
    pad = n / 2.0 if pad is None else pad
    frame = _orthonormal_frame(np.asarray(u, dtype=np.float64))
    f_lo = np.full(d, -pad)
    f_hi = np.full(d, pad)
    f_hi[0] = n + pad
    corners_f = np.array(np.meshgrid(*[(f_lo[i], f_hi[i]) for i in range(d)],
                                     indexing="ij")).reshape(d, -1).T
    corners_w = corners_f @ frame
    aabb = BoxRegion(corners_w.min(axis=0) - 1e-9, corners_w.max(axis=0) + 1e-9)
    raw = sample_poisson(aabb, 1.0, replica_seed, d)
    in_frame = raw.points @ frame.T
    keep = np.all((in_frame >= f_lo) & (in_frame <= f_hi), axis=1)
    sample = PoissonSample(raw.points[keep], aabb, 1.0, raw.seed, d,
                           provenance="poisson|rotated-window")
    if sample.count == 0:
        return None
    index = build_index(sample, 1.0)
    g = passage_time(index, np.zeros(d), n * np.asarray(u, dtype=np.float64), alpha, opts)
    path_f = g.path @ frame.T
    margin = float(np.minimum((path_f - f_lo).min(axis=1), (f_hi - path_f).min(axis=1)).min())
    if not g.certified or margin < min(g.cutoff_radius, g.edge_bound):
        return None
    return g.cost


@dataclass(frozen=True)
class RotationReport:
    """Two-sample distribution comparisons of direction-dependent times."""

    n: float
    alpha: float
    directions: tuple
    replicas: int
    p_values: tuple          # one KS p-value per repetition per direction pair
    alpha_level: float
    excluded: int

    @property
    def non_rejection_rate(self) -> float:
        ps = np.asarray(self.p_values)
        return float((ps > self.alpha_level).mean()) if ps.size else math.nan

    def passes(self, needed_fraction: float = 0.8) -> bool:
        return self.non_rejection_rate >= needed_fraction


def rotation_invariance_test(n: float, alpha: float, d: int, directions, replicas: int,
                             seed: int, repetitions: int = 1, alpha_level: float = 0.01,
                             corrupted: bool = False,
                             opts: GeodesicOptions = DEFAULT_OPTIONS) -> RotationReport:
    """Pairwise KS tests of T(0, n*u) samples across directions.

    The sound sampler uses per-direction rotated windows, making the compared
    laws equal by construction; ``corrupted`` instead reuses the fixed axis
    box for every direction (no padding adjustment, not rotation-symmetric),
    a negative control that the test is expected to reject.
    """
    validate_alpha(alpha)
    dirs = [np.asarray(u, dtype=np.float64) / np.linalg.norm(u) for u in directions]
    if len(dirs) < 2:
        raise ValueError("need at least two directions")
    p_values = []
    excluded = 0
    for rep in range(repetitions):
        values = []
        for i_dir, u in enumerate(dirs):
            vals = []
            for r in range(replicas):
                rseed = mix64(seed, rep * 1000003 + i_dir * 1009 + r)
                if corrupted:
                    region = _segment_box_for(n, d)
                    s = sample_poisson(region, 1.0, rseed, d)
                    if s.count == 0:
                        excluded += 1
                        continue
                    g = passage_time(build_index(s, 1.0), np.zeros(d), n * u, alpha, opts)
                    vals.append(g.cost)
                else:
                    cost = _rotated_window_time(n, u, alpha, d, rseed, opts)
                    if cost is None:
                        excluded += 1
                        continue
                    vals.append(cost)
            values.append(np.asarray(vals))
        for i in range(len(dirs)):
            for j in range(i + 1, len(dirs)):
                p_values.append(float(ks_2samp(values[i], values[j]).pvalue))
    return RotationReport(float(n), float(alpha), tuple(tuple(u) for u in dirs),
                          replicas, tuple(p_values), alpha_level, excluded)


def _segment_box_for(n: float, d: int) -> BoxRegion:
    lo = np.full(d, -n / 2.0)
    hi = np.full(d, n / 2.0)
    hi[0] = 1.5 * n
    return BoxRegion(lo, hi)


@dataclass(frozen=True)
class TriangleReport:
    """Exact-per-realization order checks over sampled triples."""

    triples: int
    symmetry_pairs: int
    subadditivity_violations: int
    symmetry_violations: int
    max_subadditivity_excess: float
    max_symmetry_relerr: float


def triangle_symmetry_experiment(configs: int, queries_per_config: int, box_side: float,
                                 alpha: float, d: int, seed: int,
                                 subadd_tol: float = 1e-9, sym_rtol: float = 1e-12,
                                 opts: GeodesicOptions | None = None) -> TriangleReport:
    """Sample point-cloud configs, compute all pairwise times among a few query
    locations per config, and check subadditivity and symmetry on every
    ordered triple / pair."""
    validate_alpha(alpha)
    if opts is None:
        opts = GeodesicOptions(exact_threshold=4096)
    lo = np.zeros(d)
    hi = np.full(d, box_side)
    region = BoxRegion(lo, hi)
    triples = 0
    sym_pairs = 0
    sub_viol = 0
    sym_viol = 0
    max_excess = -math.inf
    max_relerr = 0.0
    for c in range(configs):
        s = sample_poisson(region, 1.0, mix64(seed, 2 * c), d)
        if s.count < 2:
            continue
        index = build_index(s, 1.0)
        rng = np.random.default_rng(mix64(seed, 2 * c + 1))
        pts = lo + rng.random((queries_per_config, d)) * (hi - lo)
        srcs = [single_source(index, p, alpha, target_points=pts, opts=opts) for p in pts]
        idx = [nearest_index(index, p) for p in pts]
        m = len(pts)
        t = np.array([[srcs[i].dist[idx[j]] for j in range(m)] for i in range(m)])
        for i in range(m):
            for j in range(i + 1, m):
                sym_pairs += 1
                denom = max(1.0, abs(t[i, j]), abs(t[j, i]))
                relerr = abs(t[i, j] - t[j, i]) / denom
                max_relerr = max(max_relerr, relerr)
                if relerr > sym_rtol:
                    sym_viol += 1
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    if i == j or j == k or i == k:
                        continue
                    triples += 1
                    excess = t[i, k] - (t[i, j] + t[j, k])
                    max_excess = max(max_excess, excess)
                    if excess > subadd_tol:
                        sub_viol += 1
    return TriangleReport(triples, sym_pairs, sub_viol, sym_viol,
                          float(max_excess), float(max_relerr))
