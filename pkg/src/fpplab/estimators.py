"""Monte Carlo estimation of passage-time statistics.

Replicated draws of T(0, n*e1) on padded boxes feed mergeable accumulators;
from those come the variance scale, its companion sqrt(n/variance), the
time-constant proxy (mean at the largest n over n, an upward-biased estimate
by subadditivity), and the downward-biased non-random fluctuation statistic
mean_T(n) - n * g_hat.  Every replica is seeded from the master seed and is
reproducible in isolation; campaign results are independent of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CampaignError
from .geodesic import DEFAULT_OPTIONS, GeodesicOptions, passage_time, validate_alpha
from .points import BoxRegion, build_index, extend_sample, sample_poisson
from .seeds import mix64
from .streamstats import Z95, StreamStats

__all__ = [
    "ReplicaRecord",
    "TEstimate",
    "replica_geodesic",
    "estimate_T",
    "FluctuationReport",
    "build_fluctuation_report",
    "time_constant_estimate",
    "affine_fit_estimate",
    "fluctuation_lower_bound",
]


@dataclass(frozen=True)
class ReplicaRecord:
    """One replica's certified passage time (or the reason it was excluded)."""

    value: float
    certified: bool
    boundary_clear: bool
    attempts: int
    sample_count: int

    @property
    def included(self) -> bool:
        return self.certified and self.boundary_clear


def _segment_region(n: float, d: int, pad: float, transverse: float = 0.0) -> BoxRegion:
    """Box holding the segment [0, n*e1] with padding ``pad`` on every side
    (plus extra transverse half-width when off-axis targets are in play)."""
    lo = np.full(d, -(pad + transverse))
    hi = np.full(d, pad + transverse)
    lo[0] = -pad
    hi[0] = n + pad
    return BoxRegion(lo, hi)


def replica_geodesic(n: float, alpha: float, d: int, replica_seed: int,
                     intensity: float = 1.0, padding: float | None = None,
                     opts: GeodesicOptions = DEFAULT_OPTIONS,
                     max_box_doublings: int = 2):
    """The certified geodesic of T(0, n*e1) on one replica's padded-box sample.

    If the geodesic is uncertified or strays within its search radius of the
    boundary, the box padding doubles (the sample is extended outward,
    preserving existing points) up to the budget.  Returns
    (geodesic, index, attempts); callers decide whether an unclear result is
    excluded.
    """
    pad = n / 2.0 if padding is None else float(padding)
    region = _segment_region(n, d, pad)
    sample = sample_poisson(region, intensity, mix64(replica_seed, 0), d)
    origin = np.zeros(d)
    target = np.zeros(d)
    target[0] = n
    attempts = 0
    while True:
        grid = build_index(sample, intensity ** (-1.0 / d))
        g = passage_time(grid, origin, target, alpha, opts)
        attempts += 1
        if (g.certified and g.boundary_clear) or attempts > max_box_doublings:
            return g, grid, attempts
        pad *= 2.0
        sample = extend_sample(sample, _segment_region(n, d, pad), mix64(replica_seed, attempts))


def run_passage_replica(n: float, alpha: float, d: int, replica_seed: int,
                        intensity: float = 1.0, padding: float | None = None,
                        opts: GeodesicOptions = DEFAULT_OPTIONS,
                        max_box_doublings: int = 2) -> ReplicaRecord:
    """Compute T(0, n*e1) on a fresh padded-box sample (see replica_geodesic)."""
    g, grid, attempts = replica_geodesic(n, alpha, d, replica_seed, intensity,
                                         padding, opts, max_box_doublings)
    return ReplicaRecord(g.cost, g.certified, g.boundary_clear, attempts, grid.owner.count)


@dataclass(frozen=True)
class TEstimate:
    """Accumulated passage-time statistics at one n."""

    n: float
    alpha: float
    d: int
    stats: StreamStats
    values: np.ndarray = field(repr=False)
    excluded: int = 0
    attempted: int = 0

    @property
    def psi_hat(self) -> float:
        """Sample variance of T (the variance-scale estimate)."""
        return self.stats.variance()

    @property
    def phi_hat(self) -> float:
        """sqrt(n / variance), defined when the variance is positive."""
        v = self.psi_hat
        return math.sqrt(self.n / v) if v > 0 else math.nan


def _replica_task(args) -> ReplicaRecord:
    n, alpha, d, seed, intensity, padding, opts, max_dbl = args
    return run_passage_replica(n, alpha, d, seed, intensity, padding, opts, max_dbl)


def estimate_T(n: float, alpha: float, d: int, replicas: int, master_seed: int,
               intensity: float = 1.0, padding: float | None = None,
               opts: GeodesicOptions = DEFAULT_OPTIONS, workers: int = 1,
               exclusion_budget: float = 0.01, max_box_doublings: int = 2,
               units: str = "passage-time") -> TEstimate:
    """Monte Carlo estimate of T(0, n*e1) over independent replicas.

    Replica r runs on seed mix64(master_seed, r).  Excluded replicas
    (uncertified after the box-doubling budget) are counted; exceeding
    ``exclusion_budget`` as a fraction of replicas raises CampaignError.
    Results are reduced in replica order, so they do not depend on ``workers``.
    """
    validate_alpha(alpha)
    if replicas < 2:
        raise ValueError(f"need at least 2 replicas, got {replicas}")
    tasks = [(n, alpha, d, mix64(master_seed, r), intensity, padding, opts, max_box_doublings)
             for r in range(replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replica_task, tasks, chunksize=max(1, replicas // (8 * workers))))
    else:
        records = [_replica_task(t) for t in tasks]
    stats = StreamStats(units=units)
    values = []
    excluded = 0
    for rec in records:
        if rec.included:
            stats.push(rec.value)
            values.append(rec.value)
        else:
            excluded += 1
    if excluded > exclusion_budget * replicas:
        raise CampaignError(
            f"{excluded}/{replicas} replicas excluded at n={n} "
            f"(budget {exclusion_budget:.1%}); raise padding or the doubling budget")
    return TEstimate(float(n), float(alpha), int(d), stats,
                     np.asarray(values), excluded, replicas)


def time_constant_estimate(est: TEstimate) -> float:
    """mean_T / n at a single n: an upward-biased time-constant estimate.

    Subadditivity makes E T(0, n*e1)/n nonincreasing along doubling n, so the
    largest available n gives the least-biased (still one-sided) value.
    """
    return est.stats.mean / est.n


def affine_fit_estimate(n_values, means) -> float:
    """Slope of an affine fit of mean_T against n over the top half of n.

    Emitted for comparison only; estimation and acceptance use the one-sided
    mean/n proxy whose bias direction is provable.
    """
    n_values = np.asarray(n_values, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    keep = n_values >= np.median(n_values)
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(n_values[keep], means[keep], 1)
    return float(slope)


@dataclass(frozen=True)
class FluctuationReport:
    """Per-n passage-time statistics and the fluctuation diagnostic table."""

    alpha: float
    d: int
    n_values: tuple
    replicas: int
    master_seed: int
    mean_T: tuple
    var_T: tuple
    phi_hat: tuple
    g_hat: float
    g_affine: float
    fluct_lb: tuple
    ci95_mean: tuple
    ci95_var: tuple
    excluded: tuple

    def rows(self) -> list[dict]:
        out = []
        for i, n in enumerate(self.n_values):
            out.append({
                "alpha": self.alpha, "d": self.d, "n": n, "replicas": self.replicas,
                "mean_T": self.mean_T[i], "var_T": self.var_T[i],
                "phi_hat": self.phi_hat[i], "g_hat": self.g_hat,
                "fluct_lb": self.fluct_lb[i], "ci95_mean": self.ci95_mean[i],
                "ci95_var": self.ci95_var[i], "excluded": self.excluded[i],
            })
        return out

    def diagnostic_pairs(self) -> list[tuple[float, float]]:
        """(log phi_hat, fluct_lb) pairs for the fluctuation-growth plot."""
        return [(math.log(p), f) for p, f in zip(self.phi_hat, self.fluct_lb) if p > 0]


def fluctuation_lower_bound(mean_T, n_values, g_hat: float) -> list[float]:
    """mean_T(n) - n * g_hat: downward-biased non-random fluctuation statistic.

    Since g_hat = mean_T(N)/N overestimates the time constant, subtracting
    n*g_hat underestimates E T(0,n e1) - g n; the value is 0 at n = N by
    construction and nonnegative in expectation for n dividing N.
    """
    return [float(m - n * g_hat) for m, n in zip(mean_T, n_values)]


def build_fluctuation_report(alpha: float, d: int, n_values, replicas: int,
                             master_seed: int, intensity: float = 1.0,
                             opts: GeodesicOptions = DEFAULT_OPTIONS,
                             workers: int = 1,
                             estimates: dict | None = None) -> FluctuationReport:
    """Run (or reuse) the per-n campaigns and assemble the report.

    ``estimates`` may carry precomputed TEstimate values keyed by n (the
    campaign runner reuses them across experiments); missing ones are run
    here with seed substream mix64(master_seed, index of n).
    """
    n_values = sorted(float(n) for n in n_values)
    ests = []
    for i, n in enumerate(n_values):
        if estimates is not None and n in estimates:
            ests.append(estimates[n])
        else:
            ests.append(estimate_T(n, alpha, d, replicas, mix64(master_seed, i),
                                   intensity=intensity, opts=opts, workers=workers))
    means = [e.stats.mean for e in ests]
    variances = [e.psi_hat for e in ests]
    g_hat = time_constant_estimate(ests[-1])
    return FluctuationReport(
        alpha=float(alpha), d=int(d), n_values=tuple(n_values), replicas=int(replicas),
        master_seed=int(master_seed), mean_T=tuple(means), var_T=tuple(variances),
        phi_hat=tuple(e.phi_hat for e in ests), g_hat=g_hat,
        g_affine=affine_fit_estimate(n_values, means),
        fluct_lb=tuple(fluctuation_lower_bound(means, n_values, g_hat)),
        ci95_mean=tuple(e.stats.ci95_halfwidth() for e in ests),
        ci95_var=tuple(Z95 * e.stats.variance_std_error() for e in ests),
        excluded=tuple(e.excluded for e in ests),
    )
