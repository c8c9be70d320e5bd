import math

import numpy as np
import pytest

import fpplab as F
from fpplab.errors import CampaignError
from fpplab.estimators import (
    TEstimate,
    affine_fit_estimate,
    build_fluctuation_report,
    estimate_T,
    fluctuation_lower_bound,
    replica_geodesic,
    run_passage_replica,
    time_constant_estimate,
)
from fpplab.geodesic import passage_time
from fpplab.streamstats import StreamStats


def test_replica_deterministic():
    a = run_passage_replica(12, 2.0, 2, 987654)
    b = run_passage_replica(12, 2.0, 2, 987654)
    assert a == b


def test_estimate_deterministic_and_positive_variance():
    e1 = estimate_T(12, 2.0, 2, 60, 31415)
    e2 = estimate_T(12, 2.0, 2, 60, 31415)
    assert np.array_equal(e1.values, e2.values)
    assert e1.excluded == 0
    # variance-scale strictly positive at 3 sigma
    assert e1.psi_hat - 3 * e1.stats.variance_std_error() > 0
    assert e1.phi_hat == pytest.approx(math.sqrt(12 / e1.psi_hat))


def test_parallel_matches_serial():
    serial = estimate_T(10, 2.0, 2, 24, 2718, workers=1)
    parallel = estimate_T(10, 2.0, 2, 24, 2718, workers=2)
    assert np.array_equal(serial.values, parallel.values)
    assert serial.stats.mean == parallel.stats.mean


def test_self_consistency_across_master_seeds():
    a = estimate_T(16, 2.0, 2, 120, 1001)
    b = estimate_T(16, 2.0, 2, 120, 9009)
    gap = abs(a.stats.mean - b.stats.mean)
    assert gap <= 3 * math.sqrt(a.stats.std_error() ** 2 + b.stats.std_error() ** 2)


def test_exclusion_budget_enforced():
    # a box that can never be boundary-clear with no doubling allowed
    with pytest.raises(CampaignError):
        estimate_T(12, 2.0, 2, 10, 5, padding=0.4, max_box_doublings=0)


def test_replica_geodesic_box_doubling_reported():
    g, grid, attempts = replica_geodesic(8, 2.0, 2, 424242)
    assert g.certified
    assert attempts >= 1
    assert grid.owner.region.contains(g.path).all()


def test_unit_grid_line_time_constant():
    # deterministic toy: points on the integer line, unit steps cost 1 each
    n = 20
    pts = np.array([[float(i), 0.0] for i in range(n + 1)])
    region = F.BoxRegion(np.array([-1.0, -1.0]), np.array([n + 1.0, 1.0]))
    sample = F.PoissonSample(pts, region, 1.0, 0, 2)
    grid = F.build_index(sample, 1.0)
    g = passage_time(grid, [0, 0], [n, 0], 2.0)
    assert g.cost == float(n)
    est = TEstimate(n, 2.0, 2, StreamStats.from_values([g.cost, g.cost]),
                    np.array([g.cost, g.cost]))
    assert time_constant_estimate(est) == 1.0


def synthetic_estimates(values_by_n):
    out = {}
    for n, vals in values_by_n.items():
        vals = np.asarray(vals, dtype=float)
        out[float(n)] = TEstimate(float(n), 2.0, 2, StreamStats.from_values(vals), vals)
    return out


def test_report_identities():
    ests = synthetic_estimates({
        8: [9.5, 10.5, 9.8, 10.2],
        16: [18.9, 19.1, 19.6, 18.4],
        32: [36.2, 35.8, 36.4, 35.6],
    })
    rep = build_fluctuation_report(2.0, 2, [8, 16, 32], 4, 0, estimates=ests)
    # algebraic identity: var * phi^2 == n
    for n, v, p in zip(rep.n_values, rep.var_T, rep.phi_hat):
        assert v * p * p == pytest.approx(n, rel=1e-12)
    # calibration point: zero by construction
    assert rep.fluct_lb[-1] == 0.0
    assert rep.g_hat == pytest.approx(rep.mean_T[-1] / 32.0)


def test_fluct_lb_shift_property():
    base = {8: [9.0, 10.0, 11.0], 32: [35.0, 36.0, 37.0]}
    shifted = {8: [v + 2.5 for v in base[8]], 32: base[32]}
    r1 = build_fluctuation_report(2.0, 2, [8, 32], 3, 0, estimates=synthetic_estimates(base))
    r2 = build_fluctuation_report(2.0, 2, [8, 32], 3, 0, estimates=synthetic_estimates(shifted))
    assert r2.fluct_lb[0] - r1.fluct_lb[0] == pytest.approx(2.5, rel=1e-12)
    assert r2.fluct_lb[1] == r1.fluct_lb[1] == 0.0


def test_fluctuation_lower_bound_values():
    assert fluctuation_lower_bound([10.0, 21.0], [8, 16], 1.25) == [0.0, 1.0]


def test_affine_fit_recovers_slope():
    n = np.array([8, 16, 32, 64])
    means = 1.7 * n + 3.0
    assert affine_fit_estimate(n, means) == pytest.approx(1.7, rel=1e-9)


def test_small_sweep_trend_and_diagnostics():
    rep = build_fluctuation_report(2.0, 2, [8, 16], 80, 24680)
    # subadditive trend at 3 sigma on the doubling pair
    se8 = math.sqrt(rep.var_T[0] / rep.replicas)
    se16 = math.sqrt(rep.var_T[1] / rep.replicas)
    sigma = math.sqrt(se16**2 + 4 * se8**2)
    assert rep.mean_T[1] <= 2 * rep.mean_T[0] + 3 * sigma
    # equivalently, the per-n time-constant proxy is nonincreasing within CI
    assert rep.mean_T[1] / 16 <= rep.mean_T[0] / 8 + 3 * sigma / 16
    assert rep.fluct_lb[0] >= -3 * math.sqrt(se8**2 + (8 / 16) ** 2 * se16**2)
    pairs = rep.diagnostic_pairs()
    assert len(pairs) == 2 and pairs[1][1] == 0.0
