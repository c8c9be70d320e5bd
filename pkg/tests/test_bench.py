import math
from fractions import Fraction

import numpy as np
import pytest

import fpplab as F
from fpplab.bench import (
    BenchParams,
    EventEstimate,
    build_midpoints,
    canonical_crossing_witnesses,
    corridor_event,
    coverage_event,
    crossing_witness_check,
    entry_jump_check,
    midpoint_argmin,
    midpoint_gain,
    resampling_variance_experiment,
    rotation_invariance_test,
    separation_concentration,
    site_events,
    triangle_symmetry_experiment,
    verify_midpoints,
)
from fpplab.errors import CampaignError, GateError, InvalidRegionError
from fpplab.geodesic import brute_force_passage_time, geodesic_via, passage_time
from fpplab.points import BoxRegion, PoissonSample, build_index, sample_poisson


class TestBenchParams:
    def test_c_delta_exact(self):
        assert BenchParams(0.1, 0.5, 0.2, 2.0).c_delta == 12.0
        assert BenchParams(0.1, 2.0, 0.2, 2.0).c_delta == 6.0

    def test_gate_arithmetic_on_rationals(self):
        # delta * c_delta = 4 (delta + 1) >= 4 > 2, exactly, for every delta > 0
        rng = np.random.default_rng(0)
        for _ in range(200):
            delta = Fraction(int(rng.integers(1, 1000)), int(rng.integers(1, 1000)))
            c_delta = 4 * (1 + 1 / delta)
            assert delta * c_delta == 4 * (delta + 1)
            assert delta * c_delta >= 4 > 2

    def test_gated_constructor(self):
        p = BenchParams.with_gated_theta(2, phi_n=3.0)
        assert p.gate_ok(2)
        assert p.theta == pytest.approx(0.9 * 2.0 ** (-16) * 0.2**2 / 12.0)

    def test_k_count(self):
        p = BenchParams(1.0, 0.5, 0.2, 2.0)
        assert p.k_count(0.5) == 0       # budget below 1: no ball required
        assert p.k_count(1.0) == 1       # only the ball at the site itself
        assert p.k_count(1.5) == 2
        assert p.k_count(9.0) == math.floor(8.0 / 0.4) + 1

    def test_invalid(self):
        with pytest.raises(ValueError):
            BenchParams(0.0, 0.5, 0.2, 2.0)
        with pytest.raises(ValueError):
            BenchParams(0.1, 0.5, 0.3, 2.0)
        with pytest.raises(ValueError):
            BenchParams(0.1, 0.5, 0.2, 0.5)


class TestMidpoints:
    def test_single_point_family(self):
        fam = build_midpoints(49.0, 1.0, 2)
        assert fam.points.shape == (1, 2)
        assert np.linalg.norm(fam.points[0]) == pytest.approx(7.0)
        assert verify_midpoints(fam)

    def test_worked_example(self):
        fam = build_midpoints(100.0, 4.0, 2)
        assert np.allclose(fam.points, [[0, 5], [0, 10]])
        assert fam.spacing == pytest.approx(5.0)
        assert verify_midpoints(fam)

    def test_random_constructions_verify(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            n = float(rng.uniform(4, 500))
            phi = float(rng.uniform(1, 15))
            assert verify_midpoints(build_midpoints(n, phi, 2))

    def test_symmetric_mode(self):
        fam = build_midpoints(100.0, 4.0, 2, symmetric=True)
        assert np.allclose(fam.points, [[0, 5], [0, -5]])
        assert verify_midpoints(fam)

    def test_empty_family_rejected(self):
        with pytest.raises(ValueError):
            build_midpoints(100.0, 0.5, 2)

    def test_verify_rejects_bad_families(self):
        fam = build_midpoints(100.0, 4.0, 2)
        squeezed = type(fam)(fam.n, fam.phi_n, fam.points * 0.1, fam.spacing)
        assert not verify_midpoints(squeezed)


class TestCorridor:
    def test_analytic_single_ball(self):
        p = BenchParams(1.0, 0.5, 0.25, 3.0)
        res = corridor_event(10, [0, 0], [0, 1], p, replicas=2000, seed=5, K_override=1.0)
        assert res.k_count == 1
        assert res.analytic == pytest.approx(1 - math.exp(-math.pi / 16), rel=1e-12)
        assert res.analytic == pytest.approx(0.1782, abs=2e-4)
        assert res.mc_consistent

    def test_vacuous_when_budget_below_one(self):
        p = BenchParams(1.0, 0.5, 0.2, 3.0)
        res = corridor_event(10, [0, 0], [1, 0], p, replicas=50, seed=1, K_override=0.99)
        assert res.k_count == 0 and res.analytic == 1.0 and res.estimate.p_hat == 1.0

    def test_monte_carlo_matches_closed_form(self):
        p = BenchParams(1.0, 0.5, 0.25, 3.0)
        res = corridor_event(10, [0.3, -0.2], [1, 1], p, replicas=10_000, seed=6, K_override=1.5)
        assert res.k_count == 2
        assert res.mc_consistent

    def test_gated_default_is_vacuous_and_bounded(self):
        p = BenchParams.with_gated_theta(2, phi_n=4.0)
        res = corridor_event(32, [0, 0], [0, 1], p, replicas=200, seed=2, assert_gate=True)
        assert res.k_count == 0 and res.analytic == 1.0
        assert res.gate_bound == pytest.approx(4.0 ** (-1 / 16.0))
        assert res.gate_bound_holds

    def test_gate_errors(self):
        hot = BenchParams(1.0, 0.5, 0.2, 3.0)  # far above the gate
        with pytest.raises(GateError):
            corridor_event(10, [0, 0], [0, 1], hot, replicas=10, seed=3, assert_gate=True)
        cold = BenchParams.with_gated_theta(2, phi_n=3.0)
        with pytest.raises(GateError):
            corridor_event(10, [0, 0], [0, 1], cold, replicas=10, seed=3,
                           K_override=2.0, assert_gate=True)


class TestMidpointGain:
    def test_nonnegative_and_reproducible(self):
        stats, vals = midpoint_gain(12, 2.0, 2, 25, 777)
        stats2, vals2 = midpoint_gain(12, 2.0, 2, 25, 777)
        assert np.array_equal(vals, vals2)
        assert vals.min() >= -1e-9
        assert stats.count == 25

    def test_small_instance_matches_oracle(self):
        rng = np.random.default_rng(50)
        pts = rng.random((12, 2)) * 6 - np.array([3.0, 3.0])
        region = BoxRegion(np.array([-3.0, -3.0]), np.array([3.0, 3.0]))
        grid = build_index(PoissonSample(pts, region, 1.0, 0, 2), 1.0)
        a, y, b = np.array([-2.5, 0.0]), np.array([0.0, 0.0]), np.array([2.5, 0.0])
        via = geodesic_via(grid, a, y, b, 2.0)
        want = (brute_force_passage_time(pts, a, y, 2.0)[0]
                + brute_force_passage_time(pts, y, b, 2.0)[0])
        assert via.cost == pytest.approx(want, rel=1e-12)
        direct = passage_time(grid, a, b, 2.0)
        assert via.cost >= direct.cost - 1e-9


class TestArgmin:
    def test_singleton_family_always_fires(self):
        fam = build_midpoints(16.0, 1.0, 2)
        ests, ties = midpoint_argmin(16, fam, 2.0, 10, 42)
        assert ties == 0
        assert ests[0].hits == ests[0].trials > 0

    def test_disjointness_and_total_probability(self):
        fam = build_midpoints(16.0, 4.0, 2)
        ests, ties = midpoint_argmin(16, fam, 2.0, 30, 43)
        total_hits = sum(e.hits for e in ests)
        assert total_hits + ties <= 30
        assert sum(e.p_hat for e in ests) <= 1.0 + 1e-12

    def test_mirror_symmetric_candidates_equal_rates(self):
        fam = build_midpoints(24.0, 4.0, 2, symmetric=True)
        ests, _ = midpoint_argmin(24, fam, 2.0, 150, 44)
        p1, p2 = ests[0].p_hat, ests[1].p_hat
        n1 = ests[0].trials
        pooled = (ests[0].hits + ests[1].hits) / (2 * n1)
        sigma = math.sqrt(max(2 * pooled * (1 - pooled) / n1, 1e-12))
        assert abs(p1 - p2) <= 3 * sigma


class TestSeparationConcentration:
    def test_zero_thresholds_are_certain(self):
        fam = build_midpoints(12.0, 2.0, 2)
        sc = separation_concentration(12, fam, 2.0, 12, 45, sep_threshold=0.0,
                                      conc_threshold=float("inf"))
        assert sc.separation.p_hat == 1.0
        assert sc.concentration.p_hat == 1.0

    def test_default_thresholds_reasonable(self):
        fam = build_midpoints(16.0, 2.2, 2)
        sc = separation_concentration(16, fam, 2.0, 40, 46)
        assert 0.0 <= sc.separation.p_hat <= 1.0
        assert 0.0 <= sc.concentration.p_hat <= 1.0

    def test_frequencies_nondecreasing_along_sweep(self):
        prev_sep = prev_conc = 0.0
        prev_sig = 0.0
        for i, n in enumerate((8.0, 16.0, 32.0)):
            fam = build_midpoints(n, 2.0 + 0.3 * i, 2)
            sc = separation_concentration(n, fam, 2.0, 50, 47 + i)
            sig = 3 * math.sqrt(sc.separation.ci95**2 + prev_sig**2 + 1e-6)
            assert sc.separation.p_hat >= prev_sep - sig
            assert sc.concentration.p_hat >= prev_conc - sig
            prev_sep, prev_conc = sc.separation.p_hat, sc.concentration.p_hat
            prev_sig = sc.separation.ci95


def small_site_fixture(k_n=1.0, delta=2.0, seed=4242, n_site=20.0, empty=False):
    params = BenchParams(theta=k_n / math.log(math.e), delta=delta, c_ubiq=0.2,
                         phi_n=math.e)
    reach = max(2 * params.c_delta * params.k_n, params.c_delta * params.k_n + 12.1)
    w = reach + 2
    region = BoxRegion(np.array([-n_site - w, -w]), np.array([n_site + w, w]))
    if empty:
        pts = np.array([[n_site, 0.0], [-n_site, 0.0]])
        sample = PoissonSample(pts, region, 1.0, 0, 2)
    else:
        sample = sample_poisson(region, 1.0, seed, 2)
    return build_index(sample, 1.0), params, n_site


class TestSiteEvents:
    def test_empty_sample_not_covered(self):
        index, params, n_site = small_site_fixture(empty=True)
        ev = site_events(index, [0.0, 0.0], params, n_site, 2.0, detour_excess=0.0)
        assert not ev.covered

    def test_lattice_cover_is_covered(self):
        index, params, n_site = small_site_fixture(empty=True)
        region = index.owner.region
        xs = np.arange(math.ceil(region.lo[0]), math.floor(region.hi[0]) + 1)
        ys = np.arange(math.ceil(region.lo[1]), math.floor(region.hi[1]) + 1)
        pts = np.array([[x, y] for x in xs for y in ys], dtype=float)
        dense = build_index(PoissonSample(pts, region, 1.0, 0, 2), 1.0)
        covered, checked = coverage_event(dense, [0.0, 0.0], params, 2.0)
        assert covered and checked > 0

    def test_vacuous_pair_set_with_microscopic_budget(self):
        pgated = BenchParams.with_gated_theta(2, phi_n=3.0)
        region = BoxRegion(np.array([-40.0, -16.0]), np.array([40.0, 16.0]))
        sample = sample_poisson(region, 1.0, 777, 2)
        ev = site_events(build_index(sample, 1.0), [0.0, 0.0], pgated, 20.0, 2.0,
                         detour_excess=1.0)
        assert ev.linear_cost and ev.checked_pairs == 0  # no lattice pair to test

    def test_region_precondition(self):
        index, params, n_site = small_site_fixture()
        with pytest.raises(InvalidRegionError):
            site_events(index, [0.0, index.owner.region.hi[1] - 1.0], params, n_site, 2.0)

    def test_full_evaluation_runs(self):
        index, params, n_site = small_site_fixture()
        ev = site_events(index, [0.0, 0.0], params, n_site, 2.0)
        assert ev.checked_balls > 0
        assert isinstance(ev.covered, bool) and isinstance(ev.linear_cost, bool)
        assert ev.detour_excess >= -1e-9


class TestJumpCheck:
    def test_path_inside_ball_vacuous(self):
        region = BoxRegion(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
        pts = np.array([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        grid = build_index(PoissonSample(pts, region, 1.0, 0, 2), 1.0)
        g = passage_time(grid, [-1, 0], [1, 0], 2.0)
        params = BenchParams(theta=3.0, delta=0.5, c_ubiq=0.2, phi_n=math.e)
        jc = entry_jump_check(g, [0.0, 0.0], params, 2.0, covered=True)
        assert jc.applicable and jc.entry_jump is None and jc.exit_jump is None
        assert jc.violations == 0

    def test_gate_blocks_assertion(self):
        # hand-built sparse sample: the entry jump (length 15) breaks the
        # bound, but it is only counted when the coverage gate is open
        region = BoxRegion(np.array([-20.0, -5.0]), np.array([20.0, 5.0]))
        pts = np.array([[-15.0, 0.0], [0.0, 0.0], [15.0, 0.0]])
        grid = build_index(PoissonSample(pts, region, 1.0, 0, 2), 1.0)
        g = passage_time(grid, [-15, 0], [15, 0], 2.0)
        params = BenchParams(theta=0.5, delta=0.5, c_ubiq=0.2, phi_n=math.e)  # ball radius 3
        jc_gated = entry_jump_check(g, [0.0, 0.0], params, 2.0, covered=False)
        assert jc_gated.applicable and jc_gated.violations == 0
        jc_open = entry_jump_check(g, [0.0, 0.0], params, 2.0, covered=True)
        assert jc_open.applicable and jc_open.violations >= 1
        assert jc_open.entry_jump == pytest.approx(15.0)

    def test_no_crossing_not_applicable(self):
        region = BoxRegion(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
        pts = np.array([[-4.0, 4.0], [4.0, 4.0]])
        grid = build_index(PoissonSample(pts, region, 1.0, 0, 2), 1.0)
        g = passage_time(grid, [-4, 4], [4, 4], 2.0)
        params = BenchParams(theta=0.1, delta=0.5, c_ubiq=0.2, phi_n=math.e)
        jc = entry_jump_check(g, [0.0, -4.0], params, 2.0, covered=True)
        assert not jc.applicable and jc.violations == 0


class TestCrossingWitnesses:
    def setup_method(self):
        region = BoxRegion(np.array([-12.0, -6.0]), np.array([12.0, 6.0]))
        self.pts = np.array([[-9.0, 0.2], [-4.0, -0.4], [0.0, 0.3], [4.0, 0.1], [9.0, -0.2]])
        self.grid = build_index(PoissonSample(self.pts, region, 1.0, 0, 2), 1.0)
        self.g = passage_time(self.grid, [-9, 0], [9, 0], 2.0)
        self.params = BenchParams(theta=5.0, delta=0.5, c_ubiq=0.2, phi_n=math.e)

    def test_canonical_witnesses_validate(self):
        y = np.array([0.0, 0.0])
        z1, z2 = canonical_crossing_witnesses(self.g, y, self.params)
        assert crossing_witness_check(self.g, y, z1, z2, self.params)
        ck = self.params.c_delta * self.params.k_n
        assert np.linalg.norm(z1) <= 2 * ck and np.linalg.norm(z2) <= 2 * ck

    def test_displaced_witness_fails(self):
        y = np.array([0.0, 0.0])
        z1, z2 = canonical_crossing_witnesses(self.g, y, self.params)
        assert not crossing_witness_check(self.g, y, z1 + 5.0, z2, self.params)

    def test_error_without_crossing(self):
        tiny = BenchParams.with_gated_theta(2, phi_n=math.e)
        with pytest.raises(ValueError):
            canonical_crossing_witnesses(self.g, [0.0, 5.5], tiny)


class TestResamplingExperiment:
    def test_report_fields_and_closed_form(self):
        rep = resampling_variance_experiment(10, 2.0, 2, 60, 999, strict=False)
        assert rep.replicas == 60
        want = (math.exp(-4 * math.pi) * (1 - math.exp(-math.pi)) * math.exp(-3 * math.pi))
        assert rep.p_event_closed_form == pytest.approx(want, rel=1e-12)
        assert rep.mean_sq_diff > 0

    def test_strict_mode_raises_on_violation(self):
        # the unit-gap claim fails on real draws at a large rate; 60 replicas
        # are ample to witness it
        with pytest.raises(CampaignError):
            resampling_variance_experiment(10, 2.0, 2, 60, 999, strict=True)


class TestRotation:
    def test_same_direction_self_calibration(self):
        rep = rotation_invariance_test(12, 2.0, 2, [[1, 0], [1, 0]], 60, 888,
                                       repetitions=3)
        assert rep.non_rejection_rate >= 2 / 3

    def test_axis_vs_diagonal_not_rejected(self):
        rep = rotation_invariance_test(16, 2.0, 2, [[1, 0], [1, 1]], 100, 889,
                                       repetitions=4)
        assert rep.passes(needed_fraction=0.75)

    def test_corrupted_sampler_rejected(self):
        rep = rotation_invariance_test(24, 2.0, 2, [[1, 0], [1, 1]], 150, 890,
                                       repetitions=1, corrupted=True)
        assert all(p < 0.01 for p in rep.p_values)


class TestTriangleExperiment:
    def test_no_violations(self):
        rep = triangle_symmetry_experiment(8, 6, 14.0, 2.0, 2, 555)
        assert rep.triples >= 8 * 6 * 5 * 4 * 0.9
        assert rep.subadditivity_violations == 0
        assert rep.symmetry_violations == 0
        assert rep.max_subadditivity_excess <= 1e-9
        assert rep.max_symmetry_relerr <= 1e-12


def test_event_estimate_fields():
    e = EventEstimate("x", 25, 100, analytic_bound=0.3)
    assert e.p_hat == 0.25
    assert e.ci95 == pytest.approx(1.959963984540054 * math.sqrt(0.25 * 0.75 / 100))
    assert e.sigma() == pytest.approx(math.sqrt(0.3 * 0.7 / 100))
