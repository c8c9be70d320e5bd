"""The acceptance gate: every shipped claim, checked at its stated tolerance.

Criteria are pinned here — sizes, seeds policy, and tolerances — and evaluated
against a double run of the standard campaign (the repeat feeds the
byte-reproducibility criterion).  Each criterion yields one PASS/FAIL line.

Known state: the planted resampling criterion asserts the per-replica unit
gap exactly as claimed and fails on real draws (the violation geometry and
rates are reported in its detail and in resampling.csv); see the project
README.  Nothing is loosened to hide that.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .campaign import run_campaign
from .config import ExperimentConfig, write_json
from .geodesic import GeodesicOptions, brute_force_passage_time, passage_time
from .points import BoxRegion, PoissonSample, build_index
from .seeds import mix64

__all__ = ["CriterionResult", "run_acceptance", "acceptance_config", "ACCEPTANCE_EXPERIMENTS"]

ACCEPTANCE_EXPERIMENTS = (
    "fluctuation", "triangle", "poisson_sanity", "resampling", "corridor",
    "rotation", "audit", "midpoint", "argmin", "separation", "site",
)

ORACLE_INSTANCES = 1000
ORACLE_MAX_POINTS = 12
ORACLE_RTOL = 1e-12
SUBADD_TOL = 1e-9
SYM_RTOL = 1e-12
TOTAL_BUDGET_S = 15 * 60


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def acceptance_config(master_seed: int = 20260809, output_dir: str = "acceptance-out",
                      workers: int | str = 1) -> ExperimentConfig:
    """The pinned acceptance campaign: d=2, alpha=2, the stated sweep sizes."""
    return ExperimentConfig(
        dimension=2, alpha=2.0, intensity=1.0,
        n_values=(8, 16, 32, 64, 128), replicas=400,
        master_seed=master_seed, experiments=ACCEPTANCE_EXPERIMENTS,
        output_dir=output_dir, workers=workers,
    )


def _crit_oracle(master_seed: int) -> CriterionResult:
    t0 = time.perf_counter()
    rng_master = mix64(master_seed, 101)
    worst = 0.0
    uncertified = 0
    mismatches = 0
    for i in range(ORACLE_INSTANCES):
        rng = np.random.default_rng(mix64(rng_master, i))
        npts = int(rng.integers(1, ORACLE_MAX_POINTS + 1))
        side = float(rng.uniform(2.0, 6.0))
        pts = rng.random((npts, 2)) * side
        x = rng.random(2) * side
        y = rng.random(2) * side
        alpha = 1.5 if i % 2 else 2.0
        sample = PoissonSample(pts, BoxRegion([0.0, 0.0], [side, side]), 1.0, 0, 2)
        grid = build_index(sample, 0.8)
        got = passage_time(grid, x, y, alpha,
                           GeodesicOptions(exact_threshold=0, initial_cutoff=0.7))
        want, _ = brute_force_passage_time(pts, x, y, alpha)
        if not got.certified:
            uncertified += 1
        err = abs(got.cost - want) / max(1.0, abs(want))
        worst = max(worst, err)
        if err > ORACLE_RTOL:
            mismatches += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and uncertified == 0 and dt < 30.0
    return CriterionResult(
        "criterion-01-oracle-equivalence", ok,
        f"{ORACLE_INSTANCES} fuzz instances, worst rel err {worst:.2e}, "
        f"uncertified {uncertified}, runtime {dt:.1f}s (< 30s)", dt)


def _crit_triangle(payload: dict, seconds: float) -> CriterionResult:
    ok = (payload["subadditivity_violations"] == 0
          and payload["symmetry_violations"] == 0
          and payload["triples"] >= 10_000)
    return CriterionResult(
        "criterion-02-subadditivity-symmetry", ok,
        f"{payload['triples']} triples, max excess {payload['max_subadditivity_excess']:.2e} "
        f"(tol {SUBADD_TOL}), {payload['symmetry_pairs']} pairs, "
        f"max sym rel err {payload['max_symmetry_relerr']:.2e} (tol {SYM_RTOL})", seconds)


def _crit_poisson(payload: dict, seconds: float) -> CriterionResult:
    dv = abs(payload["void_freq"] - payload["void_closed_form"])
    dm = abs(payload["count_mean"] - payload["expected_count_mean"])
    dvar = abs(payload["count_var"] - payload["expected_count_var"])
    ok = (dv <= 3 * payload["void_se"] and dm <= 3 * payload["count_mean_se"]
          and dvar <= 3 * payload["count_var_se"] and seconds < 60.0)
    return CriterionResult(
        "criterion-03-poisson-sanity", ok,
        f"void {payload['void_freq']:.5f} vs {payload['void_closed_form']:.5f} "
        f"(3se {3*payload['void_se']:.5f}); mean off {dm:.4f} (3se {3*payload['count_mean_se']:.4f}); "
        f"var off {dvar:.4f} (3se {3*payload['count_var_se']:.4f}); runtime {seconds:.1f}s (< 60s)",
        seconds)


def _crit_trend(ctx, seconds: float) -> CriterionResult:
    ests = [ctx.estimates[n] for n in ctx.config.n_values]
    bad = []
    for a, b in zip(ests, ests[1:]):
        if not math.isclose(b.n, 2 * a.n):
            continue
        sigma = math.sqrt(b.stats.std_error() ** 2 + 4 * a.stats.std_error() ** 2)
        if b.stats.mean > 2 * a.stats.mean + 3 * sigma:
            bad.append((a.n, b.n, b.stats.mean - 2 * a.stats.mean, 3 * sigma))
    ok = not bad and seconds < 300.0
    detail = (f"all adjacent pairs satisfy mean(2n) <= 2 mean(n) + 3 sigma; "
              f"sweep runtime {seconds:.1f}s (< 300s)") if not bad else f"violations: {bad}"
    return CriterionResult("criterion-04-subadditive-trend", ok, detail, seconds)


def _crit_fluct_nonneg(ctx) -> CriterionResult:
    rep = ctx.fluctuation
    n_max = rep.n_values[-1]
    se = {n: ctx.estimates[n].stats.std_error() for n in rep.n_values}
    bad = []
    for i, n in enumerate(rep.n_values[:-1]):
        if n_max % n:
            continue
        sigma = math.sqrt(se[n] ** 2 + (n / n_max) ** 2 * se[n_max] ** 2)
        if rep.fluct_lb[i] < -3 * sigma:
            bad.append((n, rep.fluct_lb[i], -3 * sigma))
    table = "; ".join(f"(log phi={lp:.3f}, fluct={fl:.3f})" for lp, fl in rep.diagnostic_pairs())
    return CriterionResult(
        "criterion-05-fluctuation-nonnegativity", not bad,
        (f"fluct_lb >= -3 sigma for all n dividing {int(n_max)}; diagnostic {table}"
         if not bad else f"violations: {bad}"), 0.0)


def _crit_variance_positive(ctx) -> CriterionResult:
    bad = []
    for n in ctx.config.n_values:
        e = ctx.estimates[n]
        if not e.psi_hat - 3 * e.stats.variance_std_error() > 0:
            bad.append((n, e.psi_hat))
    vals = ", ".join(f"n={int(n)}: {ctx.estimates[n].psi_hat:.3f}" for n in ctx.config.n_values)
    return CriterionResult(
        "criterion-06-variance-positivity", not bad,
        f"psi_hat - 3 se > 0 at every n ({vals})" if not bad else f"violations: {bad}", 0.0)


def _crit_resampling(payload: dict, seconds: float) -> CriterionResult:
    ok = payload["violations"] == 0 and seconds < 60.0
    return CriterionResult(
        "criterion-07-resampling-claim", ok,
        f"{payload['violations']}/{payload['replicas']} replicas violate the unit gap "
        f"(rate {payload['violation_rate']:.1%}, min gap {payload['gap_min']:.3f}, "
        f"mean sq gap {payload['mean_sq_gap']:.2f}); per-replica dump in resampling.csv; "
        f"runtime {seconds:.1f}s", seconds)


def _crit_corridor(payload: dict, seconds: float) -> CriterionResult:
    g = payload["gated"]
    nv = payload["nonvacuous"]
    ok = bool(g["mc_consistent"] and (g["gate_bound_holds"] is not False) and nv["mc_consistent"])
    return CriterionResult(
        "criterion-08-corridor-event", ok,
        f"gated: p_hat {g['p_hat']:.4f} vs analytic {g['analytic']:.4f} "
        f"(k_count {g['k_count']}, gate bound {g['gate_bound']}); "
        f"non-vacuous: p_hat {nv['p_hat']:.4f} vs analytic {nv['analytic']:.4f} "
        f"(k_count {nv['k_count']})", seconds)


def _crit_audit(payload: dict, seconds: float) -> CriterionResult:
    g = payload["gated_jump"]
    ok = (payload["local_optimality_violations"] == 0 and g["violations"] == 0
          and payload["uncertified"] == 0)
    wide = payload["wide_scale_report_only"]
    return CriterionResult(
        "criterion-09-geodesic-audits", ok,
        f"{payload['geodesics']} geodesics re-audited, "
        f"{payload['local_optimality_violations']} local-optimality violations, "
        f"{g['violations']} gated jump violations (applicable {g['applicable']}); "
        f"wide-scale report: applicable {wide['applicable']}, gated {wide['gated']}, "
        f"violations {wide['violations']}, max jump {wide['max_jump_seen']}", seconds)


def _crit_rotation(payload: dict, seconds: float) -> CriterionResult:
    rate = payload["non_rejection_rate"]
    neg = payload["negative_control_p"]
    ok = rate >= 0.8 and all(p < 0.01 for p in neg)
    return CriterionResult(
        "criterion-10-rotation-invariance", ok,
        f"non-rejection rate {rate:.2f} over {len(payload['p_values'])} repetitions "
        f"(need >= 0.8); negative control p {', '.join(f'{p:.2e}' for p in neg)} (need < 0.01)",
        seconds)


def _crit_reproducibility(m1, m2, total_s: float) -> CriterionResult:
    same = m1.digests == m2.digests
    ok = same and total_s < TOTAL_BUDGET_S
    diff = [k for k in m1.digests if m2.digests.get(k) != m1.digests[k]]
    return CriterionResult(
        "criterion-11-reproducibility", ok,
        f"{len(m1.digests)} output files byte-identical across repeat runs"
        + ("" if same else f"; MISMATCH in {diff}")
        + f"; total runtime {total_s:.0f}s (< {TOTAL_BUDGET_S}s)", total_s)


def run_acceptance(master_seed: int = 20260809, output_dir="acceptance-out",
                   workers: int | str = 1, echo=print) -> list[CriterionResult]:
    """Run the pinned campaign twice, evaluate all criteria, write acceptance.json."""
    t_start = time.perf_counter()
    outdir = Path(output_dir)
    cfg = acceptance_config(master_seed, str(outdir), workers)
    results: list[CriterionResult] = []

    results.append(_crit_oracle(master_seed))
    m1, ctx = run_campaign(cfg, outdir / "run1")
    import json

    def load(name):
        return json.loads((outdir / "run1" / name).read_text())

    t = m1.timings_s
    results.append(_crit_triangle(load("triangle.json"), t["triangle"]))
    results.append(_crit_poisson(load("poisson_sanity.json"), t["poisson_sanity"]))
    results.append(_crit_trend(ctx, t["fluctuation"]))
    results.append(_crit_fluct_nonneg(ctx))
    results.append(_crit_variance_positive(ctx))
    results.append(_crit_resampling(load("resampling.json"), t["resampling"]))
    results.append(_crit_corridor(load("corridor.json"), t["corridor"]))
    results.append(_crit_audit(load("audit.json"), t["audit"]))
    results.append(_crit_rotation(load("rotation.json"), t["rotation"]))
    m2, _ = run_campaign(cfg, outdir / "run2")
    total = time.perf_counter() - t_start
    results.append(_crit_reproducibility(m1, m2, total))

    for r in results:
        echo(r.line())
    write_json(outdir / "acceptance.json", {
        "master_seed": master_seed,
        "criteria": [{"name": r.name, "passed": r.passed, "detail": r.detail,
                      "seconds": round(r.seconds, 3)} for r in results],
        "all_passed": all(r.passed for r in results),
    })
    return results
