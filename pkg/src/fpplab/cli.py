"""Command-line surface: run campaigns, render reports, run the acceptance gate.

Exit codes: 0 success; 1 configuration or missing-output error; 2 campaign
failure (exclusion budget exceeded or internal error); 3 acceptance-suite
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .acceptance import run_acceptance
from .campaign import run_campaign
from .config import load_config
from .errors import CampaignError, ConfigError, FppError

__all__ = ["main"]


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    try:
        outdir = Path(args.output_dir) if args.output_dir else None
        manifest, _ = run_campaign(cfg, outdir, resume=getattr(args, "resume", False))
    except CampaignError as e:
        print(f"campaign failure: {e}", file=sys.stderr)
        return 2
    except FppError as e:
        print(f"internal failure: {e}", file=sys.stderr)
        return 2
    where = outdir if outdir is not None else cfg.resolved_output_dir()
    print(f"wrote {len(manifest.digests)} output files + manifest.json to {where}")
    return 0


def _fmt(v, width=10, prec=4):
    if isinstance(v, float):
        return f"{v:{width}.{prec}f}"
    return f"{v!s:>{width}}"


def _cmd_report(args) -> int:
    outdir = Path(args.output_dir)
    manifest_path = outdir / "manifest.json"
    if not manifest_path.exists():
        print(f"no manifest.json under {outdir}", file=sys.stderr)
        return 1
    lines = []
    fluct = outdir / "fluctuation.json"
    if fluct.exists():
        rep = json.loads(fluct.read_text())
        lines.append(f"passage-time sweep  (alpha={rep['alpha']}, d={rep['d']}, "
                     f"replicas={rep['replicas']}, g_hat={rep['g_hat']!r}, "
                     f"g_affine={rep['g_affine']!r})")
        header = ["n", "mean_T", "var_T", "phi_hat", "fluct_lb", "ci95_mean", "excluded"]
        lines.append("  " + " ".join(f"{h:>10}" for h in header))
        for i, n in enumerate(rep["n_values"]):
            row = [n, rep["mean_T"][i], rep["var_T"][i], rep["phi_hat"][i],
                   rep["fluct_lb"][i], rep["ci95_mean"][i], rep["excluded"][i]]
            lines.append("  " + " ".join(_fmt(v) for v in row))
        lines.append("  fluctuation-growth diagnostic (log phi_hat, fluct_lb):")
        for lp, fl in rep["diagnostic_log_phi_vs_fluct"]:
            lines.append(f"    {lp!r}, {fl!r}")
    checks = []
    for name, key, describe in [
        ("triangle.json", "subadditivity_violations",
         lambda p: f"{p['triples']} triples, {p['subadditivity_violations']} subadd viol, "
                   f"{p['symmetry_violations']} sym viol"),
        ("poisson_sanity.json", "void_freq",
         lambda p: f"void {p['void_freq']:.5f} vs {p['void_closed_form']:.5f}"),
        ("resampling.json", "violations",
         lambda p: f"{p['violations']}/{p['replicas']} unit-gap violations"),
        ("corridor.json", "gated",
         lambda p: f"gated p {p['gated']['p_hat']:.4f} vs {p['gated']['analytic']:.4f}; "
                   f"non-vacuous p {p['nonvacuous']['p_hat']:.4f} vs {p['nonvacuous']['analytic']:.4f}"),
        ("rotation.json", "non_rejection_rate",
         lambda p: f"non-rejection {p['non_rejection_rate']:.2f}; "
                   f"negative control p {p['negative_control_p']}"),
        ("audit.json", "local_optimality_violations",
         lambda p: f"{p['geodesics']} geodesics, {p['local_optimality_violations']} audit viol, "
                   f"{p['gated_jump']['violations']} gated jump viol"),
        ("midpoint_gain.json", "mean",
         lambda p: f"n={p['n']}: mean {p['mean']:.3f} +- {p['ci95']:.3f}, min {p['min']:.2e}"),
        ("argmin.json", "total_probability",
         lambda p: f"family {p['family_size']}, ties {p['ties']}, "
                   f"total p {p['total_probability']:.3f}"),
        ("separation.json", "sweep",
         lambda p: "; ".join(f"n={r['n']:g}: sep {r['separation_p']:.2f} "
                             f"conc {r['concentration_p']:.2f}" for r in p["sweep"])),
        ("site_events.json", "gated",
         lambda p: "; ".join(
             f"{lbl}: covered {p[lbl]['covered']}/{p['trials']}, "
             f"linear {p[lbl]['linear_cost']}/{p['trials']}, "
             f"cheap {p[lbl]['cheap_detour']}/{p['trials']}"
             for lbl in ("gated", "wide"))),
    ]:
        path = outdir / name
        if path.exists():
            payload = json.loads(path.read_text())
            checks.append(f"  {name.removesuffix('.json'):>16}: {describe(payload)}")
    if checks:
        lines.append("bench results:")
        lines.extend(checks)
    acc = outdir / "acceptance.json"
    if acc.exists():
        payload = json.loads(acc.read_text())
        lines.append("acceptance criteria:")
        for c in payload["criteria"]:
            lines.append(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    if len(lines) == 0:
        print(f"no renderable outputs under {outdir}", file=sys.stderr)
        return 1
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    (outdir / "report.txt").write_text(text)
    return 0


def _cmd_acceptance(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    outdir = Path(args.output_dir) if args.output_dir else cfg.resolved_output_dir()
    try:
        results = run_acceptance(cfg.master_seed, outdir, cfg.resolved_workers())
    except FppError as e:
        print(f"internal failure: {e}", file=sys.stderr)
        return 2
    return 0 if all(r.passed for r in results) else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fpplab",
        description="Euclidean first-passage percolation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiments of a campaign config")
    p_run.add_argument("config", help="path to a JSON campaign config")
    p_run.add_argument("--output-dir", help="override the config's output directory")
    p_run.add_argument("--resume", action="store_true",
                       help="skip experiments whose outputs already exist")
    p_run.set_defaults(fn=_cmd_run)

    p_rep = sub.add_parser("report", help="render a human-readable summary of outputs")
    p_rep.add_argument("output_dir", help="directory written by `fpplab run`")
    p_rep.set_defaults(fn=_cmd_report)

    p_acc = sub.add_parser("acceptance", help="run the pinned acceptance gate")
    p_acc.add_argument("config", help="JSON config (master_seed, output_dir, workers are used)")
    p_acc.add_argument("--output-dir", help="override the config's output directory")
    p_acc.set_defaults(fn=_cmd_acceptance)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
