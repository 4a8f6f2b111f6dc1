"""Command-line harness: sample, compare, diagnose, bnn, trace-export.

Exit codes: 0 success, 2 configuration error, 3 runtime/numerical error.
"""
import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .bnn import BnnTarget, DataError, load_uci_csv
from .config import ConfigError, parse_config
from .kernels import FactorizationError
from .sampler import SamplerConfig, SamplerError, StepSchedule, TraceStore, run
from .targets import TargetError, make_target, target_truth

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def compute_diagnostics(trace, target, metrics, mode_coverage_radius=0.949):
    report = {}
    if "ess" in metrics:
        ess = diag.ess_report(trace)
        report["ess"] = ess.mean_ess
        report["ess_min"] = ess.min_ess
        report["ess_per_second"] = ess.ess_per_second
    if "moment_error" in metrics and target.name != "bnn":
        truth, transform = target_truth(target)
        m = diag.moment_error(trace, truth, transform)
        report["moment_error"] = m.error
        report["moment_estimate"] = m.estimate.tolist()
        report["moment_truth"] = m.truth.tolist()
    if "mode_coverage" in metrics and target.name == "mog3x3":
        report["mode_coverage"] = diag.mode_coverage(
            trace, target.centers, mode_coverage_radius
        )
    return report


def cmd_sample(args):
    exp = parse_config(args.config)
    target = exp.build_target()
    t0 = time.monotonic()
    trace = run(exp.sampler, target)
    wall = time.monotonic() - t0
    out_dir = Path(args.out) if args.out else exp.output_dir
    trace.save(out_dir)
    report = compute_diagnostics(trace, target, exp.metrics, exp.mode_coverage_radius)
    with open(out_dir / "diagnostics.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(
        f"{exp.sampler.method} on {target.name}: "
        f"ess={report.get('ess', float('nan')):.1f} "
        f"error={report.get('moment_error', float('nan')):.4f} "
        f"wall={wall:.2f}s -> {out_dir}"
    )
    return 0


def cmd_compare(args):
    exp_a = parse_config(args.config_a)
    exp_b = parse_config(args.config_b)
    if (exp_a.target_name, exp_a.target_params) != (exp_b.target_name, exp_b.target_params):
        raise ConfigError("compare requires both configs to share the same [target]")
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = []
    for exp in (exp_a, exp_b):
        ess_vals, essps_vals, errs = [], [], []
        for seed in seeds:
            cfg_dict = exp.sampler.to_dict()
            step = cfg_dict.pop("step_size")
            cfg = SamplerConfig(schedule=StepSchedule(**step), **{**cfg_dict, "seed": seed})
            target = exp.build_target()
            trace = run(cfg, target)
            rep = compute_diagnostics(trace, target, ("ess", "moment_error"))
            ess_vals.append(rep["ess"])
            essps_vals.append(rep["ess_per_second"])
            errs.append(rep["moment_error"])
        rows.append(
            {
                "method": exp.sampler.method,
                "ess": float(np.mean(ess_vals)),
                "ess_per_s": float(np.mean(essps_vals)),
                "err_mean": float(np.mean(errs)),
                "err_std": float(np.std(errs)),
            }
        )
    out = Path(args.out) if args.out else Path("compare.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "ess", "ess_per_s", "err_mean", "err_std"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"{'method':<10} {'ess':>8} {'ess/s':>8} {'err_mean':>9} {'err_std':>8}")
    for r in rows:
        print(
            f"{r['method']:<10} {r['ess']:>8.1f} {r['ess_per_s']:>8.1f} "
            f"{r['err_mean']:>9.4f} {r['err_std']:>8.4f}"
        )
    return 0


def _target_from_meta(meta):
    desc = dict(meta["target"])
    name = desc.pop("name")
    if name == "bnn":
        raise ConfigError("diagnose on BNN traces is not supported; use the bnn subcommand")
    return make_target(name, desc)


def cmd_diagnose(args):
    trace = TraceStore.load(args.trace, args.meta)
    target = _target_from_meta(trace.meta)
    report = compute_diagnostics(
        trace, target, ("ess", "moment_error", "mode_coverage"), args.radius
    )
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    print(payload)
    return 0


def cmd_bnn(args):
    from .bnn import evaluate

    dataset = load_uci_csv(args.data, args.target_col, split_seed=args.seed)
    target = BnnTarget(dataset, minibatch_size=args.minibatch)
    cfg = SamplerConfig(
        method=args.method,
        particle_count=args.particles,
        schedule=StepSchedule(kind="constant", eps=args.eps),
        total_iterations=args.iterations,
        burn_in=args.burn_in,
        thin=args.thin,
        seed=args.seed,
        repulsion_cutoff_fraction=args.repulsion_cutoff,
    )
    cfg.validate()
    trace = run(cfg, target)
    rmse, test_ll = evaluate(trace, dataset)
    out_dir = Path(args.out)
    trace.save(out_dir)
    result = {"rmse": rmse, "test_ll": test_ll, "method": args.method, "seed": args.seed}
    with open(out_dir / "bnn_eval.json", "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
    print(f"{args.method} bnn: rmse={rmse:.4f} test_ll={test_ll:.4f} -> {out_dir}")
    return 0


def cmd_trace_export(args):
    trace = TraceStore.load(args.trace, args.meta)
    if not trace.snapshots:
        raise SamplerError("trace contains no snapshots")
    target = _target_from_meta(trace.meta)
    _, transform = target_truth(target)
    d = trace.dim
    rows = []
    count = 0
    m1 = np.zeros(d)
    m2 = np.zeros(d)
    for it, snap in zip(trace.iterations, trace.snapshots):
        vals = transform(snap) if transform is not None else snap
        m1 += vals.sum(axis=0)
        m2 += (vals ** 2).sum(axis=0)
        count += snap.shape[0]
        rows.append([it] + list(m1 / count) + list(m2 / count))
    header = (
        ["iter"]
        + [f"m1_dim_{c}" for c in range(d)]
        + [f"m2_dim_{c}" for c in range(d)]
    )
    if args.format == "csv":
        text_rows = [",".join(header)] + [
            ",".join(repr(float(v)) if i else str(v) for i, v in enumerate(r)) for r in rows
        ]
        payload = "\n".join(text_rows) + "\n"
    else:
        payload = json.dumps(
            {"columns": header, "rows": [[r[0]] + [float(v) for v in r[1:]] for r in rows]},
            indent=2,
        )
    if args.out:
        Path(args.out).write_text(payload)
    else:
        print(payload, end="" if args.format == "csv" else "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgldr",
        description="Particle samplers (SGLD, SVGD, SGLD+R) with diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run one configured experiment")
    p.add_argument("config")
    p.add_argument("--out", help="override the config's output directory")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("compare", help="run two configs over seeds, tabulate metrics")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--seeds", default="1,2,3,4,5", help="comma-separated seed list")
    p.add_argument("--out", help="output CSV path (default compare.csv)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("diagnose", help="compute diagnostics for a stored trace")
    p.add_argument("trace", help="path to trace.csv")
    p.add_argument("--meta", help="sidecar JSON (default: trace_meta.json next to trace)")
    p.add_argument("--radius", type=float, default=0.949, help="mode-coverage radius")
    p.add_argument("--out", help="write the JSON report here as well as stdout")
    p.set_defaults(fn=cmd_diagnose)

    p = sub.add_parser("bnn", help="sample a Bayesian network posterior on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--target-col", required=True)
    p.add_argument("--method", choices=["sgld", "sgld_r"], default="sgld_r")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--particles", type=int, default=20)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--minibatch", type=int, default=100)
    p.add_argument("--repulsion-cutoff", type=float, default=1.0)
    p.set_defaults(fn=cmd_bnn)

    p = sub.add_parser("trace-export", help="emit running first/second moment series")
    p.add_argument("trace", help="path to trace.csv")
    p.add_argument("--meta")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_trace_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TargetError, DataError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SamplerError, FactorizationError, diag.DiagnosticsError, OSError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
