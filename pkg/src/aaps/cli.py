"""Command-line entry point: `aaps-bench <subcommand>`.

Subcommands
-----------
    sample       run one chain (first grid point) and write samples.csv
    sweep        run the full grid x replicates sweep, write sweep.csv
    preset       write a named experiment config (optionally run it)
    tune-eps     two-stage step-size search for the configured target
    tune-k       segment-count diagnostic with escalation, writes kdiag.csv
    diagnose     one-shot diagnostic profile at k_star, writes kdiag.csv
    apogee-rate  apogee-rate estimate under exact dynamics, writes apogee.csv
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import bench
from .diagnostics import tune_epsilon, tune_k, k_diagnostic, write_kdiag_csv
from .gplimit import (
    apogee_rate_estimate,
    constant_precision,
    covariance_estimate,
    two_point_precision,
)
from .sampler import AapsConfig, Scheme, run_aaps


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config (INI)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="override the output directory")


def _load(args) -> bench.ExperimentConfig:
    cfg = bench.parse_config(args.config)
    run = cfg.run
    if args.seed is not None:
        run = bench.RunSpec(run.iterations, run.burn_in, run.replicates,
                            args.seed, run.out, run.thin)
    if args.out is not None:
        run = bench.RunSpec(run.iterations, run.burn_in, run.replicates,
                            run.seed, args.out, run.thin)
    return bench.ExperimentConfig(cfg.target, cfg.sampler, run)


def _outdir(cfg) -> str:
    os.makedirs(cfg.run.out, exist_ok=True)
    return cfg.run.out


def cmd_sample(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    points = bench.expand_grid(cfg.sampler)
    rec = bench.run_single(cfg, points[0], replicate=0, keep_samples=True)
    target = bench.build_target(cfg.target)
    bench.write_samples_csv(rec.samples, os.path.join(out, "samples.csv"),
                            param_names=target.param_names)
    bench.write_sweep_csv([rec], target.name, os.path.join(out, "stats.csv"))
    print(f"wrote {out}/samples.csv ({rec.iterations} iterations, "
          f"acceptance {rec.acceptance:.3f}, {rec.leapfrog} leapfrog steps)")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    records = bench.run_sweep(cfg, threads=args.threads)
    target_name = bench.build_target(cfg.target).name
    bench.write_sweep_csv(records, target_name, os.path.join(out, "sweep.csv"))
    bench.write_summary_csv(records, os.path.join(out, "summary.csv"))
    bench.write_timings_csv(records, os.path.join(out, "timings.csv"))
    failures = [r for r in records if r.error]
    print(f"wrote {out}/sweep.csv with {len(records) - len(failures)} records"
          + (f" ({len(failures)} failed cells)" if failures else ""))
    for r in failures:
        print(f"  failed: {r.point} replicate {r.replicate}: {r.error}", file=sys.stderr)
    return 0


def cmd_preset(args) -> int:
    configs = bench.preset(args.name, desk_scale=args.desk_scale)
    os.makedirs(args.out, exist_ok=True)
    for label, cfg in configs:
        run = bench.RunSpec(cfg.run.iterations, cfg.run.burn_in, cfg.run.replicates,
                            cfg.run.seed if args.seed is None else args.seed,
                            os.path.join(args.out, label), cfg.run.thin)
        cfg = bench.ExperimentConfig(cfg.target, cfg.sampler, run)
        path = os.path.join(args.out, f"{label}.ini")
        bench.write_config(cfg, path)
        print(f"wrote {path}")
        if args.run:
            ns = argparse.Namespace(config=path, seed=None, out=None, threads=args.threads)
            cmd_sweep(ns)
    return 0


def cmd_tune_eps(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    target = bench.build_target(cfg.target)
    res = tune_epsilon(target, seed=cfg.run.seed)
    with open(os.path.join(out, "tune_eps.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "epsilon", "value"])
        for stage, eps, val in res.history:
            w.writerow([stage, repr(eps), repr(val)])
    status = "ok" if res.ok else "FAILED"
    print(f"tuned epsilon = {res.epsilon:.4g} (stage-1 {res.stage1_epsilon:.4g}, "
          f"acceptance {res.acceptance:.3f}) [{status}]")
    return 0 if res.ok else 1


def cmd_tune_k(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    target = bench.build_target(cfg.target)
    eps = cfg.sampler.epsilon_grid[0]
    res = tune_k(target, eps, k_star=cfg.sampler.k_star, seed=cfg.run.seed,
                 max_iterations=max(cfg.run.iterations, 20_000))
    write_kdiag_csv(res.diagnostic, os.path.join(out, "kdiag.csv"))
    print(f"k_hat = {res.k_hat} (window k_star = {res.k_star}, "
          f"{res.iterations_used} iterations, stabilized={res.stabilized})")
    return 0


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    target = bench.build_target(cfg.target)
    k_star = cfg.sampler.k_star
    kcfg = AapsConfig(k=k_star, epsilon=cfg.sampler.epsilon_grid[0],
                      scheme=Scheme(cfg.sampler.schemes[0]), delta=cfg.sampler.delta)
    res = run_aaps(target, kcfg, cfg.run.iterations,
                   rng=np.random.default_rng(cfg.run.seed))
    diag = k_diagnostic(res.seg_hist, k_star)
    write_kdiag_csv(diag, os.path.join(out, "kdiag.csv"))
    print(f"k_hat = {diag.k_hat} over {cfg.run.iterations} iterations at k_star = {k_star}")
    return 0


def cmd_apogee_rate(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.dist.startswith("const:"):
        mu = constant_precision(float(args.dist.split(":")[1]))
    elif args.dist.startswith("two_point:"):
        lo, hi, p = (float(v) for v in args.dist.split(":")[1].split(","))
        mu = two_point_precision(lo, hi, p)
    else:
        raise SystemExit(f"unknown precision distribution {args.dist!r} "
                         "(use const:V or two_point:LO,HI,P)")
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    est = apogee_rate_estimate(mu, d=args.d, T=args.T, replicates=args.replicates, rng=rng)
    with open(os.path.join(args.out, "apogee.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "d", "T", "apogee_count", "rate"])
        for r, rate in enumerate(est.per_replicate):
            w.writerow([r, args.d, f"{args.T:g}", int(round(rate * args.T)), repr(float(rate))])
    lags = np.linspace(0.0, np.pi, 9)
    v_hat, se = covariance_estimate(mu, args.d, lags, replicates=2000, rng=rng)
    with open(os.path.join(args.out, "apogee_cov.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "v_hat", "se"])
        for lag, v, s in zip(lags, v_hat, se):
            w.writerow([repr(float(lag)), repr(float(v)), repr(float(s))])
    ref = est.reference
    print(f"apogee rate = {est.rate:.4f} +- {est.se:.4f} "
          f"(Gaussian-component reference {ref:.4f})")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="aaps-bench",
                                 description="Path-sampler benchmark harness")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="single run; writes samples.csv")
    _add_common(p)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("sweep", help="grid sweep; writes sweep.csv")
    _add_common(p)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("preset", help="write a named experiment config")
    p.add_argument("name", choices=bench.PRESET_NAMES)
    p.add_argument("--out", default="runs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--desk-scale", action="store_true")
    p.add_argument("--run", action="store_true", help="run each written config")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_preset)

    p = sub.add_parser("tune-eps", help="two-stage step-size search")
    _add_common(p)
    p.set_defaults(fn=cmd_tune_eps)

    p = sub.add_parser("tune-k", help="segment-count diagnostic with escalation")
    _add_common(p)
    p.set_defaults(fn=cmd_tune_k)

    p = sub.add_parser("diagnose", help="one-shot diagnostic profile at k_star")
    _add_common(p)
    p.set_defaults(fn=cmd_diagnose)

    p = sub.add_parser("apogee-rate", help="apogee-rate law check (exact dynamics)")
    p.add_argument("--dist", default="const:1")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--T", type=float, default=200.0)
    p.add_argument("--replicates", type=int, default=40)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="runs/apogee")
    p.set_defaults(fn=cmd_apogee_rate)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
