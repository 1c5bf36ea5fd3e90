"""Command-line interface.

Subcommands: run (one experiment), sweep (radius sweep), induce (branch
partition + certificate only), accept (the acceptance suite).  Exit codes:
0 ok, 1 analysis failure, 2 config error.
"""

import argparse
import json
import os
import sys

from . import __version__, acceptance, harness, inducing
from .config import load_config
from .errors import ConfigError, ReturnStatsError
from .inducing import InducedSystem, IntervalSet


def _build_parser():
    p = argparse.ArgumentParser(
        prog="returnstats",
        description="Return-time statistics of interval maps via inducing")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configured experiment")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides config and "
                                   "RETURNSTATS_OUT)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--workers", type=int, help="worker threads")

    sw = sub.add_parser("sweep", help="KS distance across shrinking radii")
    sw.add_argument("config")
    sw.add_argument("--radii", type=float, nargs="+", required=True)
    sw.add_argument("--out")
    sw.add_argument("--seed", type=int)

    ind = sub.add_parser("induce", help="emit branch partition and "
                                        "certificate only")
    ind.add_argument("config")
    ind.add_argument("--out")
    ind.add_argument("--p-max", type=int, default=None)

    acc = sub.add_parser("accept", help="run the acceptance suite")
    acc.add_argument("--criterion", type=int, default=None,
                     help="run a single criterion by number")
    return p


def _cmd_run(args):
    cfg = load_config(args.config)
    report = harness.run_experiment(cfg, out_dir=args.out, seed=args.seed,
                                    workers=args.workers)
    print(report.to_json())
    return 0 if report.ok else 1


def _cmd_sweep(args):
    cfg = load_config(args.config)
    rows, trend = harness.radius_sweep(cfg, args.radii, out_dir=args.out,
                                       seed=args.seed)
    failed = 0
    for row in rows:
        if "error" in row:
            failed += 1
            print(f"r={row['radius']:.3e}  FAILED  {row['error']}")
        else:
            print(f"r={row['radius']:.3e}  mu_U={row['mu_U']:.3e}  "
                  f"ks={row['ks_distance']:.4f}  tau={row['tau_U']}  "
                  f"censored={row['censored_fraction']:.2e}")
    if trend is not None:
        print(f"spearman(ks, r) = {trend:.3f}")
    return 0 if failed == 0 else 1


def _cmd_induce(args):
    cfg = load_config(args.config)
    if cfg.induce_domain is None:
        raise ConfigError("induce needs induce_domain in the config")
    out = harness.resolve_out_dir(cfg, args.out)
    pmap = cfg.build_map()
    sys_ = InducedSystem(base=pmap,
                         domain=IntervalSet.interval(*cfg.induce_domain),
                         max_steps=cfg.induce_max_steps)
    p_max = args.p_max or cfg.p_max
    branches = inducing.return_branches(sys_, p_max)
    cert = inducing.rmap_certificate(sys_, p_max)
    harness._write_branches_csv(os.path.join(out, "branches.csv"), branches)
    with open(os.path.join(out, "certificate.json"), "w") as fh:
        json.dump(cert.to_dict(), fh, sort_keys=True, indent=2)
    print(f"{len(branches)} branches (p <= {p_max}) -> {out}")
    print(f"expansion_inf={cert.expansion_inf:.6g} "
          f"distortion_K={cert.distortion_K:.6g} "
          f"variation~{cert.variation_estimate:.6g}")
    return 0


def _cmd_accept(args):
    if args.criterion is not None:
        res = acceptance.run_criterion(args.criterion)
        results = [res]
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] criterion {res.number:2d} {res.name}: "
              f"{res.detail} ({res.seconds:.1f}s)")
    else:
        results = acceptance.run_all(progress=print)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return 0 if n_fail == 0 else 1


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "induce":
            return _cmd_induce(args)
        if args.command == "accept":
            return _cmd_accept(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ReturnStatsError as exc:
        print(f"analysis failure: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
