"""Command-line front end.

    loadshed run --case ieee14 --k 1..5 --out results/
    loadshed validate --case ieee118
"""

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import caseio
from .palm import INIT_POLICIES, SolverConfig, solve
from .report import format_table, write_json, write_trace

log = logging.getLogger("loadshed")


@dataclass
class RunManifest:
    case: str
    ks: List[int]
    out: Path
    overrides: dict = field(default_factory=dict)
    formats: tuple = ("trace", "table", "json")
    jobs: int = 1


def parse_k(text):
    """``"5"``, ``"1..5"`` or ``"1,3,5"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            ks = list(range(int(lo), int(hi) + 1))
        else:
            ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad K value {text!r}") from None
    if not ks or min(ks) < 0:
        raise argparse.ArgumentTypeError(f"bad K value {text!r}")
    return ks


def _stem(case):
    return Path(case).stem if case not in caseio.BUNDLED else case


def _solve_one(case, K, overrides):
    cfg = SolverConfig(K=K, **overrides)
    net = caseio.build_network(caseio.load_case(case), rebalance=cfg.rebalance)
    t0 = time.perf_counter()
    report = solve(net, cfg)
    return report, time.perf_counter() - t0


def run(manifest):
    """Solve every requested K and write artifacts; returns the exit status."""
    raw = caseio.load_case(manifest.case)
    net = caseio.build_network(raw, rebalance=manifest.overrides.get("rebalance", "proportional"))
    bad = [K for K in manifest.ks if K > net.m]
    if bad:
        log.error("K=%s exceeds the %d lines of %s", bad, net.m, manifest.case)
        return 2
    manifest.out.mkdir(parents=True, exist_ok=True)
    stem = _stem(manifest.case)
    rows, status = [], 0
    if manifest.jobs > 1:
        with ProcessPoolExecutor(manifest.jobs) as ex:
            futures = {K: ex.submit(_solve_one, manifest.case, K, manifest.overrides)
                       for K in manifest.ks}
            results = {}
            for K, fut in futures.items():
                try:
                    results[K] = fut.result()
                except Exception as e:  # solver abort in a worker
                    results[K] = e
    else:
        results = {}
        for K in manifest.ks:
            try:
                results[K] = _solve_one(manifest.case, K, manifest.overrides)
            except Exception as e:
                results[K] = e
    for K in manifest.ks:
        res = results[K]
        if isinstance(res, Exception):
            log.error("K=%d aborted: %s", K, res)
            status = 1
            continue
        report, elapsed = res
        f = report.final
        log.info("K=%d: removed %s, shed %.1f MW (%s), prim_res %.3e, %d iterations in %.1fs",
                 K, report.removed_lines, report.shed_mw,
                 "n/a" if report.shed_pct is None else f"{report.shed_pct:.1f}%",
                 f.prim_res, report.iterations, elapsed)
        if "trace" in manifest.formats:
            write_trace(manifest.out / f"{stem}_k{K}.txt", report.trace)
        if "json" in manifest.formats:
            write_json(manifest.out / f"{stem}_k{K}.json", report, case=stem)
        rows.append((K, report.shed_mw, report.shed_pct, report.removed_lines))
    if rows and "table" in manifest.formats:
        table = format_table(rows, title=f"Load-shedding strategy for {stem}")
        (manifest.out / f"{stem}_table.txt").write_text(table)
        print(table, end="")
    return status


def validate(case):
    """Parse ``case``, build the network and print its diagnostics."""
    try:
        raw = caseio.load_case(case)
        summary = raw.summary()
        net = caseio.build_network(raw)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"{summary['buses']} buses, {summary['branches']} lines")
    if summary["branches_out_of_service"]:
        print(f"{summary['branches_out_of_service']} out-of-service branches excluded")
    print(f"{summary['generator_buses']} generator buses, {summary['load_buses']} load buses")
    print(f"{len(net.gen_buses)} buses with positive net injection")
    print(f"total load {net.total_load * net.base_mva:.1f} MW (net of co-located generation)")
    print(f"balance residual {abs(float(np.sum(net.injection))):.3e} pu")
    return 0


def _parser():
    p = argparse.ArgumentParser(prog="loadshed", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve for one or more K")
    r.add_argument("--case", required=True,
                   help=f"bundled case ({', '.join(caseio.BUNDLED)}) or path to .m/.json")
    r.add_argument("--k", required=True, type=parse_k, help="K, K1..K2 or K1,K2,...")
    r.add_argument("--rho", type=float)
    r.add_argument("--r1", type=float)
    r.add_argument("--r2", type=float)
    r.add_argument("--r3", type=float)
    r.add_argument("--max-iters", type=int)
    r.add_argument("--primal-tol", type=float)
    r.add_argument("--dual-tol", type=float)
    r.add_argument("--inner-tol", type=float)
    r.add_argument("--init", choices=INIT_POLICIES)
    r.add_argument("--rebalance", choices=caseio.REBALANCE_POLICIES)
    r.add_argument("--trace-every", type=int)
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--formats", default="trace,table,json",
                   help="comma-separated subset of trace,table,json")
    r.add_argument("--jobs", type=int, default=1, help="parallel solves for a K sweep")

    v = sub.add_parser("validate", help="check a case file and print its size")
    v.add_argument("--case", required=True)
    return p


_OVERRIDES = ("rho", "r1", "r2", "r3", "max_iters", "primal_tol", "dual_tol",
              "inner_tol", "init", "rebalance", "trace_every")


def main(argv: Optional[list] = None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return validate(args.case)
    overrides = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}
    try:
        SolverConfig(K=0, **overrides)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    manifest = RunManifest(args.case, args.k, args.out, overrides,
                           tuple(f.strip() for f in args.formats.split(",")), args.jobs)
    try:
        return run(manifest)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
