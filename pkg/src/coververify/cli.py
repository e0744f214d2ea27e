"""Command line entry point: ``coververify <subcommand> ...``.

Exit codes: 0 success (or "verified"), 1 a check failed, 2 usage error.
The worker count for parallel stages comes from ``--workers`` or the
``COVERVERIFY_WORKERS`` environment variable (default 1).
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import certificate as certmod
from . import covers as cv
from . import mediumprimes as mp
from . import moments
from . import smallprimes as sp
from .boxgeom import Box, format_configuration, read_configurations
from .sieve import ledger_rows, run_sieve

WORKERS_ENV = "COVERVERIFY_WORKERS"


class UsageError(Exception):
    pass


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be positive")
    return n


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in re.split(r"[,\s]+", text.strip()) if x]
    except ValueError:
        raise UsageError(f"expected a comma separated list of integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]
    except ValueError:
        raise UsageError(f"expected a comma separated list of numbers, got {text!r}")


def _read_lines(path: str) -> list[str]:
    if path == "-":
        return sys.stdin.read().splitlines()
    try:
        return Path(path).read_text().splitlines()
    except OSError as e:
        raise UsageError(str(e))


def _out(path: str | None):
    # stdout must survive the ``with`` block
    return contextlib.nullcontext(sys.stdout) if path in (None, "-") else open(path, "w", newline="")


def _fmt(x: float) -> str:
    return f"{x:.9f}" if math.isfinite(x) else str(x)


# --------------------------------------------------------------------------
# subcommands


def cmd_verify_all(args) -> int:
    overrides = {}
    if args.threshold is not None:
        overrides["small_bound"] = args.threshold
    if args.report_threshold is not None:
        overrides["small_threshold"] = args.report_threshold
    if args.grid_step is not None:
        overrides["grid_step"] = args.grid_step
    if args.region_bound is not None:
        overrides["region_bound"] = args.region_bound
    if args.sweep_target is not None:
        overrides["sweep_target"] = args.sweep_target
    run = certmod.verify_all(workers=_workers(args), **overrides)
    paths = certmod.write_outputs(run, args.out)
    print(run.summary())
    print(f"certificate written to {paths['certificate']}")
    return certmod.EXIT_VERIFIED if run.verified else certmod.EXIT_FAILED


def _parse_shard(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)/(\d+)", text)
    if not m or not int(m[1]) < int(m[2]):
        raise UsageError(f"shard must look like INDEX/COUNT with INDEX < COUNT, got {text!r}")
    return int(m[1]), int(m[2])


def cmd_enumerate_small(args) -> int:
    if args.full_count:
        from .fullcount import level_counts

        counts = level_counts()
        for depth, n in enumerate(counts):
            print(f"depth {depth}: {n}")
        print(f"full count: {counts[-1]}")
        return 0
    if args.depth < len(sp.BASE_SETS) or args.depth > len(sp.FAMILY):
        raise UsageError(f"--depth must lie in [{len(sp.BASE_SETS)}, {len(sp.FAMILY)}]")
    shard = _parse_shard(args.shard)
    workers = _workers(args)
    base = sp.enumerate_base()
    print(f"base configurations: {len(base)}")
    report = sp.staged_search(args.threshold, base, workers=workers, shard=shard, max_stage=args.depth)
    for stage in sorted(report.counts):
        ev, bad = report.counts[stage]
        print(f"stage {stage}: evaluated {ev}, above threshold {bad}")
    print(f"cascade: {report.cascade[1:]}")
    if args.depth == len(sp.FAMILY):
        for r in report.survivors:
            print(f"survivor {format_configuration(r.config)}  value {_fmt(r.value)}")
        print(f"max value: {_fmt(report.max_value)}")
    else:
        still = [r for r in report.rows if r[1] == args.depth and not r[4] < args.threshold]
        print(f"open at depth {args.depth}: {len(still)}")
    if args.csv:
        with _out(args.csv) as fh:
            certmod.write_small_csv(fh, report.rows)
    if args.depth == len(sp.FAMILY) and shard == (0, 1):
        return 0 if report.certified(args.bound) else 1
    return 0


def cmd_check_config(args) -> int:
    try:
        configs = read_configurations(_read_lines(args.file), sp.BOX)
    except ValueError as e:
        raise UsageError(str(e))
    if not configs:
        raise UsageError("no configurations in input")
    worst = -math.inf
    for cfg in configs:
        res = sp.solve_config(cfg, method="simplex" if args.simplex else "highs", compress=not args.full)
        print(format_configuration(cfg))
        if res.covered:
            print("  covers the box; no measure exists")
            worst = math.inf
            continue
        print(f"  LP value        {_fmt(res.value)}")
        print(f"  unspecified     {' '.join(sp.set_name(F) for F in sp.unspecified(cfg)) or '-'}")
        print(f"  p_bound         {_fmt(res.p_bound)}")
        print(f"  adjusted value  {_fmt(res.adjusted)}")
        for I in sp.NONEMPTY:
            print(f"  c({sp.set_name(I)}) = {res.c[I]:.9f}")
        if args.exact:
            lo, hi = sp.exact_lower_bound(res), sp.exact_upper_bound(res)
            print(f"  exact bracket   [{float(lo):.15f}, {float(hi):.15f}]")
        worst = max(worst, res.adjusted)
    return 0 if worst < args.bound else 1


def cmd_sweep_medium(args) -> int:
    if args.point is not None:
        u, v = args.point
        opt = mp.optimize_deltas(u, v, tol=args.tol, pass_tol=args.pass_tol, max_passes=args.max_passes)
        print(f"ratio {opt.ratio[0]:.9f}  mu_hat {opt.mu_hat[0]:.9g}  passes {opt.passes}")
        print("deltas " + " ".join(f"{d:.9f}" for d in opt.deltas[0]))
        return 0 if opt.mu_hat[0] > 0 else 1
    res = mp.sweep(args.region_bound, args.grid_step, args.u_max, args.tol, args.pass_tol, args.max_passes)
    j = int(np.argmax(res.opt.ratio))
    print(f"grid points: {len(res.index)}")
    print(f"max ratio: {res.max_ratio:.9f} at i={res.argmax} (u={res.u[j]:.4f}, v={res.v[j]:.6f})")
    print(f"min mu_hat: {float(np.min(res.opt.mu_hat)):.9g}")
    print(f"passes: {res.opt.passes}")
    ok = res.certified(args.target)
    print(f"{'PASS' if ok else 'FAIL'}: max ratio {'<=' if ok else 'not <='} {args.target} with all mu_hat > 0")
    if args.csv:
        with _out(args.csv) as fh:
            certmod.write_sweep_csv(fh, res)
    return 0 if ok else 1


def _parse_sequence(text: str):
    m = re.fullmatch(r"\s*(-?\d+)\s*\*\s*k\s*(?:([+-])\s*(\d+))?\s*", text)
    if m:
        a = int(m[1])
        b = int(m[3] or 0) * (-1 if m[2] == "-" else 1)
        return moments.linear_sequence(a, b)
    return _int_list(text)


def cmd_gmm_check(args) -> int:
    q = _parse_sequence(args.seq)
    if not args.smallest_c and args.C >= args.n:
        raise UsageError(f"--C must be below --n, got C={args.C}, n={args.n}")
    try:
        if args.smallest_c:
            C = moments.gmm_smallest_c(q, args.N, args.eps, args.n)
            print(f"smallest C: {C}")
            return 0
        res = moments.gmm_check(q, args.N, args.eps, args.C, args.n)
    except ValueError as e:
        raise UsageError(str(e))
    if args.csv:
        with _out(args.csv) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "q_k", "term", "partial_sum"])
            part = 0.0
            for k in range(args.C + 1, args.n + 1):
                part += res.terms[k - 1]
                qk = q(k) if callable(q) else q[k - 1]
                w.writerow([k, qk, repr(float(res.terms[k - 1])), repr(part)])
    print(f"delta = {res.delta:.9g}; sum over k = {args.C + 1}..{args.n}: {res.total:.12g}")
    print("certified" if res.certified else "not certified")
    return 0 if res.certified else 1


def cmd_greedy_cover(args) -> int:
    if args.sharpness:
        C, n = args.sharpness
        try:
            sh = cv.sharpness_sequence(C, n)
        except ValueError as e:
            raise UsageError(str(e))
        print(f"sizes: {','.join(map(str, sh.sizes))}")
        print(f"product {sh.product:.6f} vs (n - C) log(n - C) = {sh.target:.6f}: {'holds' if sh.holds else 'fails'}")
        if not sh.holds:
            return 1
        if sh.cover is None:
            print("box too large for an explicit cover")
            return 1
        result = sh.cover
    else:
        sizes = _int_list(args.sizes)
        try:
            result = cv.greedy_cover(Box(sizes))
        except ValueError as e:
            raise UsageError(str(e))
        print(f"product hypothesis: {'holds' if result.hypothesis else 'fails'}")
    print(format_configuration(result.config))
    print(f"uncovered points: {result.residual}")
    if result.covered and not cv.check_cover(result):
        print("independent check FAILED")
        return 1
    return 0 if result.covered else 1


def cmd_ap_translate(args) -> int:
    primes = tuple(_int_list(args.primes))
    lines = _read_lines(args.file)
    try:
        if args.reverse:
            box = Box([p for p in primes], primes)
            configs = read_configurations(lines, box)
            for cfg in configs:
                system = cv.hyperplanes_to_ap(cfg, primes)
                for a, d in system.progressions:
                    print(f"{a} mod {d}")
                print(f"# covers the integers: {system.covers_integers()}")
        else:
            system = cv.APSystem(tuple(cv.parse_ap_lines(lines)), primes, distinct=not args.allow_repeats)
            cfg, box = cv.ap_to_hyperplanes(system)
            print(format_configuration(cfg))
            print(f"# covers the box: {cv.covers(cfg) is None}")
    except ValueError as e:
        raise UsageError(str(e))
    return 0


def cmd_sieve_run(args) -> int:
    sizes = _int_list(args.sizes)
    try:
        box = Box(sizes)
        configs = read_configurations(_read_lines(args.config), box)
    except ValueError as e:
        raise UsageError(str(e))
    if len(configs) != 1:
        raise UsageError("the configuration file must hold exactly one configuration")
    deltas = _float_list(args.deltas)
    if len(deltas) != box.dim - args.start:
        raise UsageError(f"need {box.dim - args.start} deltas (levels {args.start + 1}..{box.dim})")
    try:
        state = run_sieve(configs[0], deltas, start=args.start)
    except ValueError as e:
        raise UsageError(str(e))
    with _out(args.csv) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "removed", "mu"])
        for k, removed, mu in ledger_rows(state):
            w.writerow([k, repr(float(removed)), repr(float(mu))])
    if args.csv not in (None, "-"):
        print(f"mu_{box.dim} = {float(state.mu):.12g}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coververify", description="Re-verify the covering-system computations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify-all", help="run every stage and write a certificate")
    v.add_argument("--out", default="coververify-out", help="output directory")
    v.add_argument("--threshold", type=float, help=f"certified small-prime bound (default {sp.CERTIFIED_BOUND})")
    v.add_argument("--report-threshold", type=float, help=f"expansion threshold (default {sp.THRESHOLD})")
    v.add_argument("--grid-step", type=float, help="medium sweep grid step (default 1e-4)")
    v.add_argument("--region-bound", type=float, help=f"region bound (default {mp.REGION_BOUND})")
    v.add_argument("--sweep-target", type=float, help=f"sweep target (default {mp.TARGET_BOUND})")
    v.add_argument("--workers", type=int)
    v.set_defaults(func=cmd_verify_all)

    e = sub.add_parser("enumerate-small", help="canonical configurations and the staged LP search")
    e.add_argument("--depth", type=int, default=len(sp.FAMILY), help="largest stage to expand to (7..11)")
    e.add_argument("--threshold", type=float, default=sp.THRESHOLD, help="report threshold")
    e.add_argument("--bound", type=float, default=sp.CERTIFIED_BOUND, help="certified bound")
    e.add_argument("--shard", default="0/1", help="INDEX/COUNT over base configurations")
    e.add_argument("--full-count", action="store_true", help="count all configurations (needs numba)")
    e.add_argument("--csv", help="write per-configuration rows")
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_enumerate_small)

    c = sub.add_parser("check-config", help="evaluate explicit configurations on the small-prime box")
    c.add_argument("file", help="one configuration per line, '-' for stdin")
    c.add_argument("--bound", type=float, default=sp.CERTIFIED_BOUND)
    c.add_argument("--full", action="store_true", help="use the uncompressed LP")
    c.add_argument("--simplex", action="store_true", help="use the built-in simplex")
    c.add_argument("--exact", action="store_true", help="print exact rational bounds on the LP minimum")
    c.set_defaults(func=cmd_check_config)

    s = sub.add_parser("sweep-medium", help="delta optimization over the dominating grid")
    s.add_argument("--grid-step", type=float, default=1e-4)
    s.add_argument("--region-bound", type=float, default=mp.REGION_BOUND)
    s.add_argument("--u-max", type=float, default=5.0)
    s.add_argument("--target", type=float, default=mp.TARGET_BOUND)
    s.add_argument("--tol", type=float, default=mp.GOLDEN_TOL)
    s.add_argument("--pass-tol", type=float, default=mp.PASS_TOL)
    s.add_argument("--max-passes", type=int, default=mp.MAX_PASSES)
    s.add_argument("--point", type=float, nargs=2, metavar=("C1", "C3"), help="optimize a single point")
    s.add_argument("--csv", help="write per-point rows")
    s.set_defaults(func=cmd_sweep_medium)

    g = sub.add_parser("gmm-check", help="second-moment sum for a size sequence")
    g.add_argument("--seq", required=True, help="'a*k+b' or a comma separated list q_1,q_2,...")
    g.add_argument("--eps", type=float, required=True)
    g.add_argument("--N", type=int, default=1, help="q_k > (3+eps)k is required for k >= N")
    g.add_argument("--C", type=int, default=0)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--smallest-c", action="store_true", help="report the smallest certifying C instead")
    g.add_argument("--csv", help="write the partial-sum ledger")
    g.set_defaults(func=cmd_gmm_check)

    gc = sub.add_parser("greedy-cover", help="greedy non-parallel cover of a box")
    mode = gc.add_mutually_exclusive_group(required=True)
    mode.add_argument("--sizes", help="comma separated box sizes")
    mode.add_argument("--sharpness", type=int, nargs=2, metavar=("C", "N"), help="avoid the first C coordinates")
    gc.set_defaults(func=cmd_greedy_cover)

    a = sub.add_parser("ap-translate", help="progressions <-> hyperplanes")
    a.add_argument("file", help="'a mod d' per line (or configurations with --reverse); '-' for stdin")
    a.add_argument("--primes", required=True, help="comma separated odd primes")
    a.add_argument("--reverse", action="store_true", help="configurations to progressions")
    a.add_argument("--allow-repeats", action="store_true", help="allow equal moduli")
    a.set_defaults(func=cmd_ap_translate)

    r = sub.add_parser("sieve-run", help="run the measure sieve and print its ledger")
    r.add_argument("--sizes", required=True)
    r.add_argument("--config", required=True, help="file holding one configuration")
    r.add_argument("--deltas", required=True, help="delta for each level after --start")
    r.add_argument("--start", type=int, default=0)
    r.add_argument("--csv", help="ledger file (default stdout)")
    r.set_defaults(func=cmd_sieve_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.exit(certmod.EXIT_USAGE, f"coververify {args.command}: error: {e}\n")


if __name__ == "__main__":
    sys.exit(main())
