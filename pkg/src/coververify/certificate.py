"""End-to-end re-verification and its certificate.

The certificate is a JSON document with sorted keys.  It depends only on
the parameters (never on timing or worker count), so two runs with the same
flags produce byte-identical files.  Wall-clock times go to a separate
``timings.json``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import mediumprimes as mp
from . import smallprimes as sp
from .boxgeom import format_configuration

EXIT_VERIFIED = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

DEFAULTS = {
    "small_threshold": sp.THRESHOLD,
    "small_bound": sp.CERTIFIED_BOUND,
    "region_bound": mp.REGION_BOUND,
    "grid_step": 1e-4,
    "u_max": 5.0,
    "sweep_target": mp.TARGET_BOUND,
    "large_prime_threshold": mp.LARGE_PRIME_THRESHOLD,
    "golden_tol": mp.GOLDEN_TOL,
    "pass_tol": mp.PASS_TOL,
    "max_passes": mp.MAX_PASSES,
}

MAX_LISTED = 20  # failing items listed per stage


def _digest(lines) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def _num(x: float):
    # JSON has no inf/nan; keep them readable
    x = float(x)
    return x if math.isfinite(x) else repr(x)


@dataclass
class Run:
    """Everything a verification produced, before serialization."""

    params: dict
    base: list
    report: sp.StagedReport
    sweep: mp.SweepResult
    timings: dict = field(default_factory=dict)

    # ---- stage verdicts ------------------------------------------------

    def small_failures(self) -> list[dict]:
        bound = self.params["small_bound"]
        out = [
            {"config": format_configuration(r.config), "value": _num(r.value), "kind": "survivor"}
            for r in self.report.survivors
            if not r.value < bound
        ]
        for row in self.report.rows:
            config, stage, value, p, adjusted = row
            if math.isfinite(adjusted) and adjusted < self.params["small_threshold"] and not adjusted < bound:
                out.append({"config": config, "value": _num(adjusted), "kind": "accepted-above-bound"})
        out.extend({"config": format_configuration(c), "value": "inf", "kind": "covers-box"} for c in self.report.covered)
        return out

    @property
    def small_ok(self) -> bool:
        return self.report.certified(self.params["small_bound"])

    def medium_failures(self) -> list[dict]:
        s = self.sweep
        bad = (s.opt.mu_hat <= 0) | ~(s.opt.ratio <= self.params["sweep_target"])
        return [
            {"i": int(s.index[j]), "u": float(s.u[j]), "v": float(s.v[j]),
             "ratio": _num(s.opt.ratio[j]), "mu_hat": float(s.opt.mu_hat[j])}
            for j in np.nonzero(bad)[0]
        ]

    @property
    def medium_ok(self) -> bool:
        return self.sweep.certified(self.params["sweep_target"])

    @property
    def chain_ok(self) -> bool:
        return self.params["sweep_target"] <= self.params["large_prime_threshold"]

    @property
    def verified(self) -> bool:
        return self.small_ok and self.medium_ok and self.chain_ok

    # ---- serialization -------------------------------------------------

    def certificate(self) -> dict:
        p = self.params
        rep, s = self.report, self.sweep
        small_bad = self.small_failures()
        medium_bad = self.medium_failures()
        j = int(np.argmax(s.opt.ratio))
        return {
            "tool": {"name": "coververify", "version": __version__},
            "parameters": {k: p[k] for k in sorted(p)},
            "reference_parameters": p == DEFAULTS,
            "inputs": {
                "base_configurations": _digest(format_configuration(c) for c in self.base),
                "grid": _digest(f"{i} {u!r} {v!r}" for i, u, v in zip(s.index, s.u, s.v)),
            },
            "small_primes": {
                "box": list(sp.BOX.sizes),
                "base_count": len(self.base),
                "stages": {str(k): {"evaluated": v[0], "not_accepted": v[1]} for k, v in sorted(rep.counts.items())},
                "cascade": list(rep.cascade[1:]),
                "max_value": _num(rep.max_value),
                "bound": p["small_bound"],
                "survivors": [
                    {"config": format_configuration(r.config), "value": _num(r.value)} for r in rep.survivors
                ],
                "covered_configurations": len(rep.covered),
                "failing": small_bad[:MAX_LISTED],
                "failing_count": len(small_bad),
                "passed": self.small_ok,
            },
            "medium_primes": {
                "primes": list(mp.MEDIUM_PRIMES),
                "points": len(s.index),
                "max_ratio": _num(s.max_ratio),
                "argmax": {"i": int(s.index[j]), "u": float(s.u[j]), "v": float(s.v[j])},
                "min_mu_hat": float(np.min(s.opt.mu_hat)),
                "all_mu_hat_positive": s.all_positive,
                "passes": int(s.opt.passes),
                "target": p["sweep_target"],
                "failing": medium_bad[:MAX_LISTED],
                "failing_count": len(medium_bad),
                "passed": self.medium_ok,
            },
            "threshold_chain": {
                "sweep_target": p["sweep_target"],
                "large_prime_threshold": p["large_prime_threshold"],
                "passed": self.chain_ok,
            },
            "verdict": "verified" if self.verified else "failed",
        }

    def summary(self) -> str:
        cert = self.certificate()
        sm, md, ch = cert["small_primes"], cert["medium_primes"], cert["threshold_chain"]
        mark = lambda ok: "PASS" if ok else "FAIL"  # noqa: E731
        lines = [
            f"coververify {__version__}" + ("" if cert["reference_parameters"] else "  [non-reference parameters]"),
            f"[{mark(sm['passed'])}] small primes: {sm['base_count']} base configurations, "
            f"cascade {tuple(sm['cascade'])}, max value {sm['max_value']} vs bound {sm['bound']}",
        ]
        lines += [f"         survivor {x['config']}  value {x['value']}" for x in sm["survivors"]]
        lines += [f"         failing ({x['kind']}) {x['config']}  {x['value']}" for x in sm["failing"]]
        lines.append(
            f"[{mark(md['passed'])}] medium primes: {md['points']} grid points, max ratio {md['max_ratio']} "
            f"at i={md['argmax']['i']} vs target {md['target']}, min mu_hat {md['min_mu_hat']:.6g}"
        )
        lines += [f"         failing i={x['i']} ratio {x['ratio']} mu_hat {x['mu_hat']:.6g}" for x in md["failing"]]
        lines.append(f"[{mark(ch['passed'])}] threshold chain: {ch['sweep_target']} <= {ch['large_prime_threshold']}")
        lines.append(f"verdict: {cert['verdict']}")
        return "\n".join(lines)


def certificate_text(cert: dict) -> str:
    return json.dumps(cert, sort_keys=True, indent=2) + "\n"


def verify_all(workers: int = 1, progress=None, **overrides) -> Run:
    """Run the small-prime search, the medium-prime sweep and the threshold chain."""
    unknown = set(overrides) - set(DEFAULTS)
    if unknown:
        raise TypeError(f"unknown parameters: {sorted(unknown)}")
    params = {**DEFAULTS, **overrides}
    timings = {}
    t0 = time.perf_counter()
    base = sp.enumerate_base()
    timings["enumerate_base"] = time.perf_counter() - t0
    t = time.perf_counter()
    report = sp.staged_search(params["small_threshold"], base, workers=workers, progress=progress)
    timings["staged_search"] = time.perf_counter() - t
    t = time.perf_counter()
    sweep = mp.sweep(
        params["region_bound"], params["grid_step"], params["u_max"],
        tol=params["golden_tol"], pass_tol=params["pass_tol"], max_passes=params["max_passes"],
    )
    timings["medium_sweep"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0
    timings["workers"] = workers
    return Run(params, base, report, sweep, timings)


def write_outputs(run: Run, outdir: str | Path) -> dict[str, Path]:
    """Certificate, timings, summary and the two CSV ledgers."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "certificate": outdir / "certificate.json",
        "timings": outdir / "timings.json",
        "summary": outdir / "summary.txt",
        "small": outdir / "small_primes.csv",
        "medium": outdir / "medium_sweep.csv",
    }
    paths["certificate"].write_text(certificate_text(run.certificate()))
    paths["timings"].write_text(json.dumps(run.timings, sort_keys=True, indent=2) + "\n")
    paths["summary"].write_text(run.summary() + "\n")
    with open(paths["small"], "w", newline="") as fh:
        write_small_csv(fh, run.report.rows)
    with open(paths["medium"], "w", newline="") as fh:
        write_sweep_csv(fh, run.sweep)
    return paths


SMALL_HEADER = ["config", "stage", "lp_value", "p_bound", "adjusted"]


def write_small_csv(fh, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SMALL_HEADER)
    for config, stage, value, p, adjusted in rows:
        w.writerow([config, stage, repr(float(value)), repr(float(p)), repr(float(adjusted))])


def write_sweep_csv(fh, sweep: mp.SweepResult) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["i", "u", "v", "ratio", "mu_hat"] + [f"delta_{k}" for k in range(mp.FIRST_K, mp.LAST_K + 1)])
    for row in sweep.rows():
        w.writerow([row[0]] + [repr(x) for x in row[1:]])
