"""The primes 13 through 73: choosing the distortion parameters.

With the single-coordinate hyperplanes removed, the prime ``p_k`` leaves a
coordinate of size ``p_k - 1``.  Starting from ``c5(1)``, ``c5(3)`` and
``mu_5 = 1``, each prime ``k = 6..21`` updates

    mu_k   = mu_{k-1} - (c_{k-1}(3) - 2 c_{k-1}(1) + 1) / (4 d (1 - d) (p_k - 1)^2)
    c_k(x) = c_{k-1}(x) (1 + x / ((1 - d) (p_k - 1)))      for x in {1, 3}

with ``d = delta_k``.  The quantity to control is ``c21(3) / mu_21``; it is
compared against the large-prime threshold 138.877.

Everything here is vectorized over arrays of ``(c5(1), c5(3))`` pairs so the
40 001-point grid can be optimized in one pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

MEDIUM_PRIMES = (13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73)
FIRST_K, LAST_K = 6, 21
SIZES = np.array(MEDIUM_PRIMES, dtype=float) - 1.0

# the large-prime criterion is imported as a constant, not derived here
LARGE_PRIME_THRESHOLD = 138.877
TARGET_BOUND = 138.874
REGION_BOUND = 9.019

# heuristic start delta_k = min(1/2, INIT_SCALE / (p_k - 1)); 3 is too small
# to give mu_21 > 0 at c5(1) = 1, anything from 4 up converges to the same optimum
INIT_SCALE = 6.0
DELTA_MIN = 1e-6
DELTA_MAX = 0.5
GOLDEN_TOL = 1e-9
PASS_TOL = 1e-9
MAX_PASSES = 100

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def prime_at(k: int) -> int:
    return MEDIUM_PRIMES[k - FIRST_K]


def size_at(k: int) -> int:
    return prime_at(k) - 1


@dataclass
class MediumState:
    k: int
    c1: float
    c3: float
    mu_hat: float
    deltas: tuple[float, ...] = ()

    @classmethod
    def start(cls, c5_1: float, c5_3: float) -> "MediumState":
        return cls(5, float(c5_1), float(c5_3), 1.0)

    @property
    def ratio(self) -> float:
        return self.c3 / self.mu_hat if self.mu_hat > 0 else math.inf

    @property
    def flagged(self) -> bool:
        return self.mu_hat <= 0


def advance(state: MediumState, k: int, delta: float) -> MediumState:
    """Process the prime ``p_k`` with distortion ``delta``."""
    if k != state.k + 1 or not FIRST_K <= k <= LAST_K:
        raise ValueError(f"cannot advance from level {state.k} to {k}")
    if not 0 < delta <= 0.5:
        raise ValueError(f"delta_{k} = {delta} outside (0, 1/2]")
    s = size_at(k)
    removed = (state.c3 - 2.0 * state.c1 + 1.0) / (4.0 * delta * (1.0 - delta) * s * s)
    return MediumState(
        k,
        state.c1 * (1.0 + 1.0 / ((1.0 - delta) * s)),
        state.c3 * (1.0 + 3.0 / ((1.0 - delta) * s)),
        state.mu_hat - removed,
        state.deltas + (delta,),
    )


def run(c5_1: float, c5_3: float, deltas) -> MediumState:
    state = MediumState.start(c5_1, c5_3)
    for k, d in zip(range(FIRST_K, LAST_K + 1), deltas, strict=True):
        state = advance(state, k, float(d))
    return state


def evaluate(c1, c3, deltas: np.ndarray, mu=1.0, start: int = 0):
    """Vectorized ``(c21(3), mu_hat_21, c21(1))``; ``deltas`` has shape ``(..., 16)``.

    With ``start > 0`` the inputs are taken as the state after the first
    ``start`` medium primes and only the remaining steps are applied.
    """
    c1 = np.array(c1, dtype=float, copy=True)
    c3 = np.array(c3, dtype=float, copy=True)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), np.broadcast(c1, c3, deltas[..., 0]).shape).copy()
    for j in range(start, deltas.shape[-1]):
        d = deltas[..., j]
        s = SIZES[j]
        mu = mu - (c3 - 2.0 * c1 + 1.0) / (4.0 * d * (1.0 - d) * s * s)
        g = 1.0 / ((1.0 - d) * s)
        c1 = c1 * (1.0 + g)
        c3 = c3 * (1.0 + 3.0 * g)
    return c3, mu, c1


def _safe_ratio(c21, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mu > 0, c21 / np.where(mu > 0, mu, 1.0), np.inf)


def ratio(c1, c3, deltas) -> np.ndarray:
    """``c21(3) / mu_hat_21``, or ``inf`` where ``mu_hat_21 <= 0``."""
    c21, mu, _ = evaluate(c1, c3, np.asarray(deltas, dtype=float))
    return _safe_ratio(c21, mu)


def initial_deltas(scale: float = INIT_SCALE) -> np.ndarray:
    return np.minimum(DELTA_MAX, scale / SIZES)


def _golden(f, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized golden-section minimization of ``f`` on ``[lo, hi]``.

    Where both probes are infinite (``mu_hat <= 0``) the bracket moves right,
    since larger deltas remove less mass.
    """
    a, b = lo.copy(), hi.copy()
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    n_iter = int(math.ceil(math.log(tol / float(np.max(hi - lo))) / math.log(_INVPHI)))
    for _ in range(max(n_iter, 1)):
        left = (f1 < f2) | ((f1 == f2) & np.isfinite(f1))
        a = np.where(left, a, x1)
        b = np.where(left, x2, b)
        probe = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        fp = f(probe)
        x1, x2 = np.where(left, probe, x2), np.where(left, x1, probe)
        f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
    return 0.5 * (a + b)


@dataclass
class DeltaOptimum:
    c5_1: np.ndarray
    c5_3: np.ndarray
    deltas: np.ndarray  # (npoints, 16)
    ratio: np.ndarray
    mu_hat: np.ndarray
    passes: int

    @property
    def certified(self) -> np.ndarray:
        return self.mu_hat > 0


def optimize_deltas(c5_1, c5_3, init: np.ndarray | None = None, tol: float = GOLDEN_TOL,
                    pass_tol: float = PASS_TOL, max_passes: int = MAX_PASSES) -> DeltaOptimum:
    """Minimize ``c21(3)/mu_hat_21`` over ``delta_6..delta_21`` in ``(0, 1/2]``.

    Coordinate descent: each pass runs a golden-section search on every
    ``delta_k`` in turn (others fixed) and accepts the result only if it
    does not increase the ratio.  Passes stop once the relative improvement
    is below ``pass_tol`` at every point, or after ``max_passes``.
    Accepts scalars or equal-length arrays; always returns arrays.
    """
    c1 = np.atleast_1d(np.asarray(c5_1, dtype=float))
    c3 = np.atleast_1d(np.asarray(c5_3, dtype=float))
    c1, c3 = np.broadcast_arrays(c1, c3)
    npts = len(c1)
    d = np.tile(initial_deltas() if init is None else np.asarray(init, dtype=float), (npts, 1))
    if d.shape != (npts, 16):
        d = np.asarray(init, dtype=float).reshape(npts, 16).copy()
    best = ratio(c1, c3, d)
    lo = np.full(npts, DELTA_MIN)
    hi = np.full(npts, DELTA_MAX)
    passes = 0
    for passes in range(1, max_passes + 1):
        before = best.copy()
        for j in range(16):
            # steps before j do not depend on delta_j
            p3, pmu, p1 = evaluate(c1, c3, d[:, :j]) if j else (c3, np.ones(npts), c1)

            def f(x, j=j, p1=p1, p3=p3, pmu=pmu):
                tail = d.copy()
                tail[:, j] = x
                c21, mu, _ = evaluate(p1, p3, tail, pmu, start=j)
                return _safe_ratio(c21, mu)

            x = _golden(f, lo, hi, tol)
            val = f(x)
            better = val < best
            d[better, j] = x[better]
            best = np.where(better, val, best)
        finite = np.isfinite(best)
        newly_finite = finite & ~np.isfinite(before)
        rel = (before[finite & ~newly_finite] - best[finite & ~newly_finite]) / best[finite & ~newly_finite]
        if not newly_finite.any() and np.all(rel < pass_tol):
            break
    _, mu, _ = evaluate(c1, c3, d)
    return DeltaOptimum(c1, c3, d, best, mu, passes)


def grid(step: float = 1e-4, bound: float = REGION_BOUND, u_max: float = 5.0):
    """Dominating points ``(u(i), v(i)) = (i h, bound + 3 (i + 1) h / 4)`` for ``1 <= u <= u_max``."""
    lo = int(round(1.0 / step))
    hi = int(round(u_max / step))
    i = np.arange(lo, hi + 1)
    return i, i * step, bound + 3.0 * (i + 1) * step / 4.0


@dataclass
class SweepResult:
    step: float
    bound: float
    index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    opt: DeltaOptimum

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.opt.ratio))

    @property
    def argmax(self) -> int:
        return int(self.index[np.argmax(self.opt.ratio)])

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.opt.mu_hat > 0))

    def certified(self, target: float = TARGET_BOUND) -> bool:
        return self.all_positive and self.max_ratio <= target

    def rows(self):
        for j, i in enumerate(self.index):
            yield (int(i), float(self.u[j]), float(self.v[j]), float(self.opt.ratio[j]),
                   float(self.opt.mu_hat[j]), *map(float, self.opt.deltas[j]))


def sweep(bound: float = REGION_BOUND, step: float = 1e-4, u_max: float = 5.0,
          tol: float = GOLDEN_TOL, pass_tol: float = PASS_TOL, max_passes: int = MAX_PASSES) -> SweepResult:
    """Optimize the deltas at every dominating grid point of ``c5(3) - 3 c5(1)/4 <= bound``."""
    i, u, v = grid(step, bound, u_max)
    opt = optimize_deltas(u, v, tol=tol, pass_tol=pass_tol, max_passes=max_passes)
    return SweepResult(step, bound, i, u, v, opt)


def dominating_point(c5_1: float, step: float = 1e-4, bound: float = REGION_BOUND) -> tuple[int, float, float]:
    i = int(math.floor(c5_1 / step + 1e-12))
    return i, i * step, bound + 3.0 * (i + 1) * step / 4.0


@dataclass
class MonotonicityReport:
    samples: int
    c21_increasing_in_c3: bool
    mu_increasing_in_c1: bool
    mu_decreasing_in_c3: bool
    ratio_consistent: bool

    @property
    def ok(self) -> bool:
        return all((self.c21_increasing_in_c3, self.mu_increasing_in_c1, self.mu_decreasing_in_c3, self.ratio_consistent))


def monotonicity_probe(deltas, samples: int = 1000, rng: np.random.Generator | None = None,
                       step: float = 1e-2) -> MonotonicityReport:
    """Check the monotonicity of ``c21(3)`` and ``mu_hat_21`` in the inputs at fixed deltas."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = np.asarray(deltas, dtype=float)
    x = rng.uniform(1.0, 5.0, samples)
    y = rng.uniform(1.0, 13.0, samples)
    c21, mu, _ = evaluate(x, y, d)
    c21_y, mu_y, _ = evaluate(x, y + step, d)
    _, mu_x, _ = evaluate(x + step, y, d)
    r = ratio(x, y, d)
    pos = mu_y > 0
    ratio_ok = np.all(ratio(x + step, y, d)[mu > 0] <= r[mu > 0]) and np.all(r[pos] <= ratio(x, y + step, d)[pos])
    return MonotonicityReport(
        samples,
        bool(np.all(c21_y > c21)),
        bool(np.all(mu_x > mu)),
        bool(np.all(mu_y < mu)),
        bool(ratio_ok),
    )


# --------------------------------------------------------------------------
# large-prime termination criteria (imported constants and formulas)


@dataclass
class TerminationVerdict:
    f21: float
    certified: bool
    threshold: float
    theorem_rhs_21: float
    theorem_holds_21: bool


def theorem_rhs(k: int) -> float:
    """``(log k + log log k - 3)^2 k``, the general termination threshold (valid for ``k >= 10``)."""
    if k < 10:
        raise ValueError("the threshold formula applies for k >= 10")
    return (math.log(k) + math.log(math.log(k)) - 3.0) ** 2 * k


def termination_criteria(f21: float, threshold: float = LARGE_PRIME_THRESHOLD) -> TerminationVerdict:
    rhs = theorem_rhs(21)
    return TerminationVerdict(f21, f21 <= threshold, threshold, rhs, f21 <= rhs)


def f_growth(p: int, delta: float) -> float:
    """Factor ``1 + (3p - 1)/((1 - delta)(p - 1)^2)`` applied per prime beyond 73."""
    return 1.0 + (3.0 * p - 1.0) / ((1.0 - delta) * (p - 1.0) ** 2)


def propagate_f(kappa: float, mu: float, primes, deltas) -> list[float]:
    """``f_k`` for successive primes beyond 73 at a fixed ``mu``; first entry is ``f_21``."""
    out = [kappa / mu]
    prod = 1.0
    for p, d in zip(primes, deltas, strict=True):
        prod *= f_growth(p, d)
        out.append(kappa / mu * prod)
    return out


def condition20_holds(kappa: float, primes, deltas) -> bool:
    """Check ``c_{k-1}(3) / p_k^2 <= kappa / (p_k - 1)^2 * prod_{21<i<k} growth_i``.

    ``primes`` and ``deltas`` describe the coordinates after 73 (full size
    ``p``); ``c_k(3)`` starts from ``kappa`` at 73.
    """
    c3 = kappa
    prod = 1.0
    for p, d in zip(primes, deltas, strict=True):
        lhs = c3 / p**2
        rhs = kappa / (p - 1.0) ** 2 * prod
        if lhs > rhs * (1.0 + 1e-15):
            return False
        c3 *= 1.0 + 3.0 / ((1.0 - d) * p)
        prod *= f_growth(p, d)
    return True
