"""Moment bounds for the sieve and the linear-growth sufficient condition.

The initial measure on ``Q_a`` enters only through the table
``c(I) = max{Pr_a(H) : F(H) = I}``.  Deeper coordinates contribute the
weights ``nu(J) = prod_{j in J} 1 / ((1 - delta_j) |S_j|)``, and both are
packaged into the polynomial

    c_k(x) = sum_I c(I) x^|I| * prod_{j=a+1..k} (1 + x / ((1 - delta_j) |S_j|)),

which bounds the first and second moments of the removed fraction
``alpha_k``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .boxgeom import Configuration, Hyperplane
from .sieve import Measure, SieveState, fibre_hits

MAX_TABLE_LEVEL = 6


def subsets(coords: Sequence[int]):
    """All subsets of ``coords`` as frozensets, by size then lexicographically."""
    coords = list(coords)
    for r in range(len(coords) + 1):
        for comb in itertools.combinations(coords, r):
            yield frozenset(comb)


@dataclass(frozen=True)
class MomentProfile:
    """``c``-table on ``[a]`` plus the deltas and sizes of levels ``a+1..n``."""

    a: int
    c_table: dict = field(hash=False)
    deltas: tuple[float, ...] = ()
    sizes: tuple[int, ...] = ()

    def __post_init__(self):
        table = {frozenset(k): v for k, v in self.c_table.items()}
        if abs(table.get(frozenset(), 1.0) - 1.0) > 1e-12:
            raise ValueError("c(empty set) must be 1")
        table[frozenset()] = table.get(frozenset(), 1.0)
        for i in table:
            if any(not 1 <= c <= self.a for c in i):
                raise ValueError(f"c-table key {sorted(i)} outside [1, {self.a}]")
        object.__setattr__(self, "c_table", table)
        object.__setattr__(self, "deltas", tuple(self.deltas))
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if len(self.deltas) != len(self.sizes):
            raise ValueError("one delta per size expected")
        for d in self.deltas:
            if not 0 <= d <= 0.5:
                raise ValueError(f"delta {d} outside [0, 1/2]")

    @classmethod
    def trivial(cls, deltas=(), sizes=()) -> "MomentProfile":
        """Profile with ``a = 0`` (uniform start)."""
        return cls(0, {frozenset(): 1.0}, tuple(deltas), tuple(sizes))

    @property
    def n(self) -> int:
        return self.a + len(self.sizes)

    def c(self, coords) -> float:
        return self.c_table.get(frozenset(coords), 0.0)

    def delta(self, j: int) -> float:
        return self.deltas[j - self.a - 1]

    def size(self, j: int) -> int:
        return self.sizes[j - self.a - 1]


def c_table_from_measure(measure: Measure) -> dict[frozenset, float]:
    """``c(I)``: the largest mass of a hyperplane of ``Q_a`` with fixed set ``I``."""
    a = measure.k
    if a > MAX_TABLE_LEVEL:
        raise ValueError(f"c-table limited to a <= {MAX_TABLE_LEVEL}")
    table = {}
    for coords in subsets(range(1, a + 1)):
        if not coords:
            table[coords] = measure.total()
            continue
        idx = sorted(coords)
        masses: dict = {}
        for p, w in measure.weights.items():
            key = tuple(p[i - 1] for i in idx)
            masses[key] = masses.get(key, 0) + w
        table[coords] = max(masses.values(), default=0)
    return table


def nu(coords, profile: MomentProfile) -> float:
    out = 1.0
    for j in coords:
        if not profile.a < j <= profile.n:
            raise ValueError(f"coordinate {j} outside [{profile.a + 1}, {profile.n}]")
        out /= (1.0 - profile.delta(j)) * profile.size(j)
    return out


def c_poly(profile: MomentProfile, k: int, x: float) -> float:
    """``c_k(x)`` via the product form."""
    if not profile.a <= k <= profile.n:
        raise ValueError(f"level {k} outside [{profile.a}, {profile.n}]")
    base = sum(v * x ** len(i) for i, v in profile.c_table.items())
    for j in range(profile.a + 1, k + 1):
        base *= 1.0 + x / ((1.0 - profile.delta(j)) * profile.size(j))
    return base


def c_poly_double_sum(profile: MomentProfile, k: int, x: float) -> float:
    """``c_k(x)`` by the defining double sum over ``I`` and ``J``."""
    total = 0.0
    for j_set in subsets(range(profile.a + 1, k + 1)):
        w = nu(j_set, profile) * x ** len(j_set)
        total += w * sum(v * x ** len(i) for i, v in profile.c_table.items())
    return total


@dataclass(frozen=True)
class MomentBounds:
    k: int
    m1: float
    m2: float
    m2_codim2: float | None = None

    @property
    def best_m2(self) -> float:
        return self.m2 if self.m2_codim2 is None else min(self.m2, self.m2_codim2)


def moment_bounds(profile: MomentProfile, k: int, codim1_free: bool = False) -> MomentBounds:
    """Upper bounds on ``E[alpha_k]`` and ``E[alpha_k^2]``.

    With ``codim1_free`` (no hyperplane fixes a single coordinate, every
    coordinate of size at least 3) the sharper second-moment bound
    ``(c(3) - 2 c(1) + 1) / |S_k|^2`` is reported as well.
    """
    s = profile.size(k)
    c1 = c_poly(profile, k - 1, 1.0)
    c3 = c_poly(profile, k - 1, 3.0)
    sharp = None
    if codim1_free:
        if min(profile.sizes) < 3:
            raise ValueError("the codimension-2 bound needs every |S_k| >= 3")
        sharp = (c3 - 2.0 * c1 + 1.0) / s**2
    return MomentBounds(k, c1 / s, c3 / s**2, sharp)


def brute_moments(state: SieveState, k: int, t: int, cap: int = 10**6) -> float:
    """Exact ``E_{k-1}[alpha_k(x)^t]`` under the state's current measure."""
    if len(state.measure.weights) > cap:
        raise ValueError("measure support above the cap")
    if state.measure.k != k - 1:
        raise ValueError(f"measure is at level {state.measure.k}, need {k - 1}")
    planes = state.new_planes(k)
    size = state.box.size(k)
    total = 0.0
    for x, w in state.measure.weights.items():
        a = sum(fibre_hits(planes, x, size)) / size
        total += w * a**t
    return total


def lemma_moment_sum(state: SieveState, profile: MomentProfile, k: int, t: int) -> float:
    """Term-by-term sum over ``N_k^t`` bounding the ``t``-th moment of ``alpha_k``."""
    new = [h.fixed for h in state.new_planes(k)]
    total = 0.0
    for combo in itertools.product(new, repeat=t):
        union = frozenset().union(*combo) if combo else frozenset()
        i_part = frozenset(c for c in union if c <= profile.a)
        j_part = frozenset(c for c in union if profile.a < c <= k - 1)
        total += profile.c(i_part) * nu(j_part, profile)
    return total / state.box.size(k) ** t


def uncovered_criterion(bounds: Sequence[MomentBounds], deltas: Sequence[float]) -> float:
    """``1 - sum_k min{M1_k, M2_k / (4 delta_k (1 - delta_k))}``.

    A positive value certifies that the configuration does not cover.  For
    ``delta_k = 0`` only the first-moment branch is available.
    """
    total = 0.0
    for b, d in zip(bounds, deltas, strict=True):
        term = b.m1
        if d > 0:
            term = min(term, b.best_m2 / (4.0 * d * (1.0 - d)))
        total += term
    return 1.0 - total


@dataclass
class GMMResult:
    certified: bool
    total: float
    C: int
    n: int
    delta: float
    terms: np.ndarray  # terms[k-1] for k = 1..n

    @property
    def margin(self) -> float:
        return 1.0 - self.total


def _sizes(q, n: int) -> np.ndarray:
    if callable(q):
        return np.array([q(k) for k in range(1, n + 1)], dtype=float)
    q = np.asarray(q, dtype=float)
    if len(q) < n:
        raise ValueError(f"size sequence has {len(q)} entries, need {n}")
    return q[:n]


def gmm_terms(q, n: int, eps: float, N: int) -> tuple[np.ndarray, float]:
    """Per-level terms ``c_{k-1}(3) / (q_k^2 4 delta (1 - delta))`` with ``delta = eps/6``."""
    sizes = _sizes(q, n)
    if np.any(sizes < 2):
        raise ValueError("every q_k must be at least 2")
    ks = np.arange(1, n + 1)
    bad = (ks >= N) & ~(sizes > (3.0 + eps) * ks)
    if bad.any():
        k = int(ks[bad][0])
        raise ValueError(f"q_{k} = {sizes[k - 1]:g} violates q_k > (3 + eps) k")
    delta = eps / 6.0
    if not 0 < delta <= 0.5:
        raise ValueError("eps must lie in (0, 3]")
    growth = 1.0 + 3.0 / ((1.0 - delta) * sizes)
    c_prev = np.concatenate([[1.0], np.cumprod(growth)[:-1]])
    terms = c_prev / (sizes**2 * 4.0 * delta * (1.0 - delta))
    return terms, delta


def gmm_check(q, N: int, eps: float, C: int, n: int) -> GMMResult:
    """Sum the second-moment terms for levels ``C+1..n``; certified iff ``< 1``."""
    if n <= C:
        terms = np.zeros(0)
        return GMMResult(True, 0.0, C, n, eps / 6.0, terms)
    terms, delta = gmm_terms(q, n, eps, N)
    total = float(math.fsum(terms[C:]))
    return GMMResult(total < 1.0, total, C, n, delta, terms)


def gmm_smallest_c(q, N: int, eps: float, n: int) -> int:
    """Smallest ``C >= N`` with ``sum_{k=C+1..n}`` of the terms below 1."""
    terms, _ = gmm_terms(q, n, eps, N)
    tails = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])  # tails[C] = sum_{k>C}
    ok = np.nonzero(tails[N:] < 1.0)[0]
    return int(N + ok[0])


def linear_sequence(slope: int, offset: int) -> Callable[[int], int]:
    """``k -> slope*k + offset``; the ``a*k+b`` form accepted by the CLI."""
    return lambda k: slope * k + offset
