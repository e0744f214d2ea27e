"""Constructive coverings and the progression/hyperplane dictionary.

A progression ``a + dZ`` with ``d = p_{i_1} ... p_{i_r}`` (distinct primes
from a fixed list) corresponds to the hyperplane of the box
``[p_1] x ... x [p_n]`` fixing coordinate ``i`` to the residue of ``a``
modulo ``p_i`` for ``i`` in ``{i_1, ..., i_r}``.  Residues are written in
``1..p``, so residue ``0`` is the value ``p``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .boxgeom import Box, Configuration, Hyperplane, colex_key, covers

GREEDY_POINT_CAP = 10**7


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


@dataclass(frozen=True)
class APSystem:
    """Progressions ``a + dZ`` with square-free moduli over ``primes``."""

    progressions: tuple[tuple[int, int], ...]
    primes: tuple[int, ...]
    distinct: bool = True

    def __post_init__(self):
        object.__setattr__(self, "progressions", tuple((int(a), int(d)) for a, d in self.progressions))
        object.__setattr__(self, "primes", tuple(int(p) for p in self.primes))
        if len(set(self.primes)) != len(self.primes) or not all(is_prime(p) for p in self.primes):
            raise ValueError(f"primes must be distinct primes: {self.primes}")
        for a, d in self.progressions:
            self.factor(d)
        if self.distinct and len({d for _, d in self.progressions}) != len(self.progressions):
            raise ValueError("moduli are not distinct")

    def factor(self, d: int) -> list[int]:
        """Indices (0-based) of the primes dividing ``d``; ``d`` must be square-free over them."""
        if d < 2:
            raise ValueError(f"modulus {d} must be at least 2")
        idx, rest = [], d
        for i, p in enumerate(self.primes):
            if rest % p == 0:
                rest //= p
                if rest % p == 0:
                    raise ValueError(f"modulus {d} is not square-free")
                idx.append(i)
        if rest != 1:
            raise ValueError(f"modulus {d} is not smooth over {self.primes}")
        return idx

    @property
    def lcm(self) -> int:
        return math.lcm(*(d for _, d in self.progressions)) if self.progressions else 1

    def covers_integers(self) -> bool:
        """Brute force over one period of the lcm of the moduli."""
        if not self.progressions:
            return False
        L = self.lcm
        hit = np.zeros(L, dtype=bool)
        for a, d in self.progressions:
            hit[a % d :: d] = True
        return bool(hit.all())


def ap_to_hyperplanes(system: APSystem, primes: Sequence[int] | None = None) -> tuple[Configuration, Box]:
    """Box ``[p_1] x ... x [p_n]`` (odd primes only) and one hyperplane per progression."""
    if primes is not None and tuple(primes) != system.primes:
        system = APSystem(system.progressions, tuple(primes), system.distinct)
    if 2 in system.primes:
        raise ValueError("the prime list must consist of odd primes")
    box = Box(system.primes, system.primes)
    planes = []
    for a, d in system.progressions:
        fixed = {i + 1: (a - 1) % system.primes[i] + 1 for i in system.factor(d)}
        planes.append(Hyperplane.from_fixed(box.dim, fixed))
    return Configuration(box, tuple(planes)), box


def hyperplanes_to_ap(config: Configuration, primes: Sequence[int]) -> APSystem:
    """Inverse of :func:`ap_to_hyperplanes`; residues come back in ``[0, d)``."""
    primes = tuple(primes)
    progs = []
    for h in config:
        idx = sorted(c - 1 for c in h.fixed)
        d = math.prod(primes[i] for i in idx)
        a = _crt([h.values[i] % primes[i] for i in idx], [primes[i] for i in idx])
        progs.append((a, d))
    return APSystem(tuple(progs), primes)


def _crt(residues: Sequence[int], moduli: Sequence[int]) -> int:
    x, m = 0, 1
    for r, p in zip(residues, moduli):
        t = ((r - x) * pow(m, -1, p)) % p
        x, m = x + m * t, m * p
    return x % m


def parse_ap_lines(lines: Iterable[str]) -> list[tuple[int, int]]:
    """``a d`` or ``a mod d`` per line, ``#`` comments."""
    out = []
    for line in lines:
        line = line.split("#", 1)[0].replace("mod", " ").replace(",", " ").strip()
        if line:
            a, d = line.split()
            out.append((int(a), int(d)))
    return out


# --------------------------------------------------------------------------
# greedy covering


def greedy_order(coords: Sequence[int]) -> list[frozenset[int]]:
    """Nonempty subsets of ``coords`` by increasing size, colex within a size."""
    coords = sorted(coords)
    subsets = [frozenset(s) for r in range(1, len(coords) + 1) for s in itertools.combinations(coords, r)]
    return sorted(subsets, key=lambda s: (len(s), colex_key(s)))


def lemma_hypothesis(sizes: Sequence[int]) -> bool:
    """``prod (1 + 1/q_k) >= n log n`` (only meaningful for ``n >= 3``)."""
    n = len(sizes)
    return n >= 3 and math.prod(1.0 + 1.0 / q for q in sizes) >= n * math.log(n)


@dataclass
class GreedyStep:
    fixed: frozenset[int]
    plane: Hyperplane
    remaining_before: int
    newly_covered: int
    classes: int  # number of parallel hyperplanes with this fixed set

    @property
    def meets_average(self) -> bool:
        return self.newly_covered * self.classes >= self.remaining_before


@dataclass
class GreedyResult:
    config: Configuration
    residual: int
    hypothesis: bool
    steps: list[GreedyStep] = field(default_factory=list)

    @property
    def covered(self) -> bool:
        return self.residual == 0


def greedy_cover(box: Box, coords: Iterable[int] | None = None, cap: int = GREEDY_POINT_CAP) -> GreedyResult:
    """Cover the box greedily, one hyperplane per nonempty fixed set.

    Fixed sets range over nonempty subsets of ``coords`` (default: all
    coordinates) in :func:`greedy_order`.  Each hyperplane covers as many
    still uncovered points as possible, ties going to the lexicographically
    smallest fixed values.  Stops as soon as everything is covered.
    """
    if box.npoints > cap:
        raise ValueError(f"box has {box.npoints} points, above the cap {cap}")
    coords = list(range(1, box.dim + 1)) if coords is None else sorted(coords)
    pts = box.point_array()
    alive = np.ones(len(pts), dtype=bool)
    remaining = len(pts)
    planes, steps = [], []
    hyp = lemma_hypothesis([box.size(c) for c in coords])
    for F in greedy_order(coords):
        if remaining == 0:
            break
        idx = sorted(F)
        sizes = [box.size(c) for c in idx]
        key = np.zeros(len(pts), dtype=np.int64)
        for c, s in zip(idx, sizes):
            key = key * s + (pts[:, c - 1] - 1)
        ncls = math.prod(sizes)
        counts = np.bincount(key[alive], minlength=ncls)
        best = int(np.argmax(counts))
        vals, rest = [], best
        for s in reversed(sizes):
            vals.append(rest % s + 1)
            rest //= s
        plane = Hyperplane.from_fixed(box.dim, dict(zip(idx, reversed(vals))))
        got = int(counts[best])
        steps.append(GreedyStep(F, plane, remaining, got, ncls))
        planes.append(plane)
        alive &= key != best
        remaining -= got
    result = GreedyResult(Configuration(box, tuple(planes)), remaining, hyp, steps)
    if hyp and not result.covered:
        raise AssertionError(f"greedy cover failed on {box.sizes} although the product hypothesis holds")
    return result


# --------------------------------------------------------------------------
# sequences with liminf q_k / k = 1 admitting coverings that avoid [C]


def sharpness_size(k: int) -> int:
    """``floor((1 - 2/log k) k)``, raised to 2 where that falls below 2."""
    if k < 2:
        return 2
    return max(2, math.floor((1.0 - 2.0 / math.log(k)) * k))


@dataclass
class SharpnessResult:
    C: int
    n: int
    sizes: tuple[int, ...]  # q_1..q_n
    product: float
    target: float
    holds: bool
    cover: GreedyResult | None = None

    @property
    def tail(self) -> tuple[int, ...]:
        return self.sizes[self.C :]


def sharpness_sequence(C: int, n: int, build: bool = True, cap: int = GREEDY_POINT_CAP) -> SharpnessResult:
    """Sizes ``q_1..q_n`` (``q_k = 2`` for ``k <= C``) and the covering inequality.

    Checks ``prod_{k=C+1..n} (1 + 1/q_k) >= (n - C) log(n - C)``.  When it
    holds and the box is small enough, the greedy cover restricted to the
    coordinates ``C+1..n`` is attached.
    """
    if not n > C >= 1:
        raise ValueError("need n > C >= 1")
    sizes = tuple([2] * C + [sharpness_size(k) for k in range(C + 1, n + 1)])
    product = math.prod(1.0 + 1.0 / q for q in sizes[C:])
    m = n - C
    target = m * math.log(m) if m > 1 else 0.0
    holds = m >= 3 and product >= target
    cover = None
    if build and holds and math.prod(sizes) <= cap:
        cover = greedy_cover(Box(sizes), coords=range(C + 1, n + 1), cap=cap)
    return SharpnessResult(C, n, sizes, product, target, holds, cover)


def sharpness_threshold(C: int, n_max: int = 10**6) -> int | None:
    """Smallest ``n > C + 2`` at which the covering inequality holds."""
    log_prod = 0.0
    for n in range(C + 1, n_max + 1):
        log_prod += math.log1p(1.0 / sharpness_size(n))
        m = n - C
        if m >= 3 and log_prod >= math.log(m * math.log(m)):
            return n
    return None


def check_cover(result: GreedyResult) -> bool:
    """Independent exhaustive check of a claimed cover."""
    return covers(result.config) is None
