"""The measure-distortion sieve.

Hyperplanes are exposed one coordinate at a time.  At step ``k`` the
measure on ``Q_{k-1}`` is extended uniformly over each fibre
``{(x, y) : y in S_k}`` and then distorted: mass is pushed off the points
covered at this step (those in ``B_k``) onto the uncovered part of the
fibre, with the distortion capped by ``delta_k``.  The removed mass
``Pr_k(B_k)`` is accumulated into ``mu_k = 1 - sum Pr_i(B_i)``, a lower
bound on the measure of the uncovered set.

Measures are sparse ``{point: weight}`` maps.  Weights may be floats or
:class:`fractions.Fraction`; the update formula is written so that exact
inputs give exact outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .boxgeom import Box, Configuration, Hyperplane

MASS_TOL = 1e-12


@dataclass
class Measure:
    """A probability measure on the prefix box ``Q_k``; absent points weigh 0."""

    box: Box
    k: int
    weights: dict[tuple[int, ...], float | Fraction]

    @classmethod
    def uniform(cls, box: Box, k: int = 0, exact: bool = False) -> "Measure":
        pts = list(box.points(k))
        w = Fraction(1, len(pts)) if exact else 1.0 / len(pts)
        return cls(box, k, {p: w for p in pts})

    @classmethod
    def point_mass(cls, box: Box, point: Sequence[int]) -> "Measure":
        point = tuple(point)
        return cls(box, len(point), {point: 1.0})

    def total(self):
        return sum(self.weights.values())

    def weight(self, point) -> float | Fraction:
        return self.weights.get(tuple(point), 0)

    def check(self, tol: float = MASS_TOL):
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("negative weight in measure")
        if abs(self.total() - 1) > tol:
            raise ValueError(f"measure has total mass {self.total()}")


def measure_of(measure: Measure, target) -> float | Fraction:
    """Mass of a hyperplane or of a point set under ``measure``.

    ``target`` is a :class:`Hyperplane` of the full box, or an iterable of
    points of some prefix box ``Q_j``.  When the set lives deeper than the
    measure (fixed coordinates beyond ``k``, or ``j > k``) the measure is
    extended uniformly over fibres.
    """
    box, k = measure.box, measure.k
    if isinstance(target, Hyperplane):
        deep = [c for c in target.fixed if c > k]
        if any(c > box.dim for c in target.fixed):
            raise ValueError("hyperplane deeper than the box")
        scale = 1
        for c in deep:
            scale *= box.size(c)
        mass = sum(w for p, w in measure.weights.items() if target.contains_point(p))
        return mass / scale if deep else mass
    pts = {tuple(p) for p in target}
    if not pts:
        return 0
    j = len(next(iter(pts)))
    if j > box.dim:
        raise ValueError("point set deeper than the box")
    if j <= k:
        return sum(w for p, w in measure.weights.items() if p[:j] in pts)
    scale = 1
    for c in range(k + 1, j + 1):
        scale *= box.size(c)
    mass = sum(measure.weight(p[:k]) for p in pts)
    return mass / scale


def fibre_hits(planes: Sequence[Hyperplane], x: tuple[int, ...], size: int) -> list[bool]:
    """For each ``y`` in ``S_k``, whether ``(x, y)`` lies in one of ``planes``."""
    hits = [False] * size
    for h in planes:
        if h.contains_point(x):
            v = h.values[len(x)]
            if v:
                hits[v - 1] = True
            else:
                return [True] * size
    return hits


@dataclass
class StepRecord:
    k: int
    removed: float | Fraction
    mu: float | Fraction


@dataclass
class SieveState:
    box: Box
    config: Configuration
    deltas: dict[int, float | Fraction]
    measure: Measure
    start: int = 0
    mu: float | Fraction = 1
    ledger: list[StepRecord] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.measure.k

    def new_planes(self, k: int) -> list[Hyperplane]:
        return self.config.exposed_at(k)

    @property
    def certifies_uncovered(self) -> bool:
        return self.mu > 0


def alpha(state: SieveState, k: int) -> dict[tuple[int, ...], float | Fraction]:
    """Fraction of each fibre over the measure's support removed at step ``k``."""
    if not state.start < k <= state.box.dim:
        raise ValueError(f"step {k} outside ({state.start}, {state.box.dim}]")
    if state.measure.k != k - 1:
        raise ValueError(f"measure is at level {state.measure.k}, need {k - 1}")
    planes = state.new_planes(k)
    size = state.box.size(k)
    exact = isinstance(state.deltas.get(k, 0), Fraction)
    out = {}
    for x in state.measure.weights:
        n = sum(fibre_hits(planes, x, size))
        out[x] = Fraction(n, size) if exact else n / size
    return out


def step_measure(state: SieveState, k: int) -> float | Fraction:
    """Advance the measure from ``Q_{k-1}`` to ``Q_k``; returns ``Pr_k(B_k)``.

    Updates ``state.measure``, ``state.mu`` and ``state.ledger`` in place.
    """
    delta = state.deltas[k]
    if not 0 <= delta <= Fraction(1, 2):
        raise ValueError(f"delta_{k} = {delta} outside [0, 1/2]")
    planes = state.new_planes(k)
    size = state.box.size(k)
    exact = isinstance(delta, Fraction)
    one = Fraction(1) if exact else 1.0
    new = {}
    removed = 0
    for x, w in state.measure.weights.items():
        hits = fibre_hits(planes, x, size)
        n = sum(hits)
        a = Fraction(n, size) if exact else n / size
        base = w / size
        if n == 0:
            for y in range(1, size + 1):
                new[x + (y,)] = base
            continue
        if a <= delta:
            f_in = 0
        else:
            f_in = (a - delta) / (a * (one - delta))
        # for a == 1 there are no uncovered points in the fibre
        f_out = min(one / (one - a), one / (one - delta)) if n < size else 0
        for y in range(1, size + 1):
            if hits[y - 1]:
                if f_in:
                    new[x + (y,)] = f_in * base
                    removed += f_in * base
            else:
                new[x + (y,)] = f_out * base
    state.measure = Measure(state.box, k, new)
    state.mu = state.mu - removed
    state.ledger.append(StepRecord(k, removed, state.mu))
    return removed


def run_sieve(
    config: Configuration,
    deltas: Sequence | dict,
    initial: Measure | None = None,
    start: int = 0,
    exact: bool = False,
) -> SieveState:
    """Run the sieve for steps ``start+1 .. n``.

    ``deltas`` is either a ``{k: delta}`` map or a sequence for levels
    ``start+1 .. n``.  The initial measure must live on ``Q_start`` and give
    no mass to hyperplanes already exposed (fixed set inside ``[start]``).
    """
    box = config.box
    n = box.dim
    if not isinstance(deltas, dict):
        deltas = list(deltas)
        if len(deltas) != n - start:
            raise ValueError(f"expected {n - start} deltas, got {len(deltas)}")
        deltas = {start + 1 + i: d for i, d in enumerate(deltas)}
    if exact:
        deltas = {k: Fraction(d) for k, d in deltas.items()}
    if initial is None:
        initial = Measure.uniform(box, start, exact=exact)
    if initial.k != start:
        raise ValueError(f"initial measure at level {initial.k}, start level is {start}")
    for h in config:
        if max(h.fixed) <= start and measure_of(initial, h) > 0:
            raise ValueError(f"initial measure charges the already exposed hyperplane {h}")
    state = SieveState(box, config, deltas, Measure(box, start, dict(initial.weights)), start)
    state.mu = Fraction(1) if exact else 1.0
    for k in range(start + 1, n + 1):
        step_measure(state, k)
    return state


def uncovered_mass(state: SieveState) -> float | Fraction:
    """``Pr_k(R_k)`` for the current level, by direct summation."""
    planes = [h for h in state.config if max(h.fixed) <= state.k]
    return sum(
        w for p, w in state.measure.weights.items() if not any(h.contains_point(p) for h in planes)
    )


def ledger_rows(state: SieveState) -> Iterable[tuple[int, float, float]]:
    for rec in state.ledger:
        yield rec.k, float(rec.removed), float(rec.mu)
