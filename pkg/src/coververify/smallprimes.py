"""Optimized starting measures on the box of the primes 3, 5, 7 and 11.

After the single-coordinate hyperplanes are removed, each of these primes
``p`` leaves a coordinate with ``p - 1`` values, so the working box is
``Q5 = [2] x [4] x [6] x [10]``.  Coordinates carry the labels 2..5 (the
index of the prime), and a fixed set such as ``{4, 5}`` is written ``"45"``.

For a configuration of hyperplanes on ``Q5`` (one per fixed set with at
least two coordinates) a linear program finds a probability measure on the
uncovered set minimizing

    c5(3) - 3 c5(1) / 4 = sum_I (3^|I| - 3/4) c(I),

with ``c(I)`` the largest mass of a hyperplane with fixed set ``I``.  The
hyperplanes ``A45, A245, A345, A2345`` are left unspecified at first; their
mass is bounded by the LP's own ``c``-values and removed by renormalizing.
Configurations where the bound does not fall below the threshold are
expanded by specifying the next hyperplane.

Configurations are only enumerated up to relabeling of values inside each
coordinate: within colex order of the fixed sets, the value a hyperplane
uses in coordinate ``i`` may exceed the largest value used there so far by
at most one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from . import lp as lpmod
from .boxgeom import FREE, Box, Configuration, Hyperplane, colex_key, format_configuration, parse_configuration
from .moments import c_table_from_measure
from .sieve import Measure

SIZES = (2, 4, 6, 10)
PRIMES = (3, 5, 7, 11)
LABELS = (2, 3, 4, 5)
BOX = Box(SIZES, PRIMES)

THRESHOLD = 9.018
CERTIFIED_BOUND = 9.018071
BASE_COUNT = 7637


def fixed_set(name: str) -> frozenset[int]:
    """``"245"`` -> the positions of the coordinates labelled 2, 4 and 5."""
    return frozenset(LABELS.index(int(ch)) + 1 for ch in name)


def set_name(coords: Iterable[int]) -> str:
    return "".join(str(LABELS[c - 1]) for c in sorted(coords))


FAMILY = sorted(
    (frozenset(s) for r in (2, 3, 4) for s in itertools.combinations(range(1, 5), r)),
    key=colex_key,
)
BASE_SETS = FAMILY[:7]
LATE_SETS = FAMILY[7:]  # 45, 245, 345, 2345: the expansion order
NONEMPTY = [frozenset(s) for r in range(1, 5) for s in itertools.combinations(range(1, 5), r)]
WEIGHT = {I: 3.0 ** len(I) - 0.75 for I in NONEMPTY}


def parse(text: str) -> Configuration:
    return parse_configuration(text, BOX)


def figure_of_merit(c_table: dict) -> float:
    """``c5(3) - 3 c5(1)/4`` from a ``c``-table (``c(empty) = 1`` if absent)."""
    total = 0.25 * c_table.get(frozenset(), 1.0)
    for I in NONEMPTY:
        total += WEIGHT[I] * c_table.get(I, 0.0)
    return total


def unspecified(config: Configuration) -> list[frozenset[int]]:
    return [F for F in LATE_SETS if F not in config]


# --------------------------------------------------------------------------
# canonical forms and enumeration


def _max_before(config: Configuration, F: frozenset, coord: int) -> int:
    return max(
        (h.value(coord) for h in config if colex_key(h.fixed) < colex_key(F) and coord in h.fixed),
        default=0,
    )


def is_canonical(config: Configuration) -> bool:
    return all(
        h.value(i) <= _max_before(config, h.fixed, i) + 1 for h in config for i in h.fixed
    )


def canonical_reduce(config: Configuration) -> Configuration:
    """Apply the value transposition reduction until nothing triggers.

    A pair ``(F, i)`` triggers when ``b(F, i) >= b(I, i) + 2`` for every
    earlier (colex) ``I`` containing ``i`` and ``b(F, i) >= 2``; the values
    ``b`` and ``b - 1`` are then swapped in coordinate ``i`` throughout.
    Pairs are scanned in colex order of ``F`` and increasing ``i``; the scan
    restarts after every swap.
    """
    while True:
        for h in config.planes:
            trig = next(
                (i for i in sorted(h.fixed) if h.value(i) >= max(2, _max_before(config, h.fixed, i) + 2)),
                None,
            )
            if trig is not None:
                config = relabel(config, trig, _transposition(h.value(trig)))
                break
        else:
            return config


def _transposition(b: int) -> Callable[[int], int]:
    return lambda v: b - 1 if v == b else b if v == b - 1 else v


def relabel(config: Configuration, coord: int, perm: Callable[[int], int] | Sequence[int]) -> Configuration:
    """Apply a value permutation to one coordinate of every hyperplane.

    ``perm`` is a callable or a sequence with ``perm[v - 1]`` the image of ``v``.
    """
    f = perm if callable(perm) else (lambda v: perm[v - 1])
    planes = []
    for h in config.planes:
        vals = list(h.values)
        if vals[coord - 1] != FREE:
            vals[coord - 1] = f(vals[coord - 1])
        planes.append(Hyperplane(tuple(vals)))
    return Configuration(config.box, tuple(planes))


def extensions(config: Configuration, F: frozenset[int]) -> list[Configuration]:
    """Canonical antichain extensions of ``config`` by a hyperplane with fixed set ``F``."""
    coords = sorted(F)
    ranges = []
    for i in coords:
        top = max((h.value(i) for h in config if i in h.fixed), default=0)
        ranges.append(range(1, min(top + 1, BOX.size(i)) + 1))
    out = []
    for vals in itertools.product(*ranges):
        plane = Hyperplane.from_fixed(4, dict(zip(coords, vals)))
        if any(plane.is_subset_of(h) or h.is_subset_of(plane) for h in config):
            continue
        out.append(config.with_plane(plane))
    return out


def next_set(config: Configuration) -> frozenset[int] | None:
    rest = unspecified(config)
    return rest[0] if rest else None


def enumerate_base() -> list[Configuration]:
    """All canonical antichain choices of the seven base hyperplanes."""
    level = [Configuration(BOX)]
    for F in BASE_SETS:
        level = [child for cfg in level for child in extensions(cfg, F)]
    return level


# --------------------------------------------------------------------------
# the measure LP


@dataclass
class SmallLP:
    """The LP for one configuration plus the bookkeeping to read it back.

    Variables are one mass per point class of the uncovered set (a class is
    a single point unless ``compressed``) followed by the 15 ``c_I``.
    """

    config: Configuration
    model: lpmod.LPModel
    points: np.ndarray  # representative point of each class, (n, 4)
    mult: np.ndarray  # points per class
    classes: list[list[tuple[int, list[int]]]]  # per coordinate: (rep, members)
    row_sets: list[frozenset]  # fixed set of each <= row
    row_values: list[tuple[int, ...]]  # representative fixed values of each row
    row_orbit: np.ndarray  # hyperplanes represented by each row
    compressed: bool

    @property
    def nx(self) -> int:
        return len(self.points)

    def c_index(self, I: frozenset) -> int:
        return self.nx + NONEMPTY.index(I)


def _value_classes(config: Configuration, compress: bool):
    out = []
    for i in range(1, 5):
        used = sorted({h.value(i) for h in config if i in h.fixed})
        rest = [v for v in range(1, BOX.size(i) + 1) if v not in used]
        if compress:
            cl = [(v, [v]) for v in used]
            if rest:
                cl.append((rest[0], rest))
        else:
            cl = [(v, [v]) for v in range(1, BOX.size(i) + 1)]
        out.append(cl)
    return out


def build_lp(config: Configuration, compress: bool = False) -> SmallLP | None:
    """The measure LP, or ``None`` when the configuration covers ``Q5``.

    Without compression there is one variable per uncovered point and one
    row per hyperplane of ``Q5`` with a nonempty fixed set (1154 rows).
    With compression, values a coordinate never uses are merged into one
    class; the LP is invariant under permuting them, so averaging any
    optimum over those permutations shows both LPs have the same minimum.
    Rows whose hyperplanes miss the uncovered set are dropped there.
    """
    classes = _value_classes(config, compress)
    idx = np.array(list(itertools.product(*(range(len(c)) for c in classes))), dtype=np.int64)
    reps = np.stack([np.array([c[0] for c in classes[i]])[idx[:, i]] for i in range(4)], axis=1)
    mults = np.stack([np.array([len(c[1]) for c in classes[i]])[idx[:, i]] for i in range(4)], axis=1)
    keep = ~config.covered_mask(reps)
    if not keep.any():
        return None
    idx, reps, mults = idx[keep], reps[keep], mults[keep]
    n = len(reps)
    rows, cols, vals = [], [], []
    row_sets, row_values, row_orbit = [], [], []
    r = 0
    for k, I in enumerate(NONEMPTY):
        coords = [c - 1 for c in sorted(I)]
        outside = [c for c in range(4) if c not in coords]
        coef = np.prod(mults[:, outside], axis=1) if outside else np.ones(n, dtype=np.int64)
        if compress:
            keys = [tuple(row) for row in idx[:, coords]]
            groups = sorted(set(keys))
        else:
            groups = list(itertools.product(*(range(len(classes[c])) for c in coords)))
        pos = {g: j for j, g in enumerate(groups)}
        member_row = np.array([pos[tuple(row)] for row in idx[:, coords]])
        rows.append(r + member_row)
        cols.append(np.arange(n))
        vals.append(coef.astype(float))
        rows.append(r + np.arange(len(groups)))
        cols.append(np.full(len(groups), n + k))
        vals.append(-np.ones(len(groups)))
        for g in groups:
            row_sets.append(I)
            row_values.append(tuple(classes[c][gi][0] for c, gi in zip(coords, g)))
            row_orbit.append(math.prod(len(classes[c][gi][1]) for c, gi in zip(coords, g)))
        r += len(groups)
    A_ub = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(r, n + 15)
    )
    c = np.concatenate([np.zeros(n), [WEIGHT[I] for I in NONEMPTY]])
    A_eq = np.concatenate([np.prod(mults, axis=1).astype(float), np.zeros(15)])[None, :]
    names = ["x_" + "".join(map(str, p)) for p in reps] + ["c_" + set_name(I) for I in NONEMPTY]
    model = lpmod.LPModel(c, A_ub, np.zeros(r), A_eq, np.ones(1), names=names, constant=0.25)
    return SmallLP(
        config, model, reps, np.prod(mults, axis=1), classes, row_sets, row_values,
        np.array(row_orbit), compress,
    )


@dataclass
class StageResult:
    """LP outcome for one (possibly partial) configuration."""

    config: Configuration
    value: float  # LP minimum of c5(3) - 3 c5(1)/4 with U unconstrained
    c: dict = field(default_factory=dict)  # c_I from the LP
    p_bound: float = 0.0
    adjusted: float = math.inf
    covered: bool = False
    lp: SmallLP | None = None
    solution: lpmod.LPSolution | None = None

    @property
    def stage(self) -> int:
        return len(self.config)

    def accepted(self, threshold: float = THRESHOLD) -> bool:
        return self.adjusted < threshold

    def row(self) -> tuple:
        return (format_configuration(self.config), self.stage, self.value, self.p_bound, self.adjusted)


def renormalized_bound(value: float, p: float) -> float:
    """Value after zeroing a set of mass ``p`` and rescaling: ``(v - p/4)/(1 - p)``."""
    if p >= 1.0:
        return math.inf
    return (value - p / 4.0) / (1.0 - p)


def solve_config(config: Configuration, method: str = "highs", compress: bool = True) -> StageResult:
    small = build_lp(config, compress)
    if small is None:
        return StageResult(config, math.inf, covered=True)
    sol = lpmod.solve(small.model, method)
    if not sol.optimal:
        raise RuntimeError(f"measure LP {sol.status} for {format_configuration(config)}")
    c = {I: float(sol.x[small.c_index(I)]) for I in NONEMPTY}
    p = sum(c[F] for F in unspecified(config))
    return StageResult(config, sol.objective, c, p, renormalized_bound(sol.objective, p), False, small, sol)


def extract_measure(result: StageResult) -> tuple[Measure, dict]:
    """The optimal measure on the uncovered set and its recomputed ``c``-table."""
    if result.solution is None or not result.solution.optimal:
        raise ValueError("extract_measure needs an optimal LP solution")
    small = result.lp
    weights = {}
    for j in range(small.nx):
        mass = float(result.solution.x[j])
        members = [small.classes[i][_class_of(small, i, small.points[j, i])][1] for i in range(4)]
        for p in itertools.product(*members):
            weights[tuple(int(v) for v in p)] = max(mass, 0.0)
    measure = Measure(BOX, 4, weights)
    return measure, c_table_from_measure(measure)


def _class_of(small: SmallLP, coord: int, rep: int) -> int:
    return next(k for k, (r, _) in enumerate(small.classes[coord]) if r == rep)


def zero_and_rescale(measure: Measure, planes: Iterable[Hyperplane]) -> tuple[Measure, float]:
    """Remove the mass on a union of hyperplanes and renormalize; returns the mass removed."""
    planes = list(planes)
    kept = {p: w for p, w in measure.weights.items() if not any(h.contains_point(p) for h in planes)}
    total = sum(kept.values())
    removed = measure.total() - total
    return Measure(measure.box, measure.k, {p: w / total for p, w in kept.items()}), removed


# --------------------------------------------------------------------------
# exact bounds on the LP minimum


def exact_c_table(weights: dict) -> dict:
    table = {frozenset(): sum(weights.values())}
    for I in NONEMPTY:
        idx = [c - 1 for c in sorted(I)]
        masses: dict = {}
        for p, w in weights.items():
            key = tuple(p[i] for i in idx)
            masses[key] = masses.get(key, 0) + w
        table[I] = max(masses.values(), default=Fraction(0))
    return table


def exact_upper_bound(result: StageResult) -> Fraction:
    """Exact value of ``c5(3) - 3 c5(1)/4`` for the LP measure made exactly feasible.

    Floats are converted exactly, negatives clipped and the total rescaled
    to 1 in rational arithmetic.  The value belongs to an actual
    probability measure on the uncovered set, so it bounds the LP minimum
    from above.
    """
    measure, _ = extract_measure(result)
    w = {p: Fraction(v) for p, v in measure.weights.items() if v > 0}
    total = sum(w.values())
    w = {p: v / total for p, v in w.items()}
    table = exact_c_table(w)
    return Fraction(1, 4) + sum((3 ** len(I) - Fraction(3, 4)) * table[I] for I in NONEMPTY)


def exact_lower_bound(result: StageResult) -> Fraction:
    """A rigorous lower bound on the LP minimum from its dual.

    For hyperplane weights ``eta_H >= 0`` with ``sum_{F(H)=I} eta_H <=
    3^|I| - 3/4`` for every ``I``, any measure on the uncovered set ``R``
    has value at least ``1/4 + min_{r in R} sum_{H contains r} eta_H``.  The
    LP duals are converted exactly, clipped and scaled into that region.
    """
    small, sol = result.lp, result.solution
    # a row stands for `orbit` hyperplanes, each taking an equal share
    eta_rows = [max(Fraction(-y), Fraction(0)) for y in sol.y_ub]
    for I in NONEMPTY:
        rows = [r for r, J in enumerate(small.row_sets) if J == I]
        total = sum(eta_rows[r] for r in rows)
        cap = 3 ** len(I) - Fraction(3, 4)
        if total > cap:
            for r in rows:
                eta_rows[r] *= cap / total
    eta = {
        (I, vals): e / int(o)
        for I, vals, e, o in zip(small.row_sets, small.row_values, eta_rows, small.row_orbit)
    }
    best = None
    for rep in small.points:
        s = sum(
            (eta.get((I, tuple(int(rep[c - 1]) for c in sorted(I))), Fraction(0)) for I in NONEMPTY),
            Fraction(0),
        )
        best = s if best is None else min(best, s)
    return Fraction(1, 4) + best


# --------------------------------------------------------------------------
# staged search


@dataclass
class StagedReport:
    threshold: float
    counts: dict  # stage -> [evaluated, not accepted]
    survivors: list[StageResult]
    max_value: float  # largest certified value over all leaves
    covered: list[Configuration]
    rows: list[tuple]

    @property
    def cascade(self) -> tuple[int, ...]:
        out = []
        for stage in sorted(self.counts):
            ev, bad = self.counts[stage]
            out.extend([ev, bad])
        return tuple(out)

    def certified(self, bound: float = CERTIFIED_BOUND) -> bool:
        return self.max_value < bound and not self.covered


def descend(config: Configuration, threshold: float = THRESHOLD, method: str = "highs", compress: bool = True,
            max_stage: int = len(FAMILY)):
    """Evaluate one configuration and, while its bound fails, its expansions.

    Yields every :class:`StageResult` in depth-first order.  Configurations
    with ``max_stage`` hyperplanes are not expanded further.
    """
    res = solve_config(config, method, compress)
    yield res
    if res.covered or res.accepted(threshold) or len(config) >= max_stage:
        return
    F = next_set(config)
    if F is None:
        return
    for child in extensions(config, F):
        yield from descend(child, threshold, method, compress, max_stage)


def _descend_list(args):
    return [_strip(r) for r in descend(*args)]


def _strip(res: StageResult) -> StageResult:
    # LP internals are large and not needed after the fact
    return StageResult(res.config, res.value, res.c, res.p_bound, res.adjusted, res.covered)


def staged_search(
    threshold: float = THRESHOLD,
    base: Sequence[Configuration] | None = None,
    workers: int = 1,
    method: str = "highs",
    compress: bool = True,
    shard: tuple[int, int] = (0, 1),
    progress: Callable[[int, int], None] | None = None,
    max_stage: int = len(FAMILY),
) -> StagedReport:
    """Run the whole small-prime case analysis.

    Work is split by base configuration; ``shard=(index, count)`` keeps the
    base configurations whose position is ``index`` modulo ``count``.  The
    report does not depend on the number of workers.
    """
    base = enumerate_base() if base is None else list(base)
    index, count = shard
    jobs = [(cfg, threshold, method, compress, max_stage) for i, cfg in enumerate(base) if i % count == index]
    if workers > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(workers) as pool:
            chunks = pool.imap(_descend_list, jobs, chunksize=16)
            results = _collect(chunks, len(jobs), progress)
    else:
        results = _collect(map(_descend_list, jobs), len(jobs), progress)
    return _report(results, threshold)


def _collect(chunks, total, progress):
    out = []
    for i, chunk in enumerate(chunks):
        out.extend(chunk)
        if progress is not None:
            progress(i + 1, total)
    return out


def _report(results: list[StageResult], threshold: float) -> StagedReport:
    counts = {}
    survivors, covered, rows = [], [], []
    max_value = -math.inf
    for res in results:
        ev_bad = counts.setdefault(res.stage, [0, 0])
        ev_bad[0] += 1
        rows.append(res.row())
        if res.covered:
            covered.append(res.config)
            continue
        if res.accepted(threshold):
            max_value = max(max_value, res.adjusted)
            continue
        ev_bad[1] += 1
        if not unspecified(res.config):
            survivors.append(res)
            max_value = max(max_value, res.value)
    survivors.sort(key=lambda r: format_configuration(r.config))
    rows.sort(key=lambda r: (r[1], r[0]))
    return StagedReport(threshold, counts, survivors, max_value, covered, rows)
