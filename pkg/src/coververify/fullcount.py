"""Count every canonical antichain configuration on ``Q5`` (all eleven sets).

This is the size of the search space that the staged LP search avoids.
The count is a plain depth-first enumeration in colex order with the same
canonical-form and antichain rules as :func:`smallprimes.extensions`,
compiled with numba.  The last hyperplane (fixed set ``2345``) is a single
point, so the final level is counted, not enumerated: the admissible
points form a box ``[1..r1] x ... x [1..r4]`` minus the points already
covered, which a 4-d prefix sum of the uncovered indicator answers in
constant time.
"""
from __future__ import annotations

import numpy as np

from .smallprimes import BOX, FAMILY

_SIZES = np.array(BOX.sizes, dtype=np.int64)
# membership matrix: _SETS[l, i] == 1 iff coordinate i+1 is fixed at level l
_SETS = np.array([[1 if i + 1 in F else 0 for i in range(4)] for F in FAMILY], dtype=np.int64)


def _kernel():
    import numba

    @numba.njit(cache=True)
    def in_plane(vals, level, point):
        for i in range(4):
            v = vals[level, i]
            if v != 0 and v != point[i]:
                return False
        return True

    @numba.njit(cache=True)
    def admissible(vals, sets, level):
        # antichain: the new plane may neither contain nor lie in an earlier one
        for l in range(level):
            sub = True  # earlier fixed set contained in the new one
            sup = True
            for i in range(4):
                if sets[l, i] > sets[level, i]:
                    sub = False
                if sets[l, i] < sets[level, i]:
                    sup = False
            if sub or sup:
                agree = True
                for i in range(4):
                    if sets[l, i] == 1 and sets[level, i] == 1 and vals[l, i] != vals[level, i]:
                        agree = False
                        break
                if agree:
                    return False
        return True

    @numba.njit(cache=True)
    def last_level(vals, sets, sizes, nlev):
        # prefix sums of points not covered by the first nlev-2 planes
        P = np.zeros((sizes[0] + 1, sizes[1] + 1, sizes[2] + 1, sizes[3] + 1), dtype=np.int64)
        U = np.zeros((sizes[0] + 1, sizes[1] + 1, sizes[2] + 1, sizes[3] + 1), dtype=np.int64)
        pt = np.zeros(4, dtype=np.int64)
        for a in range(1, sizes[0] + 1):
            for b in range(1, sizes[1] + 1):
                for c in range(1, sizes[2] + 1):
                    for d in range(1, sizes[3] + 1):
                        pt[0] = a
                        pt[1] = b
                        pt[2] = c
                        pt[3] = d
                        free = 1
                        for l in range(nlev - 2):
                            if in_plane(vals, l, pt):
                                free = 0
                                break
                        U[a, b, c, d] = free
                        P[a, b, c, d] = (
                            free
                            + P[a - 1, b, c, d] + P[a, b - 1, c, d] + P[a, b, c - 1, d] + P[a, b, c, d - 1]
                            - P[a - 1, b - 1, c, d] - P[a - 1, b, c - 1, d] - P[a - 1, b, c, d - 1]
                            - P[a, b - 1, c - 1, d] - P[a, b - 1, c, d - 1] - P[a, b, c - 1, d - 1]
                            + P[a - 1, b - 1, c - 1, d] + P[a - 1, b - 1, c, d - 1]
                            + P[a - 1, b, c - 1, d - 1] + P[a, b - 1, c - 1, d - 1]
                            - P[a - 1, b - 1, c - 1, d - 1]
                        )
        return P, U

    @numba.njit(cache=True)
    def count(sets, sizes, depth, shortcut):
        nlev = sets.shape[0]
        vals = np.zeros((nlev, 4), dtype=np.int64)
        tops = np.zeros((nlev + 1, 4), dtype=np.int64)  # tops[l] = max values before level l
        per_level = np.zeros(nlev + 1, dtype=np.int64)
        per_level[0] = 1
        hi = np.zeros((nlev, 4), dtype=np.int64)
        P = np.zeros((1, 1, 1, 1), dtype=np.int64)
        U = np.zeros((1, 1, 1, 1), dtype=np.int64)
        # explicit odometer stack: level l holds the current candidate in vals[l]
        level = 0
        started = np.zeros(nlev, dtype=np.bool_)
        while level >= 0:
            if level == depth or level == nlev:
                level -= 1
                continue
            if not started[level]:
                started[level] = True
                for i in range(4):
                    if sets[level, i] == 1:
                        hi[level, i] = min(tops[level, i] + 1, sizes[i])
                        vals[level, i] = 1
                    else:
                        hi[level, i] = 0
                        vals[level, i] = 0
                if shortcut and level == nlev - 2 and depth == nlev:
                    P, U = last_level(vals, sets, sizes, nlev)
                first = True
            else:
                first = False
            if not first:
                # advance the odometer (last coordinate fastest)
                carry = True
                for i in range(3, -1, -1):
                    if sets[level, i] == 1:
                        if vals[level, i] < hi[level, i]:
                            vals[level, i] += 1
                            carry = False
                            break
                        vals[level, i] = 1
                if carry:
                    started[level] = False
                    level -= 1
                    continue
            if not admissible(vals, sets, level):
                continue
            per_level[level + 1] += 1
            for i in range(4):
                tops[level + 1, i] = max(tops[level, i], vals[level, i])
            if shortcut and level == nlev - 2 and depth == nlev:
                # count admissible points for the last (full) fixed set
                r0 = min(tops[level + 1, 0] + 1, sizes[0])
                r1 = min(tops[level + 1, 1] + 1, sizes[1])
                r2 = min(tops[level + 1, 2] + 1, sizes[2])
                r3 = min(tops[level + 1, 3] + 1, sizes[3])
                n = P[r0, r1, r2, r3]
                b = vals[level, 1]
                c = vals[level, 2]
                d = vals[level, 3]
                for a in range(1, r0 + 1):
                    n -= U[a, b, c, d]
                per_level[nlev] += n
                continue
            level += 1
        return per_level

    return count


def level_counts(depth: int = len(FAMILY), sizes=None, shortcut: bool = True) -> list[int]:
    """Number of canonical antichain configurations after each of ``depth`` sets.

    Entry ``l`` counts the configurations using the first ``l`` sets of the
    colex family.  The last-level shortcut needs the final two sets to be
    ``345`` and ``2345``; it is used only when ``depth`` covers all eleven
    and ``shortcut`` is set.  ``sizes`` replaces the box sizes (for checks
    on smaller boxes).
    """
    if not 0 <= depth <= len(FAMILY):
        raise ValueError(f"depth must lie in [0, {len(FAMILY)}]")
    sizes = _SIZES if sizes is None else np.asarray(sizes, dtype=np.int64)
    if sizes.shape != (4,) or np.any(sizes < 2):
        raise ValueError("need four sizes, each at least 2")
    count = _kernel()
    return [int(x) for x in count(_SETS, sizes, depth, shortcut)[: depth + 1]]


def full_count() -> int:
    return level_counts()[-1]
