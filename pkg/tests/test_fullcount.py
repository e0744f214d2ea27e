import itertools

import pytest

pytest.importorskip("numba")

from coververify.boxgeom import Box, Configuration, Hyperplane
from coververify.fullcount import full_count, level_counts
from coververify.smallprimes import FAMILY, enumerate_base, extensions, is_canonical

LEVELS = [1, 1, 2, 8, 55, 110, 704, 7637, 77157, 1375998, 72427398, 6025640717]


def brute_counts(sizes, depth):
    """Every value assignment for the first ``depth`` sets, filtered by the two rules."""
    box = Box(sizes)
    choices = [
        [Hyperplane.from_fixed(4, dict(zip(sorted(F), v))) for v in itertools.product(*(range(1, sizes[i - 1] + 1) for i in sorted(F)))]
        for F in FAMILY[:depth]
    ]
    out = [1]
    for d in range(1, depth + 1):
        n = 0
        for planes in itertools.product(*choices[:d]):
            cfg = Configuration(box, planes)
            if cfg.is_antichain() and is_canonical(cfg):
                n += 1
        out.append(n)
    return out


@pytest.mark.parametrize("sizes,depth", [((2, 2, 2, 2), 6), ((2, 3, 2, 3), 5), ((2, 2, 3, 2), 6)])
def test_against_brute_force(sizes, depth):
    assert level_counts(depth, sizes) == brute_counts(sizes, depth)


@pytest.mark.parametrize("sizes,total", [((2, 2, 2, 2), 29901), ((2, 2, 3, 3), 11027931)])
def test_last_level_shortcut(sizes, total):
    fast = level_counts(11, sizes, shortcut=True)
    slow = level_counts(11, sizes, shortcut=False)
    assert fast == slow and fast[-1] == total


def test_q5_early_levels_match_python_enumeration():
    counts = level_counts(9)
    assert counts == LEVELS[:10]
    base = enumerate_base()
    assert counts[7] == len(base)
    lvl8 = [k for cfg in base for k in extensions(cfg, FAMILY[7])]
    assert counts[8] == len(lvl8)


def test_bad_arguments():
    with pytest.raises(ValueError):
        level_counts(12)
    with pytest.raises(ValueError):
        level_counts(5, sizes=(2, 2, 2))


@pytest.mark.slow
def test_full_count(accept):
    n = full_count()
    accept("7", n == 6_025_640_717, f"full-depth configuration count {n:,}")
    assert n == 6_025_640_717
