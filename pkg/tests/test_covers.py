import math
import random

import numpy as np
import pytest

from coververify.boxgeom import Box, covers, format_configuration
from coververify.covers import (
    APSystem,
    ap_to_hyperplanes,
    check_cover,
    greedy_cover,
    greedy_order,
    hyperplanes_to_ap,
    is_prime,
    lemma_hypothesis,
    parse_ap_lines,
    sharpness_sequence,
    sharpness_size,
    sharpness_threshold,
)


def test_ap_examples():
    cfg, box = ap_to_hyperplanes(APSystem(((1, 15),), (3, 5)))
    assert box.sizes == (3, 5) and str(cfg.planes[0]) == "11"
    cfg, _ = ap_to_hyperplanes(APSystem(((7, 15),), (3, 5)))
    assert str(cfg.planes[0]) == "12"
    # residue 0 is the top value
    cfg, _ = ap_to_hyperplanes(APSystem(((0, 3), (10, 35)), (3, 5, 7)))
    assert format_configuration(cfg) == "3**, *53"


def test_ap_rejections():
    with pytest.raises(ValueError):
        APSystem(((1, 9),), (3, 5))  # not square-free
    with pytest.raises(ValueError):
        APSystem(((1, 33),), (3, 5))  # not smooth
    with pytest.raises(ValueError):
        APSystem(((1, 15), (2, 15)), (3, 5))  # repeated modulus
    APSystem(((1, 15), (2, 15)), (3, 5), distinct=False)
    with pytest.raises(ValueError):
        ap_to_hyperplanes(APSystem(((1, 6),), (2, 3)))
    with pytest.raises(ValueError):
        APSystem(((1, 3),), (3, 9))
    assert [p for p in range(30) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


def test_parse_ap_lines():
    lines = ["# header", "1 15", "7 mod 105  # comment", "", "0, 3"]
    assert parse_ap_lines(lines) == [(1, 15), (7, 105), (0, 3)]


def random_system(rng, primes):
    mods = set()
    for _ in range(rng.randint(1, 2 ** len(primes) - 1)):
        idx = [p for p in primes if rng.random() < 0.5] or [rng.choice(primes)]
        mods.add(math.prod(idx))
    return APSystem(tuple((rng.randrange(d), d) for d in sorted(mods)), primes)


def test_round_trip_and_cover_equivalence():
    rng = random.Random(10)
    primes = (3, 5, 7, 11)
    P = math.prod(primes)
    for _ in range(200):
        sys_ = random_system(rng, primes)
        cfg, box = ap_to_hyperplanes(sys_)
        back = hyperplanes_to_ap(cfg, primes)
        assert sorted(back.progressions) == sorted((a % d, d) for a, d in sys_.progressions)
        # integers mod P and points of the box are in bijection
        hit = np.zeros(P, dtype=bool)
        for a, d in sys_.progressions:
            hit[a % d :: d] = True
        mask = cfg.covered_mask(box.point_array())
        assert int((~hit).sum()) == int((~mask).sum())
        assert sys_.covers_integers() == (covers(cfg) is None)


def test_cover_equivalence_with_repeats():
    # 0, 1, 2 mod 3 cover the integers; translated, each class is a hyperplane of its own
    sys_ = APSystem(((0, 3), (1, 15), (4, 15), (7, 15), (10, 15), (13, 15), (2, 3)), (3, 5), distinct=False)
    assert sys_.covers_integers()


def test_greedy_examples():
    r = greedy_cover(Box((2, 2)))
    assert format_configuration(r.config) == "1*, *1, 22" and r.covered and not r.hypothesis
    for q3 in (2, 3, 5, 9):
        r = greedy_cover(Box((2, 2, q3)), coords=[1, 2])
        assert r.covered and check_cover(r)
        assert all(h.fixed <= {1, 2} for h in r.config)
    r = greedy_cover(Box((5, 5)))
    assert not r.hypothesis and r.residual > 0
    with pytest.raises(ValueError):
        greedy_cover(Box((10, 10)), cap=50)
    assert greedy_order([1, 2, 3])[:4] == [frozenset({1}), frozenset({2}), frozenset({3}), frozenset({1, 2})]


def test_greedy_meets_average(accept):
    """Each chosen hyperplane covers at least the average share of what is left."""
    rng = random.Random(6)
    steps = 0
    for _ in range(300):
        sizes = [rng.randint(2, 7) for _ in range(rng.randint(1, 5))]
        if math.prod(sizes) > 10**4:
            continue
        r = greedy_cover(Box(sizes))
        for s in r.steps:
            assert s.meets_average
            steps += 1
        assert len({h.fixed for h in r.config}) == len(r.config)
        if r.covered:
            assert check_cover(r)
    accept("8i", True, f"{steps} greedy steps all reached the averaging bound")


def boxes_up_to(n, cap):
    """Nondecreasing size tuples of length n with at most ``cap`` points."""

    def rec(prefix, lo, prod):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        q = lo
        while prod * q ** (n - len(prefix)) <= cap:
            yield from rec(prefix + [q], q, prod * q)
            q += 1

    yield from rec([], 2, 1)


def distinct_orders(sizes):
    """Distinct permutations of a multiset."""
    counts = {}
    for q in sizes:
        counts[q] = counts.get(q, 0) + 1

    def rec(prefix):
        if len(prefix) == len(sizes):
            yield tuple(prefix)
            return
        for q in sorted(counts):
            if counts[q]:
                counts[q] -= 1
                yield from rec(prefix + [q])
                counts[q] += 1

    yield from rec([])


def test_greedy_succeeds_under_hypothesis(accept):
    small = [s for n in range(1, 5) for s in boxes_up_to(n, 10**4) if lemma_hypothesis(s)]
    assert small == [(2, 2, 2)]
    # longer boxes: every coordinate order when there are few, else ascending and descending
    tried = 0
    for n in range(5, 14):
        for sizes in boxes_up_to(n, 10**4):
            if not lemma_hypothesis(sizes):
                continue
            orders = list(distinct_orders(sizes))
            if len(orders) > 60:
                orders = [sizes, sizes[::-1]]
            for order in orders:
                r = greedy_cover(Box(order))
                assert r.covered and check_cover(r)
                tried += 1
    for sizes in small:
        assert greedy_cover(Box(sizes)).covered
    accept("8j", True, f"boxes with n <= 4: only {small} meet the hypothesis, covered; "
                       f"{tried} orderings of longer boxes (5 <= n <= 13, <= 10^4 points) also covered")


def test_sharpness_sizes():
    assert sharpness_size(100) == math.floor((1 - 2 / math.log(100)) * 100)
    assert sharpness_size(3) == 2
    assert [sharpness_size(k) for k in (1000, 10**5)] == [710, 82628]


def test_sharpness_thresholds():
    pins = {1: 4, 2: 5, 3: 6, 4: 7, 5: 8, 8: 11, 10: 13, 12: 624}
    for C, n_star in pins.items():
        assert sharpness_threshold(C) == n_star
        assert sharpness_sequence(C, n_star, build=False).holds
        assert not sharpness_sequence(C, n_star - 1, build=False).holds


def test_sharpness_threshold_c15():
    assert sharpness_threshold(15) == 164943


def test_sharpness_covers_avoid_prefix():
    for C in (1, 2, 3, 4, 5):
        n = sharpness_threshold(C)
        res = sharpness_sequence(C, n)
        assert res.sizes[:C] == (2,) * C
        assert res.cover is not None and res.cover.covered and check_cover(res.cover)
        assert all(not (h.fixed & set(range(1, C + 1))) for h in res.cover.config)
    with pytest.raises(ValueError):
        sharpness_sequence(3, 3)
