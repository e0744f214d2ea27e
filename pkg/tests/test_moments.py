import math
import random
from fractions import Fraction

import numpy as np
import pytest

from coververify.boxgeom import Box, parse_configuration
from coververify.moments import (
    MomentProfile,
    brute_moments,
    c_poly,
    c_poly_double_sum,
    c_table_from_measure,
    gmm_check,
    gmm_smallest_c,
    lemma_moment_sum,
    linear_sequence,
    moment_bounds,
    nu,
    subsets,
    uncovered_criterion,
    MomentBounds,
)
from coververify.sieve import Measure, SieveState, step_measure

from conftest import random_box, random_config


def test_c_table_uniform_and_point_mass():
    box = Box((2, 4))
    t = c_table_from_measure(Measure.uniform(box, 2))
    assert t[frozenset()] == pytest.approx(1)
    assert t[frozenset({1})] == pytest.approx(1 / 2)
    assert t[frozenset({2})] == pytest.approx(1 / 4)
    assert t[frozenset({1, 2})] == pytest.approx(1 / 8)
    t = c_table_from_measure(Measure.point_mass(Box((3, 2, 5)), (2, 1, 4)))
    assert len(t) == 8 and all(v == 1 for v in t.values())
    with pytest.raises(ValueError):
        c_table_from_measure(Measure.uniform(Box((2,) * 7), 7))


def test_c_table_monotone_in_fixed_set():
    rng = random.Random(8)
    for _ in range(50):
        box = random_box(rng, 500, dims=(1, 4))
        pts = list(box.points())
        m = Measure(box, box.dim, {p: rng.random() for p in pts})
        tot = m.total()
        m.weights = {p: w / tot for p, w in m.weights.items()}
        t = c_table_from_measure(m)
        for i in t:
            assert 0 <= t[i] <= 1 + 1e-12
            for j in t:
                if i <= j:
                    assert t[i] >= t[j] - 1e-15


def test_nu_examples():
    prof = MomentProfile.trivial([0.0, 0.25, 0.5], [2, 3, 4])
    assert nu((), prof) == 1
    assert nu({1}, prof) == pytest.approx(1 / 2)
    assert nu({1, 3}, prof) == pytest.approx(nu({1}, prof) * nu({3}, prof))
    assert nu({3}, prof) == pytest.approx(1 / (0.5 * 4))
    with pytest.raises(ValueError):
        nu({4}, prof)
    with pytest.raises(ValueError):
        MomentProfile.trivial([0.6], [3])


def test_c_poly_examples():
    prof = MomentProfile.trivial([0.0, 0.0], [2, 2])
    assert c_poly(prof, 2, 1.0) == pytest.approx(2.25)
    assert c_poly(prof, 2, 0.0) == 1
    q5 = Box((2, 4, 6, 10, 3))
    table = c_table_from_measure(Measure.uniform(q5, 4))
    prof = MomentProfile(4, table, (0.2,), (3,))
    # uniform table on the first four coordinates, x = 3 at level a
    assert c_poly(prof, 4, 3.0) == pytest.approx(8.53125, rel=1e-12)
    assert c_poly_double_sum(prof, 4, 3.0) == pytest.approx(8.53125, rel=1e-12)
    assert c_poly(prof, 4, 3.0) == pytest.approx((1 + 3 / 2) * (1 + 3 / 4) * (1 + 3 / 6) * (1 + 3 / 10))
    with pytest.raises(ValueError):
        c_poly(prof, 6, 1.0)


def random_profile(rng, a=None):
    a = rng.randint(0, 3) if a is None else a
    table = {I: rng.random() ** (1 + len(I)) for I in subsets(range(1, a + 1)) if I}
    m = rng.randint(0, 5)
    return MomentProfile(a, table, [rng.uniform(0, 0.5) for _ in range(m)], [rng.randint(2, 12) for _ in range(m)])


def test_c_poly_recursion_and_double_sum():
    rng = random.Random(21)
    for _ in range(300):
        prof = random_profile(rng)
        x = rng.choice([1.0, 3.0, rng.uniform(0, 5)])
        for k in range(prof.a, prof.n + 1):
            ds = c_poly_double_sum(prof, k, x)
            assert c_poly(prof, k, x) == pytest.approx(ds, rel=1e-12)
            if k > prof.a:
                rec = c_poly(prof, k - 1, x) * (1 + x / ((1 - prof.delta(k)) * prof.size(k)))
                assert ds == pytest.approx(rec, rel=1e-12)


def test_c_poly_monotone():
    rng = random.Random(22)
    for _ in range(200):
        prof = random_profile(rng)
        xs = sorted(rng.uniform(0, 4) for _ in range(5))
        vals = [c_poly(prof, prof.n, x) for x in xs]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
        if len(prof.c_table) > 1:
            key = rng.choice([k for k in prof.c_table if k])
            bumped = dict(prof.c_table)
            bumped[key] = min(1.0, bumped[key] + 0.1)
            p2 = MomentProfile(prof.a, bumped, prof.deltas, prof.sizes)
            assert c_poly(p2, prof.n, 2.0) >= c_poly(prof, prof.n, 2.0)


def test_moment_bounds_examples():
    b = moment_bounds(MomentProfile.trivial([0.0], [5]), 1)
    assert b.m1 == pytest.approx(1 / 5) and b.m2 == pytest.approx(1 / 25)
    b = moment_bounds(MomentProfile.trivial([0.0], [5]), 1, codim1_free=True)
    assert b.m2_codim2 == 0 and b.best_m2 == 0
    with pytest.raises(ValueError):
        moment_bounds(MomentProfile.trivial([0.0, 0.0], [2, 5]), 2, codim1_free=True)


def test_uncovered_criterion_examples():
    assert uncovered_criterion([MomentBounds(1, 0.0, 0.0)], [0.3]) == 1
    d = 0.25
    b = MomentBounds(1, 0.3, 0.5 * 4 * d * (1 - d))
    assert uncovered_criterion([b], [d]) == pytest.approx(0.7)
    b = MomentBounds(1, 0.3, 0.1 * 4 * d * (1 - d))
    assert uncovered_criterion([b], [d]) == pytest.approx(0.9)
    # delta = 0 forces the first-moment branch
    assert uncovered_criterion([MomentBounds(1, 0.3, 0.0)], [0.0]) == pytest.approx(0.7)


def test_brute_moments_trivial():
    box = Box((2, 3))
    cfg = parse_configuration("1*", box)
    st = SieveState(box, cfg, {1: 0.5, 2: 0.5}, Measure.uniform(box, 1), 1, 1.0)
    assert brute_moments(st, 2, 1) == 0  # nothing new at level 2
    box = Box((2, 2, 2))
    cfg = parse_configuration("**1, 1*2, *12, 222", box)
    st = SieveState(box, cfg, {3: 0.5}, Measure.uniform(box, 2), 2, 1.0)
    for t in (1, 2, 5):
        assert brute_moments(st, 3, t) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        brute_moments(st, 2, 1)


# ----------------------------------------------------------------------
# random sieve instances started from an arbitrary measure on Q_a


def random_instance(rng, max_points=10**4):
    """Box, configuration, deltas and a random start measure on ``Q_a`` avoiding exposed planes."""
    while True:
        box = random_box(rng, max_points, dims=(2, 5), sizes=(2, 8))
        a = rng.randint(0, min(2, box.dim - 1))
        cfg = random_config(rng, box, rng.randint(0, 2 ** min(box.dim, 4)))
        early = [h for h in cfg if max(h.fixed) <= a]
        pts = [p for p in box.points(a) if not any(h.contains_point(p) for h in early)]
        if not pts:
            continue
        support = [p for p in pts if rng.random() < 0.7] or pts
        w = {p: rng.random() ** 2 + 1e-3 for p in support}
        tot = sum(w.values())
        m = Measure(box, a, {p: v / tot for p, v in w.items()})
        deltas = {j: rng.choice([0.0, 0.5, rng.uniform(0, 0.5)]) for j in range(a + 1, box.dim + 1)}
        return box, cfg, a, m, deltas


def profile_for(box, a, m, deltas):
    rest = range(a + 1, box.dim + 1)
    return MomentProfile(a, c_table_from_measure(m), [deltas[j] for j in rest], [box.size(j) for j in rest])


def test_brute_moments_below_bounds(accept):
    rng = random.Random(31337)
    trials = checked = sharp_checked = 0
    worst = -math.inf
    while trials < 500:
        box, cfg, a, m, deltas = random_instance(rng)
        prof = profile_for(box, a, m, deltas)
        st = SieveState(box, cfg, deltas, m, a, 1.0)
        for k in range(a + 1, box.dim + 1):
            e1, e2 = brute_moments(st, k, 1), brute_moments(st, k, 2)
            s1, s2 = lemma_moment_sum(st, prof, k, 1), lemma_moment_sum(st, prof, k, 2)
            codim1_free = all(len(h.fixed) > 1 for h in st.new_planes(k)) and min(prof.sizes) >= 3
            b = moment_bounds(prof, k, codim1_free)
            assert e1 <= s1 + 1e-12 and s1 <= b.m1 + 1e-12
            assert e2 <= s2 + 1e-12 and s2 <= b.m2 + 1e-12
            worst = max(worst, e1 - b.m1, e2 - b.best_m2)
            if codim1_free:
                assert e2 <= b.m2_codim2 + 1e-12
                sharp_checked += 1
            checked += 1
            step_measure(st, k)
        trials += 1
    assert sharp_checked > 20
    accept("8c", worst <= 1e-12,
           f"{trials} instances, {checked} levels, {sharp_checked} with the codim-2 bound; "
           f"max excess {worst:.2e}")


def test_hyperplane_mass_bound(accept):
    """Every hyperplane measurable at level k has mass at most c(I) nu(J)."""
    rng = random.Random(31337)
    trials = planes = 0
    while trials < 500:
        box, cfg, a, m, deltas = random_instance(rng)
        prof = profile_for(box, a, m, deltas)
        st = SieveState(box, cfg, deltas, m, a, 1.0)
        for k in range(a + 1, box.dim + 1):
            step_measure(st, k)
            for F in subsets(range(1, k + 1)):
                idx = sorted(F)
                masses: dict = {}
                for p, w in st.measure.weights.items():
                    key = tuple(p[i - 1] for i in idx)
                    masses[key] = masses.get(key, 0.0) + w
                I = frozenset(c for c in F if c <= a)
                J = frozenset(c for c in F if c > a)
                bound = prof.c(I) * nu(J, prof)
                assert max(masses.values(), default=0.0) <= bound + 1e-12
                planes += len(masses)
        trials += 1
    accept("8d", True, f"{planes} hyperplane masses checked on {trials} instances")


def test_exact_moments_match_float():
    rng = random.Random(5)
    for _ in range(20):
        box = random_box(rng, 300)
        cfg = random_config(rng, box)
        ds = {j: Fraction(rng.randint(0, 5), 10) for j in range(1, box.dim + 1)}
        st = SieveState(box, cfg, ds, Measure.uniform(box, 0, exact=True), 0, Fraction(1))
        sf = SieveState(box, cfg, {j: float(d) for j, d in ds.items()}, Measure.uniform(box, 0), 0, 1.0)
        for k in range(1, box.dim + 1):
            assert float(brute_moments(st, k, 2)) == pytest.approx(brute_moments(sf, k, 2), abs=1e-12)
            step_measure(st, k)
            step_measure(sf, k)


# ----------------------------------------------------------------------
# linear-growth sufficient condition


def test_gmm_examples_and_regression(accept):
    q = linear_sequence(4, 4)
    r = gmm_check(q, 1, 1.0, 0, 10**4)
    assert r.total == pytest.approx(0.3434996373289293, rel=1e-12)
    assert r.delta == pytest.approx(1 / 6)
    c = gmm_smallest_c(q, 1, 1.0, 10**4)
    assert c == 1 and gmm_check(q, 1, 1.0, c, 10**4).certified
    # a smaller eps needs a longer head
    c01 = gmm_smallest_c(q, 1, 0.1, 10**4)
    assert c01 == 15
    assert gmm_check(q, 1, 0.1, c01, 10**4).certified
    assert not gmm_check(q, 1, 0.1, c01 - 1, 10**4).certified
    assert gmm_check(q, 1, 1.0, 50, 50).total == 0 and gmm_check(q, 1, 1.0, 50, 50).certified
    # the same check through the criterion on trivial-profile moment bounds
    n = 200
    deltas = [1 / 6] * n
    prof = MomentProfile.trivial(deltas, [q(k) for k in range(1, n + 1)])
    bounds = [moment_bounds(prof, k) for k in range(1, n + 1)]
    terms = [b.m2 / (4 * d * (1 - d)) for b, d in zip(bounds, deltas)]
    assert np.allclose(terms, gmm_check(q, 1, 1.0, 0, n).terms, rtol=1e-12)
    assert uncovered_criterion(bounds, deltas) > 0
    accept("8k", c == 1 and c01 == 15,
           f"q_k = 4k+4, n = 10^4: smallest C = {c} (eps = 1, total from C=0 {r.total:.6f}), C = {c01} at eps = 0.1")


def test_gmm_rejects_bad_sequences():
    with pytest.raises(ValueError):
        gmm_check(linear_sequence(3, 0), 1, 1.0, 0, 10)
    with pytest.raises(ValueError):
        gmm_check([5, 1, 20], 1, 1.0, 0, 3)
    with pytest.raises(ValueError):
        gmm_check([10, 20], 1, 1.0, 0, 3)


def primes_upto(n):
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.nonzero(sieve)[0]


def test_gmm_prime_sizes_converge():
    ps = primes_upto(2 * 10**6)
    q = ps[1 : 10**5 + 1]  # q_k = p_{k+1}
    ks = np.arange(1, len(q) + 1)
    N = int(ks[~(q > 4 * ks)].max()) + 1
    c = gmm_smallest_c(q, N, 1.0, 10**4)
    t4 = gmm_check(q, N, 1.0, c, 10**4).total
    t5 = gmm_check(q, N, 1.0, c, 10**5).total
    assert t4 < 1 and t5 < 1
    # the tail beyond 10^4 adds almost nothing
    assert 0 <= t5 - t4 < 1e-2
