import itertools
import math
import random

import numpy as np
import pytest

from coververify.boxgeom import Box, Configuration, Hyperplane
from coververify.mediumprimes import (
    LARGE_PRIME_THRESHOLD,
    MEDIUM_PRIMES,
    SIZES,
    MediumState,
    advance,
    condition20_holds,
    dominating_point,
    evaluate,
    f_growth,
    grid,
    initial_deltas,
    monotonicity_probe,
    optimize_deltas,
    propagate_f,
    ratio,
    run,
    termination_criteria,
    theorem_rhs,
)
from coververify.moments import MomentProfile, c_poly, c_table_from_measure
from coververify.sieve import Measure, run_sieve


def test_constants():
    assert MEDIUM_PRIMES[0] == 13 and MEDIUM_PRIMES[-1] == 73 and len(MEDIUM_PRIMES) == 16
    assert list(SIZES[:3]) == [12, 16, 18]


def test_advance_examples():
    st = advance(MediumState.start(1.0, 1.0), 6, 0.5)
    assert st.mu_hat == 1.0
    assert st.c1 == pytest.approx(1 + 1 / (0.5 * 12))
    # delta -> 0 is excluded, but the x = 1 recursion at small delta approaches 13/12
    st = advance(MediumState.start(1.0, 1.0), 6, 1e-9)
    assert st.c1 == pytest.approx(13 / 12, rel=1e-8)
    with pytest.raises(ValueError):
        advance(MediumState.start(1.0, 1.0), 7, 0.5)
    with pytest.raises(ValueError):
        advance(MediumState.start(1.0, 1.0), 6, 0.0)


def test_run_matches_vectorized_and_c_poly():
    rng = np.random.default_rng(2)
    for _ in range(50):
        c1 = rng.uniform(1, 5)
        c3 = rng.uniform(1 + 3 * (c1 - 1), 14)
        d = rng.uniform(0.01, 0.5, 16)
        st = run(c1, c3, d)
        c21, mu, c21_1 = evaluate(c1, c3, d)
        assert st.c3 == pytest.approx(float(c21), rel=1e-12)
        assert st.mu_hat == pytest.approx(float(mu), rel=1e-12, abs=1e-12)
        # the same recursion through the general polynomial: a = 1 with c({1}) chosen so c_1(x) matches
        # at x = 1 and x = 3 separately
        for x, base in ((1.0, c1), (3.0, c3)):
            prof = MomentProfile(1, {frozenset({1}): (base - 1) / x}, tuple(d), tuple(int(s) for s in SIZES))
            got = c_poly(prof, 17, x)
            assert got == pytest.approx(st.c1 if x == 1 else st.c3, rel=1e-12)
        assert float(c21_1) == pytest.approx(st.c1, rel=1e-12)


def test_optimize_regression_and_multistart():
    base = optimize_deltas(1.0, 9.01975)
    assert base.certified[0]
    assert base.ratio[0] == pytest.approx(115.8238323368197, rel=1e-9)
    for scale in (3.0, 4.0, 9.0, 12.0):
        other = optimize_deltas(1.0, 9.01975, init=initial_deltas(scale))
        assert other.ratio[0] == pytest.approx(base.ratio[0], abs=1e-6)
    assert np.all((base.deltas > 0) & (base.deltas <= 0.5))


def test_optimize_flags_hopeless_input():
    o = optimize_deltas(1.0, 50.0)
    assert not o.certified[0] and np.isinf(o.ratio[0])


def test_grid_endpoints():
    i, u, v = grid()
    assert len(i) == 40001
    assert (i[0], u[0]) == (10**4, 1.0) and v[0] == pytest.approx(9.769075)
    assert (i[-1], u[-1]) == (5 * 10**4, 5.0) and v[-1] == pytest.approx(12.769075)
    assert dominating_point(1.00005) == (10**4, 1.0, pytest.approx(9.769075))


def test_monotonicity_probe():
    rep = monotonicity_probe(initial_deltas(), samples=1000)
    assert rep.ok and rep.samples == 1000
    d = initial_deltas()
    assert evaluate(2.0, 9.0 + 0.01, d)[0] > evaluate(2.0, 9.0, d)[0]
    assert evaluate(2.01, 9.0, d)[1] > evaluate(2.0, 9.0, d)[1]


def test_sweep_domination():
    """The dominating grid point bounds every admissible pair at the grid point's deltas."""
    rng = np.random.default_rng(77)
    c1 = rng.uniform(1.0, 4.8, 100)  # pairs with c3 - 1 >= 3 (c1 - 1) need c1 < 4.89
    top = 9.019 + 0.75 * c1
    c3 = rng.uniform(1 + 3 * (c1 - 1), top)
    pts = [dominating_point(x) for x in c1]
    u = np.array([p[1] for p in pts])
    v = np.array([p[2] for p in pts])
    opt = optimize_deltas(u, v)
    assert np.all(u <= c1) and np.all(v >= c3)
    pair = ratio(c1, c3, opt.deltas)
    assert np.all(pair <= opt.ratio * (1 + 1e-12))


def test_termination_criteria():
    assert termination_criteria(138.874).certified
    assert not termination_criteria(138.878).certified
    assert termination_criteria(138.877).certified  # the threshold itself is allowed
    v = termination_criteria(138.874)
    assert v.threshold == LARGE_PRIME_THRESHOLD
    assert v.theorem_rhs_21 == pytest.approx((math.log(21) + math.log(math.log(21)) - 3) ** 2 * 21)
    assert not v.theorem_holds_21  # the general criterion alone does not reach k = 21
    with pytest.raises(ValueError):
        theorem_rhs(9)


def test_f_propagation():
    fs = propagate_f(100.0, 0.5, [79, 83], [0.1, 0.2])
    assert fs[0] == 200.0
    assert fs[2] == pytest.approx(200.0 * f_growth(79, 0.1) * f_growth(83, 0.2))
    assert f_growth(79, 0.0) == pytest.approx(1 + 236 / 78**2)
    assert condition20_holds(100.0, [79, 83, 89, 97], [0.1] * 4)


# ----------------------------------------------------------------------
# end-to-end: the recursion never overestimates the real sieve


def small_medium_instance(rng, levels):
    prefix = Box((2, rng.choice([2, 3, 4])))
    sizes = prefix.sizes + tuple(int(s) for s in SIZES[:levels])
    box = Box(sizes)
    coords = range(1, box.dim + 1)
    # no hyperplane fixes a single coordinate
    sets = [frozenset(s) for r in range(2, box.dim + 1) for s in itertools.combinations(coords, r)]
    chosen = rng.sample(sets, rng.randint(1, len(sets)))
    planes = [Hyperplane.from_fixed(box.dim, {c: rng.randint(1, box.size(c)) for c in F}) for F in chosen]
    cfg = Configuration(box, tuple(planes))
    early = [h for h in cfg if max(h.fixed) <= 2]
    pts = [p for p in prefix.points() if not any(h.contains_point(p) for h in early)]
    w = {p: rng.random() + 0.05 for p in pts if rng.random() < 0.8} or {pts[0]: 1.0}
    tot = sum(w.values())
    return box, cfg, Measure(box, 2, {p: x / tot for p, x in w.items()})


def test_mu_hat_never_exceeds_sieve():
    rng = random.Random(13)
    checked = 0
    for trial in range(120):
        levels = 3 if trial % 20 == 0 else 2
        box, cfg, m = small_medium_instance(rng, levels)
        table = c_table_from_measure(m)
        c1 = sum(table.values())
        c3 = sum(v * 3 ** len(I) for I, v in table.items())
        d = np.array([rng.uniform(0.05, 0.5) for _ in range(levels)])
        st = run_sieve(cfg, list(d), initial=m, start=2)
        _, mu_hat, _ = evaluate(c1, c3, d)
        assert st.mu >= float(mu_hat) - 1e-12
        checked += 1
    assert checked == 120
