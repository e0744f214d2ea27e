"""Walk through one of the two worst small-prime configurations.

Solves the measure LP on the 2 x 4 x 6 x 10 box with both backends, prints the
optimal mass table and brackets the optimum between two exact rationals.

    python3 demos/worst_case_walkthrough.py
"""
from coververify import smallprimes as sp
from coververify.boxgeom import format_configuration

ROW = "11**, 2*1*, *22*, 121*, 1**1, *3*2, 13*3, **34, 2*31, *232, 1233"

cfg = sp.parse(ROW)
print(format_configuration(cfg))
print("antichain:", cfg.is_antichain(), " canonical:", sp.is_canonical(cfg))

res = sp.solve_config(cfg)                      # HiGHS, orbit-compressed LP
alt = sp.solve_config(cfg, method="simplex")    # built-in dense simplex
print(f"LP value  highs {res.value:.12f}  simplex {alt.value:.12f}")

# the optimal c(I) table, largest first
for I in sorted(sp.NONEMPTY, key=lambda I: -res.c[I]):
    print(f"  c({sp.set_name(I):>4}) = {res.c[I]:.6f}")

lo, hi = sp.exact_lower_bound(alt), sp.exact_upper_bound(alt)
print(f"exact bracket [{float(lo):.15f}, {float(hi):.15f}]")
print("below 9.018071:", hi < sp.CERTIFIED_BOUND)

# the optimal measure itself, as point weights
m, _ = sp.extract_measure(res)
heavy = sorted(m.weights.items(), key=lambda kv: -kv[1])[:5]
for p, w in heavy:
    print("  point", p, f"weight {w:.5f}")
