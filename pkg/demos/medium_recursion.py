"""The medium-prime recursion at a single starting point.

Starting from moment data (c5(1), c5(3)), the recursion walks through the
primes 13..73, one delta per prime.  The deltas are tuned by golden-section
coordinate descent; the final ratio c21(3) / mu_hat is what the full sweep
bounds over the whole grid.

    python3 demos/medium_recursion.py
"""
import numpy as np

from coververify import mediumprimes as mp

c1, c3 = 1.0, 9.01975
opt = mp.optimize_deltas(c1, c3)
d = opt.deltas[0]
print(f"start c5(1) = {c1}, c5(3) = {c3}")
print(f"optimized ratio {opt.ratio[0]:.6f} after {opt.passes} passes")

st = mp.MediumState.start(c1, c3)
print(" k   p   q_k  delta     c_k(1)     c_k(3)     mu_hat")
for k, delta in zip(range(mp.FIRST_K, mp.LAST_K + 1), d):
    st = mp.advance(st, k, float(delta))
    print(f"{k:2d} {mp.prime_at(k):3d} {mp.size_at(k):4d}  {delta:.4f}  {st.c1:9.5f}  {st.c3:9.5f}  {st.mu_hat:.6f}")

# flat deltas do a little worse
flat = mp.ratio(c1, c3, np.full(16, 0.25))
print(f"flat deltas 0.25: ratio {float(flat):.3f}")
print("within the large-prime threshold:", mp.termination_criteria(opt.ratio[0]).certified)
