"""From residue classes to hyperplanes and back.

A covering of the integers by progressions with odd square-free moduli is
the same thing as a covering of a box by hyperplanes.  This script builds
one such system with the greedy construction and translates it to "a mod d"
form.

    python3 demos/ap_cover.py
"""
import math

import numpy as np

from coververify import covers as cv
from coververify.boxgeom import Box, format_configuration

primes = (3, 5, 7)
print("box sizes are the primes:", primes)

# single progressions first
sys1 = cv.APSystem(((0, 3), (10, 35)), primes)
cfg, box = cv.ap_to_hyperplanes(sys1)
print("0 mod 3, 10 mod 35  ->", format_configuration(cfg), " covers:", sys1.covers_integers())

# greedy: any box with q1 = q2 = 2 can be covered using the first two coordinates
r = cv.greedy_cover(Box((2, 2, 9)), coords=[1, 2])
print("greedy on 2 x 2 x 9:", format_configuration(r.config), " uncovered:", r.residual)

# a box where the product condition fails: greedy leaves points behind
r = cv.greedy_cover(Box((3, 5, 7)))
print("greedy on 3 x 5 x 7: hypothesis", r.hypothesis, " uncovered:", r.residual)
back = cv.hyperplanes_to_ap(r.config, primes)
for a, d in back.progressions:
    print(f"  {a} mod {d}")

# count the integers below 105 that escape the system, directly
hit = np.zeros(math.prod(primes), dtype=bool)
for a, d in back.progressions:
    hit[a::d] = True
print("integers in [0, 105) left uncovered:", int((~hit).sum()))

# the product condition holds first at n = 3 for (2, 2, 2)
print("(2,2,2) meets the product condition:", cv.lemma_hypothesis((2, 2, 2)))
