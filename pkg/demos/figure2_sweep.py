"""
Maximal intrinsic randomness of a qubit across Rényi orders
===========================================================

The state (1/4)[[3, 1], [1, 1]] has spectrum {cos^2(pi/8), sin^2(pi/8)}.
For projective measurements the best any measurement can do is
log d - H_gamma(A), with gamma depending on the entropy family.
"""

import math

import numpy as np

from qrandbench.entropy import cq_entropy_closed
from qrandbench.intrinsic import max_intrinsic_pvm
from qrandbench.oracle import figure2_state, random_pvm

rho = figure2_state()
print("spectrum:", rho.spectrum)

# the fixed-conditioner family is defined down to alpha = 1/2
alphas = [0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 10.0, math.inf]
print("\n alpha   down-family   up-family")
for alpha in alphas:
    down = max_intrinsic_pvm(rho, "down", alpha).value_bits
    up = max_intrinsic_pvm(rho, "up", alpha).value_bits if alpha >= 1 else float("nan")
    print(f"{alpha:6}   {down:11.6f}   {up:9.6f}")

# alpha = 1/2 on the fixed-conditioner side is 1 + log2(3/4)
print("\nat alpha=1/2:", max_intrinsic_pvm(rho, "down", 0.5).value_bits, "vs", 1 + math.log2(0.75))

# the optimised family at infinity meets the fixed-conditioner family at 2
print("up at inf:", max_intrinsic_pvm(rho, "up", math.inf).value_bits,
      " down at 2:", max_intrinsic_pvm(rho, "down", 2.0).value_bits)

# random projective measurements never beat the basis unbiased to the eigenbasis
rng = np.random.default_rng(1)
best = max(cq_entropy_closed(rho, random_pvm(2, rng), "down", 2.0) for _ in range(2000))
print("best of 2000 random PVMs at alpha=2:", best)
print("unbiased basis:", max_intrinsic_pvm(rho, "down", 2.0).achieved_bits)
