"""
Beating log d with a four-outcome qubit POVM
============================================

A general measurement on a qubit can produce up to 2 log 2 = 2 bits of
randomness for a pure state. For mixed states the optimal extremal
four-outcome POVM tilts one element according to the spectrum.
"""

import numpy as np

from qrandbench.entropy import cq_entropy_closed
from qrandbench.intrinsic import (
    extremality_margin,
    family_gamma,
    max_intrinsic_value,
    optimality_residual,
    qubit_optimal_for,
    uniform_povm,
)
from qrandbench.quantum_core import random_density

rho = random_density(2, np.random.default_rng(5))
print("spectrum:", rho.spectrum)

for family, alpha in (("up", 2.0), ("up", np.inf), ("down", 2.0)):
    gamma = family_gamma(family, alpha)
    meas = qubit_optimal_for(rho, gamma)
    print(f"\n{family} family, alpha={alpha}, gamma={gamma:.4f}")
    print("  PVM optimum   ", max_intrinsic_value(rho, family, alpha, "pvm"))
    print("  POVM optimum  ", max_intrinsic_value(rho, family, alpha, "povm"))
    print("  achieved      ", cq_entropy_closed(rho, meas, family, alpha))
    print("  residual      ", optimality_residual(rho, meas, gamma))
    print("  extremal      ", extremality_margin(meas).is_extremal)

# the uniform four-outcome POVM also spreads evenly, but it is not extremal,
# so Eve can learn which of its two copies of the basis was used
print("\nuniform POVM extremal:", extremality_margin(uniform_povm(rho)).is_extremal)
