"""
The unbiased basis is not optimal for the Petz entropy
======================================================

For the qutrit diag(1/4, 3/4, 0) at order 3/2, the Fourier basis gives
less Petz conditional entropy than a basis that is not unbiased.
"""

from qrandbench.oracle import PETZ_SECOND, PETZ_UNBIASED, petz_values

unbiased, second = petz_values()
print(f"Fourier basis : {unbiased:.6f}  (closed form {PETZ_UNBIASED:.6f})")
print(f"second basis  : {second:.6f}  (closed form {PETZ_SECOND:.6f})")
print(f"difference    : {second - unbiased:.4f} bits")
