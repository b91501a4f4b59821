"""
Finding conserved quantities in the generator's null space
==========================================================

An observable E with L E = 0 is constant along the dynamics in expectation.
For the undamped Duffing oscillator with energy-proportional multiplicative
noise (Stratonovich), the energy E = (alpha/2) x1^2 + (beta/4) x1^4
+ x2^2 / 2 is conserved exactly.  After converting the model to Ito form,
the estimated generator has a two-dimensional null space -- constants plus
the energy -- and the non-constant null vector reproduces the energy's
coefficients.
"""

import numpy as np

from koopgen import (
    Monomials,
    conserved_quantities,
    decompose,
    duffing_oscillator,
    exact_sample_set,
    sample_uniform,
    stratonovich_to_ito,
)

alpha, beta = -1.1, 1.1
model = stratonovich_to_ito(duffing_oscillator(alpha=alpha, beta=beta, eps=0.05))

points = sample_uniform([[-2.0, 2.0]] * 2, 3000, seed=11)
sample = exact_sample_set(model, points)

basis = Monomials(2, 4)
from koopgen import gedmd_stochastic

dec = decompose(gedmd_stochastic(basis, sample))

radius = np.abs(dec.eigenvalues).max()
n_zero = int((np.abs(dec.eigenvalues) < 1e-6 * radius).sum())
print(f"zero-eigenvalue multiplicity: {n_zero} (constants + one conserved quantity)")

(vec,) = conserved_quantities(dec)
labels = basis.labels()
print("\nnull-space coefficients (constant direction projected out):")
for k in np.nonzero(np.abs(vec) > 1e-8)[0]:
    print(f"  {labels[k]:<6s} {vec[k]:+.6f}")

i20 = basis.index_of((2, 0))
print("\ncoefficient ratios against the energy (alpha/2 : beta/4 : 1/2):")
print(f"  x1^4 / x1^2 : {vec[basis.index_of((4, 0))] / vec[i20]:+.6f}  (exact {beta / 4 / (alpha / 2):+.6f})")
print(f"  x2^2 / x1^2 : {vec[basis.index_of((0, 2))] / vec[i20]:+.6f}  (exact {0.5 / (alpha / 2):+.6f})")
