"""
Eigenfunctions, Koopman modes, and drift reconstruction
=======================================================

A two-dimensional ODE with rates gamma = -0.8 and delta = -0.7 relaxes onto
an attracting slow manifold.  Its generator spectrum consists of integer
combinations k gamma + l delta; the eigenfunctions are polynomials; and the
full-state observable g(x) = x expands in (eigenvalue, eigenfunction, mode)
triples b(x) = sum_l lambda_l phi_l(x) v_l.  All of this is recovered from a
thousand sampled states with their drift vectors.
"""

import numpy as np

from koopgen import (
    Monomials,
    decompose,
    eigenfunction_values,
    exact_sample_set,
    gedmd_deterministic,
    koopman_modes,
    reconstruct_drift,
    sample_uniform,
    slow_manifold_system,
)

model = slow_manifold_system(gamma=-0.8, delta=-0.7)
points = sample_uniform([[-1.0, 1.0]] * 2, 1000, seed=7)
sample = exact_sample_set(model, points)

basis = Monomials(2, 8)
dec = decompose(gedmd_deterministic(basis, sample))

print("leading eigenvalues:")
print("  " + "  ".join(f"{lam.real:+.4f}" for lam in dec.eigenvalues[:6]))

# the eigenfunction at 2*gamma is the square of the one at gamma -- a
# structural identity of generator spectra that the estimate inherits
grid = sample_uniform([[-1.0, 1.0]] * 2, 400, seed=12)
phi = eigenfunction_values(dec, basis, grid)
print(f"\nmax |phi_5 - phi_2^2| on fresh points: {np.abs(phi[:, 5] - phi[:, 2] ** 2).max():.2e}")

# Koopman modes pair each eigenfunction with the full-state observable
km = koopman_modes(dec)
print("\nactive modes (others vanish):")
for l in km.active_indices:
    v = km.modes[:, l].real
    print(f"  l={l}  lambda={km.eigenvalues[l].real:+.4f}  v=({v[0]:+.4f}, {v[1]:+.4f})")

# the mode expansion reconstructs the drift field on unseen states
fresh = sample_uniform([[-1.0, 1.0]] * 2, 100, seed=99)
recon = reconstruct_drift(km, basis, fresh)
print(f"\nmax drift reconstruction error: {np.abs(recon - model.drift(fresh)).max():.2e}")
