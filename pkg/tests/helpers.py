"""Shared numerical oracles for the test suite."""

import numpy as np
import scipy.integrate
import scipy.linalg


def fv_reversible_eigenvalues(potential, diffusion, lo, hi, cells=2000, k=6):
    """Leading eigenvalues of a 1D reversible generator by finite volumes.

    Discretizes L f = (1/(2 nu)) d/dz [ nu a df/dz ] with nu = exp(-V) on
    `cells` uniform cells with no-flux boundaries.  The rate matrix is
    symmetric in the nu-weighted inner product, so a similarity transform
    makes it symmetric tridiagonal and eigh_tridiagonal applies.

    Parameters
    ----------
    potential, diffusion : callable
        V(z) and a(z), vectorized over a 1D array.
    lo, hi : float
    cells : int
    k : int
        Number of leading (largest) eigenvalues to return, descending.
    """
    edges = np.linspace(lo, hi, cells + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    h = edges[1] - edges[0]
    faces = edges[1:-1]
    nu_c = np.exp(-potential(centers))
    flux = 0.5 * np.exp(-potential(faces)) * diffusion(faces) / h**2
    up = flux / nu_c[:-1]  # rate i -> i+1
    down = flux / nu_c[1:]  # rate i+1 -> i
    diag = np.zeros(cells)
    diag[:-1] -= up
    diag[1:] -= down
    # symmetrize with D^(1/2) Q D^(-1/2), D = diag(nu_c)
    off = np.sqrt(up * down)
    vals = scipy.linalg.eigh_tridiagonal(
        diag, off, select="i", select_range=(cells - k, cells - 1)
    )[0]
    return vals[::-1]


def lemon_slice_radial_constants(beta=1.0, lo=0.05, hi=3.0):
    """Quadrature values of C1 = int exp(-beta Vr)/r dr, C2 = int exp(-beta Vr) r dr.

    Vr(r) = 10 (r - 1)^2 + 1/r is the radial part of the lemon-slice
    potential; the reduced angular diffusion is 2 C1 / (beta C2) and the
    reduced drift is -(C1/C2) dF/dphi.
    """

    def vr(r):
        return 10.0 * (r - 1.0) ** 2 + 1.0 / r

    c1 = scipy.integrate.quad(lambda r: np.exp(-beta * vr(r)) / r, lo, hi, limit=200)[0]
    c2 = scipy.integrate.quad(lambda r: np.exp(-beta * vr(r)) * r, lo, hi, limit=200)[0]
    return c1, c2


def lemon_slice_angular_potential(phi, k=4):
    """F(phi) = cos(k phi) + sec(phi / 2), the angular part of the potential."""
    return np.cos(k * phi) + 1.0 / np.cos(0.5 * phi)


def lemon_slice_angular_force(phi, k=4):
    """-dF/dphi for the angular potential."""
    return k * np.sin(k * phi) - 0.5 * np.tan(0.5 * phi) / np.cos(0.5 * phi)
