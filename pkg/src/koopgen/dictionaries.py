"""Observable dictionaries with analytic first and second derivatives.

A dictionary is a finite family of scalar basis functions psi_1, ..., psi_n
on R^d. Generator estimation needs, at every data point, the values of all
basis functions together with their gradients and (for diffusion terms)
Hessians, so every dictionary here evaluates all of them in closed form.

Conventions
-----------
* Evaluation input is an (m, d) array of points; a 1-d array is accepted
  for d = 1 (one point per entry) or as a single point of dimension d.
* Results are packed into an :class:`EvaluationBlock` with
  ``values`` of shape (n, m), ``gradients`` of shape (n, m, d) and,
  on request, ``hessians`` of shape (n, m, d, d).
* Polynomial-type dictionaries order their terms by total degree first
  (constant term first) and lexicographically descending within a degree,
  so for d = 2: 1, x1, x2, x1^2, x1*x2, x2^2, ...
* Radial kernels are unnormalized, exp(-||x - c||^2 / (2 sigma^2)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError, UnsupportedDictionaryError

__all__ = [
    "EvaluationBlock",
    "Dictionary",
    "Monomials",
    "LegendreBasis",
    "GaussianBasis",
    "PeriodicGaussianBasis",
    "full_state_selector",
    "evaluate",
    "dictionary_from_spec",
]


@dataclass(frozen=True)
class EvaluationBlock:
    """Dictionary values and derivatives at a batch of points.

    Attributes
    ----------
    values : (n, m) ndarray
        ``values[k, l] = psi_k(x_l)``.
    gradients : (n, m, d) ndarray
        ``gradients[k, l, i] = d psi_k / d x_i (x_l)``.
    hessians : (n, m, d, d) ndarray or None
        Second derivatives; ``None`` unless requested.
    """

    values: np.ndarray
    gradients: np.ndarray
    hessians: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def count(self) -> int:
        return self.values.shape[1]


def _check_points(points, dimension: int) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        if dimension == 1:
            x = x.reshape(-1, 1)
        elif x.shape[0] == dimension:
            x = x.reshape(1, -1)
        else:
            raise InputError(
                f"1-d input of length {x.shape[0]} does not match dimension {dimension}"
            )
    if x.ndim != 2 or x.shape[1] != dimension:
        raise InputError(f"expected points of shape (m, {dimension}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("points contain non-finite entries")
    return x


def _graded_exponents(dimension: int, max_degree: int) -> np.ndarray:
    """Exponent tuples sorted by total degree, descending lex within a degree."""

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for rest in compositions(total - head, parts - 1):
                yield (head,) + rest

    rows = []
    for degree in range(max_degree + 1):
        rows.extend(compositions(degree, dimension))
    return np.array(rows, dtype=np.intp)


class Dictionary:
    """Common interface of all observable dictionaries."""

    dimension: int
    size: int

    def evaluate(self, points, with_hessians: bool = False) -> EvaluationBlock:
        raise NotImplementedError

    def labels(self) -> list[str]:
        raise NotImplementedError

    def spec(self) -> dict:
        """JSON-serializable description sufficient to rebuild the dictionary."""
        raise NotImplementedError

    def full_state_selector(self) -> np.ndarray:
        """Selector B with x = B^T psi(x), one unit entry per column.

        Only dictionaries that contain every coordinate function as a basis
        element support this; others raise
        :class:`~koopgen.errors.UnsupportedDictionaryError`.
        """
        raise UnsupportedDictionaryError(
            f"{type(self).__name__} does not contain the coordinate functions"
        )

    @property
    def constant_index(self):
        """Index of the constant basis function, or None if absent."""
        return None

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"{type(self).__name__}(dimension={self.dimension}, size={self.size})"


class _SeparableBasis(Dictionary):
    """Tensor basis psi_e(x) = prod_j f_{e_j}(x_j) over graded exponents."""

    def __init__(self, dimension: int, max_degree: int):
        if dimension < 1:
            raise InputError("dimension must be >= 1")
        if max_degree < 0:
            raise InputError("max_degree must be >= 0")
        self.dimension = int(dimension)
        self.max_degree = int(max_degree)
        self.exponents = _graded_exponents(self.dimension, self.max_degree)
        self.size = self.exponents.shape[0]
        self._index = {tuple(e): i for i, e in enumerate(self.exponents)}

    @property
    def constant_index(self) -> int:
        return 0

    def index_of(self, exponent) -> int:
        """Position of an exponent tuple in the basis ordering."""
        key = tuple(int(e) for e in exponent)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"exponent {key} not in basis (max_degree={self.max_degree})")

    def _tables(self, x: np.ndarray, order: int):
        """Univariate values/derivatives per dimension.

        Returns a list over dimensions; entry j is a tuple of arrays of shape
        (max_degree + 1, m) holding f_k(x_j) and derivatives up to `order`.
        """
        raise NotImplementedError

    def evaluate(self, points, with_hessians: bool = False) -> EvaluationBlock:
        x = _check_points(points, self.dimension)
        m = x.shape[0]
        n, d = self.size, self.dimension
        E = self.exponents
        values = np.empty((n, m))
        gradients = np.empty((n, m, d))
        hessians = np.empty((n, m, d, d)) if with_hessians else None

        # chunk over points to bound the (d, n, chunk) work arrays
        chunk = max(16, min(m, int(2_000_000 / max(1, n * d))))
        for start in range(0, m, chunk):
            sl = slice(start, min(start + chunk, m))
            tables = self._tables(x[sl], order=2 if with_hessians else 1)
            mc = x[sl].shape[0]
            T = np.empty((d, n, mc))
            D1 = np.empty((d, n, mc))
            for j in range(d):
                T[j] = tables[j][0][E[:, j], :]
                D1[j] = tables[j][1][E[:, j], :]
            # prefix/suffix products over dimensions
            L = np.empty((d, n, mc))
            R = np.empty((d, n, mc))
            L[0] = 1.0
            for j in range(1, d):
                L[j] = L[j - 1] * T[j - 1]
            R[d - 1] = 1.0
            for j in range(d - 2, -1, -1):
                R[j] = R[j + 1] * T[j + 1]
            values[:, sl] = L[d - 1] * T[d - 1]
            for j in range(d):
                gradients[:, sl, j] = D1[j] * L[j] * R[j]
            if with_hessians:
                for j in range(d):
                    D2j = tables[j][2][E[:, j], :]
                    hessians[:, sl, j, j] = D2j * L[j] * R[j]
                    mid = np.ones((n, mc))
                    for k in range(j + 1, d):
                        cross = D1[j] * D1[k] * L[j] * mid * R[k]
                        hessians[:, sl, j, k] = cross
                        hessians[:, sl, k, j] = cross
                        mid = mid * T[k]
        return EvaluationBlock(values, gradients, hessians)


class Monomials(_SeparableBasis):
    """All monomials x^e with total degree |e| <= max_degree.

    The basis size is binom(d + max_degree, d); the constant term comes
    first. ``index_of((2, 1))`` locates x1^2 * x2, etc.
    """

    def _tables(self, x: np.ndarray, order: int):
        K = self.max_degree
        tables = []
        k = np.arange(K + 1)
        for j in range(self.dimension):
            pw = np.power(x[:, j][None, :], k[:, None])  # (K+1, m)
            d1 = np.zeros_like(pw)
            if K >= 1:
                d1[1:] = k[1:, None] * pw[:-1]
            if order >= 2:
                d2 = np.zeros_like(pw)
                if K >= 2:
                    d2[2:] = (k[2:] * (k[2:] - 1))[:, None] * pw[:-2]
                tables.append((pw, d1, d2))
            else:
                tables.append((pw, d1))
        return tables

    def labels(self) -> list[str]:
        out = []
        for e in self.exponents:
            if not e.any():
                out.append("1")
                continue
            parts = []
            for j, p in enumerate(e):
                if p == 1:
                    parts.append(f"x{j + 1}")
                elif p > 1:
                    parts.append(f"x{j + 1}^{p}")
            out.append("*".join(parts))
        return out

    def spec(self) -> dict:
        return {
            "kind": "monomials",
            "dimension": self.dimension,
            "max_degree": self.max_degree,
        }

    def full_state_selector(self) -> np.ndarray:
        B = np.zeros((self.size, self.dimension))
        for j in range(self.dimension):
            e = np.zeros(self.dimension, dtype=np.intp)
            e[j] = 1
            if tuple(e) not in self._index:
                raise UnsupportedDictionaryError(
                    "coordinate functions missing (max_degree must be >= 1)"
                )
            B[self._index[tuple(e)], j] = 1.0
        return B

    def coordinate_coefficients(self) -> np.ndarray:
        """Coefficients of the coordinate functions; equals the selector."""
        return self.full_state_selector()

    def multiply_by_coordinate(self, coeffs: np.ndarray, j: int, tol: float = 1e-12):
        """Coefficients of x_j * f where f has dictionary coefficients `coeffs`.

        Returns (new_coeffs, dropped) where `dropped` is the largest absolute
        coefficient whose shifted monomial fell outside the basis. Callers
        decide whether a nonzero drop is a closure violation.
        """
        coeffs = np.asarray(coeffs, dtype=np.float64)
        out = np.zeros_like(coeffs)
        dropped = 0.0
        for i, c in enumerate(coeffs):
            if c == 0.0:
                continue
            e = self.exponents[i].copy()
            e[j] += 1
            key = tuple(e)
            if key in self._index:
                out[self._index[key]] += c
            else:
                dropped = max(dropped, abs(c))
        return out, dropped

    def function_coefficients(self, poly_coeffs) -> np.ndarray:
        """Dictionary coefficients of a univariate polynomial (d = 1 only)."""
        if self.dimension != 1:
            raise UnsupportedDictionaryError("function_coefficients needs d = 1")
        c = np.asarray(poly_coeffs, dtype=np.float64)
        if c.shape[0] > self.size:
            raise DomainError("polynomial degree exceeds max_degree")
        out = np.zeros(self.size)
        out[: c.shape[0]] = c
        return out


def _legendre_tables(t: np.ndarray, K: int, order: int):
    """Legendre P_k(t), P'_k, P''_k for k = 0..K via the standard recurrences."""
    m = t.shape[0]
    P = np.empty((K + 1, m))
    P[0] = 1.0
    if K >= 1:
        P[1] = t
    for k in range(1, K):
        P[k + 1] = ((2 * k + 1) * t * P[k] - k * P[k - 1]) / (k + 1)
    D1 = np.zeros((K + 1, m))
    if K >= 1:
        D1[1] = 1.0
    for k in range(1, K):
        D1[k + 1] = D1[k - 1] + (2 * k + 1) * P[k]
    if order < 2:
        return P, D1
    D2 = np.zeros((K + 1, m))
    for k in range(1, K):
        D2[k + 1] = D2[k - 1] + (2 * k + 1) * D1[k]
    return P, D1, D2


class LegendreBasis(_SeparableBasis):
    """Tensor Legendre polynomials on a box, mapped affinely to [-1, 1]^d.

    Parameters
    ----------
    max_degree : int
        Maximum total degree; for d = 1 this gives max_degree + 1 functions.
    domain : sequence of (a, b) pairs, or a single pair for d = 1
        Per-coordinate intervals. Points outside the box are rejected.
    """

    def __init__(self, max_degree: int, domain):
        dom = np.asarray(domain, dtype=np.float64)
        if dom.ndim == 1:
            dom = dom.reshape(1, 2)
        if dom.ndim != 2 or dom.shape[1] != 2 or np.any(dom[:, 1] <= dom[:, 0]):
            raise InputError("domain must be a list of (a, b) pairs with a < b")
        super().__init__(dom.shape[0], max_degree)
        self.domain = dom
        # x = m0 + m1 * t maps t in [-1, 1] to [a, b]
        self._m0 = 0.5 * (dom[:, 0] + dom[:, 1])
        self._m1 = 0.5 * (dom[:, 1] - dom[:, 0])

    def _tables(self, x: np.ndarray, order: int):
        tables = []
        for j in range(self.dimension):
            t = (x[:, j] - self._m0[j]) / self._m1[j]
            if np.any(np.abs(t) > 1.0 + 1e-9):
                raise DomainError(
                    f"points outside Legendre domain {tuple(self.domain[j])} in coordinate {j + 1}"
                )
            tabs = _legendre_tables(np.clip(t, -1.0, 1.0), self.max_degree, order)
            s = 1.0 / self._m1[j]
            if order >= 2:
                tables.append((tabs[0], tabs[1] * s, tabs[2] * s * s))
            else:
                tables.append((tabs[0], tabs[1] * s))
        return tables

    def labels(self) -> list[str]:
        out = []
        for e in self.exponents:
            if not e.any():
                out.append("P0")
                continue
            if self.dimension == 1:
                out.append(f"P{e[0]}")
            else:
                out.append(" ".join(f"P{p}(x{j + 1})" for j, p in enumerate(e) if p > 0))
        return out

    def spec(self) -> dict:
        return {
            "kind": "legendre",
            "max_degree": self.max_degree,
            "domain": self.domain.tolist(),
        }

    def coordinate_coefficients(self) -> np.ndarray:
        """Exact expansion x_j = sum_i C[i, j] psi_i(x); C is not a selector."""
        if self.max_degree < 1:
            raise UnsupportedDictionaryError("coordinate functions need max_degree >= 1")
        C = np.zeros((self.size, self.dimension))
        zero = self.index_of((0,) * self.dimension)
        for j in range(self.dimension):
            e = np.zeros(self.dimension, dtype=np.intp)
            e[j] = 1
            C[zero, j] += self._m0[j]
            C[self.index_of(tuple(e)), j] += self._m1[j]
        return C

    def function_coefficients(self, poly_coeffs) -> np.ndarray:
        """Exact dictionary coefficients of a polynomial in x (d = 1 only)."""
        if self.dimension != 1:
            raise UnsupportedDictionaryError("function_coefficients needs d = 1")
        c = np.asarray(poly_coeffs, dtype=np.float64)
        if c.shape[0] - 1 > self.max_degree:
            raise DomainError("polynomial degree exceeds max_degree")
        # compose p(x(t)) and convert the power-basis result to Legendre
        affine = np.polynomial.polynomial.Polynomial([self._m0[0], self._m1[0]])
        composed = np.polynomial.polynomial.Polynomial(c)(affine)
        leg = np.polynomial.legendre.poly2leg(composed.coef)
        out = np.zeros(self.size)
        out[: leg.shape[0]] = leg
        return out


class GaussianBasis(Dictionary):
    """Radial Gaussians exp(-||x - c_i||^2 / (2 sigma^2)), one per center."""

    def __init__(self, centers, bandwidth: float):
        c = np.asarray(centers, dtype=np.float64)
        if c.ndim == 1:
            c = c.reshape(-1, 1)
        if c.ndim != 2 or c.shape[0] == 0:
            raise InputError("centers must be an (n, d) array")
        if not np.all(np.isfinite(c)):
            raise InputError("centers contain non-finite entries")
        if not bandwidth > 0:
            raise InputError("bandwidth must be positive")
        self.centers = c
        self.bandwidth = float(bandwidth)
        self.size, self.dimension = c.shape

    def _displacements(self, x: np.ndarray) -> np.ndarray:
        return x[None, :, :] - self.centers[:, None, :]

    def evaluate(self, points, with_hessians: bool = False) -> EvaluationBlock:
        x = _check_points(points, self.dimension)
        s2 = self.bandwidth**2
        D = self._displacements(x)  # (n, m, d)
        values = np.exp(-np.sum(D * D, axis=2) / (2.0 * s2))
        gradients = -(D / s2) * values[:, :, None]
        hessians = None
        if with_hessians:
            outer = D[:, :, :, None] * D[:, :, None, :] / (s2 * s2)
            hessians = (outer - np.eye(self.dimension) / s2) * values[:, :, None, None]
        return EvaluationBlock(values, gradients, hessians)

    def labels(self) -> list[str]:
        return [
            "g(" + ",".join(f"{v:g}" for v in c) + ")" for c in self.centers
        ]

    def spec(self) -> dict:
        return {
            "kind": "gaussians",
            "centers": self.centers.tolist(),
            "bandwidth": self.bandwidth,
        }


class PeriodicGaussianBasis(Dictionary):
    """One-dimensional Gaussians with the distance wrapped to the nearest period image."""

    def __init__(self, centers, bandwidth: float, period: float):
        c = np.asarray(centers, dtype=np.float64).reshape(-1)
        if c.shape[0] == 0 or not np.all(np.isfinite(c)):
            raise InputError("centers must be a non-empty finite 1-d array")
        if not bandwidth > 0:
            raise InputError("bandwidth must be positive")
        if not period > 0:
            raise InputError("period must be positive")
        self.centers = c
        self.bandwidth = float(bandwidth)
        self.period = float(period)
        self.size = c.shape[0]
        self.dimension = 1

    def evaluate(self, points, with_hessians: bool = False) -> EvaluationBlock:
        x = _check_points(points, 1)
        s2 = self.bandwidth**2
        P = self.period
        raw = x[:, 0][None, :] - self.centers[:, None]
        D = raw - P * np.round(raw / P)  # wrapped displacement in [-P/2, P/2]
        values = np.exp(-D * D / (2.0 * s2))
        gradients = (-(D / s2) * values)[:, :, None]
        hessians = None
        if with_hessians:
            hessians = ((D * D / (s2 * s2) - 1.0 / s2) * values)[:, :, None, None]
        return EvaluationBlock(values, gradients, hessians)

    def labels(self) -> list[str]:
        return [f"gp({c:g})" for c in self.centers]

    def spec(self) -> dict:
        return {
            "kind": "periodic_gaussians",
            "centers": self.centers.tolist(),
            "bandwidth": self.bandwidth,
            "period": self.period,
        }


def full_state_selector(dictionary: Dictionary) -> np.ndarray:
    """Selector B with g(x) = B^T psi(x) = x; see Dictionary.full_state_selector."""
    return dictionary.full_state_selector()


def evaluate(dictionary: Dictionary, points, with_hessians: bool = False) -> EvaluationBlock:
    """Function form of Dictionary.evaluate."""
    return dictionary.evaluate(points, with_hessians=with_hessians)


def dictionary_from_spec(spec: dict) -> Dictionary:
    """Rebuild a dictionary from the dict produced by Dictionary.spec()."""
    kind = spec.get("kind")
    if kind == "monomials":
        return Monomials(spec["dimension"], spec["max_degree"])
    if kind == "legendre":
        return LegendreBasis(spec["max_degree"], spec["domain"])
    if kind == "gaussians":
        return GaussianBasis(spec["centers"], spec["bandwidth"])
    if kind == "periodic_gaussians":
        return PeriodicGaussianBasis(spec["centers"], spec["bandwidth"], spec["period"])
    raise InputError(f"unknown dictionary kind {kind!r}")
