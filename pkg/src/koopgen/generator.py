"""Galerkin estimation of the Koopman generator from drift/diffusion data.

Given a dictionary psi and a sample set, the estimator forms

    dpsi_k(x_l) = b(x_l) . grad psi_k(x_l) [ + 1/2 a(x_l) : hess psi_k(x_l) ]

and solves the least-squares problem dPsi ~ M Psi for the matrix M. The
coefficient-space generator is L = M^T: for f = c^T psi, the estimate of the
generator applied to f has coefficients L c. The Gram matrices

    A_hat = (1/m) dPsi Psi^T,   G_hat = (1/m) Psi Psi^T

are accumulated alongside in fixed-size chunks (deterministic summation
order) and stored on the estimate; M itself is computed from the SVD
least-squares form M = dPsi Psi^+, which is algebraically identical to
A_hat G_hat^+ but avoids squaring the condition number.

A reversible-system shortcut builds A_hat from first derivatives only,
A_hat = -(1/2m) sum_l (grad Psi sigma)(grad Psi sigma)^T, which is symmetric
by construction and never touches Hessians.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .dictionaries import Dictionary, EvaluationBlock, dictionary_from_spec
from .errors import InputError, LogBranchError
from .models import SampleSet

__all__ = [
    "GeneratorEstimate",
    "gedmd_deterministic",
    "gedmd_stochastic",
    "gedmd_reversible",
    "perron_frobenius_estimate",
    "edmd_with_log",
    "estimate_to_dict",
    "estimate_from_dict",
]

CHUNK = 1024  # fixed accumulation chunk, keeps summation order reproducible
DEFAULT_SVD_CUTOFF = 1e-10


@dataclass
class GeneratorEstimate:
    """Result of a generator regression.

    M satisfies dPsi ~ M Psi (value-space); `L` (= M transposed) acts on
    coefficient vectors. A_hat and G_hat are the empirical structure and Gram
    matrices; `rank` is the numerical rank of the dictionary value matrix at
    `svd_cutoff` relative tolerance.
    """

    M: np.ndarray
    A_hat: np.ndarray
    G_hat: np.ndarray
    rank: int
    svd_cutoff: float
    dictionary: Optional[Dictionary]
    sample_count: int
    kind: str = "deterministic"
    rank_deficient: bool = False

    @property
    def L(self) -> np.ndarray:
        """Generator matrix acting on dictionary coefficient vectors."""
        return self.M.T

    @property
    def size(self) -> int:
        return self.M.shape[0]


def _chunked_gram(dpsi: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, m = psi.shape
    A = np.zeros((n, n))
    G = np.zeros((n, n))
    for start in range(0, m, CHUNK):
        sl = slice(start, min(start + CHUNK, m))
        A += dpsi[:, sl] @ psi[:, sl].T
        G += psi[:, sl] @ psi[:, sl].T
    return A / m, G / m


def _solve_m(psi: np.ndarray, dpsi: np.ndarray, svd_cutoff: float):
    """Least-squares M = dPsi Psi^+ with a relative singular-value cutoff."""
    sol, _, rank, _ = np.linalg.lstsq(psi.T, dpsi.T, rcond=svd_cutoff)
    return sol.T, int(rank)


def _finish(
    psi, dpsi, dictionary, sample_count, svd_cutoff, kind
) -> GeneratorEstimate:
    A, G = _chunked_gram(dpsi, psi)
    M, rank = _solve_m(psi, dpsi, svd_cutoff)
    deficient = rank < psi.shape[0]
    if deficient:
        warnings.warn(
            f"dictionary value matrix is rank deficient ({rank} < {psi.shape[0]}); "
            "estimate restricted to the resolved subspace",
            stacklevel=3,
        )
    return GeneratorEstimate(
        M=M,
        A_hat=A,
        G_hat=G,
        rank=rank,
        svd_cutoff=svd_cutoff,
        dictionary=dictionary,
        sample_count=sample_count,
        kind=kind,
        rank_deficient=deficient,
    )


def _block_for(dictionary, sample, with_hessians, block):
    if block is None:
        return dictionary.evaluate(sample.points, with_hessians=with_hessians)
    if block.values.shape[1] != sample.count:
        raise InputError("evaluation block does not match the sample set")
    if with_hessians and block.hessians is None:
        raise InputError("evaluation block lacks Hessians")
    return block


def apply_generator_values(block: EvaluationBlock, sample: SampleSet) -> np.ndarray:
    """dpsi_k(x_l) for all k, l: drift term plus (if present) diffusion term."""
    dpsi = np.einsum("li,kli->kl", sample.drift_samples, block.gradients)
    if sample.diffusion_samples is not None:
        if block.hessians is None:
            raise InputError("diffusion samples present but the block has no Hessians")
        dpsi = dpsi + 0.5 * np.einsum(
            "lij,klij->kl", sample.diffusion_samples, block.hessians
        )
    return dpsi


def gedmd_deterministic(
    dictionary: Dictionary,
    sample: SampleSet,
    *,
    block: EvaluationBlock | None = None,
    svd_cutoff: float = DEFAULT_SVD_CUTOFF,
) -> GeneratorEstimate:
    """Generator estimate for an ODE: dpsi = b . grad psi.

    `sample.drift_samples` may be exact vector-field values or trajectory
    derivatives. Any diffusion data on the sample set is ignored here; use
    :func:`gedmd_stochastic` to include it.
    """
    blk = _block_for(dictionary, sample, False, block)
    dpsi = np.einsum("li,kli->kl", sample.drift_samples, blk.gradients)
    return _finish(blk.values, dpsi, dictionary, sample.count, svd_cutoff, "deterministic")


def gedmd_stochastic(
    dictionary: Dictionary,
    sample: SampleSet,
    *,
    block: EvaluationBlock | None = None,
    svd_cutoff: float = DEFAULT_SVD_CUTOFF,
) -> GeneratorEstimate:
    """Generator estimate for an SDE: dpsi = b . grad psi + 1/2 a : hess psi."""
    if sample.diffusion_samples is None:
        raise InputError("gedmd_stochastic needs diffusion samples; got none")
    blk = _block_for(dictionary, sample, True, block)
    dpsi = apply_generator_values(blk, sample)
    return _finish(blk.values, dpsi, dictionary, sample.count, svd_cutoff, "stochastic")


def gedmd_reversible(
    dictionary: Dictionary,
    sample: SampleSet,
    *,
    block: EvaluationBlock | None = None,
    svd_cutoff: float = DEFAULT_SVD_CUTOFF,
) -> GeneratorEstimate:
    """Reversible-system estimate using first derivatives only.

    A_hat = -(1/2m) sum_l (grad Psi(x_l) sigma(x_l)) (grad Psi(x_l) sigma(x_l))^T
    requires points distributed according to the invariant measure and sigma
    values on the sample set; the result is symmetric by construction.
    """
    if sample.sigma_samples is None:
        raise InputError("gedmd_reversible needs sigma samples on the sample set")
    blk = _block_for(dictionary, sample, False, block)
    n, m = blk.values.shape
    A = np.zeros((n, n))
    G = np.zeros((n, n))
    for start in range(0, m, CHUNK):
        sl = slice(start, min(start + CHUNK, m))
        W = np.einsum("kli,lis->kls", blk.gradients[:, sl, :], sample.sigma_samples[sl])
        A += np.einsum("kls,jls->kj", W, W)
        G += blk.values[:, sl] @ blk.values[:, sl].T
    A /= -2.0 * m
    G /= m
    sol, _, rank, _ = np.linalg.lstsq(G, A.T, rcond=svd_cutoff)
    M = sol.T
    deficient = rank < n
    if deficient:
        warnings.warn(f"Gram matrix is rank deficient ({rank} < {n})", stacklevel=2)
    return GeneratorEstimate(
        M=M,
        A_hat=A,
        G_hat=G,
        rank=int(rank),
        svd_cutoff=svd_cutoff,
        dictionary=dictionary,
        sample_count=m,
        kind="reversible",
        rank_deficient=deficient,
    )


def perron_frobenius_estimate(est: GeneratorEstimate) -> GeneratorEstimate:
    """Adjoint (Perron-Frobenius) generator, M* = A_hat^T G_hat^+.

    Built from the stored Gram matrices of a Koopman estimate; the returned
    object's `L` is the coefficient action on densities.
    """
    sol, _, rank, _ = np.linalg.lstsq(est.G_hat, est.A_hat, rcond=est.svd_cutoff)
    # sol = G^+ A, so M* = A^T G^+ = sol^T by symmetry of G
    return GeneratorEstimate(
        M=sol.T,
        A_hat=est.A_hat,
        G_hat=est.G_hat,
        rank=int(rank),
        svd_cutoff=est.svd_cutoff,
        dictionary=est.dictionary,
        sample_count=est.sample_count,
        kind="perron-frobenius",
        rank_deficient=rank < est.size,
    )


def edmd_with_log(
    points,
    lagged_points,
    dictionary: Dictionary,
    lag: float,
    *,
    svd_cutoff: float = DEFAULT_SVD_CUTOFF,
    branch_tol: float = 1e-12,
) -> GeneratorEstimate:
    """Finite-time EDMD estimate K_hat plus (1/lag) times its principal matrix log.

    Fails with LogBranchError when K_hat has an eigenvalue on the closed
    negative real axis, where the principal logarithm is not defined.
    """
    if lag <= 0:
        raise InputError("lag must be positive")
    px = dictionary.evaluate(points).values
    py = dictionary.evaluate(lagged_points).values
    if px.shape != py.shape:
        raise InputError("points and lagged_points must have equal counts")
    K, rank = _solve_m(px, py, svd_cutoff)
    eigs = np.linalg.eigvals(K)
    scale = max(np.max(np.abs(eigs)), 1.0)
    on_branch_cut = (np.abs(eigs) <= branch_tol * scale) | (
        (eigs.real < 0) & (np.abs(eigs.imag) <= branch_tol * scale)
    )
    if np.any(on_branch_cut):
        bad = eigs[on_branch_cut][0]
        raise LogBranchError(
            f"transfer-matrix eigenvalue {bad:.3e} lies on the closed negative real "
            "axis; the principal logarithm is undefined (shorten the lag or change "
            "the dictionary)"
        )
    Lm = linalg.logm(K) / lag
    if np.iscomplexobj(Lm):
        imag = np.max(np.abs(Lm.imag))
        if imag > 1e-8 * max(np.max(np.abs(Lm.real)), 1.0):
            warnings.warn(f"matrix log has imaginary residue {imag:.2e}", stacklevel=2)
        Lm = Lm.real
    m = px.shape[1]
    return GeneratorEstimate(
        M=Lm,
        A_hat=py @ px.T / m,
        G_hat=px @ px.T / m,
        rank=rank,
        svd_cutoff=svd_cutoff,
        dictionary=dictionary,
        sample_count=m,
        kind="edmd-log",
        rank_deficient=rank < px.shape[0],
    )


def estimate_to_dict(est: GeneratorEstimate) -> dict:
    """JSON-ready dict with dense row-major matrices and provenance."""
    return {
        "kind": est.kind,
        "M": est.M.tolist(),
        "A_hat": est.A_hat.tolist(),
        "G_hat": est.G_hat.tolist(),
        "rank": est.rank,
        "svd_cutoff": est.svd_cutoff,
        "sample_count": est.sample_count,
        "rank_deficient": bool(est.rank_deficient),
        "dictionary": est.dictionary.spec() if est.dictionary is not None else None,
    }


def estimate_from_dict(payload: dict) -> GeneratorEstimate:
    spec = payload.get("dictionary")
    return GeneratorEstimate(
        M=np.asarray(payload["M"], dtype=np.float64),
        A_hat=np.asarray(payload["A_hat"], dtype=np.float64),
        G_hat=np.asarray(payload["G_hat"], dtype=np.float64),
        rank=int(payload["rank"]),
        svd_cutoff=float(payload["svd_cutoff"]),
        dictionary=dictionary_from_spec(spec) if spec else None,
        sample_count=int(payload["sample_count"]),
        kind=payload.get("kind", "deterministic"),
        rank_deficient=bool(payload.get("rank_deficient", False)),
    )
