"""Matrix kernels shared by the decomposition routines.

Khatri-Rao products follow the same convention as the canonical tensor
layout: ``khatri_rao([A, B])`` equals ``B (kr) A`` in the usual columnwise
Kronecker notation, i.e. the first listed matrix varies fastest down the
rows.  This makes ``matricize(reconstruct(kt), n)`` equal
``A_n @ khatri_rao(all other factors, in mode order).T`` with no reordering.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SvdResult:
    """Rank-``r`` factorization ``M ~ U @ diag(s) @ V.T``.

    ``U`` is ``m x r`` with orthonormal columns, ``s`` the leading singular
    values (descending), ``V`` ``n x r`` with orthonormal columns.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def khatri_rao(matrices) -> np.ndarray:
    """Columnwise Kronecker product of a list of matrices.

    All inputs must share the same column count J.  Column ``j`` of the
    result stacks the Kronecker product of the ``j``-th columns with the
    first listed matrix varying fastest, so the output has
    ``prod(rows)`` rows.
    """
    mats = [np.asarray(M, dtype=np.float64) for M in matrices]
    if not mats:
        raise ValueError("khatri_rao needs at least one matrix")
    cols = {M.shape[1] for M in mats if M.ndim == 2}
    if any(M.ndim != 2 for M in mats) or len(cols) != 1:
        raise ValueError("khatri_rao inputs must be matrices with a common "
                         "column count")
    out = mats[0]
    for M in mats[1:]:
        out = (M[:, None, :] * out[None, :, :]).reshape(-1, out.shape[1])
    return out


def hadamard(matrices) -> np.ndarray:
    """Entrywise product of same-shaped matrices."""
    mats = [np.asarray(M, dtype=np.float64) for M in matrices]
    if not mats:
        raise ValueError("hadamard needs at least one matrix")
    shape = mats[0].shape
    if any(M.shape != shape for M in mats):
        raise ValueError("hadamard inputs must share one shape")
    out = mats[0].copy()
    for M in mats[1:]:
        out *= M
    return out


def truncated_svd(M, r: int) -> SvdResult:
    """Leading ``r`` singular triplets of a matrix.

    Computed by full factorization then truncation, so the result is
    deterministic.  Requires ``1 <= r <= min(M.shape)``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("truncated_svd expects a matrix")
    if not 1 <= r <= min(M.shape):
        raise ValueError(f"rank {r} out of range for shape {M.shape}")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return SvdResult(U[:, :r].copy(), s[:r].copy(), Vt[:r].T.copy())


def _orient(u, v):
    """Flip signs so the first entry of ``u`` that is not negligible is >= 0."""
    nz = np.flatnonzero(np.abs(u) > 1e-12 * np.abs(u).max())
    if nz.size and u[nz[0]] < 0:
        return -u, -v
    return u, v


def leading_triplet(M, max_iters: int = 500, tol: float = 1e-12):
    """Dominant singular triplet ``(u, sigma, v)`` by alternating power steps.

    Each half-step solves the rank-1 least-squares problem for one side:
    ``a <- M v / ||v||^2`` then ``v <- M.T a / ||a||^2``, so the residual
    ``||M - a v.T||_F`` never increases.  Iteration stops when the singular
    value estimate stabilizes to ``tol`` (relative) or after ``max_iters``
    sweeps, in which case a warning is issued and the best iterate returned.

    Sign convention: the first non-negligible entry of ``u`` is nonnegative.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("leading_triplet expects a matrix")
    norms = np.linalg.norm(M, axis=1)
    if not norms.any():
        raise ValueError("leading_triplet on a zero matrix")
    # Deterministic start: the row with the largest norm lies in the row
    # space, which for rank-1 inputs is already the right singular direction.
    v = M[int(np.argmax(norms))].copy()
    if np.linalg.norm(v) == 0:  # pragma: no cover - excluded by the check above
        raise ValueError("leading_triplet failed to initialize")
    sigma_prev = 0.0
    converged = False
    for _ in range(max_iters):
        a = M @ v / (v @ v)
        na = a @ a
        if na == 0:
            raise ValueError("leading_triplet start vector lies in the null space")
        v = M.T @ a / na
        sigma = float(np.linalg.norm(a) * np.linalg.norm(v))
        if abs(sigma - sigma_prev) <= tol * max(sigma, 1e-300):
            converged = True
            break
        sigma_prev = sigma
    if not converged:
        warnings.warn("leading_triplet hit the iteration cap; returning the "
                      "best iterate", RuntimeWarning)
    u = a / np.linalg.norm(a)
    v = v / np.linalg.norm(v)
    sigma = float(u @ M @ v)
    if sigma < 0:  # dominant pair came out with opposite orientation
        v = -v
        sigma = -sigma
    u, v = _orient(u, v)
    return u, sigma, v


def ls_solve(A, B) -> np.ndarray:
    """Minimum-norm least-squares solution of ``A X = B``.

    Singular values below ``max(A.shape) * eps * sigma_1`` are treated as
    zero, matching the pseudo-inverse cutoff used throughout the package.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != B.shape[0]:
        raise ValueError(f"incompatible shapes {A.shape} and {B.shape}")
    rcond = max(A.shape) * np.finfo(np.float64).eps
    X, *_ = np.linalg.lstsq(A, B, rcond=rcond)
    return X


def pinv_cutoff(A) -> float:
    """The relative singular-value cutoff used by :func:`ls_solve`."""
    return max(np.asarray(A).shape) * np.finfo(np.float64).eps
