"""Columnwise Khatri-Rao projection.

A merged factor matrix has columns that should be Kronecker products of
per-mode columns.  Projecting back means fitting, for every column, the
nearest rank-1 tensor after reshaping the column into the group's mode
sizes (canonical order).  Two fitters are available: independent dominant
singular vectors per mode unfolding, and alternating power iterations that
can enforce simple constraints after every update.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import khatri_rao, truncated_svd
from .tensor import matricize, mode_contract, tensor_from_vec

POWER_MAX_ITERS = 200
POWER_TOL = 1e-10


@dataclass(frozen=True)
class ProjectionKind:
    """Entrywise constraint applied during power iterations.

    ``kind`` is one of ``none`` (identity), ``nonneg`` (clamp negatives to
    zero) or ``soft`` (soft-thresholding with level ``lam``).
    """

    kind: str = "none"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "nonneg", "soft"):
            raise ValueError(f"unknown projection kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("soft-threshold level must be nonnegative")

    @classmethod
    def none(cls) -> "ProjectionKind":
        return cls("none")

    @classmethod
    def nonneg(cls) -> "ProjectionKind":
        return cls("nonneg")

    @classmethod
    def soft(cls, lam: float) -> "ProjectionKind":
        return cls("soft", float(lam))


def apply_projection(x, proj: ProjectionKind) -> np.ndarray:
    """Apply an entrywise projection to an array."""
    x = np.asarray(x, dtype=np.float64)
    if proj.kind == "none":
        return x.copy()
    if proj.kind == "nonneg":
        return np.maximum(x, 0.0)
    return np.sign(x) * np.maximum(np.abs(x) - proj.lam, 0.0)


def _rank1_assemble(T, units):
    """Least-squares amplitude for a fixed set of unit directions."""
    last = T.ndim - 1
    w = mode_contract(T, units[:-1], skip=last)
    return float(w @ units[last])


def rank1_parallel_extract(T):
    """Best rank-1 directions taken independently per mode.

    Returns ``(units, amplitude)`` where ``units`` are the dominant left
    singular vectors of each mode unfolding and ``amplitude`` is the
    least-squares scale of their outer product.  Exact for rank-1 inputs.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < 2:
        raise ValueError("rank-1 extraction needs an order >= 2 tensor")
    units = []
    for k in range(T.ndim):
        M = matricize(T, k)
        if not M.any():
            return [np.zeros(s) for s in T.shape], 0.0
        units.append(truncated_svd(M, 1).U[:, 0])
    return units, _rank1_assemble(T, units)


def _rank1_dense(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def rank1_power_iteration(T, proj: ProjectionKind = ProjectionKind.none(),
                          max_iters: int = POWER_MAX_ITERS,
                          tol: float = POWER_TOL):
    """Alternating rank-1 updates with an entrywise constraint.

    Each step replaces one mode's vector by the contraction of ``T`` with
    all the others, divided by their squared norms (the exact one-mode
    least-squares solution), then projects it.  Without a constraint the
    residual is nonincreasing.  Stops when the residual change drops below
    ``tol`` relative to ``||T||_F`` or after ``max_iters`` sweeps (then a
    warning is issued and the best iterate returned).

    Returns ``(units, amplitude)`` like :func:`rank1_parallel_extract`; with
    a ``nonneg`` constraint the amplitude is clamped to be nonnegative so
    the scaled last vector stays in the constraint set.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < 2:
        raise ValueError("rank-1 iteration needs an order >= 2 tensor")
    normT = float(np.linalg.norm(T.ravel()))
    if normT == 0:
        return [np.zeros(s) for s in T.shape], 0.0
    # Singular-vector start; oriented positively so nonneg projections keep
    # mass instead of zeroing the whole vector.
    units, amp = rank1_parallel_extract(T)
    scale = (abs(amp) if amp != 0 else normT) ** (1.0 / T.ndim)
    vecs = []
    for u in units:
        if u.sum() < 0:
            u = -u
        vecs.append(apply_projection(u * scale, proj))
    prev = None
    converged = False
    for _ in range(max_iters):
        for k in range(T.ndim):
            others = [vecs[p] for p in range(T.ndim) if p != k]
            denom = np.prod([v @ v for v in others])
            if denom == 0:
                warnings.warn("rank-1 iteration collapsed to zero", RuntimeWarning)
                return [np.zeros(s) for s in T.shape], 0.0
            w = mode_contract(T, others, skip=k) / denom
            vecs[k] = apply_projection(w, proj)
        resid = float(np.linalg.norm((T - _rank1_dense(vecs)).ravel()))
        if prev is not None and abs(prev - resid) <= tol * normT:
            converged = True
            break
        prev = resid
    if not converged:
        warnings.warn("rank-1 iteration hit the sweep cap; returning the "
                      "best iterate", RuntimeWarning)
    norms = [float(np.linalg.norm(v)) for v in vecs]
    if 0.0 in norms:
        return [np.zeros(s) for s in T.shape], 0.0
    units = [v / n for v, n in zip(vecs, norms)]
    amp = _rank1_assemble(T, units)
    if proj.kind == "nonneg" and amp < 0:
        amp = 0.0
    return units, amp


def kr_project(H, sizes, method: str = "svd",
               proj: ProjectionKind = ProjectionKind.none(),
               max_iters: int = POWER_MAX_ITERS, tol: float = POWER_TOL):
    """Project merged-factor columns onto exact Kronecker structure.

    Parameters
    ----------
    H : ndarray, shape (prod(sizes), J)
        Merged factor; column j is treated as the canonical vectorization of
        an order-P tensor with mode sizes ``sizes``.
    sizes : sequence of int, length P >= 2
        Row sizes of the per-mode factors to recover.
    method : {"svd", "power"}
        Per-mode singular vectors, or alternating (optionally constrained)
        power iterations.
    proj : ProjectionKind
        Constraint for the power method (ignored by "svd").

    Returns
    -------
    factors : list of ndarray
        P matrices, factor p of shape ``(sizes[p], J)``.  Columns of all but
        the last factor are unit norm (first non-negligible entry
        nonnegative); the last factor carries each column's amplitude.
    eps : float
        Frobenius residual ``||H - khatri_rao(factors)||_F``.
    """
    H = np.asarray(H, dtype=np.float64)
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ValueError("need at least two mode sizes to split a column")
    if H.ndim != 2 or H.shape[0] != int(np.prod(sizes)):
        raise ValueError(f"H has {H.shape} but mode sizes {sizes} imply "
                         f"{int(np.prod(sizes))} rows")
    if method not in ("svd", "power"):
        raise ValueError(f"unknown KR projection method {method!r}")
    J = H.shape[1]
    P = len(sizes)
    factors = [np.zeros((s, J)) for s in sizes]
    for j in range(J):
        col = H[:, j]
        if not col.any():
            warnings.warn(f"column {j} is identically zero; its factors are "
                          "zeroed", RuntimeWarning)
            continue
        block = tensor_from_vec(col, sizes)
        if method == "svd":
            units, amp = rank1_parallel_extract(block)
        else:
            units, amp = rank1_power_iteration(block, proj, max_iters, tol)
        # Orient unit vectors (sign pushed into the amplitude-bearing last
        # factor so the column product is unchanged).
        for k in range(P - 1):
            u = units[k]
            peak = np.abs(u).max()
            if peak > 0:
                nz = np.flatnonzero(np.abs(u) > 1e-12 * peak)
                if nz.size and u[nz[0]] < 0:
                    units[k] = -u
                    amp = -amp
            factors[k][:, j] = units[k]
        factors[P - 1][:, j] = amp * units[P - 1]
    eps = float(np.linalg.norm(H - khatri_rao(factors)))
    return factors, eps
