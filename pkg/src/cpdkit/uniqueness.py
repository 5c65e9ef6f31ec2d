"""Essential-uniqueness diagnostics for CP decompositions.

The central quantity is the Kruskal rank of a factor matrix (the largest r
such that every r columns are linearly independent).  Exact computation is
combinatorial, so it is only offered for small column counts; everything
else works with krank estimates, for which the mode ranks of the data
tensor are the usual stand-in.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .tensor import ModeSplit, matricize

KRUSKAL_RANK_MAX_COLS = 12


def collinearity(u, v) -> float:
    """Absolute cosine between two vectors, in [0, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("collinearity is undefined for zero vectors")
    return float(abs(u @ v) / (nu * nv))


def _subset_rank(M, tol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def kruskal_rank(M, tol: float = 1e-8) -> int:
    """Exact Kruskal rank by checking every column subset.

    Subset independence is decided by an SVD with relative cutoff ``tol``.
    Cost grows as 2^J, so matrices with more than 12 columns are rejected;
    use :func:`mode_rank` (or min(rank, J)) as an estimate instead.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("kruskal_rank expects a matrix")
    J = M.shape[1]
    if J > KRUSKAL_RANK_MAX_COLS:
        raise ValueError(
            f"exact kruskal_rank is limited to {KRUSKAL_RANK_MAX_COLS} columns "
            f"(got {J}); use mode_rank-based estimates for larger factors")
    for r in range(1, min(J, M.shape[0]) + 1):
        for cols in combinations(range(J), r):
            if _subset_rank(M[:, cols], tol) < r:
                return r - 1
    return min(J, M.shape[0])


def krank_product_bound(kranks, J: int) -> int:
    """Guaranteed Kruskal rank of a columnwise Kronecker product.

    For factors with Kruskal ranks ``k_1..k_P`` (each >= 1) and J columns,
    the product's Kruskal rank is at least ``min(J, sum(k_p) - (P - 1))``.
    A single factor returns its own (J-capped) krank.  The bound is
    monotone: extending the factor list never lowers it.
    """
    kranks = [int(k) for k in kranks]
    if not kranks:
        raise ValueError("krank_product_bound needs at least one krank")
    if any(k < 1 for k in kranks):
        raise ValueError(f"kranks must be >= 1, got {kranks}")
    if J < 1:
        raise ValueError("J must be positive")
    return min(J, sum(kranks) - (len(kranks) - 1))


@dataclass(frozen=True)
class UniquenessReport:
    """Outcome of a Kruskal-sum uniqueness test.

    ``lhs`` is the sum of (possibly grouped) kranks, ``rhs`` the threshold
    ``2 J + (number of modes - 1)``; ``margin = lhs - rhs`` and the condition
    is satisfied when the margin is nonnegative.  ``group_bounds`` is filled
    only for grouped (unfolded) checks.
    """

    kranks: tuple[int, ...]
    rank: int
    lhs: int
    rhs: int
    margin: int
    satisfied: bool
    group_bounds: tuple[int, ...] | None = None


def ksb_check(kranks, J: int) -> UniquenessReport:
    """Kruskal-sum sufficient condition for essential uniqueness.

    Passes when ``sum(kranks) >= 2 J + (N - 1)`` over the N modes.
    """
    kranks = tuple(int(k) for k in kranks)
    if len(kranks) < 2:
        raise ValueError("need kranks for at least two modes")
    if any(k < 0 for k in kranks):
        raise ValueError(f"kranks must be nonnegative, got {kranks}")
    if J < 1:
        raise ValueError("J must be positive")
    lhs = sum(kranks)
    rhs = 2 * J + (len(kranks) - 1)
    return UniquenessReport(kranks=kranks, rank=J, lhs=lhs, rhs=rhs,
                            margin=lhs - rhs, satisfied=lhs >= rhs)


def check_unfolded_uniqueness(kranks, J: int, split: ModeSplit) -> UniquenessReport:
    """Uniqueness condition for the mode-reduced tensor.

    Each group's krank is lower-bounded by :func:`krank_product_bound` over
    its member kranks; the grouped bounds then go through :func:`ksb_check`
    with the group count as the effective order.
    """
    kranks = [int(k) for k in kranks]
    if len(kranks) != len(split.perm):
        raise ValueError(f"{len(kranks)} kranks for a split of {len(split.perm)} modes")
    bounds = tuple(krank_product_bound([kranks[m] for m in group], J)
                   for group in split.group_modes())
    base = ksb_check(bounds, J)
    return UniquenessReport(kranks=tuple(kranks), rank=J, lhs=base.lhs,
                            rhs=base.rhs, margin=base.margin,
                            satisfied=base.satisfied, group_bounds=bounds)


def mode_rank(T, n: int, tol: float = 1e-8) -> int:
    """Numerical rank of the mode-``n`` matricization.

    Singular values below ``tol`` times the largest are treated as zero.
    """
    s = np.linalg.svd(matricize(T, n), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))
