"""Alternating least squares for the CP model, plus a small solver registry.

The registry lets the mode-reduction pipeline swap in any conforming
third-order solver; the default registration is the ALS routine below
restricted to third-order input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import prod
from time import perf_counter

import numpy as np

from .ktensor import KTensor, normalize
from .linalg import hadamard, khatri_rao, pinv_cutoff
from .tensor import matricize

UNFOLDING_CACHE_BYTES = 1 << 30


@dataclass
class SolverOptions:
    """Iteration controls shared by the registered solvers.

    ``seed`` feeds ``numpy.random.default_rng`` for the random init (ignored
    when ``init`` supplies a starting KTensor).  ``tol`` is the absolute
    change in fit between sweeps that counts as converged.
    """

    max_iters: int = 100
    tol: float = 1e-8
    seed: object = None
    init: KTensor | None = None


@dataclass
class SolveReport:
    iterations: int
    fit_trace: list[float] = field(default_factory=list)
    final_fit: float = float("nan")
    runtime_s: float = 0.0
    converged: bool = False


def cp_als(T, J: int, opts: SolverOptions | None = None):
    """Rank-``J`` CP decomposition by alternating least squares.

    Each mode update solves its linear least-squares problem through the
    Gram/Hadamard identity (the J x J normal matrix is the entrywise product
    of the other factors' Gram matrices), so the residual never increases.
    The fit is tracked per sweep from cached cross products, not by forming
    the dense reconstruction.

    Returns ``(KTensor, SolveReport)``; the KTensor is normalized (unit
    columns outside the last mode, scale in the weights).
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < 2:
        raise ValueError("cp_als needs an order >= 2 tensor")
    if J < 1:
        raise ValueError("rank must be positive")
    opts = opts if opts is not None else SolverOptions()
    N = T.ndim
    norm_y = float(np.linalg.norm(T.ravel()))
    if norm_y == 0:
        raise ValueError("cp_als on a zero tensor")
    max_rank = min(prod(T.shape) // s for s in T.shape)
    if J > max_rank:
        warnings.warn(f"rank {J} exceeds the largest feasible rank "
                      f"{max_rank} for shape {T.shape}", RuntimeWarning)

    start = perf_counter()
    # Caching every unfolding costs N copies of the tensor; past ~1 GB
    # total that is worse than re-matricizing inside the sweep.
    cache_all = T.size * N * T.itemsize <= UNFOLDING_CACHE_BYTES
    unfoldings = [matricize(T, n) for n in range(N)] if cache_all else None

    if opts.init is not None:
        kt0 = opts.init
        if kt0.shape != T.shape or kt0.rank != J:
            raise ValueError(f"init KTensor has shape {kt0.shape} rank "
                             f"{kt0.rank}, expected {T.shape} rank {J}")
        factors = [A.copy() for A in kt0.factors]
        factors[-1] = factors[-1] * kt0.weights
    else:
        rng = np.random.default_rng(opts.seed)
        factors = []
        for s in T.shape:
            A = rng.standard_normal((s, J))
            norms = np.linalg.norm(A, axis=0)
            norms[norms == 0] = 1.0
            factors.append(A / norms)
    grams = [A.T @ A for A in factors]

    fit_trace: list[float] = []
    fit_prev = None
    converged = False
    for sweep in range(1, opts.max_iters + 1):
        for n in range(N):
            B = khatri_rao([factors[p] for p in range(N) if p != n])
            Un = unfoldings[n] if unfoldings is not None else matricize(T, n)
            W = Un @ B
            V = hadamard([grams[p] for p in range(N) if p != n])
            factors[n] = W @ np.linalg.pinv(V, rcond=pinv_cutoff(V))
            grams[n] = factors[n].T @ factors[n]
        # V excludes the last mode, W is its cross product: enough for the
        # residual without reconstructing the tensor.
        norm_est_sq = float(np.sum(V * grams[N - 1]))
        inner = float(np.sum(factors[N - 1] * W))
        resid = np.sqrt(max(norm_y ** 2 - 2.0 * inner + norm_est_sq, 0.0))
        fit_now = 1.0 - resid / norm_y
        if not np.isfinite(fit_now):
            raise RuntimeError(f"cp_als produced a non-finite fit at sweep "
                               f"{sweep}; aborting")
        fit_trace.append(fit_now)
        if fit_prev is not None and abs(fit_now - fit_prev) < opts.tol:
            converged = True
            break
        fit_prev = fit_now

    kt = normalize(KTensor(factors))
    report = SolveReport(iterations=len(fit_trace), fit_trace=fit_trace,
                         final_fit=fit_trace[-1],
                         runtime_s=perf_counter() - start, converged=converged)
    return kt, report


def _als_order3(T, J, opts):
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise ValueError(f"the registered ALS solver expects a third-order "
                         f"tensor, got order {T.ndim}")
    return cp_als(T, J, opts)


_SOLVERS = {"als": _als_order3}


def register_solver(name: str, solve) -> None:
    """Register a third-order solver ``solve(T3, J, opts) -> (KTensor, SolveReport)``."""
    if not callable(solve):
        raise TypeError("solver must be callable")
    _SOLVERS[str(name)] = solve


def get_solver(name: str):
    """Look up a registered solver by name."""
    try:
        return _SOLVERS[name]
    except KeyError:
        raise KeyError(f"no solver registered under {name!r}; "
                       f"known: {sorted(_SOLVERS)}") from None
