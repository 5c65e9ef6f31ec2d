"""CP decomposition of high-order tensors through a third-order detour.

The pipeline: pick (or accept) a three-group mode split, merge the grouped
modes, optionally shrink one merged mode, run a third-order solver, undo the
compression by least squares against the uncompressed data, and split every
merged factor back into per-mode factors by columnwise rank-1 projection.
The final factors come with a certified error bound: writing ``e3`` for the
third-order residual and ``eps_K`` for the (weighted) projection residual,

    ||Y - [[est]]||_F  <=  e3 + sqrt(J) * eps_K,

which the pipeline checks on every run.  A violation is raised, because it
can only come from a bug, never from bad data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from time import perf_counter

import numpy as np

from .als import SolverOptions, get_solver
from .krproj import ProjectionKind, kr_project
from .ktensor import KTensor, normalize, reconstruct
from .linalg import hadamard, khatri_rao, ls_solve, truncated_svd, pinv_cutoff
from .tensor import ModeSplit, matricize, reduce_modes, tensorize
from .uniqueness import krank_product_bound, mode_rank

BOUND_SLACK_REL = 1e-9


@dataclass(frozen=True)
class Compression:
    """How to shrink a merged mode before the third-order solve.

    ``kind`` is ``svd`` (orthogonal projection onto the leading left
    singular subspace, whitened) or ``fibers`` (keep a random sorted row
    subset of the matricization, which preserves nonnegativity).  ``mode``
    indexes the merged tensor; ``None`` means the largest merged mode.
    ``count`` (fibers only) defaults to ``max(3 J, 100)`` capped at the mode
    size.
    """

    kind: str
    mode: int | None = None
    count: int | None = None
    seed: object = None

    def __post_init__(self):
        if self.kind not in ("svd", "fibers"):
            raise ValueError(f"unknown compression kind {self.kind!r}")
        if self.count is not None and self.count < 1:
            raise ValueError("fiber count must be positive")


@dataclass(frozen=True)
class RestoreInfo:
    """What :func:`compress_mode` remembers to undo itself.

    For ``svd`` the compressed matricization is ``inv(D) U^T M``, so the
    merged factor estimated on the compressed tensor maps back as
    ``U @ diag(s) @ G``.  For ``fibers`` the rows are a subset and the full
    factor must be re-estimated by least squares against the original data.
    """

    kind: str
    mode: int
    U: np.ndarray | None = None
    s: np.ndarray | None = None
    rows: np.ndarray | None = None

    def restore_factor(self, G):
        G = np.asarray(G, dtype=np.float64)
        if self.kind == "none":
            return G.copy()
        if self.kind == "svd":
            return self.U @ (G * self.s[:, None])
        raise ValueError("fiber-sampled factors carry no inverse map; "
                         "re-estimate with recover_merged_factor")


@dataclass
class MrcpdOptions:
    """Knobs for :func:`mrcpd_decompose`.

    ``split=None`` plans the unfolding automatically from J-capped mode
    ranks.  ``variant`` selects the standard pipeline ("full") or the
    one-factor-first variant ("reduced") that compresses both trailing
    merged modes, keeps only the leading factor from the third-order solve,
    and pulls the remaining Khatri-Rao block out in a single least-squares
    step.  ``restarts`` reruns the inner solver from fresh seeds and keeps
    the best fit.
    """

    split: ModeSplit | None = None
    solver: str = "als"
    solver_opts: SolverOptions = field(default_factory=SolverOptions)
    krproj: str = "svd"
    projection: ProjectionKind = field(default_factory=ProjectionKind.none)
    compression: Compression | None = None
    variant: str = "full"
    restarts: int = 1
    mode_rank_tol: float = 1e-8

    def __post_init__(self):
        if self.variant not in ("full", "reduced"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.krproj not in ("svd", "power"):
            raise ValueError(f"unknown KR projection method {self.krproj!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class BoundReport:
    """Certified error bound of one pipeline run.

    ``fit3`` is the Frobenius residual of the third-order model on the
    uncompressed merged tensor, ``eps_k`` the weighted rank-1 projection
    residual, ``bound = fit3 + sqrt(J) * eps_k``, and ``final_err`` the
    actual residual of the returned factors on the input tensor.  ``holds``
    allows a relative slack of 1e-9 for round-off.
    """

    eps_k: float
    fit3: float
    final_err: float
    bound: float
    holds: bool


def plan_unfolding(kranks, J: int) -> ModeSplit:
    """Choose a three-group mode split balancing the group krank bounds.

    Modes are sorted by descending krank estimate (ties by index) and every
    contiguous three-block split of that ordering is scored by its group
    bounds from :func:`krank_product_bound`.  The plan whose sorted bound
    tuple is largest wins (so the smallest bound is maximized first, then
    the next one, and so on); remaining ties prefer a smaller maximum group
    size, then earlier boundaries, which merges the smallest kranks.
    Groups are returned in descending bound order.
    """
    kranks = [int(k) for k in kranks]
    N = len(kranks)
    if N < 4:
        raise ValueError(f"mode reduction needs at least 4 modes, got {N}; "
                         "decompose directly instead")
    if any(k < 1 for k in kranks):
        raise ValueError(f"krank estimates must be >= 1, got {kranks}")
    order = sorted(range(N), key=lambda n: (-kranks[n], n))
    best_key, best = None, None
    for b1 in range(1, N - 1):
        for b2 in range(b1 + 1, N):
            blocks = [order[:b1], order[b1:b2], order[b2:]]
            bounds = [krank_product_bound([kranks[m] for m in blk], J)
                      for blk in blocks]
            sizes = [len(blk) for blk in blocks]
            key = (tuple(sorted(bounds)), -max(sizes), tuple(-s for s in sizes))
            if best_key is None or key > best_key:
                best_key, best = key, (blocks, bounds)
    blocks, bounds = best
    by_bound = sorted(range(3), key=lambda g: (-bounds[g], g))
    perm = tuple(m for g in by_bound for m in blocks[g])
    cuts = (0, len(blocks[by_bound[0]]),
            len(blocks[by_bound[0]]) + len(blocks[by_bound[1]]), N)
    return ModeSplit(perm, cuts)


def compress_mode(T3, mode: int, width: int, method: str = "svd",
                  seed=None):
    """Shrink one mode of a tensor to ``width`` rows.

    ``svd`` projects the mode-``mode`` matricization onto its leading
    ``width`` left singular vectors and whitens (new matricization
    ``inv(D) U^T M``).  ``fibers`` keeps ``width`` rows, sampled uniformly
    without replacement (sorted; sampling every row is the identity).  A
    ``width`` at or above the mode size is a no-op.

    Returns ``(compressed tensor, RestoreInfo)``.
    """
    T3 = np.asarray(T3, dtype=np.float64)
    if not 0 <= mode < T3.ndim:
        raise ValueError(f"mode {mode} out of range for order-{T3.ndim} tensor")
    if width < 1:
        raise ValueError("target width must be positive")
    size = T3.shape[mode]
    M = matricize(T3, mode)
    if method == "svd":
        if width >= size:
            return T3, RestoreInfo(kind="none", mode=mode)
        if width > M.shape[1]:
            raise ValueError(f"cannot keep {width} singular directions of a "
                             f"{M.shape} matricization")
        res = truncated_svd(M, width)
        if res.s[-1] <= pinv_cutoff(M) * res.s[0]:
            raise ValueError(f"mode {mode} has numerical rank below {width}; "
                             "svd compression would divide by a negligible "
                             "singular value")
        newM = (res.U / res.s).T @ M
        info = RestoreInfo(kind="svd", mode=mode, U=res.U, s=res.s)
    elif method == "fibers":
        if width > size:
            raise ValueError(f"cannot sample {width} of {size} rows")
        if width == size:
            return T3, RestoreInfo(kind="none", mode=mode)
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(size, size=width, replace=False))
        newM = M[rows]
        info = RestoreInfo(kind="fibers", mode=mode, rows=rows)
    else:
        raise ValueError(f"unknown compression method {method!r}")
    shape = list(T3.shape)
    shape[mode] = width
    return tensorize(newM, tuple(shape), mode), info


def recover_merged_factor(T, split: ModeSplit, k: int, known_factors):
    """Least-squares estimate of merged factor ``k`` given the others.

    Solves ``matricize(reduced T, k) ~ G_k @ khatri_rao(known).T``; the
    result absorbs the component weights.  The Khatri-Rao product of the
    known factors must have full column rank.
    """
    T = np.asarray(T, dtype=np.float64)
    Y3 = reduce_modes(T, split)
    if not 0 <= k < Y3.ndim:
        raise ValueError(f"group {k} out of range")
    known = [np.asarray(A, dtype=np.float64) for A in known_factors]
    if len(known) != Y3.ndim - 1:
        raise ValueError(f"expected {Y3.ndim - 1} known factors, got {len(known)}")
    B = khatri_rao(known)
    gram = hadamard([A.T @ A for A in known])
    eig = np.linalg.eigvalsh(gram)
    floor = (max(B.shape) * np.finfo(np.float64).eps) ** 2 * eig[-1]
    if eig[-1] <= 0 or eig[0] <= floor:
        cond = np.inf if eig[0] <= 0 else float(np.sqrt(eig[-1] / eig[0]))
        raise ValueError("known factors' Khatri-Rao product is numerically "
                         f"rank deficient (condition ~ {cond:.3e}); cannot "
                         "recover the merged factor")
    return ls_solve(B, matricize(Y3, k).T).T


def verify_error_bound(T, est: KTensor, fit3: float, eps_k: float) -> BoundReport:
    """Check the pipeline's error bound on a finished estimate.

    ``est`` must be normalized (unit columns outside the last mode) so the
    sqrt(J) step of the bound applies.
    """
    T = np.asarray(T, dtype=np.float64)
    for n in range(est.order - 1):
        norms = np.linalg.norm(est.factors[n], axis=0)
        if np.any(np.abs(norms[norms > 0] - 1.0) > 1e-6):
            raise ValueError(f"estimate factor {n} is not column-normalized")
    final_err = float(np.linalg.norm((T - reconstruct(est)).ravel()))
    bound = float(fit3) + np.sqrt(est.rank) * float(eps_k)
    norm_t = float(np.linalg.norm(T.ravel()))
    holds = final_err <= bound + BOUND_SLACK_REL * norm_t
    return BoundReport(eps_k=float(eps_k), fit3=float(fit3),
                       final_err=final_err, bound=bound, holds=holds)


def _solve_with_restarts(solver, Y3, J, opts: MrcpdOptions):
    """Run the registered solver ``restarts`` times, keep the best fit."""
    base = opts.solver_opts
    if opts.restarts == 1:
        return solver(Y3, J, base)
    entropy = base.seed
    if not isinstance(entropy, np.random.SeedSequence):
        entropy = np.random.SeedSequence(entropy)
    seeds = entropy.spawn(opts.restarts)
    best = None
    for s in seeds:
        kt, rep = solver(Y3, J, replace(base, seed=s))
        if best is None or rep.final_fit > best[1].final_fit:
            best = (kt, rep)
    return best


def _resolve_compression(comp, Y3, J):
    """Fill in the defaulted mode/width of a compression request."""
    mode = comp.mode
    if mode is None:
        mode = int(np.argmax(Y3.shape))
    if comp.kind == "svd":
        width = J
    else:
        width = comp.count if comp.count is not None else max(3 * J, 100)
        width = min(width, Y3.shape[mode])
    return mode, width


def _weighted_resid(G, projected, weights):
    """||(G - projected) diag(weights)||_F."""
    return float(np.linalg.norm((G - projected) * weights[None, :]))


def mrcpd_decompose(T, J: int, opts: MrcpdOptions | None = None):
    """Decompose an order >= 4 tensor via merge, solve, project.

    Returns ``(KTensor, SolveReport, BoundReport)``: the order-N estimate in
    original mode order (normalized), the inner solve's report with
    ``runtime_s`` replaced by the total pipeline wall-clock, and the bound
    check.  Raises if the certified bound fails, which indicates a bug.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < 4:
        raise ValueError(f"mode reduction expects order >= 4, got {T.ndim}; "
                         "use cp_als directly")
    if J < 1:
        raise ValueError("rank must be positive")
    opts = opts if opts is not None else MrcpdOptions()
    solver = get_solver(opts.solver)

    start = perf_counter()
    split = opts.split
    if split is None:
        estimates = [max(1, min(mode_rank(T, n, opts.mode_rank_tol), J))
                     for n in range(T.ndim)]
        split = plan_unfolding(estimates, J)
    if len(split.perm) != T.ndim:
        raise ValueError(f"split covers {len(split.perm)} modes, tensor has "
                         f"{T.ndim}")
    if split.num_groups != 3:
        raise ValueError(f"the pipeline solves a third-order core; the split "
                         f"has {split.num_groups} groups")
    Y3 = reduce_modes(T, split)

    if opts.variant == "reduced":
        est, rep, fit3, eps_k = _reduced_variant(T, Y3, split, J, opts, solver)
    else:
        est, rep, fit3, eps_k = _full_variant(T, Y3, split, J, opts, solver)

    est = normalize(est)
    report = verify_error_bound(T, est, fit3, eps_k)
    if not report.holds:
        raise RuntimeError(
            f"error bound violated: final residual {report.final_err:.6e} > "
            f"{report.bound:.6e} (fit3={fit3:.6e}, eps_k={eps_k:.6e}); this "
            "is a bug in the pipeline, please report it")
    rep = replace(rep, runtime_s=perf_counter() - start)
    return est, rep, report


def _project_group(G, modes, shape, lam, opts):
    """KR-project one merged factor; returns per-mode factors and the
    weighted residual that feeds the bound."""
    if len(modes) == 1:
        return [G], 0.0
    sizes = [shape[m] for m in modes]
    factors, _ = kr_project(G, sizes, method=opts.krproj, proj=opts.projection)
    resid = _weighted_resid(G, khatri_rao(factors), lam)
    return factors, resid


def _full_variant(T, Y3, split, J, opts, solver):
    groups = split.group_modes()
    comp = opts.compression
    Y3s = Y3
    rinfo = None
    if comp is not None:
        mode, width = _resolve_compression(comp, Y3, J)
        Y3s, rinfo = compress_mode(Y3, mode, width, comp.kind, comp.seed)
    kt3, rep = _solve_with_restarts(solver, Y3s, J, opts)
    kt3 = normalize(kt3, all_modes=True)
    if rinfo is not None and rinfo.kind != "none":
        m = rinfo.mode
        others = [kt3.factors[p] for p in range(3) if p != m]
        recovered = recover_merged_factor(T, split, m, others)
        factors3 = list(kt3.factors)
        factors3[m] = recovered
        kt3 = normalize(KTensor(factors3), all_modes=True)
    fit3 = float(np.linalg.norm((Y3 - reconstruct(kt3)).ravel()))
    lam = kt3.weights
    eps_k = 0.0
    factors_by_mode = {}
    for k, modes in enumerate(groups):
        factors, resid = _project_group(kt3.factors[k], modes, T.shape, lam,
                                        opts)
        eps_k += resid
        for m, F in zip(modes, factors):
            factors_by_mode[m] = F
    est = KTensor([factors_by_mode[m] for m in range(T.ndim)], lam)
    return est, rep, fit3, eps_k


def _reduced_variant(T, Y3, split, J, opts, solver):
    groups = split.group_modes()
    if Y3.shape[0] < J:
        raise ValueError(
            f"the reduced variant estimates the leading merged factor first "
            f"and needs its size {Y3.shape[0]} >= rank {J}; use the full "
            "variant")
    method = opts.compression.kind if opts.compression is not None else "svd"
    count = opts.compression.count if opts.compression is not None else None
    seed = opts.compression.seed if opts.compression is not None else None
    seeds = np.random.SeedSequence(seed).spawn(2)
    Y3s = Y3
    for i, m in enumerate((1, 2)):
        width = J if method == "svd" else min(
            count if count is not None else max(3 * J, 100), Y3s.shape[m])
        try:
            Y3s, _ = compress_mode(Y3s, m, width, method, seeds[i])
        except ValueError as e:
            warnings.warn(f"skipping compression of merged mode {m}: {e}",
                          RuntimeWarning)
    kt3, rep = _solve_with_restarts(solver, Y3s, J, opts)
    kt3 = normalize(kt3, all_modes=True)
    G1 = kt3.factors[0]
    eig = np.linalg.eigvalsh(G1.T @ G1)
    if eig[0] <= (max(G1.shape) * np.finfo(np.float64).eps) ** 2 * max(eig[-1], 0):
        raise ValueError("leading merged factor came back rank deficient; "
                         "the reduced variant cannot continue (use full)")
    # One least-squares pull recovers the whole trailing Khatri-Rao block,
    # weights included.
    Y1 = matricize(Y3, 0)
    C = ls_solve(G1, Y1).T
    fit3 = float(np.linalg.norm(Y1 - G1 @ C.T))

    col_norms = np.linalg.norm(C, axis=0)
    f1, resid1 = _project_group(G1, groups[0], T.shape, col_norms, opts)
    tail_modes = list(groups[1]) + list(groups[2])
    tail_sizes = [T.shape[m] for m in tail_modes]
    tail_factors, _ = kr_project(C, tail_sizes, method=opts.krproj,
                                 proj=opts.projection)
    resid_tail = float(np.linalg.norm(C - khatri_rao(tail_factors)))
    eps_k = resid1 + resid_tail

    factors_by_mode = dict(zip(groups[0], f1))
    factors_by_mode.update(zip(tail_modes, tail_factors))
    est = KTensor([factors_by_mode[m] for m in range(T.ndim)], np.ones(J))
    return est, rep, fit3, eps_k
