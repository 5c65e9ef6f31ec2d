"""Weighted sum-of-rank-one (Kruskal) tensors and recovery metrics.

A :class:`KTensor` holds one factor matrix per mode, all with J columns, plus
a weight vector of length J; the represented tensor is
``sum_j weights[j] * outer(A_1[:, j], ..., A_N[:, j])``.  Column scale and
order are only determined up to the usual permutation/scaling ambiguity,
which is why every comparison here goes through explicit matching.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import prod

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import khatri_rao
from .tensor import tensorize
from .uniqueness import collinearity

KTNS_MAGIC = b"KTNS"
KTNS_VERSION = 1

MSIR_CAP_DB = 300.0


class KTensor:
    """Immutable-by-convention container for weights + factor matrices."""

    __slots__ = ("weights", "factors")

    def __init__(self, factors, weights=None):
        factors = [np.array(A, dtype=np.float64, copy=True) for A in factors]
        if not factors:
            raise ValueError("KTensor needs at least one factor matrix")
        if any(A.ndim != 2 for A in factors):
            raise ValueError("factors must be matrices")
        J = factors[0].shape[1]
        if any(A.shape[1] != J for A in factors):
            raise ValueError("factors must share one column count")
        if J < 1:
            raise ValueError("rank must be at least 1")
        if weights is None:
            weights = np.ones(J)
        weights = np.array(weights, dtype=np.float64, copy=True).ravel()
        if weights.size != J:
            raise ValueError(f"{weights.size} weights for rank {J}")
        self.factors = factors
        self.weights = weights

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(A.shape[0] for A in self.factors)

    def copy(self) -> "KTensor":
        return KTensor(self.factors, self.weights)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"KTensor(shape={self.shape}, rank={self.rank})"


def reconstruct(kt: KTensor) -> np.ndarray:
    """Dense tensor represented by a KTensor."""
    if kt.order == 1:
        return kt.factors[0] @ kt.weights
    M = reconstruct_matricized(kt, 0)
    return tensorize(M, kt.shape, 0)


def reconstruct_matricized(kt: KTensor, n: int) -> np.ndarray:
    """Mode-``n`` matricization of the represented tensor.

    Equals ``A_n @ diag(weights) @ khatri_rao(other factors, mode order).T``
    without forming the dense tensor first.
    """
    if not 0 <= n < kt.order:
        raise ValueError(f"mode {n} out of range for order-{kt.order} KTensor")
    others = [kt.factors[p] for p in range(kt.order) if p != n]
    return (kt.factors[n] * kt.weights) @ khatri_rao(others).T


def normalize(kt: KTensor, all_modes: bool = False) -> KTensor:
    """Push factor column norms into the weights.

    Columns of every mode except the last become unit norm (the last mode
    too when ``all_modes`` is set); weights pick up the removed scale.  A
    zero column cannot be normalized: its weight becomes 0 and the component
    is dead.  The represented tensor is unchanged.
    """
    factors = [A.copy() for A in kt.factors]
    weights = kt.weights.copy()
    upto = kt.order if all_modes else kt.order - 1
    for n in range(upto):
        norms = np.linalg.norm(factors[n], axis=0)
        weights *= norms
        nz = norms > 0
        factors[n][:, nz] /= norms[nz]
    return KTensor(factors, weights)


def absorb_weights(kt: KTensor, n: int = -1) -> KTensor:
    """Fold the weights into mode ``n``; resulting weights are all ones."""
    n = range(kt.order)[n]
    factors = [A.copy() for A in kt.factors]
    factors[n] = factors[n] * kt.weights
    return KTensor(factors, np.ones(kt.rank))


def fit(ref, est) -> float:
    """Relative-error fit score ``1 - ||ref - est||_F / ||ref||_F``.

    1 means exact; the score can go negative when the estimate is worse than
    predicting zero.  ``ref`` must be nonzero.
    """
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {est.shape}")
    nref = np.linalg.norm(ref.ravel())
    if nref == 0:
        raise ValueError("fit is undefined for a zero reference")
    return 1.0 - float(np.linalg.norm((ref - est).ravel())) / float(nref)


@dataclass(frozen=True)
class MatchResult:
    """Optimal column matching between a reference factor and an estimate.

    ``perm[j]`` is the estimate column assigned to reference column ``j``;
    ``scales[j]`` is the least-squares scalar such that
    ``scales[j] * est[:, perm[j]] ~ ref[:, j]``; ``sir_db[j]`` is the
    signal-to-interference ratio of the pair after z-scoring and sign
    alignment (NaN when either column is constant).
    """

    perm: tuple[int, ...]
    scales: np.ndarray
    sir_db: np.ndarray


def _zscore(col):
    mu = col.mean()
    sd = col.std()
    if sd == 0:
        return None
    return (col - mu) / sd


def _sir_db(ref_col, est_col) -> float:
    """SIR in dB of one matched column pair, after z-scoring + sign."""
    zr = _zscore(ref_col)
    ze = _zscore(est_col)
    if zr is None or ze is None:
        return float("nan")
    if zr @ ze < 0:
        ze = -ze
    num = zr @ zr
    den = float(np.linalg.norm(zr - ze) ** 2)
    if den <= num * 10.0 ** (-MSIR_CAP_DB / 10.0):
        return MSIR_CAP_DB
    return min(MSIR_CAP_DB, 10.0 * np.log10(num / den))


def match_factors(ref, est) -> MatchResult:
    """Bijectively match estimate columns to reference columns.

    The assignment maximizes the total absolute collinearity; reference
    columns are never reused.  Works on raw columns, so it is insensitive to
    the per-column scale/sign ambiguity of CP factors.
    """
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {est.shape}")
    J = ref.shape[1]
    affinity = np.zeros((J, J))
    for j in range(J):
        for m in range(J):
            if ref[:, j].any() and est[:, m].any():
                affinity[j, m] = abs(collinearity(ref[:, j], est[:, m]))
    rows, cols = linear_sum_assignment(-affinity)
    perm = tuple(int(cols[np.argmax(rows == j)]) for j in range(J))
    scales = np.zeros(J)
    sir = np.zeros(J)
    for j in range(J):
        e = est[:, perm[j]]
        den = e @ e
        scales[j] = (ref[:, j] @ e) / den if den > 0 else 0.0
        sir[j] = _sir_db(ref[:, j], e)
    return MatchResult(perm, scales, sir)


def msir(ref, est) -> float:
    """Mean signal-to-interference ratio (dB) over optimally matched columns.

    Columns are z-scored (zero mean, unit variance) before comparison, so
    the metric sees only the shape of each component; per-pair values are
    capped at 300 dB.  Raises if any matched column is constant.
    """
    res = match_factors(ref, est)
    if np.isnan(res.sir_db).any():
        raise ValueError("msir is undefined for constant columns")
    return float(res.sir_db.mean())


def write_ktns(path, kt: KTensor) -> None:
    """Write a KTensor to the ``.ktns`` binary format.

    Layout mirrors the tensor format: magic ``KTNS``, version byte 1, uint32
    order N, uint32 rank J, N uint64 mode sizes, J float64 weights, then each
    factor as float64 entries in column-major order.  Little-endian.
    """
    with open(path, "wb") as f:
        f.write(KTNS_MAGIC)
        f.write(struct.pack("<B", KTNS_VERSION))
        f.write(struct.pack("<II", kt.order, kt.rank))
        f.write(struct.pack(f"<{kt.order}Q", *kt.shape))
        f.write(kt.weights.astype("<f8").tobytes())
        for A in kt.factors:
            f.write(A.ravel(order="F").astype("<f8").tobytes())


def read_ktns(path) -> KTensor:
    """Read a KTensor written by :func:`write_ktns`."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != KTNS_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {KTNS_MAGIC!r}")
        (version,) = struct.unpack("<B", f.read(1))
        if version != KTNS_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        order, J = struct.unpack("<II", f.read(8))
        if order < 1 or J < 1:
            raise ValueError(f"{path}: bad header (order={order}, rank={J})")
        shape = struct.unpack(f"<{order}Q", f.read(8 * order))
        weights = np.frombuffer(f.read(8 * J), dtype="<f8").astype(np.float64)
        factors = []
        for size in shape:
            block = np.frombuffer(f.read(8 * size * J), dtype="<f8")
            if block.size != size * J:
                raise ValueError(f"{path}: truncated factor block")
            factors.append(block.reshape((size, J), order="F").astype(np.float64))
        if f.read(1):
            raise ValueError(f"{path}: trailing bytes after payload")
    return KTensor(factors, weights)
