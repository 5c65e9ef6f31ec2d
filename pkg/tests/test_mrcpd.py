"""Mode-reduction pipeline: split planning, compression, merged-factor
recovery, the certified error bound, and the end-to-end decomposition."""

import warnings

import numpy as np
import pytest

from cpdkit.als import SolverOptions
from cpdkit.krproj import ProjectionKind
from cpdkit.ktensor import KTensor, absorb_weights, fit, normalize, reconstruct
from cpdkit.linalg import khatri_rao
from cpdkit.mrcpd import (
    Compression,
    MrcpdOptions,
    compress_mode,
    mrcpd_decompose,
    plan_unfolding,
    recover_merged_factor,
    verify_error_bound,
)
from cpdkit.synth import gen_random_ktensor
from cpdkit.tensor import ModeSplit, frobenius_norm, matricize, reduce_modes


def solver_opts(seed, max_iters=400, tol=1e-12):
    return SolverOptions(max_iters=max_iters, tol=tol, seed=seed)


# ---------------------------------------------------------------- planning

def test_plan_unfolding_worked_example():
    split = plan_unfolding((10, 9, 8, 7, 6), 18)
    assert split == ModeSplit((1, 2, 3, 4, 0), (0, 2, 4, 5))
    assert split.group_modes() == [(1, 2), (3, 4), (0,)]


def test_plan_unfolding_equal_kranks():
    # groups come back ordered by descending bound, so the merged pairs
    # (bound 39) precede the lone mode (bound 20)
    split = plan_unfolding((20, 20, 20, 20, 20), 48)
    assert split.group_modes() == [(1, 2), (3, 4), (0,)]
    assert split.group_sizes((20,) * 5) == (400, 400, 20)

    quad = plan_unfolding((3, 3, 3, 3), 3)
    assert quad == ModeSplit((0, 1, 2, 3), (0, 1, 2, 4))


def test_plan_unfolding_prefers_balanced_bounds():
    # a weak mode gets merged with a strong one instead of standing alone
    split = plan_unfolding((8, 8, 1, 8), 8)
    bounds = [min(8, sum(8 if m != 2 else 1 for m in g) - (len(g) - 1))
              for g in split.group_modes()]
    assert min(bounds) == 8


def test_plan_unfolding_validation():
    with pytest.raises(ValueError):
        plan_unfolding((3, 3, 3), 2)
    with pytest.raises(ValueError):
        plan_unfolding((3, 0, 3, 3), 2)


# ------------------------------------------------------------- compression

def test_compress_mode_svd_preserves_low_rank():
    truth = gen_random_ktensor((12, 5, 4), 3, seed=71)
    T3 = reconstruct(truth)
    C, info = compress_mode(T3, 0, 3)
    assert C.shape == (3, 5, 4)
    assert info.kind == "svd" and info.mode == 0
    # for exact rank-3 data the projection loses nothing:
    # U diag(s) (compressed unfolding) puts the original back
    back = info.restore_factor(matricize(C, 0))
    assert np.allclose(back, matricize(T3, 0), atol=1e-9)


def test_compress_mode_svd_whitens():
    truth = gen_random_ktensor((12, 5, 4), 3, seed=72)
    C, _ = compress_mode(reconstruct(truth), 0, 3)
    rows = matricize(C, 0)
    assert np.allclose(rows @ rows.T, np.eye(3), atol=1e-9)


def test_compress_mode_noop_paths():
    T3 = np.random.default_rng(73).standard_normal((3, 4, 5))
    same, info = compress_mode(T3, 0, 3)
    assert info.kind == "none"
    assert np.array_equal(same, T3)
    assert np.array_equal(info.restore_factor(np.eye(3)), np.eye(3))

    same2, info2 = compress_mode(T3, 1, 4, method="fibers")
    assert info2.kind == "none"


def test_compress_mode_fibers():
    T3 = np.random.default_rng(74).standard_normal((8, 4, 3))
    C, info = compress_mode(T3, 0, 5, method="fibers", seed=7)
    C2, info2 = compress_mode(T3, 0, 5, method="fibers", seed=7)
    assert np.array_equal(C, C2)
    assert np.array_equal(info.rows, info2.rows)
    assert np.all(np.diff(info.rows) > 0)
    assert np.array_equal(matricize(C, 0), matricize(T3, 0)[info.rows])
    with pytest.raises(ValueError, match="no inverse map"):
        info.restore_factor(np.zeros((5, 2)))


def test_compress_mode_validation():
    T3 = np.random.default_rng(75).standard_normal((6, 4, 3))
    with pytest.raises(ValueError):
        compress_mode(T3, 5, 2)
    with pytest.raises(ValueError):
        compress_mode(T3, 0, 0)
    with pytest.raises(ValueError):
        compress_mode(T3, 0, 2, method="quantum")
    with pytest.raises(ValueError, match="singular"):
        # rank-2 data cannot support 4 whitened directions
        compress_mode(reconstruct(gen_random_ktensor((6, 4, 3), 2, seed=76)),
                      0, 4)
    with pytest.raises(ValueError, match="sample"):
        compress_mode(T3, 1, 5, method="fibers")


# --------------------------------------------------- merged-factor recovery

def test_recover_merged_factor():
    truth = gen_random_ktensor((5, 4, 3, 6), 2, seed=77)
    T = reconstruct(truth)
    split = ModeSplit((0, 1, 2, 3), (0, 2, 3, 4))
    merged = [khatri_rao([truth.factors[0], truth.factors[1]]),
              truth.factors[2], truth.factors[3]]
    for k in range(3):
        known = [merged[i] for i in range(3) if i != k]
        got = recover_merged_factor(T, split, k, known)
        assert np.allclose(got, merged[k], atol=1e-9)


def test_recover_merged_factor_validation():
    truth = gen_random_ktensor((5, 4, 3, 6), 2, seed=78)
    T = reconstruct(truth)
    split = ModeSplit((0, 1, 2, 3), (0, 2, 3, 4))
    with pytest.raises(ValueError, match="out of range"):
        recover_merged_factor(T, split, 3, [truth.factors[2],
                                            truth.factors[3]])
    with pytest.raises(ValueError, match="known factors"):
        recover_merged_factor(T, split, 0, [truth.factors[2]])
    dead = np.ones((3, 2))                         # collinear columns
    with pytest.raises(ValueError, match="rank deficient"):
        recover_merged_factor(T, split, 0, [dead, np.ones((6, 2))])


# -------------------------------------------------------------- the bound

def test_verify_error_bound_accepts_and_rejects():
    truth = normalize(gen_random_ktensor((4, 5, 3, 4), 2, seed=79))
    T = reconstruct(truth) + 0.05
    err = frobenius_norm(T - reconstruct(truth))
    ok = verify_error_bound(T, truth, fit3=err, eps_k=0.0)
    assert ok.holds
    assert ok.final_err == pytest.approx(err, rel=1e-12)
    assert ok.bound == pytest.approx(err, rel=1e-12)

    bad = verify_error_bound(T, truth, fit3=err / 2, eps_k=0.0)
    assert not bad.holds
    assert bad.bound == pytest.approx(err / 2, rel=1e-12)


def test_verify_error_bound_requires_normalized_estimate():
    kt = gen_random_ktensor((4, 4, 4), 2, seed=80)   # raw normal columns
    with pytest.raises(ValueError, match="normalized"):
        verify_error_bound(reconstruct(kt), kt, 0.0, 0.0)


def test_bound_pieces_from_exact_pipeline():
    # run the merge / solve / split steps by hand on exact data; with an
    # exact third-order model the projection residual is the whole story
    truth = gen_random_ktensor((6, 7, 8, 9), 3, seed=81)
    T = reconstruct(truth)
    split = ModeSplit((0, 1, 2, 3), (0, 2, 3, 4))
    Y3 = reduce_modes(T, split)

    merged = KTensor([khatri_rao([truth.factors[0], truth.factors[1]]),
                      truth.factors[2], truth.factors[3]])
    fit3 = frobenius_norm(Y3 - reconstruct(merged))
    assert fit3 < 1e-9 * frobenius_norm(T)

    from cpdkit.krproj import kr_project
    factors01, eps = kr_project(merged.factors[0], (6, 7))
    assert eps < 1e-10
    est = normalize(KTensor([factors01[0], factors01[1],
                             truth.factors[2], truth.factors[3]]))
    rep = verify_error_bound(T, est, fit3, eps)
    assert rep.holds
    assert abs(rep.final_err - rep.fit3) <= 1e-9 * frobenius_norm(T)


# ------------------------------------------------------------- end to end

def test_decompose_exact_recovery():
    truth = gen_random_ktensor((6, 5, 7, 4), 3, seed=82)
    T = reconstruct(truth)
    est, rep, bound = mrcpd_decompose(
        T, 3, MrcpdOptions(solver_opts=solver_opts(5), restarts=6))
    assert fit(T, reconstruct(est)) > 1 - 1e-6
    assert bound.holds
    assert rep.iterations >= 1
    assert est.shape == truth.shape and est.rank == 3


def test_decompose_explicit_split_and_order5():
    truth = gen_random_ktensor((4, 3, 5, 3, 4), 2, seed=83)
    T = reconstruct(truth)
    split = ModeSplit((2, 0, 4, 1, 3), (0, 2, 4, 5))
    est, _, bound = mrcpd_decompose(
        T, 2, MrcpdOptions(split=split, solver_opts=solver_opts(1),
                           restarts=4))
    assert fit(T, reconstruct(est)) > 1 - 1e-6
    assert bound.holds


def test_decompose_reduced_variant():
    truth = gen_random_ktensor((7, 5, 4, 6), 2, seed=84)
    T = reconstruct(truth)
    est, _, bound = mrcpd_decompose(
        T, 2, MrcpdOptions(variant="reduced", solver_opts=solver_opts(3),
                           restarts=4))
    assert fit(T, reconstruct(est)) > 1 - 1e-6
    assert bound.holds


def test_decompose_with_svd_compression():
    truth = gen_random_ktensor((10, 6, 5, 4), 2, seed=85)
    T = reconstruct(truth)
    est, _, bound = mrcpd_decompose(
        T, 2, MrcpdOptions(compression=Compression("svd"),
                           solver_opts=solver_opts(2), restarts=4))
    assert fit(T, reconstruct(est)) > 1 - 1e-6
    assert bound.holds


def test_decompose_with_fiber_compression():
    truth = gen_random_ktensor((6, 6, 6, 6), 2, seed=86)
    T = reconstruct(truth)
    est, _, bound = mrcpd_decompose(
        T, 2, MrcpdOptions(compression=Compression("fibers", count=20, seed=0),
                           solver_opts=solver_opts(4), restarts=4))
    assert bound.holds
    assert fit(T, reconstruct(est)) > 1 - 1e-6


def test_decompose_truncated_rank_bound_still_holds():
    truth = gen_random_ktensor((6, 6, 5, 5), 4, seed=87)
    T = reconstruct(truth)
    est, _, bound = mrcpd_decompose(
        T, 3, MrcpdOptions(solver_opts=solver_opts(6, tol=1e-10), restarts=2))
    assert bound.holds
    assert bound.final_err <= bound.bound + 1e-9 * frobenius_norm(T)
    assert bound.eps_k > 0


def test_decompose_restart_determinism():
    truth = gen_random_ktensor((5, 5, 5, 5), 3, seed=88)
    T = reconstruct(truth)
    opts = MrcpdOptions(solver_opts=solver_opts(9), restarts=3)
    _, rep_a, bound_a = mrcpd_decompose(T, 3, opts)
    _, rep_b, bound_b = mrcpd_decompose(T, 3, opts)
    assert rep_a.final_fit == rep_b.final_fit
    assert bound_a.final_err == bound_b.final_err


def test_decompose_nonneg_projection():
    rng = np.random.default_rng(89)
    truth = KTensor([rng.uniform(0.1, 1.0, (5, 2)) for _ in range(4)])
    T = reconstruct(truth)
    with warnings.catch_warnings():
        # a merged column whose sign flipped in the solve can collapse to
        # zero under the constraint; that is the documented behavior
        warnings.simplefilter("ignore", RuntimeWarning)
        est, _, bound = mrcpd_decompose(
            T, 2,
            MrcpdOptions(krproj="power", projection=ProjectionKind.nonneg(),
                         solver_opts=solver_opts(7), restarts=4))
    assert bound.holds
    # modes 2 and 3 come out of the constrained projection; mode 2 holds the
    # unit directions, so it must respect the constraint regardless of the
    # sign the unconstrained third-order solve picked for the merged column
    assert np.all(est.factors[2] >= -1e-12)


def test_decompose_validation():
    T4 = reconstruct(gen_random_ktensor((4, 4, 4, 4), 2, seed=90))
    with pytest.raises(ValueError, match="order"):
        mrcpd_decompose(np.ones((3, 3, 3)), 2)
    with pytest.raises(ValueError, match="rank"):
        mrcpd_decompose(T4, 0)
    with pytest.raises(ValueError, match="split covers"):
        mrcpd_decompose(T4, 2, MrcpdOptions(
            split=ModeSplit((0, 1, 2), (0, 1, 2, 3))))
    with pytest.raises(ValueError, match="groups"):
        mrcpd_decompose(T4, 2, MrcpdOptions(
            split=ModeSplit((0, 1, 2, 3), (0, 2, 4))))


def test_reduced_variant_needs_wide_leading_group():
    T = reconstruct(gen_random_ktensor((2, 2, 2, 2), 2, seed=91))
    with pytest.raises(ValueError, match="size"):
        mrcpd_decompose(T, 3, MrcpdOptions(
            variant="reduced",
            split=ModeSplit((0, 1, 2, 3), (0, 1, 2, 4)),
            solver_opts=solver_opts(0)))


def test_options_validation():
    with pytest.raises(ValueError):
        MrcpdOptions(variant="turbo")
    with pytest.raises(ValueError):
        MrcpdOptions(krproj="qr")
    with pytest.raises(ValueError):
        MrcpdOptions(restarts=0)
    with pytest.raises(ValueError):
        Compression("lossy")
    with pytest.raises(ValueError):
        Compression("fibers", count=0)
