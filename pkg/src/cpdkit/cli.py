"""Command-line front end.

Subcommands: ``decompose`` (fit a tensor file, write factors), ``bench``
(Monte-Carlo comparisons to CSV), ``analyze`` (rank / uniqueness report),
``krproj`` (project a merged factor matrix).  Mode numbers on the command
line are 1-based; a split is written as groups separated by ``|`` with
modes separated by commas, e.g. ``"1|2,3|4,5"``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .als import SolverOptions, cp_als
from .bench import run_benchmark, sim1_config, sim2_config, summarize
from .krproj import ProjectionKind, kr_project
from .ktensor import KTNS_MAGIC, read_ktns, write_ktns
from .mrcpd import Compression, MrcpdOptions, mrcpd_decompose, plan_unfolding
from .tensor import ModeSplit, TNSR_MAGIC, read_tnsr
from .uniqueness import (KRUSKAL_RANK_MAX_COLS, check_unfolded_uniqueness,
                         ksb_check, kruskal_rank, mode_rank)


def parse_split(text: str) -> ModeSplit:
    """Parse ``"1|2,3|4,5"`` into a ModeSplit (1-based modes, listing order
    is the permutation)."""
    groups = []
    for part in text.split("|"):
        try:
            modes = tuple(int(tok) for tok in part.split(",") if tok.strip())
        except ValueError:
            raise ValueError(f"bad split group {part!r}") from None
        if not modes:
            raise ValueError(f"empty group in split {text!r}")
        groups.append(modes)
    perm = tuple(m - 1 for g in groups for m in g)
    cuts = [0]
    for g in groups:
        cuts.append(cuts[-1] + len(g))
    return ModeSplit(perm, tuple(cuts))


def format_split(split: ModeSplit) -> str:
    return "|".join(",".join(str(m + 1) for m in g) for g in split.group_modes())


def parse_compress(text: str) -> Compression | None:
    if text == "none":
        return None
    parts = text.split(":")
    if parts[0] == "svd" and len(parts) == 2:
        return Compression("svd", mode=int(parts[1]) - 1)
    if parts[0] == "fibers" and len(parts) == 3:
        return Compression("fibers", mode=int(parts[1]) - 1,
                           count=int(parts[2]))
    raise ValueError(f"bad --compress value {text!r}; expected none, "
                     "svd:MODE or fibers:MODE:COUNT")


def parse_proj(text: str) -> ProjectionKind:
    if text == "none":
        return ProjectionKind.none()
    if text == "nonneg":
        return ProjectionKind.nonneg()
    if text.startswith("soft:"):
        return ProjectionKind.soft(float(text.split(":", 1)[1]))
    raise ValueError(f"bad --proj value {text!r}; expected none, nonneg or "
                     "soft:LAMBDA")


def _cmd_decompose(args) -> int:
    T = read_tnsr(args.input)
    init = read_ktns(args.init) if args.init else None
    sopts = SolverOptions(max_iters=args.max_iters, tol=args.solver_tol,
                          seed=args.seed, init=init)
    if args.method == "als":
        kt, rep = cp_als(T, args.rank, sopts)
        print(f"method=als fit={float(rep.final_fit)!r} "
              f"runtime_s={rep.runtime_s:.3f} "
              f"iterations={rep.iterations} converged={rep.converged}")
    else:
        opts = MrcpdOptions(
            split=parse_split(args.split) if args.split else None,
            solver_opts=sopts,
            krproj=args.krproj,
            projection=parse_proj(args.proj),
            compression=parse_compress(args.compress))
        kt, rep, bound = mrcpd_decompose(T, args.rank, opts)
        norm_t = float(np.linalg.norm(T.ravel()))
        print(f"method=mrcpd fit={float(1.0 - bound.final_err / norm_t)!r} "
              f"runtime_s={rep.runtime_s:.3f} iterations={rep.iterations} "
              f"converged={rep.converged} eps_k={float(bound.eps_k)!r} "
              f"bound_slack={float(bound.bound - bound.final_err)!r}")
    write_ktns(args.output, kt)
    return 0


def _cmd_bench(args) -> int:
    if args.experiment == "sim1":
        cfg = sim1_config(args.runs, args.seed,
                          args.scale if args.scale else 20)
    else:
        cfg = sim2_config(args.runs, args.seed,
                          args.scale if args.scale else 50)
    records = run_benchmark(cfg, out_csv=args.out)
    for method, stats in summarize(records, cfg.gcr_threshold).items():
        print(f"method={method} gcr_pct={stats['gcr_pct']:.1f} "
              f"median_runtime_s={stats['median_runtime_s']:.3f} "
              f"mean_msir_db={stats['mean_msir_db']:.2f} "
              f"mean_fit_noiseless={stats['mean_fit_noiseless']:.6f}")
    print(f"wrote {args.out}")
    return 0


def _sniff_magic(path) -> bytes:
    with open(path, "rb") as f:
        return f.read(4)


def _analyze_tensor(T, rank) -> int:
    print(f"order={T.ndim} shape={tuple(T.shape)}")
    ranks = [mode_rank(T, n) for n in range(T.ndim)]
    for n, r in enumerate(ranks):
        print(f"mode {n + 1}: size={T.shape[n]} rank={r}")
    if rank is None:
        print("pass --rank to get a uniqueness report and a split plan")
        return 0
    estimates = [max(1, min(r, rank)) for r in ranks]
    print(f"krank estimates (rank-capped mode ranks): {estimates}")
    _report_uniqueness(estimates, rank, T.ndim)
    return 0


def _analyze_ktensor(kt, rank) -> int:
    J = kt.rank
    print(f"order={kt.order} shape={kt.shape} rank={J}")
    if J <= KRUSKAL_RANK_MAX_COLS:
        kranks = [kruskal_rank(A) for A in kt.factors]
        print(f"factor kruskal ranks: {kranks}")
    else:
        kranks = [max(1, min(int(np.linalg.matrix_rank(A)), J))
                  for A in kt.factors]
        print(f"factor krank estimates (rank-based, {J} columns is too many "
              f"for the exact test): {kranks}")
    _report_uniqueness(kranks, J, kt.order)
    return 0


def _report_uniqueness(kranks, J, order) -> None:
    rep = ksb_check(kranks, J)
    print(f"kruskal-sum condition: sum={rep.lhs} threshold={rep.rhs} "
          f"margin={rep.margin} satisfied={rep.satisfied}")
    if order < 4:
        print("tensor order below 4: no mode reduction to plan")
        return
    split = plan_unfolding(kranks, J)
    urep = check_unfolded_uniqueness(kranks, J, split)
    print(f"recommended split: \"{format_split(split)}\" "
          f"group_bounds={list(urep.group_bounds)}")
    print(f"unfolded condition: sum={urep.lhs} threshold={urep.rhs} "
          f"margin={urep.margin} satisfied={urep.satisfied}")


def _cmd_analyze(args) -> int:
    magic = _sniff_magic(args.input)
    if magic == TNSR_MAGIC:
        return _analyze_tensor(read_tnsr(args.input), args.rank)
    if magic == KTNS_MAGIC:
        return _analyze_ktensor(read_ktns(args.input), args.rank)
    raise ValueError(f"{args.input}: neither a tensor nor a factor file")


def _cmd_krproj(args) -> int:
    H = read_tnsr(args.input)
    if H.ndim != 2:
        raise ValueError(f"expected an order-2 tensor (a matrix), got order "
                         f"{H.ndim}")
    sizes = [int(tok) for tok in args.shape.split(",") if tok.strip()]
    factors, eps = kr_project(H, sizes, method=args.method,
                              proj=parse_proj(args.proj))
    print(f"eps_k={eps!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpd",
                                description="CP decomposition toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="decompose a tensor file")
    d.add_argument("--input", required=True)
    d.add_argument("--rank", type=int, required=True)
    d.add_argument("--method", choices=("als", "mrcpd"), required=True)
    d.add_argument("--split", default=None,
                   help='mode groups, e.g. "1|2,3|4,5" (mrcpd only)')
    d.add_argument("--solver-tol", type=float, default=1e-8)
    d.add_argument("--max-iters", type=int, default=100)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--compress", default="none",
                   help="none | svd:MODE | fibers:MODE:COUNT (mrcpd only)")
    d.add_argument("--krproj", choices=("svd", "power"), default="svd")
    d.add_argument("--proj", default="none",
                   help="none | nonneg | soft:LAMBDA")
    d.add_argument("--init", default=None, help="initial factors file")
    d.add_argument("--output", required=True)
    d.set_defaults(func=_cmd_decompose)

    b = sub.add_parser("bench", help="run a Monte-Carlo benchmark")
    b.add_argument("experiment", choices=("sim1", "sim2"))
    b.add_argument("--runs", type=int, required=True)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--scale", type=int, default=None,
                   help="mode size override")
    b.set_defaults(func=_cmd_bench)

    a = sub.add_parser("analyze", help="rank and uniqueness report")
    a.add_argument("--input", required=True)
    a.add_argument("--rank", type=int, default=None)
    a.set_defaults(func=_cmd_analyze)

    k = sub.add_parser("krproj", help="project a merged factor matrix")
    k.add_argument("--input", required=True,
                   help="order-2 tensor file holding the merged factor")
    k.add_argument("--shape", required=True, help='mode sizes, e.g. "4,5"')
    k.add_argument("--method", choices=("svd", "power"), default="svd")
    k.add_argument("--proj", default="none")
    k.set_defaults(func=_cmd_krproj)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
