"""Monte-Carlo comparison harness for the direct and mode-reduced solvers.

Each run draws a fresh ground truth and noise realization from per-run
substreams of the master seed, hands the same observed tensor to every
method, and records fits, mean SIR, runtime and (for the mode-reduced
pipeline) the bound diagnostics.  Rows are written to CSV with
repr-precision floats so identical seeds give identical files apart from
the runtime column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .als import SolverOptions, cp_als
from .ktensor import fit, msir, reconstruct
from .mrcpd import Compression, MrcpdOptions, mrcpd_decompose
from .synth import add_noise, gen_bottleneck_ktensor, gen_random_ktensor

CSV_COLUMNS = ("method", "run", "fit_noiseless", "fit_observed", "msir_mean",
               "runtime_s", "converged", "eps_k", "bound_slack")

MRCPD_BENCH_RESTARTS = 6
# cfg.max_iters caps the baseline solver, matching the usual comparison
# protocol.  The inner 3-way solve is a sub-step of the mode-reduced
# pipeline and runs to its own convergence instead; sweeps on the reduced
# tensor are orders of magnitude cheaper, so the larger budget is free.
MRCPD_BENCH_MAX_ITERS = 2500


@dataclass
class BenchConfig:
    name: str                     # "sim1" | "sim2"
    shape: tuple[int, ...]
    rank: int
    snr_db: float | None
    runs: int
    seed: int
    methods: tuple[str, ...] = ("als", "mrcpd")
    max_iters: int = 100
    tol: float = 1e-8
    gcr_threshold: float = 0.99


@dataclass
class RunRecord:
    method: str
    run: int
    fit_noiseless: float
    fit_observed: float
    msir_mean: float
    runtime_s: float
    converged: bool
    eps_k: float | None = None
    bound_slack: float | None = None


def sim1_config(runs: int, seed: int, scale: int = 20) -> BenchConfig:
    """Underdetermined random-factor setup: order 5, rank 48, 20 dB noise."""
    return BenchConfig(name="sim1", shape=(scale,) * 5, rank=48, snr_db=20.0,
                       runs=runs, seed=seed)


def sim2_config(runs: int, seed: int, scale: int = 50) -> BenchConfig:
    """Bottleneck setup: order 5, rank 5, collinear factors, 20 dB noise."""
    return BenchConfig(name="sim2", shape=(scale,) * 5, rank=5, snr_db=20.0,
                       runs=runs, seed=seed)


def _gen_truth(cfg: BenchConfig, seed):
    if cfg.name == "sim2":
        return gen_bottleneck_ktensor(cfg.shape[0], cfg.rank, seed)
    return gen_random_ktensor(cfg.shape, cfg.rank, seed)


def _mean_msir(truth, est) -> float:
    return float(np.mean([msir(truth.factors[n], est.factors[n])
                          for n in range(truth.order)]))


def run_benchmark(cfg: BenchConfig, out_csv=None) -> list[RunRecord]:
    records: list[RunRecord] = []
    run_streams = np.random.SeedSequence(cfg.seed).spawn(cfg.runs)
    for r, stream in enumerate(run_streams):
        data_ss, noise_ss, *method_ss = stream.spawn(2 + len(cfg.methods))
        truth = _gen_truth(cfg, data_ss)
        Y_true = reconstruct(truth)
        Y_obs = add_noise(Y_true, cfg.snr_db, noise_ss)
        for method, mss in zip(cfg.methods, method_ss):
            eps_k = bound_slack = None
            if method == "als":
                sopts = SolverOptions(max_iters=cfg.max_iters, tol=cfg.tol,
                                      seed=mss)
                est, rep = cp_als(Y_obs, cfg.rank, sopts)
            elif method == "mrcpd":
                # The 3-way solves are cheap after compression, so buy
                # local-minimum insurance with a handful of restarts.
                sopts = SolverOptions(max_iters=MRCPD_BENCH_MAX_ITERS,
                                      tol=cfg.tol, seed=mss)
                mopts = MrcpdOptions(solver_opts=sopts,
                                     compression=Compression("svd"),
                                     restarts=MRCPD_BENCH_RESTARTS)
                est, rep, breport = mrcpd_decompose(Y_obs, cfg.rank, mopts)
                eps_k = breport.eps_k
                bound_slack = breport.bound - breport.final_err
            else:
                raise ValueError(f"unknown benchmark method {method!r}")
            records.append(RunRecord(
                method=method, run=r,
                fit_noiseless=fit(Y_true, reconstruct(est)),
                fit_observed=fit(Y_obs, reconstruct(est)),
                msir_mean=_mean_msir(truth, est),
                runtime_s=rep.runtime_s, converged=rep.converged,
                eps_k=eps_k, bound_slack=bound_slack))
    if out_csv is not None:
        write_csv(records, out_csv)
    return records


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([_cell(getattr(rec, col)) for col in CSV_COLUMNS])


def gcr(records, threshold: float, method: str) -> float:
    """Global convergence rate: percent of runs whose noiseless-reference fit
    clears the threshold."""
    rows = [rec for rec in records if rec.method == method]
    if not rows:
        raise ValueError(f"no records for method {method!r}")
    hits = sum(rec.fit_noiseless >= threshold for rec in rows)
    return 100.0 * hits / len(rows)


def summarize(records, threshold: float = 0.99) -> dict:
    """Per-method GCR, median runtime, and mean mSIR."""
    out = {}
    for method in dict.fromkeys(rec.method for rec in records):
        rows = [rec for rec in records if rec.method == method]
        out[method] = {
            "gcr_pct": gcr(records, threshold, method),
            "median_runtime_s": float(np.median([r.runtime_s for r in rows])),
            "mean_msir_db": float(np.mean([r.msir_mean for r in rows])),
            "mean_fit_noiseless": float(np.mean([r.fit_noiseless for r in rows])),
        }
    return out
