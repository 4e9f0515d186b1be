"""Monte Carlo cross-check of the discretized expectations.

Draws i.i.d. realizations of all random factors, solves the pointwise
equilibrium problem per sample, and reports the sample mean with
standard errors. This estimator shares no code path with the cell
discretization beyond the VI solver, so agreement between the two is a
meaningful consistency check.

Sampling is counter-based: sample i lives in chunk i // 4096, and each
chunk draws from its own Philox stream keyed by (seed, chunk index).
A chunk's samples are therefore a pure function of the seed, so the
report is bit-identical across runs and worker counts.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .aggregate import neumaier_add
from .cournot import operator_eval_sampled
from .distributions import ppf
from .vi import SolverConfig, solve_box_vi_batch

CHUNK_SIZE = 4096


@dataclass
class OracleReport:
    """Sample mean of the equilibrium with per-component standard errors."""

    mean: np.ndarray
    standard_error: np.ndarray
    n_samples: int
    seed: int
    failed_solves: int = 0


def _chunk_rng(seed, chunk):
    return np.random.Generator(np.random.Philox(key=seed).jumped(chunk))


def monte_carlo_mean(instance, n_samples, seed, solver_config=None,
                     parallelism=1):
    """Estimate E(u) by sample averaging over factor draws.

    Args:
        instance: the market model.
        n_samples: number of i.i.d. factor realizations, >= 1.
        seed: nonnegative integer keying the sample stream.
        solver_config: SolverConfig for the per-sample solves.
        parallelism: worker count; never changes the results.

    Returns:
        OracleReport. standard_error is sample stddev / sqrt(n);
        failed_solves counts samples whose solve did not converge
        (their last iterates still enter the average, and callers
        should treat any failure as disqualifying).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be >= 0")
    config = solver_config or SolverConfig()
    m = instance.m
    # one draw per factor slot, in fixed order, constants included,
    # so the stream layout does not depend on which factors are random
    factors = ([instance.r_factor, instance.s_factor]
               + list(f.q_bar for f in instance.firms)
               + list(instance.beta_factors) + [instance.alpha_factor])
    n_chunks = (n_samples + CHUNK_SIZE - 1) // CHUNK_SIZE

    def run_chunk(chunk):
        nc = min(CHUNK_SIZE, n_samples - chunk * CHUNK_SIZE)
        rng = _chunk_rng(seed, chunk)
        draws = [ppf(fac, rng.random(nc)) for fac in factors]
        r = draws[0]
        s = draws[1]
        upper = np.stack(draws[2:2 + m], axis=1)
        beta = np.stack(draws[2 + m:2 + 2 * m], axis=1)
        alpha = draws[-1]
        lower = np.zeros(m)

        def op(x, rows):
            return operator_eval_sampled(instance, x, r[rows], s[rows],
                                         beta[rows], alpha[rows])

        out = solve_box_vi_batch(op, lower, upper, config, seeds=0.5 * upper)
        sols = out["solutions"]
        failed = int(nc - out["converged"].sum())
        s1 = np.array([math.fsum(sols[:, i]) for i in range(m)])
        s2 = np.array([math.fsum(sols[:, i] ** 2) for i in range(m)])
        return s1, s2, failed

    chunks = range(n_chunks)
    if parallelism <= 1 or n_chunks == 1:
        results = [run_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run_chunk, chunks))

    # merge chunk partials in chunk order, compensated
    s1 = np.zeros(m)
    s1_c = np.zeros(m)
    s2 = np.zeros(m)
    s2_c = np.zeros(m)
    failed = 0
    for c1, c2, cf in results:
        s1, s1_c = neumaier_add(s1, s1_c, c1)
        s2, s2_c = neumaier_add(s2, s2_c, c2)
        failed += cf
    s1 = s1 + s1_c
    s2 = s2 + s2_c

    mean = s1 / n_samples
    if n_samples > 1:
        var = np.maximum((s2 - s1 ** 2 / n_samples) / (n_samples - 1), 0.0)
        se = np.sqrt(var / n_samples)
    else:
        se = np.zeros(m)
    return OracleReport(mean=mean, standard_error=se, n_samples=n_samples,
                        seed=seed, failed_solves=failed)


def write_oracle_csv(report, path):
    """Write (component, mc_mean, std_error, n_samples, seed) rows."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["component", "mc_mean", "std_error",
                      "n_samples", "seed"])
        for i in range(len(report.mean)):
            out.writerow([f"u_{i + 1}", repr(float(report.mean[i])),
                          repr(float(report.standard_error[i])),
                          report.n_samples, report.seed])
    return path
