"""Finite-dimensional variational inequalities over box constraint sets.

The problem solved here: find x* in K = [lower, upper] such that

    <F(x*) - shift, z - x*> >= 0   for all z in K.

The solver is the extragradient method (two projected operator
evaluations per iteration) with backtracking step adaptation, which
converges for continuous monotone operators without a known Lipschitz
constant. Termination uses the natural residual

    ||x - P_K(x - gamma * (F(x) - shift))||_2

which vanishes exactly at solutions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Backtracking acceptance ratio: a trial step tau is kept when
# tau * ||F(x) - F(y)|| <= _BACKTRACK_RATIO * ||x - y||.
_BACKTRACK_RATIO = 0.9


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box {x : lower_i <= x_i <= upper_i}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("box requires lower_i <= upper_i")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.size

    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, point, tol=0.0):
        x = np.asarray(point, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class VIProblem:
    """A box VI: find x* in set with <operator(x*) - constant_shift, z - x*> >= 0."""

    operator: Callable[[np.ndarray], np.ndarray]
    constant_shift: np.ndarray
    set: BoxSet

    def __post_init__(self):
        shift = np.atleast_1d(np.asarray(self.constant_shift, dtype=float))
        if shift.shape != (self.set.dim,):
            raise ValueError("constant_shift length must match the box dimension")
        object.__setattr__(self, "constant_shift", shift)

    def eval_shifted(self, x):
        """operator(x) - constant_shift, the effective operator of the VI."""
        return np.asarray(self.operator(x), dtype=float) - self.constant_shift


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 1000
    initial_step: float = 1.0
    step_shrink: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be > 0")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    backtracks: int = 0


class NonConvergenceError(RuntimeError):
    """Raised when max_iterations is hit with the residual above tolerance.

    Carries the last iterate (.point) and the iteration report (.report)
    so callers can inspect or resume.
    """

    def __init__(self, point, report):
        super().__init__(
            f"no convergence after {report.iterations} iterations "
            f"(residual {report.residual:.3e})"
        )
        self.point = point
        self.report = report


def project(point, box):
    """Euclidean projection onto the box: componentwise clamping."""
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != box.dim:
        raise ValueError("dimension mismatch between point and box")
    return np.clip(x, box.lower, box.upper)


def _norm_rows(d):
    # sqrt of the last-axis sum of squares; one expression shared by the
    # scalar and batch code paths so their residuals agree bitwise
    return np.sqrt((d ** 2).sum(axis=-1))


def natural_residual(problem, point, gamma):
    """||x - P_K(x - gamma*(F(x) - shift))||_2; zero exactly at solutions."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    x = np.asarray(point, dtype=float)
    step = project(x - gamma * problem.eval_shifted(x), problem.set)
    return float(_norm_rows(x - step))


def solve_vi(problem, config=None, warm_start=None):
    """Solve a box VI by the extragradient method with step backtracking.

    Args:
        problem: VIProblem with a continuous monotone operator.
        config: SolverConfig; defaults are used when omitted.
        warm_start: optional start point, projected onto the box first.
            Defaults to the box midpoint.

    Returns:
        (solution, SolveReport). The solution satisfies
        natural_residual(problem, solution, config.gamma) <= config.tolerance.

    Raises:
        NonConvergenceError: if max_iterations is exhausted; the error
            carries the last iterate and its report.
    """
    config = config or SolverConfig()
    box = problem.set
    if warm_start is None:
        x = box.midpoint()
    else:
        x = project(warm_start, box)
    step = config.initial_step
    backtracks = 0

    for it in range(config.max_iterations + 1):
        fx = problem.eval_shifted(x)
        if not np.all(np.isfinite(fx)):
            raise FloatingPointError("operator returned NaN/Inf during solve")
        res = float(_norm_rows(x - np.clip(x - config.gamma * fx, box.lower, box.upper)))
        if res <= config.tolerance:
            return x, SolveReport(iterations=it, residual=res, converged=True,
                                  backtracks=backtracks)
        if it == config.max_iterations:
            break
        # trial point, shrinking the step until the contraction test holds
        while True:
            y = np.clip(x - step * fx, box.lower, box.upper)
            fy = problem.eval_shifted(y)
            df = float(_norm_rows(fx - fy))
            dx = float(_norm_rows(x - y))
            if step * df <= _BACKTRACK_RATIO * dx or dx == 0.0:
                break
            step *= config.step_shrink
            backtracks += 1
        x = np.clip(x - step * fy, box.lower, box.upper)

    report = SolveReport(iterations=config.max_iterations, residual=res,
                         converged=False, backtracks=backtracks)
    raise NonConvergenceError(x, report)


def solve_box_vi_batch(operator_batch, lower, upper, config, seeds):
    """Solve a batch of box VIs sharing one vectorized operator.

    Each row of ``seeds`` is an independent VI; row i uses the operator
    slice ``operator_batch(X, rows)[i]`` where ``rows`` are original row
    indices. Rows are iterated with per-row extragradient steps and are
    frozen the moment their natural residual passes tolerance, so a
    row's result never depends on which other rows share the batch.

    Args:
        operator_batch: callable (x: (B, m), rows: (B,) int) -> (B, m)
            evaluating the shifted operator rowwise.
        lower, upper: box bounds, broadcastable to (n, m).
        config: SolverConfig.
        seeds: (n, m) start points, projected onto the box first.

    Returns:
        dict with keys ``solutions`` (n, m), ``residuals`` (n,),
        ``iterations`` (n,), ``converged`` (n,) bool.
    """
    x = np.asarray(seeds, dtype=float).copy()
    n, m = x.shape
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (n, m))
    up = np.broadcast_to(np.asarray(upper, dtype=float), (n, m))
    np.clip(x, lo, up, out=x)

    residuals = np.zeros(n)
    iterations = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    step = np.full(n, config.initial_step)
    active = np.arange(n)

    for it in range(config.max_iterations + 1):
        xa = x[active]
        la = lo[active]
        ua = up[active]
        fx = operator_batch(xa, active)
        ref = np.clip(xa - config.gamma * fx, la, ua)
        res = _norm_rows(xa - ref)
        done = res <= config.tolerance
        if done.any():
            idx = active[done]
            residuals[idx] = res[done]
            iterations[idx] = it
            converged[idx] = True
            keep = ~done
            active = active[keep]
            if active.size == 0:
                return {"solutions": x, "residuals": residuals,
                        "iterations": iterations, "converged": converged}
            xa, la, ua, fx, res = xa[keep], la[keep], ua[keep], fx[keep], res[keep]
        if it == config.max_iterations:
            residuals[active] = res
            iterations[active] = it
            break
        st = step[active]
        while True:
            y = np.clip(xa - st[:, None] * fx, la, ua)
            fy = operator_batch(y, active)
            df = _norm_rows(fx - fy)
            dx = _norm_rows(xa - y)
            bad = (st * df > _BACKTRACK_RATIO * dx) & (dx > 0.0)
            if not bad.any():
                break
            st = np.where(bad, st * config.step_shrink, st)
        step[active] = st
        x[active] = np.clip(xa - st[:, None] * fy, la, ua)

    return {"solutions": x, "residuals": residuals,
            "iterations": iterations, "converged": converged}


@dataclass
class MonotoneReport:
    min_ratio: float
    passed: bool
    num_pairs: int
    skipped_pairs: int = 0


def check_monotone(operator, set, num_pairs, seed):
    """Empirical strict-monotonicity check on a box.

    Samples num_pairs point pairs (q, q') uniformly in the box and
    computes <F(q) - F(q'), q - q'> / ||q - q'||^2. Returns the minimum
    ratio and a pass flag for strict positivity. Pairs with q = q'
    (possible on degenerate boxes) are skipped and counted.
    """
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    span = set.upper - set.lower
    min_ratio = np.inf
    skipped = 0
    for _ in range(num_pairs):
        q = set.lower + span * rng.random(set.dim)
        qp = set.lower + span * rng.random(set.dim)
        d = q - qp
        nd2 = float(d @ d)
        if nd2 == 0.0:
            skipped += 1
            continue
        ratio = float((np.asarray(operator(q)) - np.asarray(operator(qp))) @ d) / nd2
        if ratio < min_ratio:
            min_ratio = ratio
    if skipped == num_pairs:
        return MonotoneReport(min_ratio=np.nan, passed=False,
                              num_pairs=num_pairs, skipped_pairs=skipped)
    return MonotoneReport(min_ratio=min_ratio, passed=min_ratio > 0.0,
                          num_pairs=num_pairs, skipped_pairs=skipped)
