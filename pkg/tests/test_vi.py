import numpy as np
import pytest

from nashgrid import (BoxSet, NonConvergenceError, SolverConfig, VIProblem,
                      check_monotone, natural_residual, project, solve_vi,
                      solve_box_vi_batch)

from _oracles import active_set_box_vi


def affine_problem(M, d, lo, hi, shift=None):
    M = np.asarray(M, dtype=float)
    d = np.asarray(d, dtype=float)
    m = d.size
    return VIProblem(operator=lambda x: x @ M.T + d,
                     constant_shift=np.zeros(m) if shift is None else shift,
                     set=BoxSet(np.asarray(lo, float), np.asarray(hi, float)))


def random_spd(rng, m, strength=0.5):
    A = rng.standard_normal((m, m))
    return A @ A.T + strength * np.eye(m)


def test_box_set_validation():
    with pytest.raises(ValueError):
        BoxSet(np.array([0.0, 2.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        BoxSet(np.array([0.0, np.nan]), np.array([1.0, 1.0]))
    box = BoxSet(np.zeros(3), np.ones(3))
    assert box.dim == 3


def test_project_clips_componentwise():
    box = BoxSet(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
    out = project(np.array([2.0, -3.0]), box)
    assert out.tolist() == [1.0, -1.0]
    inside = np.array([0.5, 0.0])
    assert project(inside, box).tolist() == inside.tolist()


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(step_shrink=1.0)
    with pytest.raises(ValueError):
        SolverConfig(gamma=-1.0)


def test_scalar_quadratic_solution_clipped():
    # F(x) = x - t on [0, 1]: solution is t clipped to the box
    for t, expect in ((0.4, 0.4), (-2.0, 0.0), (5.0, 1.0)):
        prob = affine_problem([[1.0]], [-t], [0.0], [1.0])
        x, report = solve_vi(prob, SolverConfig())
        assert report.converged
        assert abs(x[0] - expect) < 1e-8


def test_constant_shift_moves_solution():
    # F(x) = x, shift = t: the shifted problem solves x = t
    prob = affine_problem([[1.0]], [0.0], [-10.0], [10.0],
                          shift=np.array([3.25]))
    x, _ = solve_vi(prob)
    assert abs(x[0] - 3.25) < 1e-8


def test_natural_residual_zero_at_solution_and_positive_off():
    prob = affine_problem([[2.0, 0.3], [0.3, 1.0]], [-1.0, 0.5],
                          [0.0, 0.0], [1.0, 1.0])
    x, _ = solve_vi(prob)
    assert natural_residual(prob, x, 1.0) <= 1e-8
    assert natural_residual(prob, x + 0.1, 1.0) > 1e-3
    with pytest.raises(ValueError):
        natural_residual(prob, x, 0.0)


def test_affine_solutions_match_active_set_enumeration():
    rng = np.random.default_rng(7)
    cfg = SolverConfig(tolerance=1e-10)
    for _ in range(25):
        m = int(rng.integers(1, 5))
        M = random_spd(rng, m)
        d = rng.standard_normal(m) * 3.0
        lo = rng.uniform(-2.0, 0.0, m)
        hi = lo + rng.uniform(0.5, 3.0, m)
        prob = affine_problem(M, d, lo, hi)
        x, report = solve_vi(prob, cfg)
        ref = active_set_box_vi(M, d, lo, hi)
        assert report.converged
        assert np.abs(x - ref).max() < 1e-8


def test_backtracking_handles_stiff_operator():
    # badly scaled rows: the initial step must shrink, not diverge
    M = np.diag([1.0, 50.0])
    prob = affine_problem(M, [-1.0, -25.0], [0.0, 0.0], [10.0, 10.0])
    x, report = solve_vi(prob, SolverConfig(initial_step=1.0,
                                            max_iterations=5000))
    assert report.converged
    assert np.abs(x - np.array([1.0, 0.5])).max() < 1e-7


def test_nonconvergence_raises_with_report():
    prob = affine_problem([[1.0]], [-0.9], [0.0], [1.0])
    with pytest.raises(NonConvergenceError) as exc:
        solve_vi(prob, SolverConfig(max_iterations=1, initial_step=1e-6))
    assert exc.value.report.converged is False
    assert exc.value.report.iterations == 1
    assert exc.value.point.shape == (1,)


def test_warm_start_is_used():
    prob = affine_problem([[1.0, 0.0], [0.0, 1.0]], [-0.3, -0.7],
                          [0.0, 0.0], [1.0, 1.0])
    x_cold, rep_cold = solve_vi(prob)
    x_warm, rep_warm = solve_vi(prob, warm_start=x_cold)
    assert rep_warm.iterations <= 1
    assert np.abs(x_warm - x_cold).max() < 1e-10


def test_nan_from_operator_raises():
    prob = VIProblem(operator=lambda x: x * np.nan,
                     constant_shift=np.zeros(1),
                     set=BoxSet(np.zeros(1), np.ones(1)))
    with pytest.raises(FloatingPointError):
        solve_vi(prob)


def test_batch_matches_sequential_scalar_solves():
    rng = np.random.default_rng(11)
    m = 3
    M = random_spd(rng, m)
    shifts = rng.standard_normal((40, m))
    lo = np.zeros(m)
    hi = np.full(m, 2.0)
    cfg = SolverConfig()

    def op_batch(x, rows):
        return x @ M.T + shifts[rows]

    out = solve_box_vi_batch(op_batch, np.tile(lo, (40, 1)),
                             np.tile(hi, (40, 1)), cfg,
                             seeds=np.full((40, m), 1.0))
    assert out["converged"].all()
    for i in range(40):
        prob = affine_problem(M, shifts[i], lo, hi)
        x, _ = solve_vi(prob, cfg)
        assert np.abs(out["solutions"][i] - x).max() < 1e-7
        assert natural_residual(prob, out["solutions"][i], cfg.gamma) <= cfg.tolerance


def test_batch_rows_converge_independently():
    # row 0 starts at its solution; row 1 cannot finish in 3 iterations
    def op(x, rows):
        easy = rows[:, None] == 0
        return np.where(easy, x - 0.9, 4000.0 * x - 1.0)

    cfg = SolverConfig(max_iterations=3, initial_step=1.0)
    out = solve_box_vi_batch(op, np.zeros((2, 1)), np.ones((2, 1)), cfg,
                             seeds=np.full((2, 1), 0.9))
    assert bool(out["converged"][0]) is True
    assert bool(out["converged"][1]) is False
    assert out["iterations"][0] == 0
    assert out["residuals"][0] <= cfg.tolerance


def test_check_monotone_classifies_operators():
    box = BoxSet(np.zeros(2), np.ones(2))
    good = check_monotone(lambda x: x, box, num_pairs=200, seed=1)
    assert good.passed
    assert good.min_ratio > 0.9
    # a rotation is monotone but not strictly: ratio identically zero
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rotation = check_monotone(lambda x: x @ skew.T, box, num_pairs=200, seed=1)
    assert not rotation.passed
    assert abs(rotation.min_ratio) < 1e-12
    bad = check_monotone(lambda x: -x, box, num_pairs=200, seed=1)
    assert not bad.passed
    assert bad.min_ratio < -0.9
