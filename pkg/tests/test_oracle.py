import csv

import numpy as np
import pytest

from nashgrid import RandomFactor, SolverConfig, monte_carlo_mean
from nashgrid.oracle import CHUNK_SIZE, write_oracle_csv

from conftest import five_firm_instance, randomized_instance
import _oracles as o


def test_constant_factors_give_the_deterministic_solution_exactly():
    # 64 identical samples, power-of-two count: the sample mean is the
    # per-sample solution bit for bit and the spread is exactly zero
    inst = five_firm_instance()
    rep = monte_carlo_mean(inst, 64, seed=0)
    assert rep.n_samples == 64
    assert rep.failed_solves == 0
    np.testing.assert_allclose(rep.mean, o.FROZEN_EQUILIBRIUM_R0_S5000,
                               atol=1e-7)
    assert rep.standard_error.tolist() == [0.0] * 5
    rep2 = monte_carlo_mean(inst, 64, seed=123)
    assert rep2.mean.tolist() == rep.mean.tolist()


def test_same_seed_reproduces_bitwise():
    inst = randomized_instance()
    a = monte_carlo_mean(inst, 500, seed=42)
    b = monte_carlo_mean(inst, 500, seed=42)
    assert a.mean.tolist() == b.mean.tolist()
    assert a.standard_error.tolist() == b.standard_error.tolist()


def test_worker_counts_do_not_change_the_estimate():
    inst = randomized_instance()
    one = monte_carlo_mean(inst, 3 * CHUNK_SIZE, seed=7, parallelism=1)
    two = monte_carlo_mean(inst, 3 * CHUNK_SIZE, seed=7, parallelism=2)
    three = monte_carlo_mean(inst, 3 * CHUNK_SIZE, seed=7, parallelism=3)
    assert one.mean.tolist() == two.mean.tolist() == three.mean.tolist()
    assert one.standard_error.tolist() == two.standard_error.tolist()


def test_different_seeds_differ():
    inst = randomized_instance()
    a = monte_carlo_mean(inst, 500, seed=0)
    b = monte_carlo_mean(inst, 500, seed=1)
    assert a.mean.tolist() != b.mean.tolist()


def test_estimate_approaches_truth_with_more_samples():
    # the sampled r has mean 0 and the sampled s mean 5000, so the MC
    # mean should approach the deterministic equilibrium at those values
    inst = randomized_instance()
    rep = monte_carlo_mean(inst, 4096, seed=3)
    ref = np.array(o.FROZEN_EQUILIBRIUM_R0_S5000)
    assert np.abs(rep.mean - ref).max() < 5.0 * rep.standard_error.max() + 0.05
    assert rep.standard_error.max() < 0.02


def test_single_sample_has_zero_standard_error():
    inst = randomized_instance()
    rep = monte_carlo_mean(inst, 1, seed=11)
    assert rep.n_samples == 1
    assert rep.standard_error.tolist() == [0.0] * 5


def test_failed_solves_are_counted():
    inst = randomized_instance()
    starved = SolverConfig(max_iterations=1, initial_step=1e-9)
    rep = monte_carlo_mean(inst, 50, seed=5, solver_config=starved)
    assert rep.failed_solves == 50


def test_validation():
    inst = randomized_instance()
    with pytest.raises(ValueError):
        monte_carlo_mean(inst, 0, seed=0)
    with pytest.raises(ValueError):
        monte_carlo_mean(inst, 10, seed=-1)


def test_oracle_csv_round_trip(tmp_path):
    inst = randomized_instance()
    rep = monte_carlo_mean(inst, 200, seed=9)
    path = write_oracle_csv(rep, tmp_path / "oracle.csv")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["component"] for r in rows] == [f"u_{i}" for i in range(1, 6)]
    for i, row in enumerate(rows):
        assert float(row["mc_mean"]) == rep.mean[i]
        assert float(row["std_error"]) == rep.standard_error[i]
        assert int(row["n_samples"]) == 200
        assert int(row["seed"]) == 9
