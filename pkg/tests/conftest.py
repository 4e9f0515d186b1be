import numpy as np
import pytest

from nashgrid import CournotInstance, FirmParams, RandomFactor

TABLE_COSTS = (10.0, 8.0, 6.0, 4.0, 2.0)
TABLE_EXPONENTS = (1.2, 1.1, 1.0, 0.9, 0.8)


def five_firm_instance(r_factor=None, s_factor=None, q_bar=100.0, **kwargs):
    firms = tuple(
        FirmParams(c=c, k=5.0, b=b, q_bar=RandomFactor.constant(q_bar))
        for c, b in zip(TABLE_COSTS, TABLE_EXPONENTS))
    return CournotInstance(
        firms=firms, a=1 / 1.1, e=1e-4,
        r_factor=r_factor or RandomFactor.constant(0.0),
        s_factor=s_factor or RandomFactor.constant(5000.0),
        **kwargs)


def randomized_instance():
    """The five-firm market with random demand shift and price scale."""
    return five_firm_instance(
        r_factor=RandomFactor.truncated_normal(0.0, 0.25, -0.5, 0.5),
        s_factor=RandomFactor.truncated_normal(5000.0, 10.0, 4950.0, 5050.0))


@pytest.fixture
def deterministic_instance():
    return five_firm_instance()


@pytest.fixture
def random_instance():
    return randomized_instance()


def assert_allclose(actual, desired, atol=0.0, rtol=1e-12):
    np.testing.assert_allclose(np.asarray(actual), np.asarray(desired),
                               atol=atol, rtol=rtol)
