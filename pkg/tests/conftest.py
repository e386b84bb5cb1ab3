import numpy as np
import pytest

from nmtraj.presets import example_chain, example_kernel, example_system


@pytest.fixture(scope="session")
def qubit():
    return example_system()


@pytest.fixture(scope="session")
def chain_cfg():
    return example_chain()


@pytest.fixture(scope="session")
def kernel_half():
    return example_kernel(0.5)


@pytest.fixture(scope="session")
def kernel_zero():
    return example_kernel(0.0)


def random_pd_form(rng: np.random.Generator, dim: int) -> np.ndarray:
    m = rng.standard_normal((dim, dim))
    return m @ m.T + dim * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
