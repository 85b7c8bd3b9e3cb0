import numpy as np
import pytest

from placement.instances import GenSpec, generate_dataset
from placement.model import Instance


def random_instance(rng: np.random.Generator, n: int, m: int, bound: float = 5.0) -> Instance:
    U = rng.standard_normal((n, m))
    psi = rng.standard_normal(n)
    return Instance(psi=psi, U=U, f_lower=np.full(m, -bound), f_upper=np.full(m, bound))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def make_instance():
    return random_instance


@pytest.fixture
def cancel_instance() -> Instance:
    """psi=(1,1) and a single column (1,1): force -1 cancels exactly."""
    return Instance(psi=[1.0, 1.0], U=[[1.0], [1.0]], f_lower=[-10.0], f_upper=[10.0])


@pytest.fixture(scope="session")
def small_family() -> list[Instance]:
    return generate_dataset(GenSpec(n=12, m=5, smoothness=3), 6, seed=11)


@pytest.fixture(scope="session")
def desk_family() -> list[Instance]:
    return generate_dataset(GenSpec(), 4, seed=3)
