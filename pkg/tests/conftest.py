import numpy as np
import pytest

from mlsurrogate.projectile import ProjectileModel, ResolutionLadder


@pytest.fixture(scope="session")
def ladder():
    return ResolutionLadder.from_coarsest(0.08, 6)


@pytest.fixture(scope="session")
def model(ladder):
    return ProjectileModel(ladder=ladder)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
