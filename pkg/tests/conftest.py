from pathlib import Path

import pytest

from fockspec import FormFactor, GridLadder, ModelSpec, TorusGrid
from fockspec.friedrichs import tune_resonance

models_dir = Path(__file__).resolve().parents[1] / "models"


@pytest.fixture
def m_star():
    return ModelSpec.cubic()


@pytest.fixture
def m_star_eigen():
    return ModelSpec.cubic(v=FormFactor("one_minus_cos", (1.0, 0)))


@pytest.fixture(scope="session")
def ladder():
    return GridLadder()


@pytest.fixture(scope="session")
def c_star(ladder):
    """resonance shift of the nearest-neighbour model, close to 31.34"""
    return tune_resonance(ModelSpec.cubic(), ladder)


@pytest.fixture
def grid4():
    return TorusGrid(4, offset=True, verbose=False)


@pytest.fixture
def grid6():
    return TorusGrid(6, offset=True, verbose=False)


@pytest.fixture(scope="session")
def graded8():
    """5888 nodes, fine enough near q = 0 for the threshold laws"""
    return TorusGrid(8, grading_levels=12, verbose=False)
