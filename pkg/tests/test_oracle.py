import numpy as np
import pytest

from fockspec import FormFactor, ModelSpec, TorusGrid
from fockspec import bs, oracle

z_grid = (-2.0, -1.0, -0.5, -0.1)


def test_fock_dimension():
    assert oracle.fock_dimension(4) == 15
    assert oracle.fock_dimension(64) == 1 + 64 + 2080


def test_dimension_guard(m_star, grid4):
    with pytest.raises(ValueError, match="exceeds the guard"):
        oracle.assemble_H(m_star, grid4, max_dim=100)


def test_decoupled_matrix_is_diagonal():
    model = ModelSpec.cubic(c=1.0, u0=-0.75, v=FormFactor("constant", (0.0,)))
    grid = TorusGrid(2)
    matrix = oracle.assemble_H(model, grid)
    entries = matrix.entries
    assert np.count_nonzero(entries - np.diag(np.diag(entries))) == 0
    assert entries[0, 0] == -0.75
    np.testing.assert_allclose(np.diag(entries)[1:9], model.u(grid.nodes))
    pairs = bs.pair_matrix(model, grid)
    np.testing.assert_allclose(np.diag(entries)[matrix.two_sector], pairs[matrix.pair_i, matrix.pair_j])
    assert oracle.low_spectrum(model, grid, 1) == [pytest.approx(-0.75)]


def test_coupled_matrix_is_symmetric(m_star):
    matrix = oracle.assemble_H(m_star.replace(c=2.0, u0=0.3), TorusGrid(2))
    assert matrix.dim == 45
    assert np.array_equal(matrix.entries, matrix.entries.T)
    # the 1-sector block and the 0-2 block vanish
    assert not np.any(matrix.entries[1:9, 1:9] - np.diag(np.diag(matrix.entries)[1:9]))
    assert not np.any(matrix.entries[0, matrix.two_sector])


def test_count_matches_dense_spectrum(m_star):
    model = m_star.replace(c=2.0, u0=0.3)
    grid = TorusGrid(2)
    values = np.linalg.eigvalsh(oracle.assemble_H(model, grid).entries)
    gaps = np.flatnonzero(np.diff(values) > 1e-6)[:4]
    assert gaps.size == 4
    for i in gaps:
        z = 0.5 * (values[i] + values[i + 1])
        assert oracle.count_below(model, grid, z).count == i + 1
    np.testing.assert_allclose(oracle.low_spectrum(model, grid, 3), values[:3], atol=1e-10)


def _control():
    return ModelSpec.cubic(c=1.0, u0=-0.75, v=FormFactor("constant", (0.0,)))


@pytest.mark.parametrize("z", z_grid)
def test_birman_schwinger_matches_oracle_decoupled(grid4, z):
    model = _control()
    assert bs.count_below(model, grid4, z).count == oracle.count_below(model, grid4, z).count


@pytest.mark.parametrize("z", z_grid)
def test_birman_schwinger_matches_oracle_resonance(m_star, grid4, c_star, z):
    model = m_star.replace(c=c_star)
    via_bs = bs.count_below(model, grid4, z)
    via_h = oracle.count_below(model, grid4, z)
    assert via_bs.method == "bs"
    assert via_h.method == "oracle"
    assert via_bs.count == via_h.count


@pytest.mark.parametrize("distance", (2.0, 1.0, 0.5, 0.1))
def test_birman_schwinger_matches_oracle_deep_shift(m_star, grid4, distance):
    model = m_star.replace(c=-5.0)
    z = bs.safe_region_top(model, grid4) - distance
    assert bs.count_below(model, grid4, z).count == oracle.count_below(model, grid4, z).count
