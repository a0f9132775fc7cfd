import numpy as np
import pytest

from fockspec.torus import (
    TORUS_VOLUME,
    GridLadder,
    TorusGrid,
    build_grid,
    integrate,
    integrate_singular,
    richardson,
)

watson = 0.5054620197


def _inverse_eps(q):
    return 1.0 / (3.0 - np.sum(np.cos(q), axis=-1))


@pytest.mark.parametrize("n, offset, grading", [(4, True, 0), (5, False, 0), (8, True, 3)])
def test_weights_cover_the_torus(n, offset, grading):
    grid = TorusGrid(n, offset=offset, grading_levels=grading, verbose=False)
    assert grid.weights.sum() == pytest.approx(TORUS_VOLUME, rel=1e-12)
    assert integrate(grid, lambda q: np.ones(q.shape[0])) == pytest.approx(TORUS_VOLUME, rel=1e-12)
    assert np.all(np.abs(grid.nodes) <= np.pi * (1 + 1e-12))


def test_offset_grid_avoids_origin():
    offset = TorusGrid(6, offset=True)
    plain = TorusGrid(6, offset=False)
    assert np.min(np.linalg.norm(offset.nodes, axis=1)) > 0
    assert np.min(np.linalg.norm(plain.nodes, axis=1)) < 1e-12
    assert offset.singular_safe
    assert not plain.singular_safe


def test_grading_refines_towards_origin():
    grid = build_grid(8, offset=True, grading_levels=3)
    assert grid.min_spacing == pytest.approx(np.pi / 4 / 8)
    assert grid.levels.max() == 3
    finest = grid.nodes[grid.levels == 3]
    assert np.max(np.abs(finest)) < np.pi / 8
    assert grid.size == 512 + 3 * 448


def test_grid_arrays_are_read_only():
    grid = TorusGrid(4)
    with pytest.raises(ValueError):
        grid.nodes[0, 0] = 1.0


def test_integrate_singular_refuses_unsafe_grid():
    with pytest.raises(ValueError, match="singularity"):
        integrate_singular(TorusGrid(4, offset=False), _inverse_eps)


def test_non_finite_integrand_names_the_node():
    grid = TorusGrid(4, offset=False)
    with np.errstate(divide="ignore"):
        with pytest.raises(ValueError, match="non-finite"):
            grid.integrate(_inverse_eps)


def test_rejects_bad_sizes():
    with pytest.raises(TypeError):
        TorusGrid(4.0)
    with pytest.raises(ValueError):
        TorusGrid(1)
    with pytest.raises(ValueError):
        TorusGrid(4, grading_levels=-1)


def test_richardson_removes_listed_powers():
    steps = [0.3, 0.2, 0.15]
    values = [1.25 + 0.7 * h - 2.0 * h**3 for h in steps]
    assert richardson(values, steps, (1, 3)) == pytest.approx(1.25, abs=1e-12)


def test_watson_integral_on_ladder(ladder):
    value = integrate_singular(ladder, _inverse_eps) / TORUS_VOLUME
    assert value == pytest.approx(watson, abs=5e-4)


def test_ladder_needs_matching_exponents():
    with pytest.raises(ValueError):
        GridLadder(n_list=(8, 16), exponents=(1, 3))
    assert GridLadder().descriptor()["n_list"] == [16, 24, 32]
