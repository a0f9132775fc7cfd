import numpy as np
import pytest

from fockspec import FormFactor, GridLadder, ModelSpec, SingularShiftError, TorusGrid
from fockspec import bs
from fockspec.friedrichs import tune_resonance


def test_inertia_counts_negative_pivots():
    count, gap = bs.inertia(np.diag([-1.0, 2.0, -3.0]))
    assert count == 2
    assert gap == pytest.approx(1.0)


def test_inertia_of_indefinite_pair_block():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(30, 30))
    a = a + a.T
    count, _ = bs.inertia(a)
    assert count == int(np.sum(np.linalg.eigvalsh(a) < 0))


def test_inertia_refuses_singular_shift():
    with pytest.raises(SingularShiftError, match="perturb z"):
        bs.inertia(np.diag([1.0, 0.0, -1.0]))


def test_n_above_level():
    matrix = np.diag([0.5, 1.5, 2.5])
    assert bs.n_above(matrix, 1.0)[0] == 2
    assert bs.n_above(matrix, 3.0)[0] == 0


def test_weyl_inequality_holds():
    report = bs.weyl_check(200, 40, 7)
    assert report.passed
    assert report.violations == []


def test_T_is_symmetric(m_star, grid4, c_star):
    matrix = bs.assemble_T(m_star.replace(c=c_star), grid4, -0.5)
    assert matrix.dim == grid4.size + 1
    assert matrix.symmetry_error() == 0.0
    assert matrix.entries[0, 0] == pytest.approx(0.5)


def test_T_needs_torus_grid(m_star):
    with pytest.raises(TypeError):
        bs.assemble_T(m_star, GridLadder(), -1.0)


def test_T_needs_positive_delta(m_star, grid4):
    # c = 0 leaves Delta negative near the threshold
    with pytest.raises(ValueError, match="safe region"):
        bs.assemble_T(m_star, grid4, -0.01)


def test_z_above_pair_energies_is_rejected(m_star, grid4):
    floor = float(np.min(bs.pair_matrix(m_star, grid4)))
    with pytest.raises(ValueError, match="safe region"):
        bs.grid_delta(m_star, grid4, floor + 0.1)


def test_safe_region_top(m_star, grid4):
    model = m_star.replace(c=-5.0)
    top = bs.safe_region_top(model, grid4)
    assert np.all(bs.grid_delta(model, grid4, top - 1e-6) > 0)
    assert np.min(bs.grid_delta(model, grid4, top + 1e-6)) < 0


def test_decoupled_model_counts_zero_sector(grid4):
    model = ModelSpec.cubic(c=1.0, u0=-0.75, v=FormFactor("constant", (0.0,)))
    counts = [bs.count_below(model, grid4, z).count for z in (-2.0, -1.0, -0.5, -0.1)]
    assert counts == [0, 0, 1, 1]


def test_count_is_monotone_along_sweep(m_star, grid4, c_star):
    model = m_star.replace(c=c_star)
    frame = bs.count_sweep(model, grid4, np.linspace(-2.0, -0.05, 10), verbose=False)
    assert list(frame.columns[:3]) == ["z", "count", "residual_gap"]
    assert np.all(np.diff(frame["count"].to_numpy()) >= 0)
    assert frame["grid_n_per_axis"].iloc[0] == 4


def test_weaker_coupling_counts_fewer(m_star, grid4, c_star):
    model = m_star.replace(c=c_star)
    full = bs.count_below(model, grid4, -0.1).count
    for factor in (0.8, 0.5, 0.2):
        assert bs.count_below(model.with_coupling(factor), grid4, -0.1).count <= full


def test_hs_norm_above_threshold_is_rejected(m_star, grid4):
    with pytest.raises(ValueError, match="threshold"):
        bs.hs_norm_T11(m_star, grid4, 0.5)


def test_dense_matrices_refuse_large_grids(m_star, grid4):
    large = TorusGrid(16, grading_levels=12, verbose=False)
    assert large.size == 47104
    with pytest.raises(ValueError, match="exceeds the guard"):
        bs.assemble_T(m_star, large, -1.0)
    with pytest.raises(ValueError, match="exceeds the guard"):
        bs.pair_matrix(m_star, grid4, max_nodes=grid4.size - 1)
    with pytest.raises(ValueError, match="exceeds the guard"):
        bs.count_sweep(m_star, grid4, [-1.0], verbose=False, max_nodes=10)


def _threshold_counts(model, grid):
    tuned = model.replace(c=tune_resonance(model, grid) + 10 * grid.min_spacing)
    zs = tuned.m - 10.0 ** (-np.arange(2.0, 9.0))
    return bs.count_sweep(tuned, grid, zs, verbose=False)["count"].to_numpy()


def test_count_grows_towards_resonant_threshold(m_star, graded8):
    counts = _threshold_counts(m_star, graded8)
    assert np.all(np.diff(counts) >= 0)
    assert counts[-1] > counts[0]


def test_count_saturates_at_eigenvalue_threshold(m_star_eigen, graded8):
    counts = _threshold_counts(m_star_eigen, graded8)
    assert np.all(counts == counts[0])


def test_hs_norm_bounded_under_grading_without_resonance(m_star_eigen):
    frame = bs.hs_norm_profile(m_star_eigen, n=6, gradings=(0, 2, 4, 6), margin=1e-3)
    assert list(frame.columns) == ["n", "grading", "nodes", "c", "z", "hs_norm", "drift"]
    assert np.all(np.diff(frame["nodes"]) > 0)
    assert np.all(frame["drift"].iloc[1:] <= 0.1)


def test_hs_norm_grows_under_grading_at_resonance(m_star):
    frame = bs.hs_norm_profile(m_star, n=6, gradings=(0, 2, 4, 6), margin=1e-3)
    assert np.all(np.diff(frame["hs_norm"]) > 0)
    assert frame["hs_norm"].iloc[-1] > 1.15 * frame["hs_norm"].iloc[0]
