import numpy as np
import pytest

from fockspec import extract_quadratic_data
from fockspec import efimov
from fockspec.efimov import EfimovParams


@pytest.fixture(scope="module")
def half():
    return EfimovParams.from_s(0.5)


def test_params_validation():
    with pytest.raises(ValueError):
        EfimovParams.from_s(1.0)
    with pytest.raises(ValueError, match="does not match"):
        EfimovParams(0.5, 1.0)
    assert EfimovParams.from_s(0.5).l0 == pytest.approx(2 / np.sqrt(3))


def test_params_from_cubic_model(m_star):
    params = EfimovParams.from_quadratic(extract_quadratic_data(m_star))
    assert params.s == pytest.approx(0.5, rel=1e-5)


def test_zero_harmonic_limits(half):
    assert efimov.zero_harmonic(half, 0.0) == pytest.approx(half.l0 * np.arcsin(0.5) / 0.5)
    assert efimov.zero_harmonic(half, 1e-13) == pytest.approx(efimov.zero_harmonic(half, 0.0))
    assert efimov.zero_harmonic(half, 400.0) == pytest.approx(0.0, abs=1e-100)
    flat = EfimovParams.from_s(0.0)
    assert efimov.zero_harmonic(flat, 0.7) == pytest.approx(1 / np.cosh(0.35 * np.pi))


@pytest.mark.parametrize("lam", (0.0, 0.3, 1.0, 2.5))
def test_zero_harmonic_matches_legendre_quadrature(half, lam):
    numeric = efimov.legendre_eigenvalues(half, lam, l_max=0)[0]
    assert numeric == pytest.approx(efimov.zero_harmonic(half, lam), abs=1e-8)


def test_harmonic_symbol_matches_adaptive_quadrature(half):
    lam = np.array([0.2, 1.1])
    fixed = efimov.harmonic_symbol(half, 2, lam)
    adaptive = [efimov.legendre_eigenvalues(half, x, l_max=2)[2] for x in lam]
    np.testing.assert_allclose(fixed, adaptive, atol=1e-10)


def test_root_at_unit_level(half):
    y_star = efimov.zero_harmonic_root(half)
    assert 0.41 < y_star < 0.418
    assert efimov.zero_harmonic(half, y_star) == pytest.approx(1.0, abs=1e-10)


def test_classic_three_boson_exponent(half):
    assert efimov.zero_harmonic_root(half, mu=0.5) == pytest.approx(1.00624, abs=1e-4)


def test_root_needs_level_below_origin_value(half):
    with pytest.raises(ValueError):
        efimov.zero_harmonic_root(half, mu=5.0)


def test_convention_check_prefers_arccos(half):
    report = efimov.fourier_check(half, lambdas=(0.5, 1.0, 2.0), ell=1)
    assert report.winner == "arccos"
    assert report.loser == "pi_minus_arccos"
    assert report.deviation["arccos"] < 1e-6
    assert report.deviation["pi_minus_arccos"] > 1e3 * report.deviation["arccos"]


def test_unknown_convention(half):
    with pytest.raises(ValueError):
        efimov.s_hat_kernel(half, 0.2, 1.0, convention="sin")


def test_asymptotic_constant(half):
    estimate = efimov.u_of_mu(half)
    y_star = efimov.zero_harmonic_root(half)
    assert estimate.y_star == pytest.approx(y_star)
    assert estimate.U0_lower == pytest.approx(2 * y_star / (4 * np.pi))
    assert estimate.U0 >= estimate.U0_lower
    assert estimate.U0 == pytest.approx(0.0658, abs=5e-4)
    refined = efimov.u_of_mu(half, l_max=12)
    assert abs(refined.U0 - estimate.U0) <= 1e-3
    assert list(estimate.to_frame().columns) == ["ell", "measure"]


def test_no_accumulation_without_mass_coupling():
    estimate = efimov.u_of_mu(EfimovParams.from_s(0.0))
    assert estimate.U0 == 0.0


def test_truncated_operator_is_symmetric(half):
    matrix = efimov.assemble_S_r(half, 5.0, 0)
    assert matrix.shape == (40, 40)
    np.testing.assert_array_equal(matrix, matrix.T)
    with pytest.raises(ValueError):
        efimov.assemble_S_r(half, -1.0, 0)


def test_kernel_harmonics_of_degree_zero(half):
    y = np.array([0.0, 0.5, 3.0])
    # 2 pi int dt / (cosh y + s t) in closed form
    expected = half.l0 / (2 * np.pi * half.s) * np.log((np.cosh(y) + half.s) / (np.cosh(y) - half.s))
    np.testing.assert_allclose(efimov.s_ell_kernel(half, 0, y), expected, rtol=1e-10)


def test_counting_on_long_intervals(half):
    report = efimov.sobolev_limit_check(half, r_list=(25, 50, 100))
    assert list(report.frame.columns) == ["r", "count", "ratio", "gap"]
    counts = report.frame["count"].to_numpy()
    assert np.all(np.diff(counts) >= 0)
    assert abs(counts[-1] - 2 * 100 * report.U) <= 1.5


def test_log_fit_recovers_slope():
    points = [(-(10.0 ** -k), 0.3 * k * np.log(10) + 2.0) for k in range(2, 9)]
    fit = efimov.fit_log_asymptotics(points)
    assert fit.slope == pytest.approx(0.3)
    assert fit.intercept == pytest.approx(2.0)
    assert fit.residual < 1e-10


def test_log_fit_input_checks():
    with pytest.raises(ValueError):
        efimov.fit_log_asymptotics([(-0.1, 1), (-0.01, 2), (-0.001, 3)])
    with pytest.raises(ValueError):
        efimov.fit_log_asymptotics([(-0.1, 1), (-0.01, 2), (-0.001, 3), (0.0, 4)])


def test_kernel_value_and_evenness(half):
    assert efimov.s_hat_kernel(half, 0.0, 1.0) == pytest.approx(0.0366, abs=1e-4)
    t = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(efimov.s_hat_kernel(half, t, 1.3), efimov.s_hat_kernel(half, t, -1.3))
    np.testing.assert_allclose(efimov.harmonic_symbol(half, 3, [0.4]), efimov.harmonic_symbol(half, 3, [-0.4]))


@pytest.mark.parametrize("s", (0.1, 0.3, 0.5, 0.8, 0.95))
def test_symbol_at_origin_exceeds_one(s):
    params = EfimovParams.from_s(s)
    assert params.l0 > 1
    assert efimov.zero_harmonic(params, 0.0) > 1
    if s <= 0.5:
        assert efimov.u_of_mu(params, l_max=4).U0 > 0
