import numpy as np
import pytest
import yaml

from fockspec import FormFactor, ModelSpec, TorusGrid, extract_quadratic_data
from fockspec.model import check_assumptions, max_w, quadratic_remainder_constant

from .conftest import models_dir


def test_cubic_dispersion(m_star):
    assert m_star.m == 0.0
    assert float(m_star.epsilon(np.zeros(3))) == 0.0
    assert float(m_star.epsilon(np.full(3, np.pi))) == pytest.approx(6.0)
    p = np.array([0.3, -1.2, 2.0])
    assert float(m_star.epsilon(p)) == pytest.approx(3 - np.sum(np.cos(p)))
    np.testing.assert_allclose(m_star.grad_epsilon(p), np.sin(p), atol=1e-14)
    np.testing.assert_allclose(m_star.hessian_epsilon, np.eye(3), atol=1e-15)


def test_model_file_matches_constructor(m_star):
    assert ModelSpec.from_file(models_dir / "m_star.yaml") == m_star
    eigen = ModelSpec.from_file(models_dir / "m_star_eigen.yaml")
    assert eigen.v.at_zero() == 0.0
    assert eigen.hash != m_star.hash


def test_config_survives_save(tmp_path, m_star_eigen):
    path = tmp_path / "model.yaml"
    m_star_eigen.replace(c=1.5, u0=-0.25).save(path)
    loaded = ModelSpec.from_file(path)
    assert loaded.c == 1.5
    assert loaded.u0 == -0.25
    assert loaded.v == m_star_eigen.v


def test_unknown_config_key_is_rejected(m_star):
    config = m_star.to_config()
    config["eps.zeros"] = 0.0
    with pytest.raises(ValueError, match="eps.zeros"):
        ModelSpec.from_config(config)
    with pytest.raises(TypeError):
        ModelSpec.from_config([1, 2, 3])


def test_hash_follows_canonical_config(m_star):
    assert m_star.hash == ModelSpec.from_config(yaml.safe_load(yaml.safe_dump(m_star.to_config()))).hash
    assert m_star.hash != m_star.replace(c=1.0).hash


@pytest.mark.parametrize(
    "coeffs, match",
    [
        ({(1, 0, 0): 0.5, (-1, 0, 0): 0.5}, "positive"),
        ({(1, 0, 0): -0.5, (-1, 0, 0): -0.4}, "symmetric"),
        ({(1, 0, 0): -0.5, (-1, 0, 0): -0.5}, "degenerate"),
        ({(0, 0, 0): -1.0}, "eps.zero"),
    ],
)
def test_inadmissible_dispersions(coeffs, match):
    with pytest.raises(ValueError, match=match):
        ModelSpec(coeffs)


def test_replace_keeps_dispersion(m_star):
    shifted = m_star.replace(c=-5.0)
    assert shifted.eps_coeffs == m_star.eps_coeffs
    assert float(shifted.u(np.zeros(3))) == -5.0


def test_form_factors_are_even():
    rng = np.random.default_rng(3)
    q = rng.uniform(-np.pi, np.pi, size=(100, 3))
    for form in (
        FormFactor(),
        FormFactor("cos_poly", ((1, 0, 0, 0.5), (0, 0, 0, 1.0))),
        FormFactor("one_minus_cos", (2.0, 1)),
        FormFactor("abs_sin", (1.0, 2)),
    ):
        np.testing.assert_allclose(form(q), form(-q), atol=1e-14)
    assert FormFactor("one_minus_cos", (2.0, 1)).at_zero() == 0.0
    assert FormFactor().scaled(0.5).at_zero() == 0.5


def test_form_factor_validation():
    with pytest.raises(ValueError):
        FormFactor("gaussian", (1.0,))
    with pytest.raises(ValueError):
        FormFactor("abs_sin", (1.0, 3))
    with pytest.raises(ValueError):
        FormFactor("constant", (1.0, 2.0))


def test_quadratic_data_of_cubic_model(m_star):
    quad = extract_quadratic_data(m_star)
    np.testing.assert_allclose(quad.W, np.eye(3), atol=1e-12)
    assert quad.l1 == pytest.approx(2.0, rel=1e-5)
    assert quad.l2 == pytest.approx(1.0, rel=1e-5)
    assert quad.s == pytest.approx(0.5, rel=1e-5)
    assert quad.l0 == pytest.approx(2 / np.sqrt(3), rel=1e-5)
    assert quad.prefactor == pytest.approx(2 * np.sqrt(2), rel=1e-5)


def test_quadratic_remainder_is_cubic(m_star):
    assert quadratic_remainder_constant(m_star) < 1.0


def test_maximum_of_w(m_star):
    M, point = max_w(m_star)
    assert M == pytest.approx(13.5, abs=1e-6)
    assert float(m_star.w(np.array(point[:3]), np.array(point[3:]))) == pytest.approx(M)


def test_assumptions_hold_for_cubic_model(m_star):
    report = check_assumptions(m_star, TorusGrid(6), samples=50, seed=1)
    for key in "abcde":
        assert report[key].passed, report[key].detail
    assert report.passed
    assert report["e"].values["c"] > 0
    assert set(report.clauses) == set("abcde")
    assert list(report.to_frame().columns) == ["clause", "passed", "detail"]


def test_odd_pair_energy_fails_evenness(m_star):
    def odd_w(p, q):
        return m_star.w(p, q) + 0.1 * np.sin(p[..., 0]) * (1 - np.cos(q[..., 1]))

    report = check_assumptions(m_star.replace(w_override=odd_w), TorusGrid(4), samples=20, seed=2)
    assert not report["a"].passed
    assert not report.passed


def test_assumption_report_saves_yaml(tmp_path, m_star):
    report = check_assumptions(m_star, TorusGrid(4), samples=10)
    report.save(tmp_path / "report.yaml")
    content = yaml.safe_load((tmp_path / "report.yaml").read_text())
    assert content["model_hash"] == m_star.hash
    assert set(content["clauses"]) == set("abcde")


def test_second_minimum_fails_uniqueness(m_star):
    corner = np.full(3, np.pi)

    def twin_w(p, q):
        # zero at (0, 0) and at (0, corner), even since corner = -corner on the torus
        return m_star.w(p, q) * m_star.w(p, q - corner) / float(m_star.w(np.zeros(3), corner))

    grid = TorusGrid(4, offset=False, verbose=False)
    report = check_assumptions(m_star.replace(w_override=twin_w), grid, samples=20, seed=3)
    assert report["a"].passed
    assert not report["b"].passed
    assert report["b"].values["gap_min"] <= 1e-8
    assert not report.passed


@pytest.mark.parametrize(
    "extra, match",
    [
        (lambda p, q: -2 * ModelSpec.cubic().w(p, q), "not positive definite"),
        (lambda p, q: 0.5 * (1 - np.cos(p[..., 0] + q[..., 0])), "not proportional"),
    ],
)
def test_quadratic_data_names_the_violated_hypothesis(m_star, extra, match):
    model = m_star.replace(w_override=lambda p, q: m_star.w(p, q) + extra(p, q))
    with pytest.raises(ValueError, match="Assumption 2.1\\(ii\\) violated") as err:
        extract_quadratic_data(model)
    assert err.match(match)
