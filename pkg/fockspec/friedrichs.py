"""
Fiber operators h(p) of the Hamiltonian: Lambda(p, z), the Fredholm
determinant Delta(p, z) = u(p) - z - Lambda(p, z) / 2, the fiber minimum
m(p) with its minimizer q0(p), fiber eigenvalues below m(p), the threshold
classification at z = m and the constants of the threshold expansion
D(0, zeta) = Delta(0, m - zeta^2).
"""
import dataclasses
import logging
from typing import Optional, Sequence, NamedTuple, List

import numpy as np
import pandas as pd
from scipy import optimize

from . import ConvergenceError
from .model import ModelSpec, extract_quadratic_data
from .torus import Quadrature, integrate_singular

logger = logging.getLogger("FockSpec.Friedrichs")

_search_axis = -np.pi + (np.arange(8) + 0.5) * np.pi / 4
_search_nodes = np.stack(np.meshgrid(*([_search_axis] * 3), indexing="ij"), axis=-1).reshape(-1, 3)


class FiberMinimum(NamedTuple):
    q0: np.ndarray
    m_p: float


@dataclasses.dataclass
class FiberReport(object):
    p: np.ndarray
    m_p: float
    M_p: float
    delta_at_m: float
    eigenvalue: Optional[float] = None


@dataclasses.dataclass
class ThresholdClass(object):
    """Type of the threshold z = m of h(0)

    margin_delta is |Delta(0, m)| - tol and margin_v is |v(0)| - tol, their
    signs tell how far the result is from the neighbouring classes.
    """

    kind: str
    delta0m: float
    v_at_0: float
    tol: float

    @property
    def margin_delta(self) -> float:
        return abs(self.delta0m) - self.tol

    @property
    def margin_v(self) -> float:
        return abs(self.v_at_0) - self.tol


@dataclasses.dataclass
class ThresholdConstant(object):
    """Numeric threshold constant next to the two closed-form candidates

    predicted is 2 sqrt(2) pi^2 v(0)^2 / (l1^(3/2) det(W)^(1/2)), the right-hand
    derivative constant of D(0, .). alternative is the prefactor read off the
    square-root expansion of the reduced kernel, twice the former.
    """

    numeric: float
    predicted: float
    alternative: float
    residual: float = 0.0
    table: Optional[pd.DataFrame] = dataclasses.field(default=None, repr=False)

    @property
    def agrees_with(self) -> str:
        if abs(self.numeric - self.predicted) <= abs(self.numeric - self.alternative):
            return "derivative_constant"
        return "kernel_expansion_constant"

    @property
    def relative_error(self) -> float:
        return abs(self.numeric - self.predicted) / abs(self.predicted)


def _descend(model: ModelSpec, p: np.ndarray, seed: np.ndarray, max_iter: int, tol: float) -> np.ndarray:
    fun = lambda q: float(model.w(p, q))  # noqa: E731
    jac = None
    if model.w_override is None:
        jac = lambda q: model.grad_w_q(p, q)  # noqa: E731
    result = optimize.minimize(
        fun, seed, jac=jac, method="BFGS", options={"gtol": tol, "maxiter": max_iter}
    )
    grad = jac(result.x) if jac is not None else optimize.approx_fprime(result.x, fun, 1e-8)
    if not np.all(np.isfinite(result.x)) or np.linalg.norm(grad) > max(1e3 * tol, 1e-7):
        raise ConvergenceError(
            f"descent for q0(p) at p = {np.asarray(p).tolist()} stopped with "
            f"|grad| = {np.linalg.norm(grad):.3e}: {result.message}"
        )
    return result.x


def minimizer_q0(model: ModelSpec, p, max_iter: int = 200, tol: float = 1e-11) -> np.ndarray:
    """local minimizer of q -> w(p, q) seeded at -(l2/l1) p

    :param model: model data
    :param p: point near the origin
    :param max_iter: iteration budget of the descent
    :param tol: gradient tolerance
    :return: q0(p)
    """
    p = np.asarray(p, dtype=float)
    quad = extract_quadratic_data(model)
    return _descend(model, p, -quad.s * p, max_iter, tol)


def m_of_p(model: ModelSpec, p) -> float:
    p = np.asarray(p, dtype=float)
    return float(model.w(p, minimizer_q0(model, p)))


def fiber_minimum(model: ModelSpec, p, max_iter: int = 200, tol: float = 1e-11) -> FiberMinimum:
    """global minimizer of q -> w(p, q) for arbitrary p

    A coarse node scan and the seed -(l2/l1) p are both refined by descent,
    the lower result wins.
    """
    p = np.asarray(p, dtype=float)
    if not np.any(p):
        q0 = np.zeros(3)
        return FiberMinimum(q0, model.m)
    seeds = [_search_nodes[int(np.argmin(model.w(p, _search_nodes)))]]
    try:
        seeds.append(-extract_quadratic_data(model).s * p)
    except ValueError:
        pass
    best = None
    for seed in seeds:
        q = _descend(model, p, seed, max_iter, tol)
        value = float(model.w(p, q))
        if best is None or value < best.m_p:
            best = FiberMinimum(np.mod(q + np.pi, 2 * np.pi) - np.pi, value)
    return best


def fiber_maximum(model: ModelSpec, p) -> float:
    """M(p) = max_q w(p, q)"""
    p = np.asarray(p, dtype=float)
    seed = _search_nodes[int(np.argmax(model.w(p, _search_nodes)))]
    result = optimize.minimize(lambda q: -float(model.w(p, q)), seed, method="BFGS")
    return max(-float(result.fun), float(np.max(model.w(p, _search_nodes))))


def lambda_fn(
    model: ModelSpec,
    grid: Quadrature,
    p,
    z: float,
    fiber: Optional[FiberMinimum] = None,
) -> float:
    """Lambda(p, z) = int v(t)^2 / (w(p, t) - z) dt

    The integrand is shifted by q0(p) so the (near) singular point sits at
    the origin, where graded grids are fine.

    :param model: model data
    :param grid: quadrature, singular-safe when z = m(p)
    :param p: total quasi-momentum
    :param z: spectral parameter, at most m(p)
    :param fiber: precomputed fiber minimum of p
    :return: quadrature value
    """
    p = np.asarray(p, dtype=float)
    fiber = fiber or fiber_minimum(model, p)
    tol = 1e-12 * (1 + abs(fiber.m_p))
    if z > fiber.m_p + tol:
        raise ValueError(
            f"denominator sign change: z = {z} exceeds m(p) = {fiber.m_p} at p = {p.tolist()}"
        )
    q0 = fiber.q0

    def integrand(t):
        shifted = t + q0
        return model.v(shifted) ** 2 / (model.w(p, shifted) - z)

    if z >= fiber.m_p - tol:
        return integrate_singular(grid, integrand)
    return grid.integrate(integrand)


def delta(model: ModelSpec, grid: Quadrature, p, z: float, fiber: Optional[FiberMinimum] = None) -> float:
    """Fredholm determinant Delta(p, z) = u(p) - z - Lambda(p, z) / 2"""
    p = np.asarray(p, dtype=float)
    return float(model.u(p)) - z - 0.5 * lambda_fn(model, grid, p, z, fiber)


def fiber_eigenvalue(
    model: ModelSpec,
    grid: Quadrature,
    p,
    fiber: Optional[FiberMinimum] = None,
    max_expansions: int = 60,
) -> Optional[float]:
    """unique eigenvalue of h(p) below m(p), if Delta(p, m(p)) < 0

    :param model: model data
    :param grid: quadrature
    :param p: total quasi-momentum
    :param fiber: precomputed fiber minimum of p
    :param max_expansions: budget for pushing the lower bracket end down
    :return: root of Delta(p, .) or None
    """
    p = np.asarray(p, dtype=float)
    fiber = fiber or fiber_minimum(model, p)
    top = fiber.m_p
    if delta(model, grid, p, top, fiber) >= 0:
        return None

    def fun(z):
        return delta(model, grid, p, z, fiber)

    width = 1.0
    for _ in range(max_expansions):
        if fun(top - width) > 0:
            break
        width *= 2
    else:
        raise ConvergenceError(
            f"no sign change of Delta below m(p) = {top} within width {width} at p = {p.tolist()}"
        )
    root = optimize.bisect(fun, top - width, top, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = abs(fun(root))
    if residual > 1e-9 * (1 + abs(root)):
        raise ConvergenceError(
            f"fiber root z = {root} at p = {p.tolist()} has residual {residual:.3e} > 1e-9 (1 + |z|)"
        )
    return float(root)


def default_tol(model: ModelSpec) -> float:
    """1e-8 (1 + |u(0)|), the tolerance on Delta(p, m) when none is given"""
    return 1e-8 * (1 + abs(float(model.u(np.zeros(3)))))


def classify_threshold(model: ModelSpec, grid: Quadrature, tol: Optional[float] = None) -> ThresholdClass:
    """resonance, eigenvalue or regular threshold of h(0) at z = m"""
    zero = np.zeros(3)
    if tol is None:
        tol = default_tol(model)
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    delta0m = delta(model, grid, zero, model.m)
    v_at_0 = model.v.at_zero()
    if abs(delta0m) > tol:
        kind = "regular"
    elif abs(v_at_0) > tol:
        kind = "resonance"
    else:
        kind = "eigenvalue"
    result = ThresholdClass(kind, delta0m, v_at_0, tol)
    if min(abs(result.margin_delta), abs(result.margin_v)) < 10 * tol:
        logger.info(
            f"threshold class '{kind}' is close to a boundary: "
            f"margin_delta = {result.margin_delta:.3e}, margin_v = {result.margin_v:.3e}"
        )
    return result


def tune_resonance(model: ModelSpec, grid: Quadrature) -> float:
    """the shift c that makes Delta(0, m) vanish

    Delta(0, m) is affine in c with slope 1, a single evaluation suffices.
    """
    zero = np.zeros(3)
    c_star = model.c - delta(model, grid, zero, model.m)
    residual = delta(model.replace(c=c_star), grid, zero, model.m)
    if abs(residual) > 1e-10 * (1 + abs(c_star)):
        raise ConvergenceError(f"tuned c = {c_star} leaves Delta(0, m) = {residual}")
    logger.info(f"resonance at c = {c_star:.10g} (residual {residual:.2e})")
    return float(c_star)


def d_function(model: ModelSpec, grid: Quadrature, p, zeta: float) -> float:
    """D(p, zeta) = Delta(p, m(p) - zeta^2)"""
    p = np.asarray(p, dtype=float)
    fiber = fiber_minimum(model, p)
    return delta(model, grid, p, fiber.m_p - zeta**2, fiber)


def _threshold_predictions(model: ModelSpec):
    quad = extract_quadratic_data(model)
    v0 = model.v.at_zero()
    predicted = 2 * np.sqrt(2) * np.pi**2 * v0**2 / quad.prefactor
    return float(predicted), float(2 * predicted)


def d_zeta_slope(model: ModelSpec, grid: Quadrature, k_range: Sequence[int] = range(4, 15)) -> ThresholdConstant:
    """right-hand derivative of zeta -> D(0, zeta) at 0

    The difference D(0, zeta) - D(0, 0) is integrated directly, which keeps the
    singular parts of both terms from cancelling numerically. Slopes on
    zeta_k = 2^-k are extrapolated to first order; zeta values the grid can not
    resolve (zeta < 4 * min spacing) are skipped.

    :param model: model with v(0) != 0
    :param grid: singular-safe quadrature, graded for small zeta
    :param k_range: exponents k of zeta_k = 2^-k
    :return: ThresholdConstant with the slope table attached
    """
    if abs(model.v.at_zero()) <= 1e-12:
        raise ValueError("the threshold slope needs v(0) != 0")
    m = model.m
    zetas = [2.0 ** (-k) for k in k_range if 2.0 ** (-k) >= 4 * grid.min_spacing]
    if len(zetas) < 3:
        raise ValueError(
            f"grid with min spacing {grid.min_spacing:.3e} resolves fewer than three zeta values"
        )
    zero = np.zeros(3)

    slopes = []
    for zeta in zetas:
        def integrand(q, zeta=zeta):
            w0 = model.w(zero, q) - m
            return 0.5 * model.v(q) ** 2 * zeta**2 / (w0 * (w0 + zeta**2))

        slopes.append((zeta**2 + integrate_singular(grid, integrand)) / zeta)
    slopes = np.asarray(slopes)
    extrapolated = 2 * slopes[1:] - slopes[:-1]
    diffs = np.diff(extrapolated)
    if diffs.size >= 3:
        tail = diffs[-3:]
        alternating = np.all(np.sign(tail[1:]) == -np.sign(tail[:-1]))
        growing = np.all(np.abs(tail[1:]) > np.abs(tail[:-1]))
        if alternating and growing:
            raise ConvergenceError(f"slope extrapolation oscillates, last differences {tail.tolist()}")
    if diffs.size:
        i = int(np.argmin(np.abs(diffs)))
        numeric = 0.5 * (extrapolated[i] + extrapolated[i + 1])
        spread = abs(diffs[i])
    else:
        numeric, spread = extrapolated[-1], float("nan")
    predicted, alternative = _threshold_predictions(model)
    table = pd.DataFrame(
        {
            "zeta": zetas,
            "slope": slopes,
            "extrapolated": np.concatenate([[np.nan], extrapolated]),
        }
    )
    logger.info(f"D slope {numeric:.6g} (spread {spread:.2e}), predicted {predicted:.6g}")
    return ThresholdConstant(float(numeric), predicted, alternative, float(spread), table)


def delta_sqrt_coefficient(
    model: ModelSpec,
    grid: Quadrature,
    window: Sequence[float] = (1e-6, 1e-3),
    n_points: int = 16,
    residual_tol: float = 2e-2,
) -> ThresholdConstant:
    """fit Delta(0, z) = a sqrt(m - z) + b (m - z) over a log-spaced window

    :param model: resonance-classified model
    :param grid: quadrature resolving sqrt of the window's lower end
    :param window: range of m - z
    :param n_points: number of log-spaced samples
    :param residual_tol: relative residual above which the fit is rejected
    :return: ThresholdConstant with the coefficient a as numeric value
    """
    m = model.m
    x = np.logspace(np.log10(window[0]), np.log10(window[1]), n_points)
    zeta = np.sqrt(x)
    if zeta[0] < 4 * grid.min_spacing:
        logger.warning(
            f"sqrt(m - z) = {zeta[0]:.2e} is below 4x the grid spacing {grid.min_spacing:.2e}"
        )
    zero = np.zeros(3)
    fiber = fiber_minimum(model, zero)
    values = np.array([delta(model, grid, zero, m - xi, fiber) for xi in x])
    basis = np.column_stack([zeta, x])
    coeff, *_ = np.linalg.lstsq(basis, values, rcond=None)
    residual = float(np.linalg.norm(basis @ coeff - values) / np.linalg.norm(values))
    table = pd.DataFrame({"m_minus_z": x, "delta": values, "ratio": values / zeta})
    if residual > residual_tol:
        raise ConvergenceError(
            f"Delta(0, z) is not a square-root law near m: relative residual {residual:.3e}, "
            f"Delta ranges {values.min():.4g} .. {values.max():.4g}, "
            f"ratio Delta/sqrt(m-z) ranges {table.ratio.min():.4g} .. {table.ratio.max():.4g}"
        )
    predicted, alternative = _threshold_predictions(model)
    return ThresholdConstant(float(coeff[0]), predicted, alternative, residual, table)


def delta_growth_profile(
    model: ModelSpec,
    grid: Quadrature,
    radii: Sequence[float] = (0.4, 0.2, 0.1, 0.05),
    direction=(1.0, 0.0, 0.0),
) -> pd.DataFrame:
    """Delta(p, m) along a ray, with the ratios to |p| and to |p|^2"""
    direction = np.asarray(direction, dtype=float)
    direction /= np.linalg.norm(direction)
    rows = []
    for radius in radii:
        d = delta(model, grid, radius * direction, model.m)
        rows.append(
            {"radius": radius, "delta_at_m": d, "ratio_linear": d / radius, "ratio_quadratic": d / radius**2}
        )
    return pd.DataFrame(rows)


def m_of_p_residual_exponent(
    model: ModelSpec, radii: Sequence[float] = tuple(0.5 * 2.0 ** -k for k in range(6)), direction=(1.0, 0.0, 0.0)
) -> float:
    """fitted power of |m(p) - m - (l/2)(Wp, p)| along a ray"""
    quad = extract_quadratic_data(model)
    direction = np.asarray(direction, dtype=float)
    direction /= np.linalg.norm(direction)
    residuals: List[float] = []
    for radius in radii:
        p = radius * direction
        residuals.append(abs(m_of_p(model, p) - model.m - 0.5 * quad.l * float(p @ quad.W @ p)))
    slope, _ = np.polyfit(np.log(radii), np.log(residuals), 1)
    return float(slope)
