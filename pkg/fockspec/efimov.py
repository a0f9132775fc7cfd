"""
Asymptotic constant of the eigenvalue count at the threshold.

Near z = m the counting problem reduces to a convolution operator in the
logarithm of the momentum, with kernel S(y; t) = (2 pi)^-2 l0 / (cosh y + s t)
depending on the angle through t = <xi, eta>. Its Fourier transform in y is

    S^(t; lam) = (2 pi)^-1 l0 sinh(lam arccos(s t)) / (sqrt(1 - s^2 t^2) sinh(pi lam)),

and Legendre coefficients s_l(lam) = 2 pi int P_l(t) S^(t; lam) dt diagonalize
the angular part. U(mu) = (4 pi)^-1 int n(mu, S^(y)) dy and U0 = U(1).
"""
import dataclasses
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special

from . import ConvergenceError
from .bs import n_above
from .model import QuadraticData

logger = logging.getLogger("FockSpec.Efimov")

conventions = ("arccos", "pi_minus_arccos")

_gl_t, _gl_w = special.roots_legendre(96)
_kernel_chunk = 1 << 16


@dataclasses.dataclass(frozen=True)
class EfimovParams(object):
    """Mass ratio s = l2 / l1 and l0 = (1 - s^2)^(-1/2)"""

    s: float
    l0: float

    def __post_init__(self):
        if not abs(self.s) < 1:
            raise ValueError(f"|s| must be below 1, got s = {self.s}")
        expected = 1.0 / math.sqrt(1.0 - self.s**2)
        if abs(self.l0 - expected) > 1e-9 * expected:
            raise ValueError(f"l0 = {self.l0} does not match (1 - s^2)^(-1/2) = {expected}")

    @classmethod
    def from_s(cls, s: float) -> "EfimovParams":
        if not abs(s) < 1:
            raise ValueError(f"|s| must be below 1, got s = {s}")
        return cls(float(s), 1.0 / math.sqrt(1.0 - s**2))

    @classmethod
    def from_quadratic(cls, quad: QuadraticData) -> "EfimovParams":
        return cls.from_s(quad.s)


@dataclasses.dataclass
class EfimovEstimate(object):
    y_star: float
    per_harmonic: List[Tuple[int, float]]
    U0: float
    U0_lower: float
    mu: float = 1.0
    l_max: int = 8

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.per_harmonic, columns=["ell", "measure"])


@dataclasses.dataclass
class ConventionReport(object):
    ell: int
    lambdas: List[float]
    numeric: List[float]
    by_convention: Dict[str, List[float]]
    deviation: Dict[str, float]

    @property
    def winner(self) -> str:
        return min(self.deviation, key=self.deviation.get)

    @property
    def loser(self) -> str:
        return max(self.deviation, key=self.deviation.get)


@dataclasses.dataclass
class SobolevReport(object):
    mu: float
    U: float
    frame: pd.DataFrame
    tolerance: float

    @property
    def gaps(self) -> np.ndarray:
        return self.frame["gap"].to_numpy()

    @property
    def gaps_shrinking(self) -> bool:
        return bool(np.all(np.diff(self.gaps) <= 1e-12))

    @property
    def passed(self) -> bool:
        if self.U == 0:
            return bool(self.frame["count"].iloc[-1] == 0)
        return bool(self.gaps[-1] <= self.tolerance * self.U)


@dataclasses.dataclass
class LogFit(object):
    slope: float
    intercept: float
    residual: float


def _sinh_ratio(a, lam) -> np.ndarray:
    """sinh(a lam) / sinh(pi lam) for 0 <= a <= pi, stable for large |lam|"""
    a = np.asarray(a, dtype=float)
    lam = np.abs(np.asarray(lam, dtype=float))
    small = lam < 1e-12
    safe = np.where(small, 1.0, lam)
    ratio = np.exp(safe * (a - np.pi)) * np.expm1(-2 * a * safe) / np.expm1(-2 * np.pi * safe)
    return np.where(small, a / np.pi, ratio)


def _angle(params: EfimovParams, t, convention: str) -> np.ndarray:
    if convention not in conventions:
        raise ValueError(f"can not handle convention '{convention}'")
    a = np.arccos(params.s * np.asarray(t, dtype=float))
    return a if convention == "arccos" else np.pi - a


def s_hat_kernel(params: EfimovParams, t, lam, convention: str = "arccos"):
    """S^(t; lam) of the Fourier transformed kernel"""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1):
        raise ValueError("t must lie in [-1, 1]")
    a = _angle(params, t, convention)
    value = params.l0 / (2 * np.pi) * _sinh_ratio(a, lam) / np.sqrt(1 - (params.s * t) ** 2)
    return float(value) if np.ndim(value) == 0 else value


def harmonic_symbol(params: EfimovParams, ell: int, lam, convention: str = "arccos") -> np.ndarray:
    """s_l(lam) by fixed 96-point Gauss-Legendre in t, vectorized in lam"""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    kernel = s_hat_kernel(params, _gl_t[None, :], lam[:, None], convention)
    return 2 * np.pi * (kernel * special.eval_legendre(ell, _gl_t)[None, :]) @ _gl_w


def legendre_eigenvalues(params: EfimovParams, lam: float, l_max: int = 8, convention: str = "arccos") -> np.ndarray:
    """[s_0(lam), ..., s_lmax(lam)] by adaptive quadrature in t"""
    if l_max < 0:
        raise ValueError(f"l_max must be non-negative, got {l_max}")
    values = []
    for ell in range(l_max + 1):
        value, error = integrate.quad(
            lambda t: s_hat_kernel(params, t, lam, convention) * special.eval_legendre(ell, t),
            -1,
            1,
            epsabs=1e-13,
            epsrel=1e-12,
            limit=200,
        )
        if error > 1e-9:
            raise ConvergenceError(f"Legendre coefficient {ell} at lam = {lam}: error estimate {error:.2e}")
        values.append(2 * np.pi * value)
    return np.array(values)


def zero_harmonic(params: EfimovParams, y):
    """closed form S^(0)(y) = l0 sinh(y arcsin s) / (s y cosh(pi y / 2))"""
    y = np.abs(np.asarray(y, dtype=float))
    a = math.asin(abs(params.s))
    small = y < 1e-12
    safe = np.where(small, 1.0, y)
    # sinh(a y) / cosh(pi y / 2) without overflow
    ratio = np.exp(safe * (a - np.pi / 2)) * -np.expm1(-2 * a * safe) / (1 + np.exp(-np.pi * safe))
    if a == 0:
        value = params.l0 / np.cosh(np.pi * safe / 2)
        limit = params.l0
    else:
        value = params.l0 * ratio / (abs(params.s) * safe)
        limit = params.l0 * a / abs(params.s)
    value = np.where(small, limit, value)
    return float(value) if np.ndim(value) == 0 else value


def zero_harmonic_root(params: EfimovParams, mu: float = 1.0) -> float:
    """unique y > 0 with S^(0)(y) = mu

    :param params: kernel parameters
    :param mu: level, the classic three-boson exponent is the root at mu = 1/2
    :return: root by bisection
    """
    fun = lambda y: zero_harmonic(params, y) - mu  # noqa: E731
    if fun(0.0) <= 0:
        raise ValueError(f"S^(0)(0) = {zero_harmonic(params, 0.0):.6g} does not exceed mu = {mu}")
    upper = 1.0
    while fun(upper) > 0:
        upper *= 2
        if upper > 100:
            raise ConvergenceError(f"no sign change of S^(0) - {mu} up to y = 100")
    samples = zero_harmonic(params, np.linspace(0, upper, 129))
    if np.any(np.diff(samples) > 0):
        logger.warning("S^(0) is not monotone on the bracket, the root may not be unique")
    return float(optimize.bisect(fun, 0.0, upper, xtol=1e-14, maxiter=500))


def _super_level_measure(params: EfimovParams, ell: int, mu: float, y_max: float, y_points: int, convention: str) -> float:
    """measure of {y in [0, y_max]: s_l(y) > mu}"""
    ys = np.linspace(0.0, y_max, y_points)
    above = harmonic_symbol(params, ell, ys, convention) - mu
    fun = lambda y: float(harmonic_symbol(params, ell, y, convention)[0]) - mu  # noqa: E731
    measure = 0.0
    start = 0.0 if above[0] > 0 else None
    for i in range(1, ys.size):
        if (above[i - 1] > 0) == (above[i] > 0):
            continue
        edge = optimize.brentq(fun, ys[i - 1], ys[i], xtol=1e-9)
        if above[i] > 0:
            start = edge
        else:
            measure += edge - start
            start = None
    if start is not None:
        measure += y_max - start
    return measure


def u_of_mu(
    params: EfimovParams,
    mu: float = 1.0,
    l_max: int = 8,
    y_points: int = 400,
    convention: str = "arccos",
) -> EfimovEstimate:
    """U(mu) = (4 pi)^-1 sum_l (2l + 1) |{y: s_l(y) > mu}|

    |s_l| <= s_0 for the winning convention, so every super-level set lies
    inside (-y*, y*) with y* the zero-harmonic root at level mu.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if zero_harmonic(params, 0.0) <= mu:
        return EfimovEstimate(0.0, [(ell, 0.0) for ell in range(l_max + 1)], 0.0, 0.0, mu, l_max)
    y_star = zero_harmonic_root(params, mu)
    per_harmonic = [(0, 2 * y_star)]
    for ell in range(1, l_max + 1):
        half = _super_level_measure(params, ell, mu, y_star, y_points, convention)
        per_harmonic.append((ell, 2 * half))
    tail = [measure for ell, measure in per_harmonic[-2:] if ell > 0]
    if any(measure > 0 for measure in tail):
        raise ValueError(f"harmonics up to l_max = {l_max} still contribute, increase l_max")
    total = sum((2 * ell + 1) * measure for ell, measure in per_harmonic)
    return EfimovEstimate(
        y_star=y_star,
        per_harmonic=per_harmonic,
        U0=total / (4 * np.pi),
        U0_lower=2 * y_star / (4 * np.pi),
        mu=mu,
        l_max=l_max,
    )


def s_ell_kernel(params: EfimovParams, ell: int, y) -> np.ndarray:
    """S_l(y) = 2 pi int P_l(t) S(y; t) dt, Gauss-Legendre in t"""
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    weights = 2 * np.pi * special.eval_legendre(ell, _gl_t) * _gl_w
    value = np.empty(flat.size)
    for start in range(0, flat.size, _kernel_chunk):
        part = flat[start : start + _kernel_chunk]
        kernel = params.l0 / (4 * np.pi**2) / (np.cosh(part)[:, None] + params.s * _gl_t[None, :])
        value[start : start + _kernel_chunk] = kernel @ weights
    return value.reshape(y.shape)


def fourier_check(
    params: EfimovParams, lambdas: Sequence[float] = (0.25, 0.5, 1.0, 2.0), ell: int = 1
) -> ConventionReport:
    """compare the numeric Fourier transform of S_l with s_l under both conventions

    l = 0 can not tell the conventions apart, its symbol is the same for both.
    """
    numeric = []
    for lam in lambdas:
        value, _ = integrate.quad(
            lambda y: float(s_ell_kernel(params, ell, y)),
            0,
            np.inf,
            weight="cos",
            wvar=lam,
            epsabs=1e-12,
            limlst=100,
        )
        numeric.append(2 * value)
    by_convention = {
        name: [float(legendre_eigenvalues(params, lam, ell, name)[ell]) for lam in lambdas]
        for name in conventions
    }
    deviation = {
        name: float(np.max(np.abs(np.array(values) - np.array(numeric))))
        for name, values in by_convention.items()
    }
    report = ConventionReport(ell, list(lambdas), numeric, by_convention, deviation)
    logger.info(
        f"Fourier check l = {ell}: '{report.winner}' deviates {deviation[report.winner]:.2e}, "
        f"'{report.loser}' deviates {deviation[report.loser]:.2e}"
    )
    return report


def _panel_rule(r: float, n_nodes: int, order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    panels = max(1, int(math.ceil(n_nodes / order)))
    x, w = special.roots_legendre(order)
    edges = np.linspace(0.0, r, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def assemble_S_r(params: EfimovParams, r: float, ell: int, n_nodes: Optional[int] = None) -> np.ndarray:
    """Nystrom matrix sqrt(w_i) S_l(x_i - x_j) sqrt(w_j) on (0, r)

    :param params: kernel parameters
    :param r: length of the interval
    :param ell: harmonic degree
    :param n_nodes: total nodes of the composite 8-point Gauss-Legendre rule,
        defaults to 8 per unit length
    :return: dense symmetric matrix
    """
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    if n_nodes is None:
        n_nodes = 8 * int(math.ceil(r))
    if n_nodes <= 0:
        raise ValueError(f"n_nodes must be positive, got {n_nodes}")
    x, w = _panel_rule(r, n_nodes)
    root = np.sqrt(w)
    matrix = root[:, None] * s_ell_kernel(params, ell, np.abs(x[:, None] - x[None, :])) * root[None, :]
    return 0.5 * (matrix + matrix.T)


def sobolev_limit_check(
    params: EfimovParams,
    mu: float = 1.0,
    r_list: Sequence[float] = (25, 50, 100),
    l_max: int = 8,
    n_nodes: Optional[int] = None,
    tolerance: float = 0.05,
) -> SobolevReport:
    """n(mu, S_r) / (2 r) against U(mu) along r_list

    Harmonics whose symbol never exceeds mu are skipped, the truncated
    operator can not have eigenvalues above the symbol's supremum.
    """
    if any(b <= a for a, b in zip(r_list, r_list[1:])):
        raise ValueError("r_list must be increasing")
    U = u_of_mu(params, mu, l_max).U0
    ys = np.linspace(0.0, 20.0, 801)
    active = [ell for ell in range(l_max + 1) if np.max(harmonic_symbol(params, ell, ys)) > mu]
    rows = []
    for r in r_list:
        nodes = n_nodes if n_nodes is not None else 8 * int(math.ceil(r))
        count = 0
        for ell in active:
            count += (2 * ell + 1) * n_above(assemble_S_r(params, r, ell, nodes), mu)[0]
        rows.append({"r": r, "count": count, "ratio": count / (2 * r), "gap": abs(count / (2 * r) - U)})
    report = SobolevReport(mu, U, pd.DataFrame(rows), tolerance)
    if not report.passed:
        logger.warning(f"n/(2r) at r = {r_list[-1]} is {rows[-1]['ratio']:.5g}, U = {U:.5g}")
    return report


def fit_log_asymptotics(points: Sequence[Tuple[float, float]], m: float = 0.0) -> LogFit:
    """least squares N = slope |log(m - z)| + intercept

    :param points: pairs (z, N) with z < m
    :param m: threshold
    :return: LogFit, slope is the empirical asymptotic constant
    """
    if len(points) < 4:
        raise ValueError(f"need at least 4 points for the fit, got {len(points)}")
    z = np.array([point[0] for point in points], dtype=float)
    counts = np.array([point[1] for point in points], dtype=float)
    if np.any(z >= m):
        raise ValueError("all z must lie below the threshold")
    x = np.abs(np.log(m - z))
    slope, intercept = np.polyfit(x, counts, 1)
    residual = float(np.sqrt(np.mean((slope * x + intercept - counts) ** 2)))
    return LogFit(float(slope), float(intercept), residual)
