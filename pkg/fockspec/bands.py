"""
Essential spectrum of the Hamiltonian from a sweep over the fibers:
the two-particle branch (union of fiber eigenvalues) and the
three-particle branch [m, M].
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import ConvergenceError
from .friedrichs import (
    FiberReport,
    default_tol,
    delta,
    fiber_eigenvalue,
    fiber_maximum,
    fiber_minimum,
)
from .model import ModelSpec, max_w
from .torus import Quadrature

logger = logging.getLogger("FockSpec.Bands")

profile_columns = ["p1", "p2", "p3", "m_p", "M_p", "delta_at_m", "z_p"]


@dataclasses.dataclass
class BandStructure(object):
    """Case (i) two separated branches, (ii) one interval [a, M], (iii) [m, M] only"""

    case: str
    two_branch: Optional[Tuple[float, float]]
    three_branch: Tuple[float, float]
    tau_ess: float
    delta_m_min: float
    delta_m_max: float
    upper_screen_passed: bool = True
    sweep_error: float = 0.0
    lipschitz: float = 0.0
    tol: float = 0.0
    reports: List[FiberReport] = dataclasses.field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        if self.case != "i":
            return 0.0
        return self.three_branch[0] - self.two_branch[1]

    @property
    def gap_resolved(self) -> bool:
        return self.case == "i" and self.gap > 3 * self.sweep_error

    @property
    def intervals(self) -> List[Tuple[float, float]]:
        m, M = self.three_branch
        if self.case == "iii":
            return [(m, M)]
        if self.case == "ii" or not self.gap_resolved:
            return [(self.two_branch[0], M)]
        return [self.two_branch, (m, M)]


def p_axis(p_resolution: int) -> np.ndarray:
    """uniform axis of the torus, through 0 when p_resolution is odd"""
    if p_resolution < 1:
        raise ValueError(f"p_resolution must be positive, got {p_resolution}")
    if p_resolution % 2 == 0:
        logger.warning(f"even p_resolution {p_resolution} misses the critical fiber p = 0")
    k = np.arange(p_resolution)
    return 2 * np.pi * (k - (p_resolution - 1) / 2) / p_resolution


def p_sweep(p_resolution: int) -> np.ndarray:
    axis = p_axis(p_resolution)
    return np.array(list(product(axis, repeat=3)))


def _fiber_report(model: ModelSpec, grid: Quadrature, p: np.ndarray) -> FiberReport:
    try:
        fiber = fiber_minimum(model, p)
        d_m = delta(model, grid, p, model.m, fiber)
        eigenvalue = fiber_eigenvalue(model, grid, p, fiber) if d_m < 0 else None
    except ConvergenceError as err:
        raise ConvergenceError(f"fiber p = {np.asarray(p).tolist()}: {err}") from err
    return FiberReport(p, fiber.m_p, fiber_maximum(model, p), d_m, eigenvalue)


def two_branch_profile(
    model: ModelSpec,
    grid: Quadrature,
    p_list: Sequence,
    workers: int = 1,
    verbose: bool = True,
) -> List[FiberReport]:
    """one FiberReport per p, in the order of p_list

    :param model: model data
    :param grid: quadrature
    :param p_list: fibers to evaluate
    :param workers: threads used for the sweep, results do not depend on it
    :param verbose: show a progress bar
    :return: list of FiberReport
    """
    p_list = [np.asarray(p, dtype=float) for p in p_list]
    job = lambda p: _fiber_report(model, grid, p)  # noqa: E731
    progress = dict(total=len(p_list), desc="fibers", leave=False, disable=(not verbose) or len(p_list) < 8)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(tqdm(pool.map(job, p_list), **progress))
    return [job(p) for p in tqdm(p_list, **progress)]


def _upper_screen(model: ModelSpec, grid: Quadrature, p_list: Sequence, M: float) -> bool:
    """Delta(p, M) <= 0 on every sampled fiber"""
    worst = -np.inf
    for p in p_list:
        def integrand(t, p=p):
            return model.v(t) ** 2 / (model.w(p, t) - M)

        try:
            value = float(model.u(p)) - M - 0.5 * grid.integrate(integrand)
        except ValueError:
            logger.warning(f"Delta(p, M) not computable at p = {np.asarray(p).tolist()}")
            return False
        worst = max(worst, value)
    if worst > 0:
        logger.warning(
            f"max_p Delta(p, M) = {worst:.4g} > 0: fiber eigenvalues above M may exist "
            f"and are not reported"
        )
    return worst <= 0


def _neighbour_pairs(p_resolution: int):
    shape = (p_resolution,) * 3
    index = np.arange(p_resolution**3).reshape(shape)
    for axis in range(3):
        first = np.take(index, range(p_resolution - 1), axis=axis).ravel()
        second = np.take(index, range(1, p_resolution), axis=axis).ravel()
        yield from zip(first, second)


def band_structure(
    model: ModelSpec,
    grid: Quadrature,
    p_resolution: int = 17,
    workers: int = 1,
    tol: Optional[float] = None,
    verbose: bool = True,
) -> BandStructure:
    """sweep p_resolution^3 fibers and assemble the essential spectrum

    :param model: model data
    :param grid: quadrature used for every fiber
    :param p_resolution: fibers per axis, odd keeps p = 0 in the sweep
    :param workers: threads for the fiber sweep
    :param tol: Delta(p, m) above -tol counts as non-negative
    :param verbose: show progress
    :return: BandStructure
    """
    if tol is None:
        tol = default_tol(model)
    p_list = p_sweep(p_resolution)
    reports = two_branch_profile(model, grid, p_list, workers=workers, verbose=verbose)
    m = model.m
    M = max_w(model)[0]
    d_m = np.array([report.delta_at_m for report in reports])
    z = np.array([np.nan if r.eigenvalue is None else r.eigenvalue for r in reports])

    h = 2 * np.pi / p_resolution
    steps = [abs(z[i] - z[j]) for i, j in _neighbour_pairs(p_resolution) if np.isfinite(z[i] + z[j])]
    lipschitz = max(steps) / h if steps else 0.0
    sweep_error = 0.5 * max(steps) if steps else 0.0

    if np.max(d_m) < -tol:
        case = "i"
        two_branch = (float(np.nanmin(z)), float(np.nanmax(z)))
        tau = two_branch[0]
    elif np.min(d_m) >= -tol:
        case, two_branch, tau = "iii", None, m
    else:
        case = "ii"
        two_branch = (float(np.nanmin(z)), m)
        tau = two_branch[0]

    bands = BandStructure(
        case=case,
        two_branch=two_branch,
        three_branch=(m, M),
        tau_ess=float(tau),
        delta_m_min=float(np.min(d_m)),
        delta_m_max=float(np.max(d_m)),
        upper_screen_passed=_upper_screen(model, grid, p_list, M),
        sweep_error=float(sweep_error),
        lipschitz=float(lipschitz),
        tol=float(tol),
        reports=reports,
    )
    logger.info(f"case ({case}), tau_ess = {bands.tau_ess:.8g}, intervals {bands.intervals}")
    return bands


def case_two_shift(model: ModelSpec, grid: Quadrature, p_resolution: int = 17) -> float:
    """a shift c for which Delta(., m) changes sign inside the sweep

    Delta(p, m) = c + g(p) with g independent of c; the midpoint of
    [-max g, -min g] is returned.
    """
    g = []
    for p in p_sweep(p_resolution):
        g.append(delta(model, grid, p, model.m) - model.c)
    g = np.array(g)
    return float(-0.5 * (np.min(g) + np.max(g)))


def profile_frame(reports: Sequence[FiberReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        p = np.asarray(report.p, dtype=float)
        rows.append(
            {
                "p1": p[0],
                "p2": p[1],
                "p3": p[2],
                "m_p": report.m_p,
                "M_p": report.M_p,
                "delta_at_m": report.delta_at_m,
                "z_p": np.nan if report.eigenvalue is None else report.eigenvalue,
            }
        )
    return pd.DataFrame(rows, columns=profile_columns)
