"""
Birman-Schwinger counting: N(z), the number of eigenvalues of H below z,
equals the number of eigenvalues of T(z) above 1.

T(z) acts on C + L2(T^3) and is discretized on the nodes of a TorusGrid.
The Fredholm determinant inside T(z) is taken with the same nodes and
weights, which makes the discrete count coincide with the inertia of the
discretized Hamiltonian of fockspec.oracle on that grid.
"""
import dataclasses
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg, optimize
from tqdm import tqdm

from . import ConvergenceError, SingularShiftError
from .friedrichs import tune_resonance
from .model import ModelSpec
from .torus import TorusGrid

logger = logging.getLogger("FockSpec.BS")

# dense n x n float64 arrays, 8000 nodes are about 0.5 GB each
max_nodes_default = 8_000
inertia_tol = 1e-12


@dataclasses.dataclass
class BSMatrix(object):
    z: float
    entries: np.ndarray = dataclasses.field(repr=False)
    grid_ref: Dict = dataclasses.field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))


@dataclasses.dataclass
class EigencountReport(object):
    z: float
    count: int
    method: str
    residual_gap: float


@dataclasses.dataclass
class WeylReport(object):
    samples: int
    dim: int
    seed: int
    violations: List[Dict] = dataclasses.field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def inertia(matrix: np.ndarray, tol: float = inertia_tol) -> Tuple[int, float]:
    """number of negative eigenvalues from a Bunch-Kaufman LDL^T factorization

    :param matrix: dense symmetric matrix
    :param tol: relative size below which a pivot block counts as singular
    :return: negative count and the smallest |eigenvalue| among the pivot blocks
    """
    _, d, _ = linalg.ldl(matrix, lower=True, hermitian=True)
    n = d.shape[0]
    negative = 0
    gap = np.inf
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            eig = np.linalg.eigvalsh(d[i : i + 2, i : i + 2])
            i += 2
        else:
            eig = np.array([d[i, i]])
            i += 1
        negative += int(np.count_nonzero(eig < 0))
        gap = min(gap, float(np.min(np.abs(eig))))
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if gap <= tol * scale:
        raise SingularShiftError(
            f"pivot of size {gap:.3e} at matrix scale {scale:.3e}: an eigenvalue sits on "
            f"the shift, perturb z slightly"
        )
    return negative, gap


def n_above(matrix: np.ndarray, level: float) -> Tuple[int, float]:
    """n(level, A), the number of eigenvalues of A above level"""
    shifted = level * np.eye(matrix.shape[0]) - matrix
    return inertia(shifted)


def _check_grid(grid: TorusGrid, max_nodes: int) -> None:
    if not isinstance(grid, TorusGrid):
        raise TypeError(f"can not assemble T(z) on '{type(grid)}', a TorusGrid is needed")
    if grid.size > max_nodes:
        raise ValueError(
            f"{grid.size} grid nodes exceed the guard {max_nodes} of the dense pair matrix, "
            f"use a smaller grid or fewer grading levels"
        )


def pair_matrix(
    model: ModelSpec, grid: TorusGrid, block: int = 256, max_nodes: int = max_nodes_default
) -> np.ndarray:
    """w(p_i, p_j) on all node pairs, exactly symmetric

    :param max_nodes: guard on the number of grid nodes
    """
    _check_grid(grid, max_nodes)
    nodes = grid.nodes
    n = nodes.shape[0]
    pairs = np.empty((n, n))
    for start in range(0, n, block):
        stop = min(start + block, n)
        pairs[start:stop] = model.w(nodes[start:stop, None, :], nodes[None, :, :])
    return 0.5 * (pairs + pairs.T)


def _check_below_pairs(pairs: np.ndarray, z: float) -> None:
    floor = float(np.min(pairs))
    if z >= floor:
        raise ValueError(f"z not below the safe region: z = {z} >= min pair energy {floor}")


def grid_delta(model: ModelSpec, grid: TorusGrid, z: float, pairs: np.ndarray = None) -> np.ndarray:
    """Delta(p_i, z) with Lambda summed over the same grid, one value per node"""
    if pairs is None:
        pairs = pair_matrix(model, grid)
    _check_below_pairs(pairs, z)
    strength = grid.weights * model.v(grid.nodes) ** 2
    lam = (1.0 / (pairs - z)) @ strength
    return model.u(grid.nodes) - z - 0.5 * lam


def assemble_T(
    model: ModelSpec,
    grid: TorusGrid,
    z: float,
    pairs: np.ndarray = None,
    max_nodes: int = max_nodes_default,
) -> BSMatrix:
    """Birman-Schwinger matrix on (0-sector, grid nodes)

    :param model: model data
    :param grid: node set shared with the Fredholm determinant
    :param z: spectral parameter below the safe region
    :param pairs: precomputed pair_matrix of the grid
    :param max_nodes: guard on the number of grid nodes
    :return: BSMatrix with T00 = 1 - u0 + z, T01 = -sqrt(w) v / sqrt(Delta),
        T11 = sqrt(w_p w_q) v(p) v(q) / (2 sqrt(Delta_p) (w(p,q) - z) sqrt(Delta_q))
    """
    _check_grid(grid, max_nodes)
    if pairs is None:
        pairs = pair_matrix(model, grid, max_nodes=max_nodes)
    deltas = grid_delta(model, grid, z, pairs)
    if np.min(deltas) <= 0:
        idx = int(np.argmin(deltas))
        raise ValueError(
            f"z not below the safe region: Delta(p, {z}) = {deltas[idx]:.4g} "
            f"at node {grid.nodes[idx].tolist()}"
        )
    b = np.sqrt(grid.weights) * model.v(grid.nodes) / np.sqrt(deltas)
    n = grid.size
    entries = np.empty((n + 1, n + 1))
    entries[0, 0] = 1.0 - model.u0 + z
    entries[0, 1:] = -b
    entries[1:, 0] = -b
    entries[1:, 1:] = 0.5 * np.outer(b, b) / (pairs - z)
    return BSMatrix(z, entries, grid.descriptor())


def count_below(
    model: ModelSpec, grid: TorusGrid, z: float, pairs: np.ndarray = None, max_nodes: int = max_nodes_default
) -> EigencountReport:
    """N(z) = n(1, T(z)) by inertia of 1 - T(z)"""
    matrix = assemble_T(model, grid, z, pairs, max_nodes)
    count, gap = n_above(matrix.entries, 1.0)
    return EigencountReport(z, count, "bs", gap)


def safe_region_top(model: ModelSpec, grid: TorusGrid) -> float:
    """supremum of z for which T(z) is defined on the grid

    Below min pair energy every Delta(p_i, .) is decreasing, so the minimum
    over nodes is decreasing too and its root is found by bisection.
    """
    pairs = pair_matrix(model, grid)
    floor = float(np.min(pairs))
    top = floor - 1e-12 * (1 + abs(floor))
    fun = lambda z: float(np.min(grid_delta(model, grid, z, pairs)))  # noqa: E731
    if fun(top) > 0:
        return floor
    width = 1.0
    for _ in range(60):
        if fun(top - width) > 0:
            break
        width *= 2
    else:
        raise ConvergenceError(f"min Delta stays non-positive down to z = {top - width}")
    return float(optimize.bisect(fun, top - width, top, xtol=1e-12, maxiter=500))


def count_sweep(
    model: ModelSpec,
    grid: TorusGrid,
    z_list: Sequence[float],
    verbose: bool = True,
    max_nodes: int = max_nodes_default,
) -> pd.DataFrame:
    """N(z) for a list of z on one grid, the pair matrix is shared"""
    pairs = pair_matrix(model, grid, max_nodes=max_nodes)
    rows = []
    for z in tqdm(z_list, desc="count", leave=False, disable=(not verbose) or len(z_list) < 8):
        report = count_below(model, grid, float(z), pairs, max_nodes)
        rows.append({"z": report.z, "count": report.count, "residual_gap": report.residual_gap})
    frame = pd.DataFrame(rows, columns=["z", "count", "residual_gap"])
    ordered = frame.sort_values("z")
    if np.any(np.diff(ordered["count"].to_numpy()) < 0):
        logger.error("N(z) decreases along the sweep, check the grid and z-list")
    for key, value in grid.descriptor().items():
        frame[f"grid_{key}"] = value
    return frame


def hs_norm_T11(model: ModelSpec, grid: TorusGrid, z: float) -> float:
    """Frobenius norm of the weighted T11 block, the discrete Hilbert-Schmidt norm"""
    m = model.m
    if z > m:
        raise ValueError(f"z = {z} lies above the threshold m = {m}")
    if z == m and abs(model.v.at_zero()) > 1e-12:
        logger.info("v(0) != 0 at z = m: the norm is not expected to stay bounded under refinement")
    matrix = assemble_T(model, grid, z)
    return float(np.linalg.norm(matrix.entries[1:, 1:], "fro"))


def hs_norm_profile(
    model: ModelSpec,
    n: int = 6,
    gradings: Sequence[int] = (0, 2, 4, 6),
    z: float = None,
    offset: bool = True,
    margin: float = None,
    verbose: bool = False,
) -> pd.DataFrame:
    """|T11|_HS at z on the grids TorusGrid(n, grading_levels=g), refined towards q = 0

    :param model: model data
    :param n: cells per axis of the coarse grid
    :param gradings: dyadic refinement levels, one grid each
    :param z: spectral parameter, the threshold m when omitted
    :param offset: shift the nodes off the origin
    :param margin: when given, c is moved to the resonance of each grid plus margin
    :param verbose: show the grid construction
    :return: DataFrame with columns n, grading, nodes, c, z, hs_norm, drift
    """
    z = model.m if z is None else float(z)
    rows = []
    for grading in gradings:
        grid = TorusGrid(n, offset=offset, grading_levels=grading, verbose=verbose)
        tuned = model if margin is None else model.replace(c=tune_resonance(model, grid) + margin)
        rows.append(
            {
                "n": n,
                "grading": grading,
                "nodes": grid.size,
                "c": tuned.c,
                "z": z,
                "hs_norm": hs_norm_T11(tuned, grid, z),
            }
        )
    frame = pd.DataFrame(rows, columns=["n", "grading", "nodes", "c", "z", "hs_norm"])
    frame["drift"] = frame["hs_norm"].pct_change().abs()
    return frame


def weyl_check(sample_count: int = 200, dim: int = 40, seed: int = 7) -> WeylReport:
    """n(l1 + l2, A1 + A2) <= n(l1, A1) + n(l2, A2) on random symmetric pairs"""
    rng = np.random.default_rng(seed)
    report = WeylReport(sample_count, dim, seed)
    for sample in range(sample_count):
        a1 = rng.normal(size=(dim, dim)) / np.sqrt(dim)
        a2 = rng.normal(size=(dim, dim)) / np.sqrt(dim)
        a1 = 0.5 * (a1 + a1.T)
        a2 = 0.5 * (a2 + a2.T)
        l1, l2 = rng.uniform(0.05, 1.0, size=2)
        lhs = n_above(a1 + a2, l1 + l2)[0]
        rhs = n_above(a1, l1)[0] + n_above(a2, l2)[0]
        if lhs > rhs:
            report.violations.append({"sample": sample, "lhs": lhs, "rhs": rhs, "l1": l1, "l2": l2})
    if report.violations:
        logger.error(f"{len(report.violations)} Weyl inequality violations")
    return report
