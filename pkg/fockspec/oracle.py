"""
Brute-force matrix of the Hamiltonian on C + grid + sym(grid x grid).

Basis: the 0-sector vector, one vector per node in the 1-sector, and in the
2-sector e_ij = (d_i x d_j + d_j x d_i) / sqrt(2) for i < j and d_i x d_i
for i = j. Functions are scaled by sqrt(weight) per node, which turns the
quadrature into plain Euclidean inner products.
"""
import dataclasses
import logging
from typing import Dict, List

import numpy as np
from scipy import linalg

from .bs import EigencountReport, inertia, pair_matrix
from .model import ModelSpec
from .torus import TorusGrid

logger = logging.getLogger("FockSpec.Oracle")

max_dim_default = 40_000


@dataclasses.dataclass
class FockMatrix(object):
    entries: np.ndarray = dataclasses.field(repr=False)
    n_nodes: int
    pair_i: np.ndarray = dataclasses.field(repr=False)
    pair_j: np.ndarray = dataclasses.field(repr=False)
    grid_ref: Dict = dataclasses.field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def two_sector(self) -> slice:
        return slice(1 + self.n_nodes, self.dim)


def fock_dimension(n_nodes: int) -> int:
    return 1 + n_nodes + n_nodes * (n_nodes + 1) // 2


def assemble_H(model: ModelSpec, grid: TorusGrid, max_dim: int = max_dim_default) -> FockMatrix:
    """dense symmetric matrix of H on the grid

    :param model: model data
    :param grid: node set
    :param max_dim: guard on the total dimension
    :return: FockMatrix
    """
    n = grid.size
    dim = fock_dimension(n)
    if dim > max_dim:
        raise ValueError(
            f"Fock dimension {dim} for {n} nodes exceeds the guard {max_dim}, use a smaller grid"
        )
    logger.debug(f"assembling H with dim {dim} ({dim**2 * 8 / 2**20:.1f} MiB)")
    pair_i, pair_j = np.triu_indices(n)
    diagonal = pair_i == pair_j
    b = np.sqrt(grid.weights) * model.v(grid.nodes)
    pairs = pair_matrix(model, grid)

    entries = np.zeros((dim, dim))
    entries[0, 0] = model.u0
    entries[0, 1 : n + 1] = b
    entries[1 : n + 1, 0] = b
    one = np.arange(1, n + 1)
    entries[one, one] = model.u(grid.nodes)

    cols = 1 + n + np.arange(pair_i.size)
    scale = np.where(diagonal, 1.0, 1.0 / np.sqrt(2.0))
    coupling = np.zeros((n, pair_i.size))
    coupling[pair_i, cols - 1 - n] += scale * b[pair_j]
    coupling[pair_j[~diagonal], (cols - 1 - n)[~diagonal]] += scale[~diagonal] * b[pair_i[~diagonal]]
    entries[1 : n + 1, 1 + n :] = coupling
    entries[1 + n :, 1 : n + 1] = coupling.T
    entries[cols, cols] = pairs[pair_i, pair_j]
    return FockMatrix(entries, n, pair_i, pair_j, grid.descriptor())


def count_below(model: ModelSpec, grid: TorusGrid, z: float) -> EigencountReport:
    """number of eigenvalues of the discretized H strictly below z"""
    matrix = assemble_H(model, grid)
    shifted = matrix.entries - z * np.eye(matrix.dim)
    count, gap = inertia(shifted)
    return EigencountReport(z, count, "oracle", gap)


def low_spectrum(model: ModelSpec, grid: TorusGrid, k: int) -> List[float]:
    """the k smallest eigenvalues of the discretized H"""
    matrix = assemble_H(model, grid)
    if k < 1 or k > matrix.dim:
        raise ValueError(f"k must lie in 1..{matrix.dim}, got {k}")
    values = linalg.eigh(matrix.entries, eigvals_only=True, subset_by_index=[0, k - 1])
    return [float(x) for x in values]
