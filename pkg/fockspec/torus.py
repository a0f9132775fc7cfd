"""
Midpoint quadrature on the torus T^3 = (-pi, pi]^3.

Uniform grids place one node in every cell of size 2*pi/n. Graded grids
split the cells around the origin dyadically, level by level, so that an
integrable |q|^-2 singularity at q = 0 is resolved. The plain Lebesgue
measure is used throughout, integrating 1 over the torus gives (2*pi)^3.
"""
import logging
from itertools import product
from typing import Callable, Sequence, Union, Dict

import numpy as np

logger = logging.getLogger("FockSpec.Torus")

TORUS_VOLUME = (2 * np.pi) ** 3

_children = np.array(list(product((-0.25, 0.25), repeat=3)))


class TorusGrid(object):
    """Immutable node / weight set on (-pi, pi]^3

    Args:
        n_per_axis: cells per axis on the coarsest level, at least 2
        offset: shift nodes by half a cell so that q = 0 is never a node
        grading_levels: number of dyadic refinements toward the origin
        verbose: more info during construction
    """

    def __init__(
        self,
        n_per_axis: int,
        offset: bool = True,
        grading_levels: int = 0,
        verbose: bool = True,
    ):
        if not isinstance(n_per_axis, (int, np.integer)) or isinstance(n_per_axis, bool):
            raise TypeError(f"can not handle type '{type(n_per_axis)}' for n_per_axis")
        if n_per_axis < 2:
            raise ValueError(f"n_per_axis must be at least 2, got {n_per_axis}")
        if grading_levels < 0:
            raise ValueError(f"grading_levels must be non-negative, got {grading_levels}")
        self.n_per_axis = int(n_per_axis)
        self.offset = bool(offset)
        self.grading_levels = int(grading_levels)
        self.step = 2 * np.pi / self.n_per_axis

        centers, sizes, levels = self._build_cells(verbose)
        for arr in (centers, sizes, levels):
            arr.setflags(write=False)
        self._nodes = centers
        self._spacing = sizes
        self._levels = levels
        self._weights = sizes**3
        self._weights.setflags(write=False)

    def _build_cells(self, verbose: bool):
        h = self.step
        if self.offset:
            axis = -np.pi + (np.arange(self.n_per_axis) + 0.5) * h
        else:
            axis = -np.pi + (np.arange(self.n_per_axis) + 1.0) * h
        centers = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
        centers = centers.reshape(-1, 3)
        sizes = np.full(centers.shape[0], h)
        levels = np.zeros(centers.shape[0], dtype=int)

        for level in range(1, self.grading_levels + 1):
            box = np.pi * 2.0 ** (-level)
            reach = np.max(np.abs(centers), axis=1) + 0.5 * sizes
            split = (levels == level - 1) & (reach <= box * (1 + 1e-12))
            if not np.any(split):
                if verbose:
                    logger.warning(
                        f"grading level {level} finds no cell inside the box "
                        f"|q| <= {box:.4g}, refinement stops here"
                    )
                break
            parents = centers[split]
            parent_size = sizes[split]
            kids = parents[:, None, :] + _children[None, :, :] * parent_size[:, None, None]
            centers = np.concatenate([centers[~split], kids.reshape(-1, 3)])
            sizes = np.concatenate([sizes[~split], np.repeat(0.5 * parent_size, 8)])
            levels = np.concatenate([levels[~split], np.full(8 * parents.shape[0], level)])
        return centers, sizes, levels

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def spacing(self) -> np.ndarray:
        return self._spacing

    @property
    def levels(self) -> np.ndarray:
        return self._levels

    @property
    def size(self) -> int:
        return int(self._nodes.shape[0])

    @property
    def min_spacing(self) -> float:
        return float(np.min(self._spacing))

    @property
    def singular_safe(self) -> bool:
        return self.offset or self.grading_levels > 0

    def __len__(self) -> int:
        return self.size

    def __repr__(self):
        return (
            f"TorusGrid(n_per_axis={self.n_per_axis}, offset={self.offset}, "
            f"grading_levels={self.grading_levels}, size={self.size})"
        )

    def descriptor(self) -> Dict:
        return {
            "kind": "torus",
            "n_per_axis": self.n_per_axis,
            "offset": self.offset,
            "grading_levels": self.grading_levels,
            "size": self.size,
            "min_spacing": self.min_spacing,
        }

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """weighted node sum of f

        :param f: vectorized field, maps an (N, 3) array of points to N values
        :return: sum of weights * f(nodes), reduced in node order
        """
        values = np.asarray(f(self._nodes), dtype=float)
        values = np.broadcast_to(values, self._weights.shape)
        bad = ~np.isfinite(values)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise ValueError(
                f"non-finite integrand value {values[idx]} at node {self._nodes[idx].tolist()}"
            )
        # np.sum reduces contiguous arrays pairwise in a fixed order
        return float(np.sum(self._weights * values))


class GridLadder(object):
    """Uniform offset grids combined by Richardson extrapolation in the step

    The midpoint rule on offset grids has an error expansion in odd powers of
    the step when the integrand has a |q|^-2 point singularity at the origin,
    so the default exponents (1, 3) remove the two leading terms.

    Args:
        n_list: cells per axis of the member grids, one more than exponents
        exponents: powers of the step eliminated by the extrapolation
    """

    def __init__(self, n_list: Sequence[int] = (16, 24, 32), exponents: Sequence[float] = (1, 3)):
        if len(n_list) != len(exponents) + 1:
            raise ValueError(
                f"need {len(exponents) + 1} grids for {len(exponents)} exponents, got {len(n_list)}"
            )
        self.n_list = tuple(int(n) for n in n_list)
        self.exponents = tuple(float(e) for e in exponents)
        self.grids = [TorusGrid(n, offset=True, verbose=False) for n in self.n_list]
        self.steps = [grid.step for grid in self.grids]

    @property
    def nodes(self) -> np.ndarray:
        return self.grids[-1].nodes

    @property
    def min_spacing(self) -> float:
        return min(grid.min_spacing for grid in self.grids)

    @property
    def singular_safe(self) -> bool:
        return True

    def __repr__(self):
        return f"GridLadder(n_list={self.n_list}, exponents={self.exponents})"

    def descriptor(self) -> Dict:
        return {
            "kind": "ladder",
            "n_list": list(self.n_list),
            "exponents": list(self.exponents),
            "min_spacing": self.min_spacing,
        }

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        values = [grid.integrate(f) for grid in self.grids]
        return richardson(values, self.steps, self.exponents)


Quadrature = Union[TorusGrid, GridLadder]


def build_grid(n_per_axis: int, offset: bool = True, grading_levels: int = 0) -> TorusGrid:
    return TorusGrid(n_per_axis, offset=offset, grading_levels=grading_levels)


def integrate(grid: Quadrature, f: Callable[[np.ndarray], np.ndarray]) -> float:
    return grid.integrate(f)


def integrate_singular(grid: Quadrature, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """quadrature of a field with at worst a |q|^-2 singularity at the origin

    :param grid: offset or graded grid, or a ladder of offset grids
    :param f: vectorized field
    :return: quadrature value
    """
    if not grid.singular_safe:
        raise ValueError(
            f"{grid!r} may place a node on the singularity, use offset=True or grading"
        )
    return grid.integrate(f)


def richardson(values: Sequence[float], steps: Sequence[float], exponents: Sequence[float]) -> float:
    """extrapolate values[i] ~ I + sum_k c_k * steps[i]**exponents[k] to step zero

    :param values: approximations, one per step
    :param steps: step sizes belonging to the values
    :param exponents: error exponents to eliminate, len(values) - 1 of them
    :return: the extrapolated limit I
    """
    values = np.asarray(values, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if values.shape != steps.shape or values.size != len(exponents) + 1:
        raise ValueError(
            f"richardson needs len(exponents) + 1 values, got {values.size} values "
            f"and {len(exponents)} exponents"
        )
    system = np.column_stack([np.ones_like(steps)] + [steps**e for e in exponents])
    return float(np.linalg.solve(system, values)[0])
