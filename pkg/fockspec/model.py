"""
Model data of the Hamiltonian: dispersion eps from finitely many
non-positive Fourier coefficients, u = eps + c, w(p, q) = eps(p) + eps(p+q) + eps(q),
the 0-sector energy u0 and an even form factor v.
"""
import dataclasses
import logging
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from scipy import optimize

from . import ConvergenceError, config_hash

logger = logging.getLogger("FockSpec.Model")

config_keys = [
    "name",
    "regularity",
    "eps.coeffs",
    "eps.zero",
    "c",
    "u0",
    "v.kind",
    "v.params",
]


@dataclasses.dataclass(frozen=True)
class FormFactor(object):
    """Even, real form factor v on the torus

    kinds and params:
        constant: [value]
        cos_poly: [[s1, s2, s3, amplitude], ...] -> sum amplitude * cos(q.s)
        one_minus_cos: [amplitude, axis] -> amplitude * (1 - cos q_axis)
        abs_sin: [amplitude, axis] -> amplitude * |sin q_axis|
    """

    kind: str = "constant"
    params: Tuple = (1.0,)

    kinds = ("constant", "cos_poly", "one_minus_cos", "abs_sin")

    def __post_init__(self):
        if self.kind not in self.kinds:
            raise ValueError(f"can not handle form factor kind '{self.kind}'")
        if self.kind == "cos_poly":
            params = tuple(tuple(float(x) for x in row) for row in self.params)
            if any(len(row) != 4 for row in params):
                raise ValueError("cos_poly params must be rows [s1, s2, s3, amplitude]")
        else:
            params = tuple(float(x) for x in self.params)
            expected = 1 if self.kind == "constant" else 2
            if len(params) != expected:
                raise ValueError(
                    f"form factor '{self.kind}' takes {expected} params, got {len(params)}"
                )
            if self.kind != "constant" and int(params[1]) not in (0, 1, 2):
                raise ValueError(f"axis must be 0, 1 or 2, got {params[1]}")
        object.__setattr__(self, "params", params)

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind == "constant":
            return np.full(q.shape[:-1], self.params[0])
        if self.kind == "cos_poly":
            rows = np.asarray(self.params)
            return np.cos(q @ rows[:, :3].T) @ rows[:, 3]
        amplitude, axis = self.params[0], int(self.params[1])
        if self.kind == "one_minus_cos":
            return amplitude * (1.0 - np.cos(q[..., axis]))
        return amplitude * np.abs(np.sin(q[..., axis]))

    def at_zero(self) -> float:
        return float(self(np.zeros(3)))

    def scaled(self, factor: float) -> "FormFactor":
        if self.kind == "constant":
            return FormFactor(self.kind, (factor * self.params[0],))
        if self.kind == "cos_poly":
            return FormFactor(self.kind, tuple(row[:3] + (factor * row[3],) for row in self.params))
        return FormFactor(self.kind, (factor * self.params[0], self.params[1]))

    def to_config(self) -> Tuple[str, list]:
        if self.kind == "cos_poly":
            return self.kind, [list(row) for row in self.params]
        if self.kind == "constant":
            return self.kind, [self.params[0]]
        return self.kind, [self.params[0], int(self.params[1])]


def _canonical_coeffs(eps_coeffs) -> Tuple:
    if isinstance(eps_coeffs, dict):
        items = eps_coeffs.items()
    elif all(len(row) == 2 for row in eps_coeffs):
        # canonical (s, value) pairs, as handed back by dataclasses.replace
        items = list(eps_coeffs)
    else:
        items = [(tuple(row[:3]), row[3]) for row in eps_coeffs]
    out = {}
    for s, value in items:
        key = tuple(int(x) for x in s)
        if len(key) != 3 or any(float(x) != int(x) for x in s):
            raise ValueError(f"lattice vector {s} must have three integer entries")
        if key == (0, 0, 0):
            raise ValueError("the coefficient of s = 0 is fixed by eps.zero")
        out[key] = float(value)
    return tuple(sorted(out.items()))


@dataclasses.dataclass(frozen=True)
class ModelSpec(object):
    """Data (eps_hat, eps0, c, u0, v) of the Hamiltonian

    Args:
        eps_coeffs: map (or rows [s1, s2, s3, value]) of lattice vectors to eps_hat(s) <= 0
        eps0: the minimal value eps(0)
        c: shift in u = eps + c
        u0: energy of the 0-particle sector
        v: form factor
        w_override: replaces w(p, q) entirely, only meant for negative controls
        name: label used in reports
        regularity: free text metadata
    """

    eps_coeffs: Tuple
    eps0: float = 0.0
    c: float = 0.0
    u0: float = 0.0
    v: FormFactor = FormFactor()
    w_override: Optional[Callable] = None
    name: str = ""
    regularity: str = "smooth"

    def __post_init__(self):
        coeffs = _canonical_coeffs(self.eps_coeffs)
        object.__setattr__(self, "eps_coeffs", coeffs)
        table = dict(coeffs)
        for s, value in table.items():
            if value > 0:
                raise ValueError(f"eps_hat{s} = {value} is positive, dispersion not admissible")
            mirror = tuple(-x for x in s)
            if mirror not in table or abs(table[mirror] - value) > 1e-15 * (1 + abs(value)):
                raise ValueError(f"eps_hat is not symmetric under s -> -s at s = {s}")
        if not isinstance(self.v, FormFactor):
            raise TypeError(f"can not handle type '{type(self.v)}' for v")
        s_mat = np.array([s for s, _ in coeffs], dtype=float).reshape(-1, 3)
        e_vec = np.array([value for _, value in coeffs], dtype=float)
        hessian = (s_mat.T * -e_vec) @ s_mat
        if s_mat.shape[0] == 0 or np.min(np.linalg.eigvalsh(hessian)) <= 0:
            raise ValueError("eps has a degenerate minimum at 0 (Hessian not positive definite)")
        for name, arr in (("_s", s_mat), ("_e", e_vec), ("_hessian", hessian)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def cubic(
        cls,
        c: float = 0.0,
        u0: float = 0.0,
        v: Optional[FormFactor] = None,
        scale: float = 1.0,
    ) -> "ModelSpec":
        """nearest-neighbour model eps = scale * (3 - sum cos q_i)"""
        coeffs = {}
        for axis in range(3):
            for sign in (1, -1):
                s = [0, 0, 0]
                s[axis] = sign
                coeffs[tuple(s)] = -0.5 * scale
        return cls(coeffs, eps0=0.0, c=c, u0=u0, v=v or FormFactor(), name="m_star")

    @classmethod
    def from_config(cls, config: Dict) -> "ModelSpec":
        """build from the flat key-value mapping of a model file

        :param config: mapping with the documented dotted keys
        :return: validated model
        """
        if not isinstance(config, dict):
            raise TypeError(f"model config must be a mapping, got '{type(config)}'")
        unknown = sorted(set(config) - set(config_keys))
        if unknown:
            raise ValueError(f"unknown model config keys {unknown}, allowed are {config_keys}")
        if "eps.coeffs" not in config:
            raise ValueError("model config needs 'eps.coeffs'")
        form = FormFactor(
            config.get("v.kind", "constant"),
            tuple(tuple(row) if isinstance(row, list) else row for row in config.get("v.params", [1.0])),
        )
        return cls(
            config["eps.coeffs"],
            eps0=float(config.get("eps.zero", 0.0)),
            c=float(config.get("c", 0.0)),
            u0=float(config.get("u0", 0.0)),
            v=form,
            name=str(config.get("name", "")),
            regularity=str(config.get("regularity", "smooth")),
        )

    @classmethod
    def from_file(cls, path) -> "ModelSpec":
        with open(path) as fd:
            config = yaml.safe_load(fd)
        return cls.from_config(config or {})

    def to_config(self) -> Dict:
        kind, params = self.v.to_config()
        return {
            "name": self.name,
            "regularity": self.regularity,
            "eps.coeffs": [list(s) + [value] for s, value in self.eps_coeffs],
            "eps.zero": self.eps0,
            "c": self.c,
            "u0": self.u0,
            "v.kind": kind,
            "v.params": params,
        }

    def save(self, path) -> None:
        with open(path, "w") as fd:
            yaml.safe_dump(self.to_config(), fd, default_flow_style=False, sort_keys=False)

    @property
    def hash(self) -> str:
        return config_hash(self.to_config())

    def replace(self, **changes) -> "ModelSpec":
        return dataclasses.replace(self, **changes)

    def with_coupling(self, factor: float) -> "ModelSpec":
        return self.replace(v=self.v.scaled(factor))

    def epsilon(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return self.eps0 + (np.cos(p @ self._s.T) - 1.0) @ self._e

    def grad_epsilon(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return -(np.sin(p @ self._s.T) * self._e) @ self._s

    @property
    def hessian_epsilon(self) -> np.ndarray:
        return self._hessian

    def u(self, p: np.ndarray) -> np.ndarray:
        return self.epsilon(p) + self.c

    def w(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.w_override is not None:
            return np.asarray(self.w_override(p, q), dtype=float)
        return self.epsilon(p) + self.epsilon(p + q) + self.epsilon(q)

    def grad_w_q(self, p: np.ndarray, q: np.ndarray) -> Optional[np.ndarray]:
        if self.w_override is not None:
            return None
        return self.grad_epsilon(p + q) + self.grad_epsilon(q)

    @property
    def m(self) -> float:
        """global minimum of w, attained at (0, 0)"""
        return float(self.w(np.zeros(3), np.zeros(3)))


def eval_epsilon(model: ModelSpec, p) -> Union[float, np.ndarray]:
    value = model.epsilon(p)
    return float(value) if np.ndim(value) == 0 else value


def eval_w(model: ModelSpec, p, q) -> Union[float, np.ndarray]:
    value = model.w(p, q)
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=64)
def max_w(model: ModelSpec, n_search: int = 9) -> Tuple[float, Tuple[float, ...]]:
    """global maximum M of w over the torus pair

    :param model: model data
    :param n_search: nodes per axis of the offset search grid, refined by local ascent
    :return: M and the maximizing point (p1, p2, p3, q1, q2, q3)
    """
    axis = -np.pi + (np.arange(n_search) + 0.5) * 2 * np.pi / n_search
    nodes = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    values = model.w(nodes[:, None, :], nodes[None, :, :])
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    x0 = np.concatenate([nodes[i], nodes[j]])
    result = optimize.minimize(
        lambda x: -float(model.w(x[:3], x[3:])), x0, method="BFGS", options={"gtol": 1e-11}
    )
    best = max(float(values[i, j]), -float(result.fun))
    point = result.x if -float(result.fun) >= float(values[i, j]) else x0
    return best, tuple(float(x) for x in point)


@dataclasses.dataclass(frozen=True)
class QuadraticData(object):
    """Hessians of w at the minimum: Hpp = l1 * W and Hpq = l2 * W"""

    W: np.ndarray
    l1: float
    l2: float

    @property
    def l(self) -> float:
        return (self.l1**2 - self.l2**2) / self.l1

    @property
    def s(self) -> float:
        return self.l2 / self.l1

    @property
    def l0(self) -> float:
        return float(np.sqrt(self.l1**2 / (self.l1**2 - self.l2**2)))

    @property
    def prefactor(self) -> float:
        """l1^(3/2) * det(W)^(1/2), the only combination the threshold constants see"""
        return float(self.l1**1.5 * np.sqrt(np.linalg.det(self.W)))

    def quadratic_form(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """1/2 (l1 (Wp,p) + 2 l2 (Wp,q) + l1 (Wq,q))"""
        wp = p @ self.W
        return 0.5 * (
            self.l1 * np.sum(wp * p, axis=-1)
            + 2 * self.l2 * np.sum(wp * q, axis=-1)
            + self.l1 * np.sum((q @ self.W) * q, axis=-1)
        )


def _hessian_fd(fun: Callable[[np.ndarray], float], dim: int, step: float) -> np.ndarray:
    hess = np.zeros((dim, dim))
    eye = np.eye(dim) * step
    for i in range(dim):
        for j in range(i, dim):
            value = (
                fun(eye[i] + eye[j])
                - fun(eye[i] - eye[j])
                - fun(-eye[i] + eye[j])
                + fun(-eye[i] - eye[j])
            ) / (4 * step**2)
            hess[i, j] = hess[j, i] = value
    return hess


@lru_cache(maxsize=64)
def extract_quadratic_data(model: ModelSpec, step: float = 1e-3, tol: float = 1e-5) -> QuadraticData:
    """W, l1, l2 from central finite differences of w at (0, 0)

    :param model: model data
    :param step: finite difference step
    :param tol: relative tolerance of the proportionality Hpq = l2 * W
    :return: QuadraticData
    """
    hess = _hessian_fd(lambda x: float(model.w(x[:3], x[3:])), 6, step)
    h_pp = 0.5 * (hess[:3, :3] + hess[:3, :3].T)
    h_pq = 0.5 * (hess[:3, 3:] + hess[:3, 3:].T)
    if np.min(np.linalg.eigvalsh(h_pp)) <= 0:
        raise ValueError("Assumption 2.1(ii) violated: Hessian of w in p at (0, 0) is not positive definite")
    l1 = float(np.linalg.det(h_pp) ** (1 / 3))
    W = h_pp / l1
    if np.allclose(h_pp, h_pp[0, 0] * np.eye(3), rtol=0, atol=tol * abs(h_pp[0, 0])):
        l1 = float(h_pp[0, 0])
        W = np.eye(3)
    l2 = float(np.trace(h_pq @ np.linalg.inv(W)) / 3)
    if np.linalg.norm(h_pq - l2 * W) > tol * np.linalg.norm(h_pp):
        raise ValueError("Assumption 2.1(ii) violated: mixed Hessian of w is not proportional to the pure one")
    if l2 == 0 or abs(l2) >= l1:
        raise ValueError(f"Assumption 2.1(ii) violated: need 0 < |l2| < l1, got l1 = {l1}, l2 = {l2}")
    W.setflags(write=False)
    return QuadraticData(W=W, l1=l1, l2=l2)


@dataclasses.dataclass
class ClauseResult(object):
    passed: bool
    detail: str
    values: Dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class AssumptionReport(object):
    """Pass / fail per standing hypothesis, failures are entries rather than errors"""

    clauses: Dict[str, ClauseResult]
    model_hash: str = ""

    @property
    def passed(self) -> bool:
        return all(clause.passed for clause in self.clauses.values())

    def __getitem__(self, key) -> ClauseResult:
        return self.clauses[key]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"clause": key, "passed": clause.passed, "detail": clause.detail}
            for key, clause in self.clauses.items()
        ]
        return pd.DataFrame(rows, columns=["clause", "passed", "detail"])

    def save(self, path) -> None:
        content = {
            "model_hash": self.model_hash,
            "clauses": {
                key: {
                    "passed": bool(clause.passed),
                    "detail": clause.detail,
                    "values": {k: float(v) for k, v in clause.values.items()},
                }
                for key, clause in self.clauses.items()
            },
        }
        with open(path, "w") as fd:
            yaml.safe_dump(content, fd, default_flow_style=False, sort_keys=False)


def _ball_samples(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    directions = rng.normal(size=(count, dim))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = radius * 2.0 ** (-rng.uniform(0, 6, size=count))
    return directions * radii[:, None]


def check_assumptions(
    model: ModelSpec,
    grid,
    delta: float = 0.5,
    samples: int = 100,
    seed: int = 0,
    margin: float = 1e-8,
    max_pair_nodes: int = 512,
) -> AssumptionReport:
    """numeric check of the standing hypotheses on model and grid

    :param model: model data
    :param grid: singular-safe quadrature, used for Lambda in clause (e)
    :param delta: radius of the neighbourhood of the minimum
    :param samples: random samples for the evenness and ball checks
    :param seed: seed of the sampler
    :param margin: w - m must exceed this outside the delta ball
    :param max_pair_nodes: node subsample size for the uniqueness scan
    :return: AssumptionReport with clauses a..e
    """
    from .friedrichs import lambda_fn  # friedrichs builds on this module

    rng = np.random.default_rng(seed)
    m = model.m
    clauses = {}

    p = rng.uniform(-np.pi, np.pi, size=(samples, 3))
    q = rng.uniform(-np.pi, np.pi, size=(samples, 3))
    err_u = float(np.max(np.abs(model.u(p) - model.u(-p))))
    err_v = float(np.max(np.abs(model.v(q) - model.v(-q))))
    err_w = float(np.max(np.abs(model.w(p, q) - model.w(-p, -q))))
    worst = max(err_u, err_v, err_w)
    clauses["a"] = ClauseResult(
        worst <= 1e-12 * (1 + abs(m)),
        f"evenness of u, v, w, worst deviation {worst:.3e}",
        {"u": err_u, "v": err_v, "w": err_w},
    )

    nodes = np.asarray(grid.nodes)
    if nodes.shape[0] > max_pair_nodes:
        pick = np.sort(rng.choice(nodes.shape[0], size=max_pair_nodes, replace=False))
        nodes = nodes[pick]
    gap = model.w(nodes[:, None, :], nodes[None, :, :]) - m
    radius = np.sqrt(np.sum(nodes**2, axis=1)[:, None] + np.sum(nodes**2, axis=1)[None, :])
    outside = radius >= delta
    gap_min = float(np.min(gap[outside])) if np.any(outside) else float("inf")
    clauses["b"] = ClauseResult(
        gap_min > margin and float(np.min(gap)) >= -1e-12 * (1 + abs(m)),
        f"min of w - m outside the {delta}-ball is {gap_min:.6g}",
        {"gap_min": gap_min, "global_min": float(np.min(gap))},
    )

    try:
        quad = extract_quadratic_data(model)
        eig = np.linalg.eigvalsh(quad.W)
        clauses["c"] = ClauseResult(
            True,
            f"l1 = {quad.l1:.6g}, l2 = {quad.l2:.6g}, eig(W) in [{eig[0]:.4g}, {eig[-1]:.4g}]",
            {"l1": quad.l1, "l2": quad.l2, "w_eig_min": float(eig[0])},
        )
    except ValueError as err:
        clauses["c"] = ClauseResult(False, str(err))

    x = _ball_samples(rng, samples, 6, delta)
    ratio = (model.w(x[:, :3], x[:, 3:]) - m) / np.sum(x**2, axis=1)
    c1, c2 = float(np.min(ratio)), float(np.max(ratio))
    clauses["d"] = ClauseResult(
        c1 > 0, f"C1 = {c1:.6g}, C2 = {c2:.6g} on the {delta}-ball", {"C1": c1, "C2": c2}
    )

    if not grid.singular_safe:
        clauses["e"] = ClauseResult(False, "grid can not integrate the threshold singularity")
    else:
        try:
            lam0 = lambda_fn(model, grid, np.zeros(3), m)
            ratios = []
            for direction in (np.array([1.0, 0, 0]), np.ones(3) / np.sqrt(3)):
                for k in range(4):
                    p_k = delta * 2.0 ** (-k) * direction
                    ratios.append((lam0 - lambda_fn(model, grid, p_k, m)) / float(p_k @ p_k))
        except (ConvergenceError, ValueError) as err:
            clauses["e"] = ClauseResult(False, f"Lambda(p, m) not available: {err}")
        else:
            c_fit = float(np.min(ratios))
            clauses["e"] = ClauseResult(
                c_fit > 0,
                f"Lambda(0,m) - Lambda(p,m) >= c p^2 with fitted c = {c_fit:.6g}",
                {"c": c_fit},
            )

    for key, clause in clauses.items():
        if not clause.passed:
            logger.warning(f"clause ({key}) failed: {clause.detail}")
    return AssumptionReport(clauses, model.hash)


def quadratic_remainder_constant(
    model: ModelSpec, radii: Sequence[float] = (0.2, 0.1, 0.05, 0.025), seed: int = 0
) -> float:
    """largest |w - m - quadratic form| / (|p| + |q|)^3 over random points on dyadic spheres"""
    quad = extract_quadratic_data(model)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for radius in radii:
        x = rng.normal(size=(32, 6))
        x *= radius / np.linalg.norm(x, axis=1)[:, None]
        p, q = x[:, :3], x[:, 3:]
        rest = np.abs(model.w(p, q) - model.m - quad.quadratic_form(p, q))
        scale = (np.linalg.norm(p, axis=1) + np.linalg.norm(q, axis=1)) ** 3
        worst = max(worst, float(np.max(rest / scale)))
    return worst
