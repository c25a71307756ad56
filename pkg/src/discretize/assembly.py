from typing import Dict, Tuple
import logging

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import ConfigDict, Field, PrivateAttr
from scipy.linalg import cho_solve_banded, cholesky_banded

from data_classes.common import DataClassModel
from discretize.grid import RadialGrid
from geometry.model_manifold import ModelManifold, scalar_curvature, volume_density
from geometry.weight import WeightSpec, weight
from utils.errors import AssemblyError

logger = logging.getLogger(__name__)

SIGMA_LIMIT = 1e12
GAUSS_POINTS = 5


class OperatorAssembly(DataClassModel):
    """Discrete forms on the active nodes of a radial grid.

    Every form is the exact form restricted to continuous piecewise-linear
    fields, integrated elementwise with Gauss-Legendre quadrature. K = A + S
    and M are symmetric tridiagonal; the weighted L^p mass is evaluated at the
    same quadrature points.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: ModelManifold
    grid: RadialGrid
    weight_spec: WeightSpec
    stiffness_diag: np.ndarray = Field(exclude=True)
    stiffness_off: np.ndarray = Field(exclude=True)
    potential_diag: np.ndarray = Field(exclude=True)
    potential_off: np.ndarray = Field(exclude=True)
    mass_diag: np.ndarray = Field(exclude=True)
    mass_off: np.ndarray = Field(exclude=True)
    sigma_nodes: np.ndarray = Field(exclude=True)
    sigma_bounds: Tuple[float, float]
    # (elements, points): radii, theta times quadrature weight, shape functions
    point_r: np.ndarray = Field(exclude=True)
    point_measure: np.ndarray = Field(exclude=True)
    shape: np.ndarray = Field(exclude=True)

    _weighted: Dict[Tuple[float, float], np.ndarray] = PrivateAttr(default_factory=dict)
    _mass_factor: list = PrivateAttr(default_factory=list)

    @property
    def size(self) -> int:
        return self.mass_diag.shape[0]

    @property
    def r(self) -> np.ndarray:
        return self.grid.r_active

    @property
    def operator_diag(self) -> np.ndarray:
        return self.stiffness_diag + self.potential_diag

    @property
    def operator_off(self) -> np.ndarray:
        return self.stiffness_off + self.potential_off

    def point_weights(self, alpha: float, p: float) -> np.ndarray:
        """Quadrature weights of theta rho^{alpha p} at the element points."""
        key = (float(alpha), float(p))
        if key not in self._weighted:
            self._weighted[key] = self.point_measure * weight(self.weight_spec, self.point_r, alpha * p)
        return self._weighted[key]

    def interpolate(self, v: np.ndarray) -> np.ndarray:
        """Values of the piecewise-linear field at the element quadrature points."""
        full = np.zeros(self.grid.num_nodes + 2)
        full[self.grid.active] = v
        return np.outer(full[:-1], self.shape[:, 0]) + np.outer(full[1:], self.shape[:, 1])

    def load(self, g: np.ndarray) -> np.ndarray:
        """Vector (sum over points of g * phi_i) on the active nodes, g given per point."""
        full = np.zeros(self.grid.num_nodes + 2)
        full[:-1] += g @ self.shape[:, 0]
        full[1:] += g @ self.shape[:, 1]
        return full[self.grid.active]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """(A + S) v."""
        return tridiagonal_apply(self.operator_diag, self.operator_off, v)

    def stiffness_energy(self, v: np.ndarray) -> float:
        """A(v, v) summed over elements from nodal jumps; Dirichlet ends contribute k v^2."""
        if v.shape[0] == 1:
            return float(self.stiffness_diag[0] * v[0] ** 2)
        ends = (self.stiffness_diag[0] + self.stiffness_off[0]) * v[0] ** 2
        ends += (self.stiffness_diag[-1] + self.stiffness_off[-1]) * v[-1] ** 2
        return float(-self.stiffness_off @ np.diff(v) ** 2 + ends)

    def energy(self, v: np.ndarray) -> float:
        """A(v, v) + S(v, v)."""
        return self.stiffness_energy(v) + float(v @ tridiagonal_apply(self.potential_diag, self.potential_off, v))

    def weighted_mass(self, alpha: float, p: float, values: np.ndarray = None) -> Tuple[np.ndarray, np.ndarray]:
        """Tridiagonal sum over points of theta rho^{alpha p} |v|^{p-2} phi_i phi_j.

        Without values this is the p = 2 weighted mass W_alpha.
        """
        g = self.point_weights(alpha, p)
        if values is not None:
            g = g * np.abs(self.interpolate(values)) ** (p - 2.0)
        local = np.einsum("eq,qi,qj->eij", g, self.shape, self.shape)
        return _gather(local, self.grid.first_active, self.grid.num_nodes)

    def apply_mass(self, v: np.ndarray) -> np.ndarray:
        return tridiagonal_apply(self.mass_diag, self.mass_off, v)

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        if not self._mass_factor:
            self._mass_factor.append(cholesky_banded(banded_upper(self.mass_diag, self.mass_off)))
        return cho_solve_banded((self._mass_factor[0], False), rhs)

    def banded(self, shift: float = 0.0, sobolev: bool = False) -> np.ndarray:
        """Upper banded storage of K - shift*M, or of the H_1^2 form, for scipy.linalg."""
        if sobolev:
            return banded_upper(
                self.stiffness_diag / self.model.a_n + self.mass_diag,
                self.stiffness_off / self.model.a_n + self.mass_off,
            )
        return banded_upper(
            self.operator_diag - shift * self.mass_diag,
            self.operator_off - shift * self.mass_off,
        )

    def summary(self) -> dict:
        return {
            "model": self.model.label,
            "n": self.model.n,
            **self.grid.summary(),
        }


def banded_upper(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    ab = np.zeros((2, diag.shape[0]))
    ab[0, 1:] = off
    ab[1] = diag
    return ab


def tridiagonal_apply(diag: np.ndarray, off: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = diag * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def _gather(local: np.ndarray, first: int, last: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sum 2x2 element matrices (elements, 2, 2) into the active tridiagonal."""
    n_nodes = local.shape[0] + 1
    diag = np.zeros(n_nodes)
    diag[:-1] += local[:, 0, 0]
    diag[1:] += local[:, 1, 1]
    off = local[:, 0, 1]
    return diag[first : last + 1], off[first:last].copy()


def _raise_bad_radius(kind: str, index: int, radius: float):
    raise AssemblyError(f"{kind} at node {index} (r={radius:.6g})", node=index, radius=radius)


def assemble(m: ModelManifold, g: RadialGrid, w: WeightSpec = None) -> OperatorAssembly:
    w = w or WeightSpec()
    h = g.h
    m = m.with_fd_step(h)
    nodes = g.nodes
    first, last = g.first_active, g.num_nodes

    xi, wq = leggauss(GAUSS_POINTS)
    shape = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0], axis=1)
    point_r = nodes[:-1, None] + h * (1.0 + xi[None, :]) / 2.0

    f_points = np.asarray(m.warp.f(point_r), dtype=float)
    bad = np.argwhere(~(f_points > 0))
    if bad.size:
        e = int(bad[0, 0])
        _raise_bad_radius("warp f <= 0 next to element", e, float(point_r[tuple(bad[0])]))
    r_act = nodes[first : last + 1]
    f_nodes = np.asarray(m.warp.f(r_act[r_act > 0]), dtype=float)
    bad = np.flatnonzero(~(f_nodes > 0))
    if bad.size:
        i = int(np.flatnonzero(r_act > 0)[bad[0]]) + first
        _raise_bad_radius("warp f <= 0", i, float(nodes[i]))

    sigma_points = scalar_curvature(m, point_r.ravel()).reshape(point_r.shape)
    bad = np.argwhere(~(np.abs(sigma_points) < SIGMA_LIMIT))
    if bad.size:
        e = int(bad[0, 0])
        _raise_bad_radius("scalar curvature unbounded next to element", e, float(point_r[tuple(bad[0])]))
    sigma_nodes = scalar_curvature(m, r_act)
    bad = np.flatnonzero(~(np.abs(sigma_nodes) < SIGMA_LIMIT))
    if bad.size:
        i = int(bad[0]) + first
        _raise_bad_radius("scalar curvature unbounded", i, float(nodes[i]))

    measure = volume_density(m, point_r) * (h / 2.0) * wq[None, :]
    gradient = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h**2
    local_stiffness = m.a_n * measure.sum(axis=1)[:, None, None] * gradient[None]
    local_mass = np.einsum("eq,qi,qj->eij", measure, shape, shape)
    local_potential = np.einsum("eq,qi,qj->eij", measure * sigma_points, shape, shape)

    stiffness_diag, stiffness_off = _gather(local_stiffness, first, last)
    mass_diag, mass_off = _gather(local_mass, first, last)
    potential_diag, potential_off = _gather(local_potential, first, last)

    lower = min(float(sigma_points.min()), float(sigma_nodes.min()))
    upper = max(float(sigma_points.max()), float(sigma_nodes.max()))
    logger.info(
        f"Assembled {m.label or m.warp.kind.value} on [{g.r_inner}, {g.r_max}] "
        f"with {r_act.shape[0]} active nodes, sigma in [{lower:.6g}, {upper:.6g}]"
    )
    return OperatorAssembly(
        model=m,
        grid=g,
        weight_spec=w,
        stiffness_diag=stiffness_diag,
        stiffness_off=stiffness_off,
        potential_diag=potential_diag,
        potential_off=potential_off,
        mass_diag=mass_diag,
        mass_off=mass_off,
        sigma_nodes=sigma_nodes,
        sigma_bounds=(lower, upper),
        point_r=point_r,
        point_measure=measure,
        shape=shape,
    )
