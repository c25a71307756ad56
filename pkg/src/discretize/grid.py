from enum import Enum
from typing import Optional
import logging
import math

import numpy as np
from pydantic import ConfigDict, Field

from data_classes.common import DataClassModel
from geometry.model_manifold import ModelManifold
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


class BoundaryCondition(str, Enum):
    POLE_NEUMANN = "pole_neumann"
    DIRICHLET = "dirichlet"


class RadialGrid(DataClassModel):
    """Uniform mesh r_0 < ... < r_{N+1} with spacing h = (r_max - r_inner)/(N + 1).

    Unknowns live on the active nodes: 0..N behind a pole, 1..N otherwise.
    The outer node r_{N+1} is always a Dirichlet node.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    r_inner: float
    r_max: float
    num_nodes: int = Field(ge=1)
    bc_inner: BoundaryCondition
    bc_outer: BoundaryCondition = BoundaryCondition.DIRICHLET
    nodes: np.ndarray = Field(exclude=True)

    @property
    def h(self) -> float:
        return (self.r_max - self.r_inner) / (self.num_nodes + 1)

    @property
    def first_active(self) -> int:
        return 0 if self.bc_inner == BoundaryCondition.POLE_NEUMANN else 1

    @property
    def active(self) -> slice:
        return slice(self.first_active, self.num_nodes + 1)

    @property
    def r_active(self) -> np.ndarray:
        return self.nodes[self.active]

    @property
    def size(self) -> int:
        return self.num_nodes + 1 - self.first_active

    def summary(self) -> dict:
        return {
            "r_inner": self.r_inner,
            "r_max": self.r_max,
            "N": self.num_nodes,
            "bc": self.bc_inner.value,
        }


def build_grid(
    m: ModelManifold,
    r_inner: float,
    r_max: float,
    N: int,
    bc_inner: Optional[BoundaryCondition] = None,
) -> RadialGrid:
    if not (math.isfinite(r_max) and r_max > r_inner >= 0):
        raise ConfigError(f"grid needs r_max > r_inner >= 0, got [{r_inner}, {r_max}]")
    if int(N) != N or N < 1:
        raise ConfigError(f"grid needs at least one interior node, got N={N}")
    domain_max = m.warp.domain_max
    if domain_max is not None and r_max > domain_max * (1 + 1e-12):
        raise ConfigError(f"r_max={r_max} exceeds the domain of {m.label or m.warp.kind.value} ({domain_max})")
    has_pole = r_inner == 0 and m.r_pole
    if bc_inner is None:
        bc_inner = BoundaryCondition.POLE_NEUMANN if has_pole else BoundaryCondition.DIRICHLET
    bc_inner = BoundaryCondition(bc_inner)
    if bc_inner == BoundaryCondition.POLE_NEUMANN and not has_pole:
        raise ConfigError(
            f"pole_neumann requested at r_inner={r_inner}, which is not a smooth pole"
        )
    nodes = np.linspace(r_inner, r_max, int(N) + 2)
    return RadialGrid(
        r_inner=float(r_inner),
        r_max=float(r_max),
        num_nodes=int(N),
        bc_inner=bc_inner,
        nodes=nodes,
    )


def build_exterior_grid(m: ModelManifold, R: float, r_max: float, h: float) -> RadialGrid:
    """Dirichlet grid on [R', r_max], R' = R snapped to the spacing-h grid anchored at 0.

    Exterior grids sharing r_max and h are nested: their nodes coincide.
    """
    total = int(round(r_max / h))
    if not math.isclose(total * h, r_max, rel_tol=1e-9):
        raise ConfigError(f"r_max={r_max} is not a multiple of the spacing {h}")
    start = int(round(R / h))
    N = total - start - 1
    if start < 1 or N < 1:
        raise ConfigError(f"exterior radius R={R} leaves no interior nodes below r_max={r_max}")
    nodes = h * np.arange(start, total + 1, dtype=float)
    return RadialGrid(
        r_inner=float(nodes[0]),
        r_max=float(r_max),
        num_nodes=N,
        bc_inner=BoundaryCondition.DIRICHLET,
        nodes=nodes,
    )


class DiscreteField(DataClassModel):
    """Nodal values on the active nodes of a grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray = Field(exclude=True)
    positive: bool = False

    @classmethod
    def from_values(cls, values) -> "DiscreteField":
        values = np.asarray(values, dtype=float)
        return cls(values=values, positive=bool(np.all(values > 0)))


def as_values(v) -> np.ndarray:
    if isinstance(v, DiscreteField):
        return v.values
    return np.asarray(v, dtype=float)
