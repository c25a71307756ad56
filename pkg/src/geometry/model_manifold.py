import math

import numpy as np
from pydantic import ConfigDict, Field

from data_classes.common import DataClassModel
from geometry.constants import conformal_coefficient, critical_exponent, unit_sphere_area
from geometry.warp_profiles import WarpProfile
from utils.errors import DomainError

# offset used to read f'''(0) off f''(r)/r at a smooth pole
_POLE_OFFSET = 1e-6


class ModelManifold(DataClassModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=3)
    warp: WarpProfile
    r_pole: bool = True
    label: str = ""

    @property
    def a_n(self) -> float:
        return conformal_coefficient(self.n)

    @property
    def p_crit(self) -> float:
        return critical_exponent(self.n)

    @property
    def compact(self) -> bool:
        return self.warp.domain_max is not None

    def with_fd_step(self, h: float) -> "ModelManifold":
        warp = self.warp.with_fd_step(h)
        if warp is self.warp:
            return self
        return self.model_copy(update={"warp": warp})


def scalar_curvature(m: ModelManifold, r):
    """sigma(r) = -2(n-1) f''/f + (n-1)(n-2)(1 - f'^2)/f^2.

    At a smooth pole the limit -n(n-1) f'''(0) is returned.
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    n = m.n
    at_pole = r == 0.0
    if np.any(at_pole) and not m.r_pole:
        raise DomainError(f"{m.label or 'model'} has no smooth pole at r = 0")
    if np.any(r < 0):
        raise DomainError(f"negative radius {float(r.min())}")
    sigma = np.empty_like(r)
    off = ~at_pole
    if np.any(off):
        f = np.asarray(m.warp.f(r[off]), dtype=float)
        fp = np.asarray(m.warp.f_prime(r[off]), dtype=float)
        fpp = np.asarray(m.warp.f_second(r[off]), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma[off] = -2.0 * (n - 1) * fpp / f + (n - 1) * (n - 2) * (1.0 - fp * fp) / (f * f)
    if np.any(at_pole):
        third = float(np.asarray(m.warp.f_second(np.array([_POLE_OFFSET])))[0]) / _POLE_OFFSET
        sigma[at_pole] = -n * (n - 1) * third
    return float(sigma[0]) if scalar else sigma


def volume_density(m: ModelManifold, r):
    """theta(r) = |S^{n-1}| f(r)^{n-1}."""
    r = np.asarray(r, dtype=float)
    theta = unit_sphere_area(m.n - 1) * np.asarray(m.warp.f(r), dtype=float) ** (m.n - 1)
    return float(theta) if np.ndim(theta) == 0 else theta
