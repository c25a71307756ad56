from enum import Enum
from typing import Callable, Dict, Optional
import math

import numpy as np
from pydantic import ConfigDict
from scipy.interpolate import BPoly, CubicSpline

from data_classes.common import DataClassModel
from utils.errors import ArgumentError


class WarpKind(str, Enum):
    SPHERE = "sphere"
    FLAT = "flat"
    HYPERBOLIC = "hyperbolic"
    CYLINDER_BUMP = "cylinder_bump"
    CUSTOM = "custom"


class WarpProfile(DataClassModel):
    """Radial warp function f of the metric dr^2 + f(r)^2 g_{S^{n-1}}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: WarpKind
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    f_second: Callable[[np.ndarray], np.ndarray]
    params: Dict[str, float] = {}
    pole_anchored: bool = True
    # right end of the profile's domain (pi for the sphere); None when unbounded
    domain_max: Optional[float] = None
    # step of the centered differences when f', f'' are not analytic
    fd_step: Optional[float] = None

    def with_fd_step(self, h: float) -> "WarpProfile":
        """Rebind finite-difference derivatives to the consuming grid spacing."""
        if self.fd_step is None or self.fd_step == h:
            return self
        return custom_profile(
            self.f,
            params=self.params,
            pole_anchored=self.pole_anchored,
            domain_max=self.domain_max,
            fd_step=h,
        )


def sphere_profile() -> WarpProfile:
    return WarpProfile(
        kind=WarpKind.SPHERE,
        f=np.sin,
        f_prime=np.cos,
        f_second=lambda r: -np.sin(r),
        domain_max=math.pi,
    )


def flat_profile() -> WarpProfile:
    return WarpProfile(
        kind=WarpKind.FLAT,
        f=lambda r: np.asarray(r, dtype=float) * 1.0,
        f_prime=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        f_second=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    )


def hyperbolic_profile() -> WarpProfile:
    return WarpProfile(
        kind=WarpKind.HYPERBOLIC,
        f=np.sinh,
        f_prime=np.cosh,
        f_second=np.sinh,
    )


def cylinder_bump_profile(c_inf: float = 0.5, blend_width: float = 1.0) -> WarpProfile:
    """Flat core f = r on [0, 1], C^2 quintic blend on [1, 1 + w], cylinder f = c_inf beyond."""
    if c_inf <= 0:
        raise ArgumentError(f"cylinder radius c must be > 0, got {c_inf}")
    if blend_width <= 0:
        raise ArgumentError(f"blend width w must be > 0, got {blend_width}")
    r_end = 1.0 + blend_width
    blend = BPoly.from_derivatives([1.0, r_end], [[1.0, 1.0, 0.0], [c_inf, 0.0, 0.0]])
    samples = blend(np.linspace(1.0, r_end, 401))
    if np.min(samples) <= 0:
        raise ArgumentError(f"blend from f=r to c={c_inf} over w={blend_width} leaves f <= 0")
    d_blend = blend.derivative(1)
    dd_blend = blend.derivative(2)

    def _piecewise(core, inner, outer):
        def evaluate(r):
            r = np.asarray(r, dtype=float)
            clipped = np.clip(r, 1.0, r_end)
            return np.where(r <= 1.0, core(r), np.where(r >= r_end, outer(r), inner(clipped)))
        return evaluate

    return WarpProfile(
        kind=WarpKind.CYLINDER_BUMP,
        f=_piecewise(lambda r: r * 1.0, blend, lambda r: np.full_like(r, c_inf)),
        f_prime=_piecewise(np.ones_like, d_blend, np.zeros_like),
        f_second=_piecewise(np.zeros_like, dd_blend, np.zeros_like),
        params={"c": c_inf, "w": blend_width},
    )


def custom_profile(
    f: Callable[[np.ndarray], np.ndarray],
    f_prime: Callable[[np.ndarray], np.ndarray] = None,
    f_second: Callable[[np.ndarray], np.ndarray] = None,
    params: Dict[str, float] = None,
    pole_anchored: bool = True,
    domain_max: Optional[float] = None,
    fd_step: float = 1e-3,
) -> WarpProfile:
    """User profile. Missing derivatives come from centered differences of f."""
    analytic = f_prime is not None and f_second is not None
    if not analytic:
        h = fd_step
        f_prime = lambda r: (f(np.asarray(r) + h) - f(np.asarray(r) - h)) / (2.0 * h)
        f_second = lambda r: (
            f(np.asarray(r) + h) - 2.0 * f(np.asarray(r)) + f(np.asarray(r) - h)
        ) / (h * h)
    return WarpProfile(
        kind=WarpKind.CUSTOM,
        f=f,
        f_prime=f_prime,
        f_second=f_second,
        params=dict(params or {}),
        pole_anchored=pole_anchored,
        domain_max=domain_max,
        fd_step=None if analytic else fd_step,
    )


def tabulated_profile(
    r_samples, f_samples, pole_anchored: bool = True, fd_step: float = 1e-3
) -> WarpProfile:
    """Profile from samples; odd extension through the pole for pole-anchored data."""
    r_samples = np.asarray(r_samples, dtype=float)
    spline = CubicSpline(r_samples, np.asarray(f_samples, dtype=float))

    def f(r):
        r = np.asarray(r, dtype=float)
        if pole_anchored:
            return np.sign(r) * spline(np.abs(r))
        return spline(r)

    return custom_profile(
        f,
        params={"r_min": float(r_samples[0]), "r_max": float(r_samples[-1])},
        pole_anchored=pole_anchored,
        domain_max=float(r_samples[-1]),
        fd_step=fd_step,
    )
