import logging

import numpy as np

from data_classes.results import Extremal
from discretize.grid import RadialGrid
from geometry.model_manifold import ModelManifold, scalar_curvature
from geometry.weight import WeightSpec, weight

logger = logging.getLogger(__name__)


def max_point_check(m: ModelManifold, e: Extremal, tol: float = 1e-6, w: WeightSpec = None) -> bool:
    """Q rho^{alpha p}(r*) v(r*)^{p-2} >= sigma(r*) - tol at the argmax node r*."""
    w = w or WeightSpec()
    sigma = scalar_curvature(m, e.argmax_r)
    lhs = e.Q * weight(w, e.argmax_r, e.alpha * e.p) * e.sup_v ** (e.p - 2.0)
    passed = bool(lhs >= sigma - tol)
    logger.info(f"Max-point check at r={e.argmax_r:.6g}: {lhs:.8g} vs sigma {sigma:.8g} -> {passed}")
    return passed


def decay_check(
    e: Extremal, g: RadialGrid, fraction: float = 0.1, tol: float = 0.05, compact: bool = False
) -> bool:
    """Small values on the outer `fraction` of the domain and an interior maximum.

    On a compact model (the truncation is the whole manifold) only the
    interior-maximum part applies.
    """
    outer = e.r >= g.r_max - fraction * (g.r_max - g.r_inner)
    interior_max = not bool(outer[e.argmax_node])
    if compact:
        return interior_max
    tail = float(np.max(e.v[outer])) if np.any(outer) else 0.0
    passed = interior_max and tail <= tol * e.sup_v
    logger.info(f"Decay check: outer max {tail:.3e} vs sup {e.sup_v:.3e} -> {passed}")
    return passed
