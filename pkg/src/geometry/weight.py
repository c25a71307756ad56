from typing import Callable

import numpy as np
from pydantic import ConfigDict

from data_classes.common import DataClassModel
from utils.errors import ArgumentError


def smooth_radius(r):
    """r_s(r) = sqrt(1 + r^2); within distance 1 of r everywhere."""
    return np.sqrt(1.0 + np.asarray(r, dtype=float) ** 2)


class WeightSpec(DataClassModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    xi: float = 1.0
    smooth_radius: Callable[[np.ndarray], np.ndarray] = smooth_radius


def weight(w: WeightSpec, r, alpha: float):
    """rho(r)^alpha = exp(-alpha r_s(r)); exactly 1 for alpha = 0."""
    if alpha < 0:
        raise ArgumentError(f"weight exponent alpha must be >= 0, got {alpha}")
    r = np.asarray(r, dtype=float)
    if alpha == 0:
        value = np.ones_like(r)
    else:
        value = np.exp(-alpha * w.smooth_radius(r))
    return float(value) if value.ndim == 0 else value
