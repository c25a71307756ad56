"""Closed-form reference constants used as oracles throughout the lab."""

from typing import List, Tuple, Union
import math

import numpy as np
from scipy.special import gamma

from utils.errors import ArgumentError


def _check_dimension(n: int) -> None:
    if int(n) != n or n < 3:
        raise ArgumentError(f"dimension must be an integer >= 3, got {n}")


def conformal_coefficient(n: int) -> float:
    """a_n = 4(n-1)/(n-2)."""
    _check_dimension(n)
    return 4.0 * (n - 1) / (n - 2)


def critical_exponent(n: int) -> float:
    """p_crit = 2n/(n-2)."""
    _check_dimension(n)
    return 2.0 * n / (n - 2)


def unit_sphere_area(m: int) -> float:
    """Volume of the unit round m-sphere, 2 pi^{(m+1)/2} / Gamma((m+1)/2)."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / gamma((m + 1) / 2.0)


def sphere_yamabe_constant(n: int) -> float:
    _check_dimension(n)
    return n * (n - 1) * unit_sphere_area(n) ** (2.0 / n)


def model_space_sigma(n: int, k: int, c: Union[int, float]) -> Union[int, float]:
    """Constant scalar curvature of the warped model space with parameters (k, c).

    Integer inputs give an exact integer result.
    """
    _check_dimension(n)
    if int(k) != k or not 0 <= k <= n - 2:
        raise ArgumentError(f"k must be an integer in [0, {n - 2}], got {k}")
    if not -1 <= c <= 1:
        raise ArgumentError(f"c must lie in [-1, 1], got {c}")
    return -k * (k + 1) * c * c + (n - k - 1) * (n - k - 2)


def model_space_positive_for_all_c(n: int, k: int) -> bool:
    # the minimum over c in [-1, 1] sits at |c| = 1
    return model_space_sigma(n, k, 1) > 0


def model_space_conformally_round(c: float) -> bool:
    """|c| = 1: conformal to the sphere minus a lower-dimensional sphere."""
    if not -1 <= c <= 1:
        raise ArgumentError(f"c must lie in [-1, 1], got {c}")
    return abs(c) == 1


def model_space_table(n: int) -> List[Tuple[int, int, int, bool]]:
    return [
        (
            k,
            model_space_sigma(n, k, 0),
            model_space_sigma(n, k, 1),
            model_space_positive_for_all_c(n, k),
        )
        for k in range(n - 1)
    ]


def aubin_talenti_bubble(n: int, lam: float, r):
    """u(r) = (1 + lam^2 r^2)^{-(n-2)/2}."""
    _check_dimension(n)
    if lam <= 0:
        raise ArgumentError(f"bubble scale must be > 0, got {lam}")
    r = np.asarray(r, dtype=float)
    value = (1.0 + (lam * r) ** 2) ** (-(n - 2) / 2.0)
    return float(value) if value.ndim == 0 else value


def bubble_half_width(n: int, lam: float) -> float:
    """Radius at which the bubble drops to half of its center value."""
    _check_dimension(n)
    return math.sqrt(2.0 ** (2.0 / (n - 2)) - 1.0) / lam
