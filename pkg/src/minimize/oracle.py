"""Brute-force multi-start optimizer over nodal values, for small grids."""

import logging

import numpy as np
from scipy.optimize import minimize

from discretize.assembly import OperatorAssembly
from discretize.forms import quotient, quotient_gradient
from utils.errors import ArgumentError

logger = logging.getLogger(__name__)

MAX_ORACLE_NODES = 32


def brute_force_Q(
    a: OperatorAssembly, alpha: float, p: float, num_starts: int = 20, seed: int = 0
) -> float:
    if a.size > MAX_ORACLE_NODES:
        raise ArgumentError(f"brute-force oracle is meant for small grids, got {a.size} nodes")
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(num_starts):
        x0 = rng.uniform(0.1, 1.0, size=a.size)
        result = minimize(
            lambda x: quotient(a, x, alpha, p),
            x0,
            jac=lambda x: quotient_gradient(a, x, alpha, p),
            method="BFGS",
            options={"gtol": 1e-12, "maxiter": 20000},
        )
        best = min(best, float(result.fun))
    logger.info(f"Brute-force oracle over {num_starts} starts: Q={best:.10g}")
    return best
