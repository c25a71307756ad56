import logging

import numpy as np

from data_classes.config import MinimizeConfig
from discretize.assembly import OperatorAssembly
from minimize.minimizer import QuotientProblem, initial_field, solve_quotient

logger = logging.getLogger(__name__)


def embedding_constant(
    a: OperatorAssembly,
    alpha: float,
    p: float,
    tol: float = 1e-8,
    max_iter: int = 20000,
) -> float:
    """Best C with ||rho^alpha v||_p <= C ||v||_{H_1^2} on the truncated domain.

    Minimizes (||dv||^2 + ||v||^2) / ||rho^alpha v||_p^2 with the same fixed
    point as the Yamabe quotient; C is the inverse square root of the minimum.
    """
    cfg = MinimizeConfig(residual_tol=tol, max_iter=max_iter)
    problem = QuotientProblem(a, alpha, p, sobolev=True)
    _, value, _, iterations, _ = solve_quotient(problem, initial_field(a, cfg), cfg)
    constant = 1.0 / np.sqrt(value)
    logger.info(f"Embedding constant alpha={alpha}, p={p:.6g}: C={constant:.8g} ({iterations} iterations)")
    return float(constant)
