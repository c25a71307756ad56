from typing import List
import logging

from data_classes.config import MinimizeConfig
from data_classes.results import ConsistencyReport, DichotomyReport
from discretize.assembly import OperatorAssembly
from discretize.forms import quotient
from minimize.minimizer import minimize_Q
from spectral.eigensolver import mu_bottom

logger = logging.getLogger(__name__)


def q_equals_mu_check(a: OperatorAssembly, tol: float = 1e-8, cfg: MinimizeConfig = None) -> ConsistencyReport:
    """Q^0_2 and mu solve the same variational problem; compare both solvers."""
    cfg = cfg or MinimizeConfig(residual_tol=1e-10)
    mu = mu_bottom(a).value
    q = minimize_Q(a, 0.0, 2.0, cfg).Q
    gap = abs(q - mu)
    passed = gap <= tol * (1.0 + abs(mu))
    if not passed:
        logger.warning(f"Inconsistent p=2 quotient: Q={q!r} vs mu={mu!r}")
    return ConsistencyReport(mu=mu, q=q, gap=gap, tol=tol, passed=passed)


def class_dichotomy_check(
    a: OperatorAssembly, exponents: List[float], cfg: MinimizeConfig = None
) -> DichotomyReport:
    """Sign agreement of mu and the Q_p estimates.

    For mu > 0 every minimized Q_p must be positive. For mu <= 0 the bottom
    eigenfield has nonpositive quotient for every p, so Q_p <= 0.
    """
    cfg = cfg or MinimizeConfig()
    spectral = mu_bottom(a)
    mu = spectral.value
    q_by_p = {}
    if mu > 0:
        for p in exponents:
            q_by_p[repr(float(p))] = minimize_Q(a, 0.0, p, cfg).Q
        liminf_positive = min(q_by_p.values()) > 0
        passed = liminf_positive
        witness = "minimizer"
    else:
        for p in exponents:
            q_by_p[repr(float(p))] = quotient(a, spectral.eigenfield, 0.0, p)
        liminf_positive = None
        passed = all(q <= 0 for q in q_by_p.values()) if mu < 0 else True
        witness = "eigenfield"
    logger.info(f"Sign dichotomy: mu={mu:.6g}, Q_p={q_by_p} -> {passed}")
    return DichotomyReport(
        mu=mu, q_by_p=q_by_p, witness=witness, liminf_positive=liminf_positive, passed=passed
    )
