from concurrent.futures import ThreadPoolExecutor
from typing import List
import logging

from data_classes.config import MinimizeConfig
from data_classes.results import QInfinityEntry, QInfinityReport
from discretize.assembly import assemble
from discretize.grid import build_exterior_grid
from geometry.model_manifold import ModelManifold
from geometry.weight import WeightSpec
from minimize.minimizer import minimize_Q
from spectral.eigensolver import mu_bottom
from utils.errors import ArgumentError, NonConvergenceError, PreconditionError

logger = logging.getLogger(__name__)


def _exterior_estimate(m, w, R, r_max, h, cfg) -> QInfinityEntry:
    a = assemble(m, build_exterior_grid(m, R, r_max, h), w)
    mu = mu_bottom(a).value
    if mu <= 0:
        return QInfinityEntry(R=R, mu=mu, error=f"exterior mu <= 0 ({mu:.6g})")
    try:
        e = minimize_Q(a, 0.0, m.p_crit, cfg)
    except PreconditionError as error:
        return QInfinityEntry(R=R, mu=mu, error=str(error))
    except NonConvergenceError as error:
        return QInfinityEntry(R=R, mu=mu, error=f"nonconvergent: {error}")
    return QInfinityEntry(R=R, value=e.Q, mu=mu)


def q_at_infinity(
    m: ModelManifold,
    w: WeightSpec,
    R_list: List[float],
    r_max: float,
    cfg: MinimizeConfig = None,
    num_nodes: int = 2000,
    num_workers: int = 1,
) -> QInfinityReport:
    """Critical quotient on the exteriors [R, r_max], sharing the spacing r_max/(num_nodes + 1).

    The exterior grids are nested, so the estimates are nondecreasing in R;
    the largest-R estimate is reported as Qbar.
    """
    cfg = cfg or MinimizeConfig()
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ArgumentError(f"exterior radii must be increasing, got {R_list}")
    if not R_list or max(R_list) >= r_max / 2:
        raise ArgumentError(f"exterior radii {R_list} must stay below r_max/2 = {r_max / 2}")
    h = r_max / (num_nodes + 1)
    logger.info(f"Working with {len(R_list)} exterior domains using {num_workers} workers...")
    with ThreadPoolExecutor(max_workers=max(1, num_workers)) as executor:
        entries = list(executor.map(lambda R: _exterior_estimate(m, w, R, r_max, h, cfg), R_list))
    values = [entry.value for entry in entries if entry.value is not None]
    nondecreasing = all(b >= a * (1 - 1e-8) for a, b in zip(values, values[1:]))
    q_bar = entries[-1].value if entries[-1].value is not None else (values[-1] if values else None)
    logger.info(f"Finished exterior estimates: {[entry.value for entry in entries]}")
    return QInfinityReport(entries=entries, q_bar=q_bar, nondecreasing=nondecreasing)
