import logging

from data_classes.config import MinimizeConfig, Schedule, VerdictMargins
from data_classes.results import Verdict
from continuation.continuation import DEFAULT_BLOWUP_FACTOR, run_continuation
from continuation.exterior import q_at_infinity
from discretize.assembly import assemble
from discretize.grid import RadialGrid
from geometry.constants import sphere_yamabe_constant
from geometry.model_manifold import ModelManifold
from geometry.weight import WeightSpec
from minimize.minimizer import minimize_Q
from spectral.eigensolver import mu_bottom
from utils.errors import NonConvergenceError

logger = logging.getLogger(__name__)


def decide_existence(
    m: ModelManifold,
    g: RadialGrid,
    w: WeightSpec,
    sched: Schedule,
    cfg: MinimizeConfig = None,
    margins: VerdictMargins = None,
    blowup_factor: float = DEFAULT_BLOWUP_FACTOR,
    alpha0_retries: int = 2,
    num_workers: int = 1,
    show_progress: bool = False,
) -> Verdict:
    """Check mu > 0, Qbar > Q and Q < Q(S^n) with margins; run the continuation if all hold.

    Failed hypotheses are reported in the verdict, never raised.
    """
    cfg = cfg or MinimizeConfig()
    margins = margins or VerdictMargins()
    a = assemble(m, g, w)
    mu = mu_bottom(a).value
    hypotheses = {"mu_positive": mu >= margins.margin_mu, "qbar_exceeds_q": False, "q_below_sphere": False}
    if not hypotheses["mu_positive"]:
        note = f"mu_positive failed: mu={mu:.8g} < margin {margins.margin_mu}"
        logger.info(note)
        return Verdict(mu_value=mu, hypotheses_met=hypotheses, notes=[note])

    logger.info("Working with the critical quotient estimate...")
    notes = []
    try:
        q = minimize_Q(a, 0.0, m.p_crit, cfg).Q
    except NonConvergenceError as error:
        # the best iterate still bounds the discrete minimum from above
        q = error.best.Q
        notes.append(f"Q estimate did not converge, using the best iterate: {error}")
        logger.warning(notes[-1])
    radii = margins.q_inf_radii or [g.r_max / 16.0, g.r_max / 8.0, g.r_max / 4.0]
    logger.info(f"Working with Qbar over radii {radii}...")
    q_inf = q_at_infinity(m, w, radii, g.r_max, cfg, num_nodes=g.num_nodes, num_workers=num_workers).q_bar
    sphere = sphere_yamabe_constant(m.n)
    hypotheses["qbar_exceeds_q"] = q_inf is not None and q_inf - q >= margins.margin_qbar
    hypotheses["q_below_sphere"] = q <= sphere - margins.margin_sphere
    if not hypotheses["qbar_exceeds_q"]:
        notes.append(f"qbar_exceeds_q failed: Qbar={q_inf} - Q={q:.8g} < margin {margins.margin_qbar}")
    if not hypotheses["q_below_sphere"]:
        notes.append(f"q_below_sphere failed: Q={q:.8g} > {sphere:.8g} - margin {margins.margin_sphere}")
    if not all(hypotheses.values()):
        for note in notes:
            logger.info(note)
        return Verdict(mu_value=mu, q_estimate=q, q_inf_estimate=q_inf, hypotheses_met=hypotheses, notes=notes)

    trace = run_continuation(
        m, g, w, sched, cfg, blowup_factor, alpha0_retries, assembly=a, show_progress=show_progress
    )
    notes.extend(trace.notes)
    final = trace.final
    if final is None:
        notes.append("continuation did not complete; no final extremal")
    elif final.residual > margins.residual_tol:
        notes.append(f"final residual {final.residual:.3e} exceeds {margins.residual_tol}")
        final = None
    elif abs(final.norm_pcrit - 1.0) > margins.norm_tol:
        notes.append(f"final ||v||_pcrit={final.norm_pcrit:.8g} deviates from 1 by more than {margins.norm_tol}")
        final = None
    return Verdict(
        mu_value=mu,
        q_estimate=q,
        q_inf_estimate=q_inf,
        hypotheses_met=hypotheses,
        final=final,
        notes=notes,
        trace=trace,
    )
