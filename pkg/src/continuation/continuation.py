from typing import List, Optional, Tuple
import argparse
import json
import logging

import numpy as np
import tqdm
from pydantic import ValidationError

from data_classes.config import MinimizeConfig, Schedule, VerdictMargins
from data_classes.results import ContinuationTrace, Extremal, TraceRecord
from discretize.assembly import OperatorAssembly, assemble
from discretize.grid import RadialGrid
from geometry.constants import sphere_yamabe_constant
from geometry.model_manifold import ModelManifold
from geometry.weight import WeightSpec
from minimize.minimizer import minimize_Q
from spectral.eigensolver import mu_bottom
from utils.base_classes import LabModule
from utils.errors import ConfigError, NonConvergenceError, PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_BLOWUP_FACTOR = 50.0


def _record(stage: int, e: Extremal, drift: Optional[float], status: str = "ok") -> TraceRecord:
    return TraceRecord(
        stage=stage,
        alpha=e.alpha,
        p=e.p,
        Q=e.Q,
        sup_v=e.sup_v,
        argmax_r=e.argmax_r,
        residual=e.residual,
        iterations=e.iterations,
        norm_pcrit=e.norm_pcrit,
        l2_mass=e.l2_mass,
        compact_drift=drift,
        status=status,
    )


def _sweep(
    a: OperatorAssembly,
    trace: ContinuationTrace,
    stage: int,
    points: List[Tuple[float, float]],
    cfg: MinimizeConfig,
    warm: Optional[Extremal],
    blowup_factor: float,
    show_progress: bool,
) -> Tuple[Optional[Extremal], bool]:
    """Warm-started solves over (alpha, p) points, appending to `trace`.

    Returns the last extremal and whether the sweep finished cleanly.
    """
    inner_half = a.r <= a.grid.r_inner + 0.5 * (a.grid.r_max - a.grid.r_inner)
    previous = None
    for alpha, p in tqdm.tqdm(points, desc=f"stage {stage}", disable=not show_progress):
        try:
            e = minimize_Q(a, alpha, p, cfg, warm=None if warm is None else warm.v)
        except NonConvergenceError as error:
            best = error.best
            trace.records.append(_record(stage, best, None, status="nonconvergent"))
            trace.fields.append(best.v)
            trace.notes.append(f"stage {stage} did not converge at alpha={alpha}, p={p}: {error}")
            logger.warning(trace.notes[-1])
            return None, False
        drift = None
        if previous is not None:
            drift = float(np.max(np.abs(e.v[inner_half] - previous.v[inner_half])))
        if trace.blowup_threshold is None:
            trace.blowup_threshold = blowup_factor * e.sup_v
        if e.sup_v > trace.blowup_threshold:
            trace.records.append(_record(stage, e, drift, status="blowup"))
            trace.fields.append(e.v)
            trace.notes.append(
                f"blow-up at alpha={alpha}, p={p}: sup_v={e.sup_v:.6g} > {trace.blowup_threshold:.6g}"
            )
            logger.warning(trace.notes[-1])
            return e, False
        trace.records.append(_record(stage, e, drift))
        trace.fields.append(e.v)
        previous = warm = e
    return warm, True


def run_continuation(
    m: ModelManifold,
    g: RadialGrid,
    w: WeightSpec,
    sched: Schedule,
    cfg: MinimizeConfig = None,
    blowup_factor: float = DEFAULT_BLOWUP_FACTOR,
    alpha0_retries: int = 2,
    assembly: OperatorAssembly = None,
    show_progress: bool = False,
) -> ContinuationTrace:
    """Stage 1 sweeps p up to p_crit at alpha_0; stage 2 sweeps alpha down to 0 at p_crit.

    alpha_0 is verified a posteriori (Q^{alpha_0}_{p_crit} below the sphere
    constant). A stage 1 that ends above it, blows up or does not converge
    rejects alpha_0, which is halved up to `alpha0_retries` times and then set
    to 0; stage 1 at alpha_0 = 0 leaves stage 2 empty.
    """
    cfg = cfg or MinimizeConfig()
    a = assembly or assemble(m, g, w)
    mu = mu_bottom(a).value
    if mu <= 0:
        raise PreconditionError(f"continuation needs mu > 0, got {mu:.6g}")
    sphere = sphere_yamabe_constant(m.n)
    p_crit = m.p_crit
    alpha0 = sched.alpha_list[0]
    notes: List[str] = []

    for attempt in range(alpha0_retries + 2):
        trace = ContinuationTrace(model=m.label, n=m.n, nodes=a.r.copy(), alpha0=alpha0, notes=list(notes))
        logger.info(f"Working with stage 1 at alpha0={alpha0} over {len(sched.p_list)} exponents...")
        last, ok = _sweep(
            a,
            trace,
            1,
            [(alpha0, p) for p in sched.p_list],
            sched.stage_config(1, cfg),
            None,
            blowup_factor,
            show_progress,
        )
        trace.alpha0_verified = ok and last.Q < sphere
        if trace.alpha0_verified or alpha0 == 0:
            break
        # past the retries the unweighted problem is the last resort
        next_alpha0 = alpha0 / 2.0 if attempt < alpha0_retries else 0.0
        reason = f"Q={last.Q:.8g} >= sphere constant {sphere:.8g}" if ok else trace.notes[-1]
        notes.append(f"alpha0={alpha0} rejected: {reason}; retrying with alpha0={next_alpha0}")
        logger.info(notes[-1])
        alpha0 = next_alpha0
    if not ok:
        return trace
    if not trace.alpha0_verified:
        trace.notes.append(f"alpha0={alpha0} unverified: Q={last.Q:.8g} >= {sphere:.8g}")

    stage2 = [alpha for alpha in sched.alpha_list if alpha < alpha0]
    logger.info(f"Working with stage 2 over alphas {stage2}...")
    last, ok = _sweep(
        a,
        trace,
        2,
        [(alpha, p_crit) for alpha in stage2],
        sched.stage_config(2, cfg),
        last,
        blowup_factor,
        show_progress,
    )
    if ok:
        trace.final = last
        trace.completed = True
        logger.info(
            f"Finished continuation: Q={last.Q:.8g}, ||v||_pcrit={last.norm_pcrit:.8g}, sup_v={last.sup_v:.6g}"
        )
    return trace


def run_p_sweep(
    a: OperatorAssembly,
    alpha: float,
    p_list: List[float],
    cfg: MinimizeConfig = None,
    blowup_factor: float = DEFAULT_BLOWUP_FACTOR,
    show_progress: bool = False,
) -> ContinuationTrace:
    """Stage-1 style warm-started sweep over p at fixed alpha."""
    trace = ContinuationTrace(model=a.model.label, n=a.model.n, nodes=a.r.copy(), alpha0=alpha)
    last, ok = _sweep(
        a, trace, 1, [(alpha, p) for p in p_list], cfg or MinimizeConfig(), None, blowup_factor, show_progress
    )
    trace.completed = ok
    trace.final = last if ok else None
    return trace


@LabModule.set_role("driver")
class ContinuationDriver(LabModule):
    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--alpha_list", type=float, nargs="*", default=None, help="Decreasing weight exponents ending with 0")
        parser.add_argument("--p_list", type=float, nargs="*", default=None, help="Increasing exponents ending with p_crit")
        parser.add_argument("--stage1_overrides", type=json.loads, default=None, help="Minimizer overrides for stage 1")
        parser.add_argument("--stage2_overrides", type=json.loads, default=None, help="Minimizer overrides for stage 2")
        parser.add_argument("--blowup_factor", type=float, default=DEFAULT_BLOWUP_FACTOR, help="Blow-up threshold over the first sup_v")
        parser.add_argument("--alpha0_retries", type=int, default=2, help="Halvings of alpha0 when unverified")
        parser.add_argument("--margin_mu", type=float, default=0.1, help="Required lower bound on mu")
        parser.add_argument("--margin_qbar", type=float, default=0.5, help="Required gap Qbar - Q")
        parser.add_argument("--margin_sphere", type=float, default=0.5, help="Required gap between the sphere constant and Q")
        parser.add_argument("--verdict_residual_tol", type=float, default=1e-6, help="Residual bound on the final extremal")
        parser.add_argument("--norm_tol", type=float, default=1e-2, help="Tolerance on ||v||_pcrit = 1")
        parser.add_argument("--q_inf_radii", type=float, nargs="*", default=None, help="Exterior radii for the Qbar estimate")
        parser.add_argument("--num_exterior_workers", type=int, default=1, help="Threads for the per-R exterior solves")

    def __init__(self, args):
        super().__init__(args)
        self.alpha_list = args.alpha_list
        self.p_list = args.p_list
        self.stage_overrides = {
            key: value
            for key, value in (("stage1", args.stage1_overrides), ("stage2", args.stage2_overrides))
            if value
        }
        self.blowup_factor = args.blowup_factor
        self.alpha0_retries = args.alpha0_retries
        self.num_exterior_workers = args.num_exterior_workers
        self.margins = VerdictMargins(
            margin_mu=args.margin_mu,
            margin_qbar=args.margin_qbar,
            margin_sphere=args.margin_sphere,
            residual_tol=args.verdict_residual_tol,
            norm_tol=args.norm_tol,
            q_inf_radii=args.q_inf_radii,
        )

    def schedule(self, n: int) -> Schedule:
        default = Schedule.default(n)
        try:
            return Schedule(
                n=n,
                alpha_list=self.alpha_list if self.alpha_list is not None else default.alpha_list,
                p_list=self.p_list if self.p_list is not None else default.p_list,
                stage_overrides=self.stage_overrides,
            )
        except ValidationError as e:
            raise ConfigError(f"invalid continuation schedule: {e.errors()[0]['msg']}")
