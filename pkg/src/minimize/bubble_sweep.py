import argparse
import logging
import math

import numpy as np
import tqdm
from scipy.optimize import minimize_scalar

from data_classes.results import BubbleEntry, BubbleReport
from discretize.assembly import OperatorAssembly
from discretize.forms import quotient
from geometry.constants import aubin_talenti_bubble, bubble_half_width, sphere_yamabe_constant
from utils.base_classes import LabModule
from utils.errors import ArgumentError

logger = logging.getLogger(__name__)


def bubble_trial_field(a: OperatorAssembly, lam: float) -> np.ndarray:
    """Bubble shifted down by its value at r_max and clipped at 0, so it vanishes at the boundary."""
    n = a.model.n
    tail = aubin_talenti_bubble(n, lam, a.grid.r_max)
    return np.maximum(aubin_talenti_bubble(n, lam, a.r) - tail, 0.0)


def bubble_quotient(a: OperatorAssembly, lam: float) -> float:
    return quotient(a, bubble_trial_field(a, lam), 0.0, a.model.p_crit)


@LabModule.set_role("sweep")
class BubbleSweep(LabModule):
    """Critical quotient of Aubin-Talenti trial fields across a lambda sweep."""

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--lambda_min", type=float, default=None, help="Smallest bubble scale (default 10/r_max)")
        parser.add_argument("--lambda_max", type=float, default=None, help="Largest bubble scale (default: resolved by resolution_nodes)")
        parser.add_argument("--num_lambdas", type=int, default=41, help="Geometric sweep size")
        parser.add_argument("--resolution_nodes", type=float, default=10.0, help="Grid cells per bubble half-width at lambda_max")
        parser.add_argument("--bubble_tol", type=float, default=0.01, help="Relative gap to the sphere constant accepted")

    def __init__(self, args):
        super().__init__(args)
        self.lambda_min = args.lambda_min
        self.lambda_max = args.lambda_max
        self.num_lambdas = args.num_lambdas
        self.resolution_nodes = args.resolution_nodes
        self.tol = args.bubble_tol

    def sweep(self, a: OperatorAssembly) -> BubbleReport:
        n = a.model.n
        lam_min = self.lambda_min or 10.0 / a.grid.r_max
        lam_max = self.lambda_max or bubble_half_width(n, 1.0) / (self.resolution_nodes * a.grid.h)
        if not 0 < lam_min < lam_max:
            raise ArgumentError(f"bubble sweep needs 0 < lambda_min < lambda_max, got {lam_min}, {lam_max}")
        lams = np.geomspace(lam_min, lam_max, self.num_lambdas)
        entries = [
            BubbleEntry(lam=float(lam), Q=bubble_quotient(a, float(lam)))
            for lam in tqdm.tqdm(lams, desc="bubble sweep", disable=not self.show_progress)
        ]
        best = min(entries, key=lambda entry: entry.Q)
        refined = minimize_scalar(
            lambda t: bubble_quotient(a, math.exp(t)),
            bounds=(math.log(lam_min), math.log(lam_max)),
            method="bounded",
        )
        q_min, lam_best = best.Q, best.lam
        if refined.fun < q_min:
            q_min, lam_best = float(refined.fun), math.exp(refined.x)
        sphere = sphere_yamabe_constant(n)
        rel_gap = (q_min - sphere) / sphere
        passed = abs(rel_gap) <= self.tol
        logger.info(f"Bubble sweep: min Q={q_min:.8g} at lambda={lam_best:.6g}, gap {rel_gap:+.3%}")
        return BubbleReport(
            entries=entries,
            q_min=q_min,
            lam_min=lam_best,
            sphere_constant=sphere,
            rel_gap=rel_gap,
            passed=passed,
        )
