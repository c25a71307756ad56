from typing import List
import argparse
import logging

import numpy as np
import tqdm
from numpy.linalg import LinAlgError
from scipy.linalg import cho_solve_banded, cholesky_banded

from data_classes.results import MuSweepEntry, MuSweepReport, SignReport, SpectralResult
from discretize.assembly import OperatorAssembly, assemble
from discretize.forms import dual_norm, energy
from discretize.grid import build_grid
from geometry.model_manifold import ModelManifold, volume_density
from geometry.weight import WeightSpec
from utils.base_classes import LabModule
from utils.errors import AssemblyError, NonConvergenceError

logger = logging.getLogger(__name__)


def mu_bottom(a: OperatorAssembly, tol: float = 1e-10, max_iter: int = 20000) -> SpectralResult:
    """Smallest eigenvalue of the pencil (A + S, M) by shift-and-invert iteration.

    The shift sits one unit below inf sigma, so K - shift*M is positive
    definite; the start vector is the volume density normalized in M.
    """
    shift = a.sigma_bounds[0] - 1.0
    try:
        factor = cholesky_banded(a.banded(shift=shift))
    except LinAlgError:
        raise AssemblyError(f"shifted operator not positive definite at shift {shift}")
    x = volume_density(a.model, a.r)
    if not np.any(x):
        x = np.ones(a.size)
    x = x / np.sqrt(x @ a.apply_mass(x))
    value, residual = np.inf, np.inf
    best = None
    for iteration in range(1, max_iter + 1):
        y = cho_solve_banded((factor, False), a.apply_mass(x))
        y = y / np.sqrt(y @ a.apply_mass(y))
        if y.sum() < 0:
            y = -y
        value = energy(a, y)
        residual = dual_norm(a, a.apply(y) - value * a.apply_mass(y))
        x = y
        if best is None or residual < best.residual:
            best = SpectralResult(value=value, eigenfield=y, iterations=iteration, residual=residual)
        if residual <= tol * max(1.0, abs(value)):
            logger.info(f"mu_bottom converged: mu={value:.10g} after {iteration} iterations")
            return SpectralResult(value=value, eigenfield=y, iterations=iteration, residual=residual)
    raise NonConvergenceError(
        f"shift-and-invert did not reach residual {tol:.1e} in {max_iter} iterations (last {residual:.2e})",
        best=best,
        diagnostics={"iterations": max_iter, "residual": residual, "value": value},
    )


def mu_sweep(
    m: ModelManifold,
    w: WeightSpec,
    r_max_list: List[float],
    h: float,
    tol: float = 1e-10,
    max_iter: int = 20000,
    show_progress: bool = False,
) -> MuSweepReport:
    """mu_bottom on balls [0, R] sharing the spacing h, so the trial spaces are nested."""
    entries = []
    for r_max in tqdm.tqdm(sorted(r_max_list), desc="mu sweep", disable=not show_progress):
        N = int(round(r_max / h)) - 1
        a = assemble(m, build_grid(m, 0.0, N * h + h, N), w)
        result = mu_bottom(a, tol, max_iter)
        entries.append(
            MuSweepEntry(
                r_max=a.grid.r_max,
                N=N,
                value=result.value,
                residual=result.residual,
                iterations=result.iterations,
            )
        )
    values = [entry.value for entry in entries]
    nonincreasing = all(b <= a_ * (1 + 1e-10) + 1e-12 for a_, b in zip(values, values[1:]))
    logger.info(f"mu sweep over {len(entries)} radii, nonincreasing: {nonincreasing}")
    return MuSweepReport(entries=entries, nonincreasing=nonincreasing)


def open_manifold_sign_check(sweep: MuSweepReport, q_estimate: float, tol: float = 1e-3) -> SignReport:
    """Flat balls: mu(B_R) R^2 stays constant, so mu -> 0, while Q stays positive."""
    scaled = [entry.value * entry.r_max**2 for entry in sweep.entries]
    spread = (max(scaled) - min(scaled)) / max(abs(scaled[0]), 1e-300)
    mu_vanishing = bool(spread <= tol and sweep.nonincreasing)
    q_positive = bool(q_estimate > 0)
    return SignReport(
        mu_scaled=scaled,
        mu_vanishing=mu_vanishing,
        q_estimate=q_estimate,
        q_positive=q_positive,
        passed=mu_vanishing and q_positive,
    )


@LabModule.set_role("solver")
class Eigensolver(LabModule):
    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--mu_tol", type=float, default=1e-10, help="Relative residual target of mu_bottom")
        parser.add_argument("--mu_max_iter", type=int, default=20000, help="Shift-and-invert iteration budget")
        parser.add_argument(
            "--mu_r_max_sweep",
            type=float,
            nargs="*",
            default=None,
            help="Truncation radii of the mu sweep (defaults to the run's r_max)",
        )

    def __init__(self, args):
        super().__init__(args)
        self.tol = args.mu_tol
        self.max_iter = args.mu_max_iter
        self.r_max_sweep = args.mu_r_max_sweep

    def bottom(self, a: OperatorAssembly) -> SpectralResult:
        return mu_bottom(a, self.tol, self.max_iter)

    def sweep(self, m: ModelManifold, w: WeightSpec, r_max: float, h: float) -> MuSweepReport:
        radii = self.r_max_sweep or [r_max]
        return mu_sweep(m, w, radii, h, self.tol, self.max_iter, self.show_progress)
