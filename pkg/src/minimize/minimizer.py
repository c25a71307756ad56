from typing import List, Optional, Tuple
import argparse
import logging

import numpy as np
from numpy.linalg import LinAlgError
from scipy import sparse
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse.linalg import ArpackError, LinearOperator, eigsh

from data_classes.config import MinimizeConfig
from data_classes.results import Extremal
from discretize.assembly import OperatorAssembly, banded_upper, tridiagonal_apply
from discretize.forms import (
    check_exponent,
    el_residual,
    l2_mass,
    nonlinear_load,
    relative_dual_norm,
    weighted_p_mass,
    weighted_p_norm,
)
from discretize.grid import as_values
from geometry.weight import weight
from utils.base_classes import LabModule
from utils.errors import ArgumentError, NonConvergenceError, PreconditionError

logger = logging.getLogger(__name__)

__all__ = [
    "Minimizer",
    "QuotientProblem",
    "el_residual",
    "initial_field",
    "minimize_Q",
    "package_extremal",
    "run_fixed_point",
    "solve_quotient",
]

ANDERSON_DEPTH = 5
MAX_BACKTRACKS = 60


class QuotientProblem:
    """Minimize v.Hv / ||rho^alpha v||_p^2 for a positive definite tridiagonal H.

    H is A + S (the Yamabe quotient) or the H_1^2 Gram form (embedding constants).
    """

    def __init__(self, a: OperatorAssembly, alpha: float, p: float, sobolev: bool = False):
        check_exponent(a, p)
        if alpha < 0:
            raise ArgumentError(f"weight exponent alpha must be >= 0, got {alpha}")
        self.a, self.alpha, self.p, self.sobolev = a, float(alpha), float(p), sobolev
        if sobolev:
            self.diag = a.stiffness_diag / a.model.a_n + a.mass_diag
            self.off = a.stiffness_off / a.model.a_n + a.mass_off
        else:
            self.diag, self.off = a.operator_diag, a.operator_off
        try:
            self.factor = cholesky_banded(banded_upper(self.diag, self.off))
        except LinAlgError:
            raise PreconditionError(
                f"mu <= 0 on {a.model.label or a.model.warp.kind.value} "
                f"[{a.grid.r_inner}, {a.grid.r_max}]: the conformal Laplacian is not positive"
            )

    def apply(self, v: np.ndarray) -> np.ndarray:
        return tridiagonal_apply(self.diag, self.off, v)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.factor, False), rhs)

    def energy(self, v: np.ndarray) -> float:
        if self.sobolev:
            return self.a.stiffness_energy(v) / self.a.model.a_n + float(v @ self.a.apply_mass(v))
        return self.a.energy(v)

    def normalize(self, v: np.ndarray) -> np.ndarray:
        return v / weighted_p_norm(self.a, v, self.alpha, self.p)

    def load(self, v: np.ndarray) -> np.ndarray:
        return nonlinear_load(self.a, v, self.alpha, self.p)

    def step(self, v: np.ndarray) -> np.ndarray:
        return self.normalize(np.abs(self.solve(self.load(v))))

    def residual(self, v: np.ndarray, Q: float) -> float:
        Hv = self.apply(v)
        return relative_dual_norm(self.a, Hv - Q * self.load(v), Hv)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        N = weighted_p_mass(self.a, v, self.alpha, self.p)
        return 2.0 * (self.apply(v) - (self.energy(v) / N) * self.load(v)) / N ** (2.0 / self.p)

    def linear_mode(self, v0: np.ndarray) -> Tuple[np.ndarray, float]:
        """Bottom eigenpair of H x = Q W_alpha x (the p = 2 problem) by shift-and-invert about 0."""
        w_diag, w_off = self.a.weighted_mass(self.alpha, 2.0)
        H = sparse.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csc")
        W = sparse.diags([w_off, w_diag, w_off], [-1, 0, 1], format="csc")
        op_inv = LinearOperator(H.shape, matvec=self.solve, dtype=H.dtype)
        _, vectors = eigsh(H, k=1, M=W, sigma=0.0, which="LM", v0=v0, OPinv=op_inv)
        v = self.normalize(np.abs(vectors[:, 0]))
        return v, self.energy(v)


def _armijo(problem: QuotientProblem, v: np.ndarray, Q: float, cfg: MinimizeConfig):
    """Projected-gradient step along -M^{-1} grad with backtracking."""
    g = problem.gradient(v)
    d = -problem.a.mass_solve(g)
    slope = float(g @ d)
    if not slope < 0:
        return v, Q, False
    t = 0.5 * np.sqrt(l2_mass(problem.a, v) / max(l2_mass(problem.a, d), 1e-300))
    for _ in range(MAX_BACKTRACKS):
        trial = np.abs(v + t * d)
        if np.any(trial):
            trial = problem.normalize(trial)
            Q_trial = problem.energy(trial)
            if Q_trial <= Q + cfg.armijo_c * t * slope:
                return trial, Q_trial, True
        t *= cfg.backtrack_factor
    return v, Q, False


def _anderson(problem: QuotientProblem, xs: List[np.ndarray], fs: List[np.ndarray]) -> Optional[np.ndarray]:
    """Type-II Anderson extrapolation over the stored iterates and their fixed-point updates."""
    dX = np.diff(np.array(xs), axis=0).T
    dF = np.diff(np.array(fs), axis=0).T
    gamma = np.linalg.lstsq(dF, fs[-1], rcond=1e-12)[0]
    extrapolated = np.abs(xs[-1] + fs[-1] - (dX + dF) @ gamma)
    if not (np.all(np.isfinite(extrapolated)) and np.any(extrapolated)):
        return None
    return problem.normalize(extrapolated)


def run_fixed_point(
    problem: QuotientProblem, v0: np.ndarray, cfg: MinimizeConfig
) -> Tuple[np.ndarray, float, float, int, List[float]]:
    """Normalized inverse fixed point v <- normalize(|H^{-1} W |v|^{p-2} v|).

    Each plain step does not increase the quotient. An Anderson extrapolation
    over the last iterates replaces it when it lowers the residual and keeps Q
    within q_rel_tol of the previous value. A plain step that raises Q, or
    stall_window iterations without the residual dropping by stall_factor,
    falls back to an Armijo gradient step. The run stops early when neither
    moves the residual below its value at the start of the window.
    """
    tolerance = cfg.q_rel_tol
    v = problem.normalize(np.abs(v0))
    Q = problem.energy(v)
    residual = problem.residual(v, Q)
    history = [Q]
    best = (residual, v, Q)
    xs: List[np.ndarray] = []
    fs: List[np.ndarray] = []
    anchor, since = residual, 0
    iterations = 0
    while iterations < cfg.max_iter and residual > cfg.residual_tol:
        iterations += 1
        w = problem.step(v)
        Q_w = problem.energy(w)
        if Q_w > Q + tolerance * abs(Q):
            w, Q_w, _ = _armijo(problem, v, Q, cfg)
            xs.clear()
            fs.clear()
            residual_w = problem.residual(w, Q_w)
        else:
            residual_w = problem.residual(w, Q_w)
            xs.append(v)
            fs.append(w - v)
            del xs[: -(ANDERSON_DEPTH + 1)], fs[: -(ANDERSON_DEPTH + 1)]
            extrapolated = _anderson(problem, xs, fs) if len(fs) > 1 else None
            if extrapolated is not None:
                Q_ext = problem.energy(extrapolated)
                if Q_ext <= Q + tolerance * abs(Q):
                    residual_ext = problem.residual(extrapolated, Q_ext)
                    if residual_ext < residual_w:
                        w, Q_w, residual_w = extrapolated, Q_ext, residual_ext
        v, Q, residual = w, Q_w, residual_w
        history.append(Q)
        if residual < best[0]:
            best = (residual, v, Q)
        if residual < cfg.stall_factor * anchor:
            anchor, since = residual, 0
        else:
            since += 1
        if since >= cfg.stall_window and residual > cfg.residual_tol:
            w, Q_w, moved = _armijo(problem, v, Q, cfg)
            if moved:
                v, Q = w, Q_w
                history.append(Q)
                residual = problem.residual(v, Q)
                if residual < best[0]:
                    best = (residual, v, Q)
                xs.clear()
                fs.clear()
            elif residual >= anchor:
                logger.debug(f"No residual progress in {since} iterations at {residual:.3e}")
                break
            anchor, since = residual, 0
    if residual <= cfg.residual_tol:
        return v, Q, residual, iterations, history
    raise NonConvergenceError(
        f"fixed point stopped after {iterations} iterations with residual {residual:.3e} "
        f"> {cfg.residual_tol:.1e}",
        best=best,
        diagnostics={"iterations": iterations, "residual": best[0], "Q": best[2], "history": history},
    )


def solve_quotient(
    problem: QuotientProblem, v0: np.ndarray, cfg: MinimizeConfig
) -> Tuple[np.ndarray, float, float, int, List[float]]:
    """Shift-and-invert eigensolve at p = 2, the fixed point otherwise.

    A p = 2 solve that misses residual_tol continues with the fixed point from
    the computed mode.
    """
    if problem.p == 2.0:
        try:
            v, Q = problem.linear_mode(v0)
        except ArpackError as e:
            logger.warning(f"Shift-and-invert failed ({e}), iterating the fixed point instead")
        else:
            residual = problem.residual(v, Q)
            if residual <= cfg.residual_tol:
                return v, Q, residual, 1, [Q]
            v0 = v
    return run_fixed_point(problem, v0, cfg)


def initial_field(a: OperatorAssembly, cfg: MinimizeConfig, warm=None) -> np.ndarray:
    if warm is not None:
        v = np.abs(as_values(warm)).astype(float)
        if v.shape != (a.size,):
            raise ArgumentError(f"warm start has shape {v.shape}, grid has {a.size} active nodes")
        if np.any(v):
            return v
        logger.warning("Warm start is identically zero, using a gaussian bump")
    if cfg.init == "constant":
        return np.ones(a.size)
    if cfg.init == "warm_start":
        logger.warning("init=warm_start without a warm field, using a gaussian bump")
    r = a.r
    center = r[int(np.argmin(np.round(a.sigma_nodes, 10)))]
    width = cfg.bump_width * (a.grid.r_max - a.grid.r_inner)
    return np.exp(-0.5 * ((r - center) / width) ** 2)


def package_extremal(
    a: OperatorAssembly,
    v,
    alpha: float,
    p: float,
    iterations: int = 0,
    residual: Optional[float] = None,
    history: Optional[List[float]] = None,
) -> Extremal:
    """Normalize |v| to ||rho^alpha v||_p = 1 and collect its diagnostics."""
    v = np.abs(as_values(v))
    v = v / weighted_p_norm(a, v, alpha, p)
    Q = a.energy(v)
    if residual is None:
        residual = el_residual(a, v, Q, alpha, p)
    node = int(np.argmax(v))
    return Extremal(
        Q=Q,
        alpha=float(alpha),
        p=float(p),
        residual=float(residual),
        iterations=int(iterations),
        sup_v=float(v[node]),
        argmax_r=float(a.r[node]),
        norm_pcrit=weighted_p_norm(a, v, 0.0, a.model.p_crit),
        l2_mass=l2_mass(a, v),
        argmax_node=node,
        v=v,
        r=a.r.copy(),
        rho_alpha=weight(a.weight_spec, a.r, alpha),
        q_history=list(history or [Q]),
    )


def minimize_Q(
    a: OperatorAssembly,
    alpha: float,
    p: float,
    cfg: MinimizeConfig = None,
    warm=None,
) -> Extremal:
    """Minimize energy(v) subject to ||rho^alpha v||_p = 1.

    Raises PreconditionError when A + S is not positive definite (mu <= 0) and
    NonConvergenceError, carrying the best iterate as an Extremal, when the
    residual target is not met.
    """
    cfg = cfg or MinimizeConfig()
    problem = QuotientProblem(a, alpha, p)
    v0 = initial_field(a, cfg, warm)
    try:
        v, Q, residual, iterations, history = solve_quotient(problem, v0, cfg)
    except NonConvergenceError as e:
        best_residual, best_v, _ = e.best
        e.best = package_extremal(
            a, best_v, alpha, p, e.diagnostics["iterations"], best_residual, e.diagnostics["history"]
        )
        raise
    extremal = package_extremal(a, v, alpha, p, iterations, residual, history)
    logger.info(
        f"Minimized alpha={alpha}, p={p:.6g}: Q={extremal.Q:.8g} in {iterations} iterations "
        f"(residual {residual:.2e})"
    )
    return extremal


@LabModule.set_role("solver")
class Minimizer(LabModule):
    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--max_iter", type=int, default=20000, help="Fixed-point iteration budget")
        parser.add_argument("--q_rel_tol", type=float, default=1e-12, help="Relative Q increase tolerated on an accepted step")
        parser.add_argument("--residual_tol", type=float, default=1e-8, help="Euler-Lagrange residual target")
        parser.add_argument("--backtrack_factor", type=float, default=0.5, help="Armijo backtracking factor")
        parser.add_argument("--armijo_c", type=float, default=1e-4, help="Armijo sufficient-decrease constant")
        parser.add_argument("--stall_window", type=int, default=200, help="Iterations without residual progress before the gradient fallback")
        parser.add_argument("--stall_factor", type=float, default=0.5, help="Residual reduction counted as progress")
        parser.add_argument(
            "--init",
            type=str,
            default="gaussian_bump",
            choices=["warm_start", "gaussian_bump", "constant"],
            help="Initial field",
        )
        parser.add_argument("--bump_width", type=float, default=0.25, help="Gaussian bump width as a fraction of the domain")

    def __init__(self, args):
        super().__init__(args)
        self.config = MinimizeConfig.from_args(args)

    def minimize(self, a: OperatorAssembly, alpha: float, p: float, warm=None) -> Extremal:
        return minimize_Q(a, alpha, p, self.config, warm)
