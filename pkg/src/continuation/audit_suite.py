from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Tuple
import argparse
import logging

import more_itertools
import tqdm

from continuation.audits import audit_monotonicity, certify_mu1, subcritical_scaling_check
from continuation.continuation import run_p_sweep
from data_classes.config import MinimizeConfig
from data_classes.results import AuditCell, AuditReport
from discretize.assembly import OperatorAssembly, assemble
from discretize.grid import build_grid
from geometry.model_manifold import ModelManifold
from geometry.registry import resolve_model
from minimize.diagnostics import decay_check, max_point_check
from minimize.minimizer import minimize_Q
from spectral.consistency import class_dichotomy_check, q_equals_mu_check
from utils.base_classes import LabModule
from utils.errors import YamabeLabError

logger = logging.getLogger(__name__)

Cell = Tuple[str, Callable[[], Tuple[bool, Dict[str, Any]]]]


@LabModule.set_role("auditor")
class AuditSuite(LabModule):
    """Runs the property audits over a declared matrix of models, weights and exponents."""

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--audit_models", type=str, nargs="*", default=["sphere3", "flat3", "cylbump3"], help="Models of the monotonicity matrix")
        parser.add_argument("--audit_alphas", type=float, nargs="*", default=[0.5, 0.2, 0.0], help="Weight exponents of the matrix")
        parser.add_argument("--audit_p_list", type=float, nargs="*", default=[2.0, 4.0, 5.5], help="Exponents of the matrix")
        parser.add_argument("--audit_r_max", type=float, default=10.0, help="Truncation radius of the audit grids")
        parser.add_argument("--audit_num_nodes", type=int, default=400, help="Interior nodes of the audit grids")
        parser.add_argument("--audit_tol", type=float, default=1e-6, help="Relative tolerance of the monotonicity audit")
        parser.add_argument("--audit_limit_tol", type=float, default=None, help="Bound on Q(alpha_min) - Q(0) at each p; unchecked when null")
        parser.add_argument("--max_point_tol", type=float, default=0.05, help="Slack of the max-point inequality")
        parser.add_argument("--decay_fraction", type=float, default=0.1, help="Outer fraction of the domain checked for decay")
        parser.add_argument("--decay_tol", type=float, default=0.05, help="Allowed outer value relative to sup v")
        parser.add_argument("--consistency_models", type=str, nargs="*", default=["sphere3", "flat3", "hyperbolic3"], help="Models of the p=2 and sign checks")
        parser.add_argument("--consistency_tol", type=float, default=1e-8, help="Tolerance of Q_2 = mu")
        parser.add_argument("--certify_models", type=str, nargs="*", default=["sphere3"], help="Models whose critical extremal is certified")
        parser.add_argument("--scaling_exponents", type=float, nargs="*", default=[2.0, 4.0, 5.5], help="Exponents of the flat scaling check")
        parser.add_argument("--scaling_radii", type=float, nargs=2, default=[1.0, 2.0], help="Ball radii R1 < R2 of the scaling check")
        parser.add_argument("--scaling_tol", type=float, default=1e-2, help="Relative tolerance of the scaling check")
        parser.add_argument("--num_audit_workers", type=int, default=1, help="Threads running audit cells")

    def __init__(self, args):
        super().__init__(args)
        self.models = args.audit_models
        self.alphas = args.audit_alphas
        self.p_list = args.audit_p_list
        self.r_max = args.audit_r_max
        self.num_nodes = args.audit_num_nodes
        self.tol = args.audit_tol
        self.limit_tol = args.audit_limit_tol
        self.max_point_tol = args.max_point_tol
        self.decay_fraction = args.decay_fraction
        self.decay_tol = args.decay_tol
        self.consistency_models = args.consistency_models
        self.consistency_tol = args.consistency_tol
        self.certify_models = args.certify_models
        self.scaling_exponents = args.scaling_exponents
        self.scaling_radii = args.scaling_radii
        self.scaling_tol = args.scaling_tol
        self.num_workers = max(1, args.num_audit_workers)

    def _assembly(self, label: str) -> Tuple[ModelManifold, OperatorAssembly]:
        m = resolve_model(label)
        r_max = self.r_max if m.warp.domain_max is None else min(self.r_max, m.warp.domain_max)
        return m, assemble(m, build_grid(m, 0.0, r_max, self.num_nodes))

    def _monotonicity_cell(self, label: str, cfg: MinimizeConfig):
        m, a = self._assembly(label)
        traces = [run_p_sweep(a, alpha, self.p_list, cfg) for alpha in self.alphas]
        report = audit_monotonicity(traces, tol=self.tol, limit_tol=self.limit_tol)
        details: Dict[str, Any] = {"monotonicity": report.to_dict()}
        passed = report.passed and all(trace.completed for trace in traces)
        for trace in traces:
            if trace.final is None:
                continue
            e = trace.final
            key = f"alpha={e.alpha!r},p={e.p!r}"
            max_point = max_point_check(m, e, tol=self.max_point_tol)
            details[f"max_point {key}"] = max_point
            passed = passed and max_point
            # decay is only expected under a localizing weight
            if e.alpha > 0:
                decay = decay_check(e, a.grid, self.decay_fraction, self.decay_tol, compact=m.compact)
                details[f"decay {key}"] = decay
                passed = passed and decay
        return passed, details

    def _consistency_cell(self, label: str, cfg: MinimizeConfig):
        _, a = self._assembly(label)
        consistency = q_equals_mu_check(a, tol=self.consistency_tol)
        dichotomy = class_dichotomy_check(a, self.p_list, cfg)
        return consistency.passed and dichotomy.passed, {
            "q_equals_mu": consistency.to_dict(),
            "dichotomy": dichotomy.to_dict(),
        }

    def _scaling_cell(self, s: float, cfg: MinimizeConfig):
        R1, R2 = self.scaling_radii
        report = subcritical_scaling_check(3, s, R1, R2, cfg, num_nodes=self.num_nodes, tol=self.scaling_tol)
        return report.passed, report.to_dict()

    def _certify_cell(self, label: str, cfg: MinimizeConfig):
        m, a = self._assembly(label)
        e = minimize_Q(a, 0.0, m.p_crit, cfg)
        return certify_mu1(e), e.to_dict()

    def cells(self, cfg: MinimizeConfig) -> List[Cell]:
        cells: List[Cell] = []
        for label in self.models:
            cells.append((f"monotonicity {label}", lambda label=label: self._monotonicity_cell(label, cfg)))
        for label in self.consistency_models:
            cells.append((f"consistency {label}", lambda label=label: self._consistency_cell(label, cfg)))
        for s in self.scaling_exponents:
            cells.append((f"scaling s={s!r}", lambda s=s: self._scaling_cell(s, cfg)))
        for label in self.certify_models:
            cells.append((f"certify_mu1 {label}", lambda label=label: self._certify_cell(label, cfg)))
        return cells

    @staticmethod
    def _run_cell(cell: Cell) -> AuditCell:
        name, fn = cell
        try:
            passed, report = fn()
        except YamabeLabError as e:
            logger.warning(f"Audit cell {name} raised {type(e).__name__}: {e}")
            return AuditCell(name=name, passed=False, error=f"{type(e).__name__}: {e}")
        return AuditCell(name=name, passed=bool(passed), report=report)

    def run(self, cfg: MinimizeConfig) -> AuditReport:
        cells = self.cells(cfg)
        logger.info(f"Working with {len(cells)} audit cells using {self.num_workers} workers...")
        results: List[AuditCell] = []
        with ThreadPoolExecutor(max_workers=self.num_workers) as executor:
            batches = list(more_itertools.chunked(cells, self.num_workers))
            for batch in tqdm.tqdm(batches, desc="audit", disable=not self.show_progress):
                results.extend(executor.map(self._run_cell, batch))
        failures = [cell.name for cell in results if not cell.passed]
        logger.info(f"Finished audits: {len(results) - len(failures)} of {len(results)} cells passed")
        return AuditReport(cells=results, passed=not failures, failures=failures)
