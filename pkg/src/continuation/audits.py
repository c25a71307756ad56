"""Property audits over continuation traces and solver runs."""

from collections import defaultdict
from typing import List, Optional
import logging
import math

import numpy as np
from scipy.optimize import minimize_scalar

from data_classes.config import MinimizeConfig
from data_classes.results import (
    BlowupProfile,
    BoundReport,
    ContinuationTrace,
    Extremal,
    MonotonicityReport,
    ScalingReport,
    SupBoundReport,
)
from discretize.assembly import assemble
from discretize.grid import build_grid
from geometry.constants import aubin_talenti_bubble, bubble_half_width, critical_exponent
from geometry.model_manifold import ModelManifold
from geometry.warp_profiles import flat_profile
from minimize.minimizer import minimize_Q
from utils.errors import ArgumentError

logger = logging.getLogger(__name__)

BUBBLE_WINDOW = 5.0


def _within(lower: float, upper: float, tol: float) -> bool:
    return lower <= upper + tol * max(1.0, abs(upper))


def audit_monotonicity(
    traces: List[ContinuationTrace], tol: float = 1e-6, limit_tol: Optional[float] = None
) -> MonotonicityReport:
    """(a) Q nondecreasing in alpha at fixed p; (b) the last three subcritical
    values of each p sweep below the endpoint value; (c) the alpha -> 0 gap.

    Tolerances are relative to max(1, |Q|).
    """
    by_p = defaultdict(list)
    for trace in traces:
        for record in trace.records:
            if record.status == "ok":
                by_p[round(record.p, 12)].append((record.alpha, record.Q))
    violations, checked = [], 0
    limit_gaps = {}
    for p, points in sorted(by_p.items()):
        points.sort()
        for i, (alpha_i, q_i) in enumerate(points):
            for alpha_j, q_j in points[i + 1 :]:
                checked += 1
                if not _within(q_i, q_j, tol):
                    violations.append(f"(a) p={p}: Q(alpha={alpha_i})={q_i!r} > Q(alpha={alpha_j})={q_j!r}")
                if alpha_i == alpha_j and not _within(q_j, q_i, tol):
                    violations.append(f"(a) p={p}: duplicate alpha={alpha_i} gives {q_i!r} and {q_j!r}")
        zero = [q for alpha, q in points if alpha == 0]
        positive = [(alpha, q) for alpha, q in points if alpha > 0]
        if zero and positive:
            gap = positive[0][1] - zero[0]
            limit_gaps[repr(p)] = gap
            if limit_tol is not None and gap > limit_tol:
                violations.append(f"(c) p={p}: gap {gap!r} at alpha={positive[0][0]} exceeds {limit_tol}")
    for index, trace in enumerate(traces):
        stage1 = sorted(
            (record.p, record.Q, record.alpha)
            for record in trace.records
            if record.stage == 1 and record.status == "ok"
        )
        if len(stage1) < 2:
            continue
        p_end, q_end, alpha = stage1[-1]
        for s, q_s, _ in stage1[-4:-1]:
            checked += 1
            if not _within(q_s, q_end, tol):
                violations.append(
                    f"(b) trace {index}, alpha={alpha}: Q(s={s})={q_s!r} > Q(p={p_end})={q_end!r}"
                )
    passed = not violations
    logger.info(f"Monotonicity audit: {checked} pairs, {len(violations)} violations")
    return MonotonicityReport(passed=passed, checked_pairs=checked, violations=violations, limit_gaps=limit_gaps)


def blowup_scale(m_p: float, p: float) -> float:
    """delta_p = m_p^{(2 - p)/2}."""
    return m_p ** ((2.0 - p) / 2.0)


def rescaled_profile(
    nodes: np.ndarray, v: np.ndarray, n: int, p: float, record_index: int = 0
) -> BlowupProfile:
    """u(x) = v(r* + delta x)/m on the grid, with its best-fit bubble over lambda."""
    k = int(np.argmax(v))
    m_p = float(v[k])
    delta = blowup_scale(m_p, p)
    x = (nodes[k:] - nodes[k]) / delta
    u = v[k:] / m_p

    def distance(log_lam: float) -> float:
        lam = math.exp(log_lam)
        window = x <= BUBBLE_WINDOW * bubble_half_width(n, lam)
        if np.count_nonzero(window) < 2:
            return 1.0
        return float(np.max(np.abs(u[window] - aubin_talenti_bubble(n, lam, x[window]))))

    fit = minimize_scalar(distance, bounds=(-12.0, 12.0), method="bounded", options={"xatol": 1e-8})
    lam = math.exp(fit.x)
    window = x <= BUBBLE_WINDOW * bubble_half_width(n, lam)
    return BlowupProfile(
        record_index=record_index,
        m_p=m_p,
        delta_p=delta,
        x=x[window].tolist(),
        u=u[window].tolist(),
        best_lambda=lam,
        sup_distance=distance(fit.x),
    )


def sup_bound_monitor(trace: ContinuationTrace, k_threshold: Optional[float] = None) -> SupBoundReport:
    if not trace.records:
        raise ArgumentError("sup_bound_monitor needs a nonempty trace")
    if k_threshold is None:
        k_threshold = trace.blowup_threshold or 50.0 * trace.records[0].sup_v
    report = SupBoundReport(k_threshold=k_threshold)
    for index, record in enumerate(trace.records):
        if record.sup_v is not None and record.sup_v > k_threshold:
            report.flagged.append(index)
            if trace.nodes is not None and index < len(trace.fields):
                report.profiles.append(
                    rescaled_profile(trace.nodes, trace.fields[index], trace.n, record.p, index)
                )
    logger.info(f"Sup-bound monitor: {len(report.flagged)} of {len(trace.records)} records flagged")
    return report


def certify_mu1(e: Extremal, tol: float = 1e-6) -> bool:
    """Numerical witness for mu^(1) <= Q: a final extremal with norm <= 1 + tol and residual <= tol."""
    if e.alpha != 0:
        logger.warning(f"certify_mu1 expects a final extremal, got alpha={e.alpha}")
        return False
    return bool(math.isfinite(e.sup_v) and e.norm_pcrit <= 1.0 + tol and e.residual <= tol)


def subcritical_scaling_check(
    n: int,
    s: float,
    R1: float,
    R2: float,
    cfg: MinimizeConfig = None,
    num_nodes: int = 400,
    tol: float = 1e-2,
) -> ScalingReport:
    """Q_s(B_R) = R^{-(2 - n + 2n/s)} Q_s(B_1) on flat balls with proportional grids."""
    p_crit = critical_exponent(n)
    if not 2.0 <= s <= p_crit:
        raise ArgumentError(f"exponent s={s} outside [2, {p_crit}]")
    if not R2 > R1 > 0:
        raise ArgumentError(f"need R2 > R1 > 0, got R1={R1}, R2={R2}")
    m = ModelManifold(n=n, warp=flat_profile(), label=f"flat{n}")
    values = []
    for R in (R1, R2):
        a = assemble(m, build_grid(m, 0.0, R, num_nodes))
        values.append(minimize_Q(a, 0.0, s, cfg).Q)
    exponent = 2.0 - n + 2.0 * n / s
    ratio = values[1] / values[0]
    expected = (R2 / R1) ** (-exponent)
    rel_error = abs(ratio / expected - 1.0)
    exponent_ok = exponent > 0 if s < p_crit - 1e-12 else abs(exponent) < 1e-12
    passed = bool(rel_error <= tol and exponent_ok)
    logger.info(f"Scaling check n={n}, s={s}: ratio {ratio:.10g} vs {expected:.10g} -> {passed}")
    return ScalingReport(
        n=n,
        s=s,
        R1=R1,
        R2=R2,
        exponent=exponent,
        q_r1=values[0],
        q_r2=values[1],
        ratio=ratio,
        expected_ratio=expected,
        rel_error=rel_error,
        passed=passed,
    )


def l2_bound_check(trace: ContinuationTrace, mu: float, tol: float = 1e-6) -> BoundReport:
    """Every record satisfies mu ||v||_2^2 <= Q."""
    violations = []
    for index, record in enumerate(trace.records):
        if record.status != "ok" or record.l2_mass is None:
            continue
        if mu * record.l2_mass > record.Q * (1.0 + tol):
            violations.append(f"record {index}: mu*|v|_2^2={mu * record.l2_mass!r} > Q={record.Q!r}")
    return BoundReport(passed=not violations, violations=violations, details={"mu": mu})


def p_continuity_check(coarse: ContinuationTrace, fine: ContinuationTrace, tol: float = 1e-12) -> BoundReport:
    """The largest Q jump between consecutive exponents shrinks with the p step."""

    def largest_jump(trace: ContinuationTrace) -> float:
        qs = [record.Q for record in trace.records if record.stage == 1 and record.status == "ok"]
        return max((abs(b - a) for a, b in zip(qs, qs[1:])), default=0.0)

    coarse_jump, fine_jump = largest_jump(coarse), largest_jump(fine)
    passed = fine_jump <= coarse_jump * (1 + tol)
    violations = [] if passed else [f"fine step jump {fine_jump!r} exceeds coarse step jump {coarse_jump!r}"]
    return BoundReport(
        passed=passed,
        violations=violations,
        details={"coarse_jump": coarse_jump, "fine_jump": fine_jump},
    )
