from typing import Any, Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import Field

from data_classes.common import DataClassModel
from utils.misc import format_float


class SpectralResult(DataClassModel):
    value: float
    eigenfield: np.ndarray = Field(exclude=True)
    iterations: int
    residual: float


class Extremal(DataClassModel):
    """A (near-)critical point v >= 0 of the quotient with ||rho^alpha v||_p = 1."""

    Q: float
    alpha: float
    p: float
    residual: float
    iterations: int
    sup_v: float
    argmax_r: float
    norm_pcrit: float
    l2_mass: float
    argmax_node: int = Field(exclude=True)
    v: np.ndarray = Field(exclude=True)
    r: np.ndarray = Field(exclude=True)
    rho_alpha: np.ndarray = Field(exclude=True)
    q_history: List[float] = Field(default_factory=list, exclude=True)

    def field_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "r": [format_float(x) for x in self.r],
                "v": [format_float(x) for x in self.v],
                "rho_alpha_v": [format_float(x) for x in self.rho_alpha * self.v],
            }
        )


class TraceRecord(DataClassModel):
    stage: int
    alpha: float
    p: float
    Q: Optional[float]
    sup_v: Optional[float]
    argmax_r: Optional[float]
    residual: Optional[float]
    iterations: int
    norm_pcrit: Optional[float]
    l2_mass: Optional[float] = None
    compact_drift: Optional[float] = None
    status: Literal["ok", "nonconvergent", "blowup"] = "ok"


TRACE_COLUMNS = ["stage", "alpha", "p", "Q", "sup_v", "argmax_r", "residual", "iterations", "norm_pcrit"]


class ContinuationTrace(DataClassModel):
    model: str
    n: int
    records: List[TraceRecord] = []
    final: Optional[Extremal] = None
    alpha0: Optional[float] = None
    alpha0_verified: bool = False
    blowup_threshold: Optional[float] = None
    completed: bool = False
    notes: List[str] = []
    nodes: Optional[np.ndarray] = Field(default=None, exclude=True)
    fields: List[np.ndarray] = Field(default_factory=list, exclude=True)

    @property
    def failed(self) -> bool:
        return any(rec.status == "nonconvergent" for rec in self.records)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for rec in self.records:
            row = rec.model_dump()
            rows.append({col: format_float(row[col]) for col in TRACE_COLUMNS})
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)


class Verdict(DataClassModel):
    mu_value: float
    q_estimate: Optional[float] = None
    q_inf_estimate: Optional[float] = None
    hypotheses_met: Dict[str, bool]
    final: Optional[Extremal] = None
    notes: List[str] = []
    trace: Optional[ContinuationTrace] = Field(default=None, exclude=True)


class ConsistencyReport(DataClassModel):
    mu: float
    q: float
    gap: float
    tol: float
    passed: bool


class MuSweepEntry(DataClassModel):
    r_max: float
    N: int
    value: float
    residual: float
    iterations: int


class MuSweepReport(DataClassModel):
    entries: List[MuSweepEntry]
    nonincreasing: bool


class SignReport(DataClassModel):
    mu_scaled: List[float]
    mu_vanishing: bool
    q_estimate: float
    q_positive: bool
    passed: bool


class DichotomyReport(DataClassModel):
    mu: float
    q_by_p: Dict[str, float]
    witness: Literal["minimizer", "eigenfield"]
    liminf_positive: Optional[bool]
    passed: bool


class MonotonicityReport(DataClassModel):
    passed: bool
    checked_pairs: int
    violations: List[str] = []
    limit_gaps: Dict[str, float] = {}


class BlowupProfile(DataClassModel):
    record_index: int
    m_p: float
    delta_p: float
    x: List[float]
    u: List[float]
    best_lambda: float
    sup_distance: float


class SupBoundReport(DataClassModel):
    k_threshold: float
    flagged: List[int] = []
    profiles: List[BlowupProfile] = []


class QInfinityEntry(DataClassModel):
    R: float
    value: Optional[float] = None
    mu: Optional[float] = None
    error: Optional[str] = None


class QInfinityReport(DataClassModel):
    entries: List[QInfinityEntry]
    q_bar: Optional[float]
    nondecreasing: bool


class ScalingReport(DataClassModel):
    n: int
    s: float
    R1: float
    R2: float
    exponent: float
    q_r1: float
    q_r2: float
    ratio: float
    expected_ratio: float
    rel_error: float
    passed: bool


class BoundReport(DataClassModel):
    passed: bool
    violations: List[str] = []
    details: Dict[str, float] = {}


class BubbleEntry(DataClassModel):
    lam: float
    Q: float


class BubbleReport(DataClassModel):
    entries: List[BubbleEntry]
    q_min: float
    lam_min: float
    sphere_constant: float
    rel_gap: float
    passed: bool


class AuditCell(DataClassModel):
    name: str
    passed: bool
    report: Dict[str, Any] = {}
    error: Optional[str] = None


class AuditReport(DataClassModel):
    cells: List[AuditCell]
    passed: bool
    failures: List[str] = []
