from typing import Any, Dict, List, Literal, Optional
import argparse
import math

from pydantic import ConfigDict, Field, field_validator, model_validator

from data_classes.common import DataClassModel
from geometry.constants import critical_exponent


class StrictModel(DataClassModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


class MinimizeConfig(StrictModel):
    max_iter: int = Field(20000, gt=0)
    q_rel_tol: float = Field(1e-12, gt=0)
    residual_tol: float = Field(1e-8, gt=0)
    backtrack_factor: float = Field(0.5, gt=0, lt=1)
    armijo_c: float = Field(1e-4, gt=0, lt=1)
    stall_window: int = Field(200, gt=0)
    stall_factor: float = Field(0.5, gt=0, lt=1)
    init: Literal["warm_start", "gaussian_bump", "constant"] = "gaussian_bump"
    bump_width: float = Field(0.25, gt=0)
    rng_seed: int = Field(0, ge=0)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "MinimizeConfig":
        return cls(
            max_iter=args.max_iter,
            q_rel_tol=args.q_rel_tol,
            residual_tol=args.residual_tol,
            backtrack_factor=args.backtrack_factor,
            armijo_c=args.armijo_c,
            stall_window=args.stall_window,
            stall_factor=args.stall_factor,
            init=args.init,
            bump_width=args.bump_width,
            rng_seed=args.seed,
        )


class Schedule(StrictModel):
    """Two-stage continuation schedule: p sweep at the largest alpha, then alpha down to 0."""

    n: int = Field(ge=3)
    alpha_list: List[float]
    p_list: List[float]
    stage_overrides: Dict[Literal["stage1", "stage2"], Dict[str, Any]] = {}

    @model_validator(mode="after")
    def _check_lists(self):
        if not self.alpha_list or not self.p_list:
            raise ValueError("alpha_list and p_list must be nonempty")
        if self.alpha_list[-1] != 0.0:
            raise ValueError("alpha_list must end with 0")
        if any(a < 0 for a in self.alpha_list):
            raise ValueError("alpha_list entries must be >= 0")
        if any(b >= a for a, b in zip(self.alpha_list, self.alpha_list[1:])):
            raise ValueError("alpha_list must be strictly decreasing")
        p_crit = critical_exponent(self.n)
        if any(b <= a for a, b in zip(self.p_list, self.p_list[1:])):
            raise ValueError("p_list must be strictly increasing")
        if self.p_list[0] < 2.0 or self.p_list[-1] > p_crit + 1e-12:
            raise ValueError(f"p_list must lie in [2, {p_crit}]")
        if not math.isclose(self.p_list[-1], p_crit, rel_tol=1e-12):
            raise ValueError(f"p_list must end with p_crit = {p_crit}")
        self.p_list[-1] = p_crit
        for stage, overrides in self.stage_overrides.items():
            unknown = set(overrides) - set(MinimizeConfig.model_fields)
            if unknown:
                raise ValueError(f"unknown {stage} override keys: {sorted(unknown)}")
        return self

    @classmethod
    def default(cls, n: int) -> "Schedule":
        p_crit = critical_exponent(n)
        fractions = [1.0, 0.75, 0.5, 0.25, 0.125, 0.025, 0.0]
        p_list = [p_crit - (p_crit - 2.0) * t for t in fractions]
        p_list[0], p_list[-1] = 2.0, p_crit
        return cls(n=n, alpha_list=[0.5, 0.2, 0.05, 0.0], p_list=p_list)

    def stage_config(self, stage: int, cfg: MinimizeConfig) -> MinimizeConfig:
        overrides = self.stage_overrides.get(f"stage{stage}", {})
        if not overrides:
            return cfg
        return MinimizeConfig(**{**cfg.model_dump(), **overrides})


class VerdictMargins(StrictModel):
    margin_mu: float = 0.1
    margin_qbar: float = 0.5
    margin_sphere: float = 0.5
    residual_tol: float = Field(1e-6, gt=0)
    norm_tol: float = Field(1e-2, gt=0)
    q_inf_radii: Optional[List[float]] = None


class LabArgs(StrictModel):
    """Top-level run settings (the `lab_args` group of a config file)."""

    model: str = "sphere3"
    r_inner: float = Field(0.0, ge=0)
    r_max: float = Field(20.0, gt=0)
    num_nodes: int = Field(2000, ge=8)
    alpha: float = Field(0.0, ge=0)
    p: Optional[float] = None
    seed: int = Field(0, ge=0)
    output_dir: str = "./output"

    @field_validator("r_max")
    @classmethod
    def _finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("r_max must be finite")
        return value

    @model_validator(mode="after")
    def _check_domain(self):
        if self.r_max <= self.r_inner:
            raise ValueError("r_max must exceed r_inner")
        return self
