"""Pydantic models for every record pageopt validates or serializes."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Branch(str, Enum):
    """Which part of the estimator produced g at a step."""
    INIT = "init"
    BIG = "big"
    SMALL = "small"


class CertificationTag(str, Enum):
    """How a problem's constants were obtained."""
    ANALYTIC = "analytic"
    ANALYTIC_UPPER_BOUND = "analytic-upper-bound"
    COMPUTED_BY_ORACLE = "computed-by-oracle"


class ProblemConstants(BaseModel):
    """Certified constants of a problem instance."""
    model_config = ConfigDict(frozen=True)

    L: float = Field(..., gt=0, description="Average-smoothness constant")
    sigma_sq: Optional[float] = Field(default=None, ge=0, description="Single-sample gradient variance bound")
    f_star: Optional[float] = Field(default=None, description="Global minimum value")
    f_lower_bound: Optional[float] = Field(default=None, description="Certified lower bound of f")
    how_certified: CertificationTag = Field(default=CertificationTag.ANALYTIC)

    @property
    def lower_bound(self) -> Optional[float]:
        """f* when known, else the certified lower bound (or None)."""
        return self.f_star if self.f_star is not None else self.f_lower_bound


class TheoryInputs(BaseModel):
    """Symbols consumed by the parameter formulas in pageopt.core.theory."""
    L: float = Field(..., gt=0)
    delta0: float = Field(..., ge=0)
    epsilon: float = Field(..., gt=0)
    n: Optional[int] = Field(default=None, ge=1, description="Component count; None means streaming")
    sigma_sq: Optional[float] = Field(default=None, ge=0)
    b: int = Field(..., ge=1)
    b_prime: int = Field(..., ge=1)
    p: float = Field(..., gt=0, le=1)


class TelemetryRecord(BaseModel):
    """Measurements taken after iteration t (t = 0 is the initial estimate)."""
    t: int = Field(..., ge=0)
    branch: Branch
    f_val: Optional[float] = None
    grad_norm_sq: Optional[float] = Field(default=None, ge=0)
    est_err_sq: Optional[float] = Field(default=None, ge=0)
    lyapunov: Optional[float] = None
    oracle_calls: int = Field(..., ge=0)
    paper_calls: int = Field(..., ge=0)

    @property
    def has_diagnostics(self) -> bool:
        return self.grad_norm_sq is not None


TRACE_COLUMNS = [
    "t", "branch", "f_val", "grad_norm_sq", "est_err_sq", "lyapunov",
    "oracle_calls", "paper_calls",
]


class CheckReport(BaseModel):
    """Outcome of one verifier check."""
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    replicates: int = Field(default=1, ge=1)
    standard_error: Optional[float] = Field(default=None, ge=0)
    details: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def deterministic(
        cls, name: str, lhs: float, rhs: float, tolerance: float, **details: Any
    ) -> "CheckReport":
        """Pass iff rhs - lhs >= -tolerance."""
        margin = rhs - lhs
        return cls(
            name=name, lhs=lhs, rhs=rhs, margin=margin,
            passed=bool(margin >= -tolerance), details=details,
        )

    @classmethod
    def monte_carlo(
        cls, name: str, lhs: float, rhs: float, standard_error: float,
        replicates: int, tolerance: float = 0.0, **details: Any
    ) -> "CheckReport":
        """Pass iff rhs - lhs >= -max(3 SE, tolerance)."""
        margin = rhs - lhs
        slack = max(3.0 * standard_error, tolerance)
        return cls(
            name=name, lhs=lhs, rhs=rhs, margin=margin,
            passed=bool(margin >= -slack), replicates=replicates,
            standard_error=standard_error, details=details,
        )


REPORT_COLUMNS = ["name", "lhs", "rhs", "margin", "passed", "replicates", "standard_error"]


ProblemFamily = Literal["shared_quadratic", "hetero_quadratic", "logistic"]


class ProblemSpec(BaseModel):
    """A named problem family, its generator parameters and seed."""
    family: ProblemFamily = "hetero_quadratic"
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0)


class ExperimentSpec(BaseModel):
    """Everything needed to reproduce one experiment."""
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    algorithm: Literal["page", "sgd", "gd"] = "page"
    mode: Literal["finite", "online"] = "finite"
    epsilon: float = Field(default=0.1, gt=0)
    eta: Optional[float] = Field(default=None, gt=0)
    p: Optional[float] = Field(default=None, gt=0, le=1)
    b: Optional[int] = Field(default=None, ge=1)
    b_prime: Optional[int] = Field(default=None, ge=1)
    iters: Optional[int] = Field(default=None, ge=1, description="Iteration count T")
    x0: str = Field(default="zeros", description="Named initializer: zeros | ones | gaussian")
    seeds: List[int] = Field(default_factory=lambda: [0])
    diagnostics_interval: int = Field(default=0, ge=0)
    output_dir: Path = Field(default=Path("pageopt-out"))

    @field_validator("seeds")
    @classmethod
    def seeds_non_empty(cls, v: List[int]) -> List[int]:
        """Seeds must be non-empty, non-negative and unique."""
        if not v:
            raise ValueError("seeds must be non-empty")
        if any(s < 0 for s in v):
            raise ValueError("seeds must be non-negative")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be unique")
        return v

    @field_validator("x0")
    @classmethod
    def known_initializer(cls, v: str) -> str:
        if v not in ("zeros", "ones", "gaussian"):
            raise ValueError(f"unknown initializer {v!r}")
        return v

    @model_validator(mode="after")
    def minibatch_order(self) -> "ExperimentSpec":
        if self.b is not None and self.b_prime is not None and self.b_prime > self.b:
            raise ValueError("b_prime must not exceed b")
        return self


class SummaryRow(BaseModel):
    """One line of summary.csv (one seed)."""
    seed: int
    final_grad_norm: float
    final_f: float
    chosen_index: int
    T: int
    oracle_calls: int
    paper_calls: int
    theory_T: int
    theory_grad_complexity: float


SUMMARY_COLUMNS = list(SummaryRow.model_fields)


class SweepRow(BaseModel):
    """One n value of a scaling sweep."""
    n: int
    b: int
    b_prime: int
    p: float
    eta: float
    T: int
    seeds: int
    theory_cost: float = Field(..., description="T * (p b + (1 - p) b')")
    mean_cost: float = Field(..., description="Mean of paper_calls - b across seeds")
    se_cost: float


class CompareRow(BaseModel):
    """One algorithm of an equal-budget comparison."""
    algorithm: str
    T: int
    b: int
    b_prime: int
    p: float
    eta: float
    mean_paper_calls: float
    mean_final_grad_norm: float
    se_final_grad_norm: float

