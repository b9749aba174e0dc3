from typing import List, Optional, Tuple

from pydantic import BaseModel, Field


class EquivalenceReport(BaseModel):
    """Sampled deviation of {LEK, LFK+LEK'} from a target pair"""
    label: str = ""
    max_dev_E: float
    max_dev_F: float
    worst_t_E: Optional[float] = None
    worst_t_F: Optional[float] = None
    tol: float
    grid_size: int
    interval: Tuple[float, float]
    passed: bool

    def __bool__(self) -> bool:
        return self.passed


class PreSCFDiagnosis(BaseModel):
    """Result of the PreSCF test on a tagged pair"""
    passed: bool
    e_structure_ok: bool = True
    singular_diagonal_blocks: List[int] = Field(default_factory=list)
    f22_below_blocks: List[Tuple[int, int]] = Field(default_factory=list)
    f21f12_below_blocks: List[Tuple[int, int]] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


class CheckResult(BaseModel):
    """One named comparison in a reproduce or analyze report"""
    name: str
    deviation: float = 0.0
    tol: float = 0.0
    passed: bool
    detail: Optional[str] = None


class ReproduceReport(BaseModel):
    name: str
    interval: Tuple[float, float]
    grid_size: int
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> Optional[CheckResult]:
        return next((c for c in self.checks if not c.passed), None)
