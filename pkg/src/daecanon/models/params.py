from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class StageName(str, Enum):
    STEP0 = "step0"
    STEP1 = "step1"
    STEP2 = "step2"
    STEP3 = "step3"
    STEP4 = "step4"


# CLI spellings of the stages
STAGE_ALIASES = {
    "prescf": StageName.STEP0,
    "step1": StageName.STEP1,
    "step2": StageName.STEP2,
    "scf": StageName.STEP3,
    "sscf": StageName.STEP4,
}

STAGE_ORDER = [s for s in StageName]


class SolveParams(BaseModel):
    t0: float = Field(..., description="Initial time, inside the working interval")
    u0: List[float] = Field(default_factory=list, description="Initial value of the pure-ODE component")
    grid: int = Field(default=100, ge=2, description="Number of output points over the interval")
    rtol: float = Field(default=1e-10, gt=0)
    atol: float = Field(default=1e-12, gt=0)
    method: str = Field(default="DOP853", description="Explicit embedded Runge-Kutta pair of scipy")

    @field_validator("method")
    @classmethod
    def validate_method(cls, v):
        if v not in ("RK45", "RK23", "DOP853"):
            raise ValueError("only explicit Runge-Kutta pairs are supported")
        return v


class NormalizeParams(BaseModel):
    alpha: float = Field(..., description="Target pure-ODE coefficient alpha*I")
    t0: float
    K0init: Optional[List[List[float]]] = Field(None, description="Initial value of K, identity when omitted")
    rtol: float = Field(default=1e-10, gt=0)
    atol: float = Field(default=1e-12, gt=0)
