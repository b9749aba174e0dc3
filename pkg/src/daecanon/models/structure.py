from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, computed_field, model_validator


class Ordering(str, Enum):
    """Monotonicity of the nilpotent block sizes"""
    DECREASING = "decreasing"  # column case
    INCREASING = "increasing"  # row case


class BlockSpec(BaseModel):
    """Block partition of the a x a nilpotent part"""
    sizes: List[int] = Field(
        ...,
        min_length=1,
        description="Block sizes l_1..l_mu",
    )
    ordering: Ordering = Field(
        default=Ordering.DECREASING,
        description="decreasing (l_1 >= ... >= l_mu) or increasing (l_1 <= ... <= l_mu)",
    )

    @model_validator(mode="after")
    def validate_sizes(self):
        if any(s <= 0 for s in self.sizes):
            raise ValueError(f"block sizes must be positive, got {self.sizes}")
        pairs = list(zip(self.sizes, self.sizes[1:]))
        if self.ordering == Ordering.DECREASING and any(a < b for a, b in pairs):
            raise ValueError(f"sizes {self.sizes} are not decreasing")
        if self.ordering == Ordering.INCREASING and any(a > b for a, b in pairs):
            raise ValueError(f"sizes {self.sizes} are not increasing")
        return self

    @computed_field
    @property
    def mu(self) -> int:
        return len(self.sizes)

    @computed_field
    @property
    def a(self) -> int:
        return sum(self.sizes)

    @property
    def kappa0(self) -> int:
        return self.sizes[0] if self.ordering == Ordering.DECREASING else self.sizes[-1]

    @property
    def theta(self) -> List[int]:
        if self.ordering == Ordering.DECREASING:
            return list(self.sizes[1:])
        return list(reversed(self.sizes[:-1]))

    @property
    def nilpotent_rank(self) -> int:
        return self.a - self.kappa0

    @property
    def offsets(self) -> List[int]:
        out = [0]
        for s in self.sizes:
            out.append(out[-1] + s)
        return out

    def block_range(self, i: int) -> Tuple[int, int]:
        off = self.offsets
        return off[i], off[i + 1]

    @property
    def equal_sizes(self) -> bool:
        return len(set(self.sizes)) == 1


class Characteristics(BaseModel):
    """Canonical characteristics (mu, r, theta, d) with a and m"""
    mu: int = Field(..., ge=1)
    r: int = Field(..., ge=0)
    theta: List[int] = Field(default_factory=list)
    d: int = Field(..., ge=0)
    a: int = Field(..., ge=0)
    m: int = Field(..., ge=1)

    @model_validator(mode="after")
    def validate_relations(self):
        if self.d != self.r - sum(self.theta):
            raise ValueError(f"d={self.d} differs from r - sum(theta) = {self.r - sum(self.theta)}")
        if self.m != self.d + self.a:
            raise ValueError(f"m={self.m} differs from d + a = {self.d + self.a}")
        if any(x <= 0 for x in self.theta) or any(a < b for a, b in zip(self.theta, self.theta[1:])):
            raise ValueError(f"theta {self.theta} must be positive and nonincreasing")
        if len(self.theta) != max(self.mu - 1, 0):
            raise ValueError(f"theta needs mu - 1 = {self.mu - 1} entries, got {len(self.theta)}")
        return self

    @classmethod
    def from_spec(cls, spec: BlockSpec, d: int) -> "Characteristics":
        return cls(
            mu=spec.mu,
            r=d + spec.nilpotent_rank,
            theta=spec.theta,
            d=d,
            a=spec.a,
            m=d + spec.a,
        )


class NilpotentStructure(BaseModel):
    """Characteristics fragment read off a constant nilpotent matrix"""
    mu: int
    theta: List[int] = Field(default_factory=list)
    rank: int
    size: int


class StructureCheck(BaseModel):
    """Outcome of a block-pattern test; truthy iff it passed"""
    passed: bool
    block: Optional[Tuple[int, int]] = None
    t: Optional[float] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed
