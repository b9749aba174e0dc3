from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from .structure import BlockSpec, Ordering

Entry = Union[str, float, int]
ExprMatrix = List[List[Entry]]


class StructureKind(str, Enum):
    PRESCF = "prescf"
    T_CANONICAL = "t_canonical"
    S_CANONICAL = "s_canonical"
    HESSENBERG2 = "hessenberg2"
    HESSENBERG3 = "hessenberg3"
    MULTIBODY = "multibody"
    CUSTOM_TRANSFORM = "custom_transform"


HESSENBERG_KINDS = (StructureKind.HESSENBERG2, StructureKind.HESSENBERG3, StructureKind.MULTIBODY)

# Basis names a problem may supply per Hessenberg kind
BASIS_NAMES = {
    StructureKind.HESSENBERG2: ("B_d", "B_a"),
    StructureKind.HESSENBERG3: ("B_d3", "B_a3"),
    StructureKind.MULTIBODY: ("B_d3", "B_a3"),
}


class StructureTag(BaseModel):
    """How the input pair is structured, and the data its Step 0 needs"""
    kind: StructureKind = Field(..., description="Input structure class")
    d: Optional[int] = Field(None, ge=0, description="Differential dimension of the PreSCF")
    blocks: Optional[BlockSpec] = Field(None, description="Partition of the nilpotent part")
    m_blocks: Optional[List[int]] = Field(
        None,
        description="Hessenberg block sizes m_1 >= m_2 >= ... >= m_mu",
    )
    permutation: Optional[List[int]] = Field(
        None,
        description="Variable/equation permutation applied before Step 0 (new index i takes old index permutation[i])",
    )
    bases: Dict[str, ExprMatrix] = Field(default_factory=dict, description="User supplied smooth bases")
    L0: Optional[ExprMatrix] = Field(None, description="Step 0 L for custom_transform")
    K0: Optional[ExprMatrix] = Field(None, description="Step 0 K for custom_transform")
    scaling: Optional[List[Entry]] = Field(
        None,
        description="d expressions s_i; Step 0 is followed by diag(S^-1, I), diag(S, I)",
    )
    parameters: Dict[str, float] = Field(default_factory=dict)

    @field_validator("m_blocks")
    @classmethod
    def validate_m_blocks(cls, v):
        if v is None:
            return v
        if any(x <= 0 for x in v) or any(a < b for a, b in zip(v, v[1:])):
            raise ValueError(f"Hessenberg sizes {v} must be positive and decreasing")
        return v

    @model_validator(mode="after")
    def validate_kind_data(self):
        if self.kind == StructureKind.CUSTOM_TRANSFORM and (self.L0 is None or self.K0 is None):
            raise ValueError("custom_transform needs L0 and K0")
        if self.kind in (StructureKind.HESSENBERG2, StructureKind.HESSENBERG3) and self.m_blocks is not None:
            wanted = 2 if self.kind == StructureKind.HESSENBERG2 else 3
            if len(self.m_blocks) != wanted:
                raise ValueError(f"{self.kind.value} needs {wanted} block sizes, got {self.m_blocks}")
        allowed = BASIS_NAMES.get(self.kind, ())
        unknown = set(self.bases) - set(allowed)
        if unknown:
            raise ValueError(f"bases {sorted(unknown)} are not used by {self.kind.value}")
        if self.bases and set(self.bases) != set(allowed):
            raise ValueError(f"{self.kind.value} bases must supply all of {list(allowed)}")
        return self

    def hessenberg_spec(self, m: int) -> Tuple[int, BlockSpec]:
        """d = m - mu*theta and equal blocks theta = m_mu."""
        theta = self.m_blocks[-1]
        mu = len(self.m_blocks)
        return m - mu * theta, BlockSpec(sizes=[theta] * mu, ordering=Ordering.DECREASING)


class MultibodyBlocks(BaseModel):
    """M v' + D v + K p + Z^T G^T lambda = q, p' = Z v, G p = 0"""
    M: ExprMatrix
    D: ExprMatrix
    K: ExprMatrix
    G: ExprMatrix
    Z: Optional[ExprMatrix] = None

    @model_validator(mode="after")
    def validate_shapes(self):
        n_p = len(self.M)
        for name in ("M", "D", "K"):
            rows = getattr(self, name)
            if len(rows) != n_p or any(len(r) != n_p for r in rows):
                raise ValueError(f"{name} must be {n_p}x{n_p}")
        if not self.G or any(len(r) != n_p for r in self.G):
            raise ValueError(f"G must have {n_p} columns")
        if len(self.G) > n_p:
            raise ValueError("G has more constraints than positions")
        if self.Z is not None and (len(self.Z) != n_p or any(len(r) != n_p for r in self.Z)):
            raise ValueError(f"Z must be {n_p}x{n_p}")
        return self

    @property
    def n_p(self) -> int:
        return len(self.M)

    @property
    def n_lambda(self) -> int:
        return len(self.G)


class ProblemFile(BaseModel):
    """A DAE problem document"""
    name: str = Field(..., min_length=1)
    m: Optional[int] = Field(None, gt=0)
    interval: Tuple[float, float]
    avoid: List[float] = Field(default_factory=list, description="Times excluded from every sample grid")
    parameters: Dict[str, float] = Field(default_factory=dict)
    structure: StructureTag
    E: Optional[ExprMatrix] = None
    F: Optional[ExprMatrix] = None
    multibody: Optional[MultibodyBlocks] = None
    q: Optional[List[Entry]] = None
    blocks: Optional[List[int]] = None
    ordering: Ordering = Ordering.DECREASING
    d: Optional[int] = Field(None, ge=0)

    @field_validator("interval")
    @classmethod
    def validate_interval(cls, v):
        if not v[0] < v[1]:
            raise ValueError(f"interval {v} is degenerate")
        return v

    @model_validator(mode="after")
    def validate_consistency(self):
        if self.structure.kind == StructureKind.MULTIBODY:
            if self.multibody is None:
                raise ValueError("multibody structure needs the multibody blocks")
            derived = 2 * self.multibody.n_p + self.multibody.n_lambda
            if self.m is not None and self.m != derived:
                raise ValueError(f"m={self.m} differs from 2*n_p + n_lambda = {derived}")
            self.m = derived
        else:
            if self.E is None or self.F is None:
                raise ValueError("E and F are required")
            if self.m is None:
                self.m = len(self.E)
            for name in ("E", "F"):
                rows = getattr(self, name)
                if len(rows) != self.m or any(len(r) != self.m for r in rows):
                    raise ValueError(f"{name} must be {self.m}x{self.m}")
        if self.q is not None and len(self.q) != self.m:
            raise ValueError(f"q must have {self.m} entries")
        if self.blocks is not None and self.d is not None and sum(self.blocks) != self.m - self.d:
            raise ValueError(f"blocks {self.blocks} do not sum to a = m - d = {self.m - self.d}")
        if any(not self.interval[0] < t < self.interval[1] for t in self.avoid):
            raise ValueError("avoid points must lie inside the interval")
        return self

    def structure_tag(self) -> StructureTag:
        """The structure tag completed with d, block spec and parameters."""
        tag = self.structure.model_copy(update={"parameters": dict(self.parameters)})
        if self.structure.kind == StructureKind.MULTIBODY and tag.m_blocks is None:
            tag.m_blocks = [self.multibody.n_p, self.multibody.n_p, self.multibody.n_lambda]
        if tag.kind in HESSENBERG_KINDS and tag.m_blocks is not None and self.blocks is None:
            d, spec = tag.hessenberg_spec(self.m)
            tag.d, tag.blocks = d, spec
        if self.blocks is not None:
            tag.blocks = BlockSpec(sizes=self.blocks, ordering=self.ordering)
            tag.d = self.d if self.d is not None else self.m - sum(self.blocks)
        elif self.d is not None:
            tag.d = self.d
        return tag
