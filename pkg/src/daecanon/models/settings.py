import os
from typing import Literal, Optional

import dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..utils.exceptions import ConfigurationError

# Environment overrides
ENV_TOL = "DAE_CANON_TOL"
ENV_SEED = "DAE_CANON_SEED"
ENV_SAMPLES = "DAE_CANON_SAMPLES"


class CanonSettings(BaseModel):
    """Tolerances and size knobs shared by every stage of a session"""

    tol: float = Field(
        default=1e-9,
        gt=0,
        description="Entrywise tolerance for equivalence and structure checks",
    )
    zero_tol: float = Field(
        default=1e-12,
        gt=0,
        description="Threshold below which a sampled block counts as zero",
    )
    rank_tol: float = Field(
        default=1e-9,
        gt=0,
        description="Singular values below rank_tol * largest count as zero",
    )
    n_check: int = Field(
        default=33,
        ge=3,
        description="Chebyshev samples used to certify nonsingularity",
    )
    n_verify: int = Field(
        default=20,
        ge=2,
        description="Uniform interior samples used by verify_equivalent",
    )
    n_zero: int = Field(
        default=33,
        ge=3,
        description="Random samples used for zero detection",
    )
    seed: int = Field(default=0, description="Seed of the random zero-detection grid")
    max_order: Optional[int] = Field(
        default=None,
        ge=0,
        description="Maximum derivative order (None means mu + 2)",
    )
    node_budget: int = Field(
        default=20000,
        gt=0,
        description="Soft node count per matrix; above it symbolic normalization stops for the run",
    )
    max_nodes: int = Field(
        default=400000,
        gt=0,
        description="Hard node count per matrix; above it the pipeline aborts",
    )
    normalize: Literal["cancel", "none"] = Field(
        default="cancel",
        description="Expression normalization applied after each elementary step",
    )
    rtol: float = Field(default=1e-10, gt=0, description="Integrator relative tolerance")
    atol: float = Field(default=1e-12, gt=0, description="Integrator absolute tolerance")

    @field_validator("max_nodes")
    @classmethod
    def validate_max_nodes(cls, v, info):
        budget = info.data.get("node_budget")
        if budget is not None and v < budget:
            raise ValueError("max_nodes must not be smaller than node_budget")
        return v

    @classmethod
    def from_env(cls, env_file: Optional[str] = None, **overrides) -> "CanonSettings":
        """Build settings from an optional .env file, the environment and keyword overrides.

        Keyword overrides win over the environment, which wins over defaults.
        """
        if env_file:
            dotenv.load_dotenv(env_file)
        else:
            dotenv.load_dotenv()

        values = {}
        raw = {ENV_TOL: "tol", ENV_SEED: "seed", ENV_SAMPLES: "n_verify"}
        for env_name, field in raw.items():
            value = os.getenv(env_name)
            if value not in (None, ""):
                values[field] = value
        values.update({k: v for k, v in overrides.items() if v is not None})

        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid settings: {e}")

    def derivative_limit(self, mu: int) -> int:
        return self.max_order if self.max_order is not None else mu + 2
