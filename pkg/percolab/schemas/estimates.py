from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from percolab.config import settings
from percolab.schemas.seeds import SeedSpec


class Estimate(BaseModel):
    """Point value with a confidence interval and its provenance."""

    model_config = ConfigDict(frozen=True)

    value: float
    lower: float
    upper: float
    confidence: float = Field(..., gt=0.0, lt=1.0)
    replicas: int = Field(0, ge=0)
    successes: Optional[int] = Field(None, ge=0)
    seed: Optional[SeedSpec] = None
    label: str = ""

    @model_validator(mode="after")
    def ordered(self) -> "Estimate":
        if not self.lower <= self.value <= self.upper:
            raise ValueError(
                f"Interval [{self.lower}, {self.upper}] does not contain {self.value}"
            )
        return self

    @property
    def halfwidth(self) -> float:
        return (self.upper - self.lower) / 2.0

    def with_seed(self, seed: SeedSpec, label: str = "") -> "Estimate":
        return self.model_copy(update={"seed": seed, "label": label or self.label})


class PnStatus(str, Enum):
    RESOLVED = "resolved"
    DEGENERATE = "degenerate"
    UNRESOLVED = "unresolved"


class PnEstimate(BaseModel):
    """Result of the noisy bisection for p_n."""

    n: int
    epsilon: float
    p_hat: float
    lower: float
    upper: float
    status: PnStatus
    crossing: Estimate
    replicas: int
    probes: int
    seed: SeedSpec

    @property
    def divergence_stat(self) -> float:
        return (self.p_hat - settings.P_C) * self.n**2


class NuEstimate(BaseModel):
    """IIC annulus probability with its exact prefactor and sandwich bounds."""

    n: int
    N: int
    annulus_edges: int
    prefactor: float
    ratio: Estimate
    value: float
    lower_ci: float
    upper_ci: float
    sandwich_lower: float
    sandwich_upper: float
    c_hat: Estimate
    seed: SeedSpec

    @property
    def sandwich_ok(self) -> bool:
        """Sandwich holds up to the confidence intervals."""
        return (
            self.upper_ci >= self.sandwich_lower
            and self.lower_ci <= self.prefactor * self.c_hat.upper
        )


class CertificateOutcome(BaseModel):
    """Certified lower bound p^{|support|} x P_p[shell disconnected]."""

    n: int
    p: float
    support_edges: int
    open_factor: float
    disconnection: Estimate
    bound: float
    bound_lower: float
    log10_bound: float
    log10_bound_lower: float
    cross_check: Optional["CrossCheckTally"] = None


class CrossCheckTally(BaseModel):
    fields: int = 0
    certified: int = 0
    covered: int = 0
    censored: int = 0

    def merge(self, other: "CrossCheckTally") -> "CrossCheckTally":
        return CrossCheckTally(
            fields=self.fields + other.fields,
            certified=self.certified + other.certified,
            covered=self.covered + other.covered,
            censored=self.censored + other.censored,
        )


CertificateOutcome.model_rebuild()
