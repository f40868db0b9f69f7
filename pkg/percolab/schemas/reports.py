from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, Field

from percolab.schemas.estimates import Estimate, NuEstimate, PnEstimate

CORRELATION_COLUMNS = (
    "n",
    "epsilon",
    "p_hat",
    "ci_lo",
    "ci_hi",
    "replicas",
    "divergence_stat",
    "seed",
)

NU_COLUMNS = ("n", "N", "prefactor", "ratio", "ci", "lower", "upper", "C_hat", "seed")

GAP_COLUMNS = (
    "n",
    "p_star",
    "ipc_lower",
    "iic_upper",
    "ratio",
    "verdict",
    "pn_hat",
    "divergence_stat",
    "seeds",
    "log10_ipc_lower",
    "log10_iic_upper",
    "log10_ratio",
    "log10_exp_factor",
)

INVASION_COLUMNS = ("step", "weight", "running_max")

ESTIMATE_COLUMNS = (
    "label",
    "replicas",
    "successes",
    "estimate",
    "ci_lo",
    "ci_hi",
    "seed",
)

CERTIFICATE_COLUMNS = (
    "n",
    "p",
    "geometry",
    "support_edges",
    "disconnection",
    "ci_lo",
    "ci_hi",
    "log10_bound",
    "log10_bound_lower",
    "certified",
    "covered",
    "seed",
)

VOLUME_COLUMNS = ("radius", "ipc_mean", "iic_mean")

DSV_COLUMNS = (
    "source",
    "inner",
    "outer",
    "no_disconnecting",
    "samples",
    "frequency",
    "ci_lo",
    "ci_hi",
    "censored",
    "censoring_rate",
)


class CorrelationTable(BaseModel):
    """p_n estimates and the divergence statistic (p_n - p_c) n^2 per n."""

    epsilon: float
    rows: list[PnEstimate]
    excluded: list[PnEstimate] = Field(default_factory=list)
    increasing: bool
    bands_separated: bool

    def csv_rows(self) -> list[tuple[Any, ...]]:
        return [
            (
                row.n,
                row.epsilon,
                row.p_hat,
                row.lower,
                row.upper,
                row.replicas,
                row.divergence_stat,
                row.seed.label(),
            )
            for row in self.rows
        ]


def nu_csv_row(nu: NuEstimate) -> tuple[Any, ...]:
    return (
        nu.n,
        nu.N,
        nu.prefactor,
        nu.ratio.value,
        f"{nu.lower_ci}:{nu.upper_ci}",
        nu.sandwich_lower,
        nu.sandwich_upper,
        nu.c_hat.value,
        nu.seed.label(),
    )


def estimate_csv_row(estimate: Estimate) -> tuple[Any, ...]:
    return (
        estimate.label,
        estimate.replicas,
        estimate.successes,
        estimate.value,
        estimate.lower,
        estimate.upper,
        estimate.seed.label() if estimate.seed else "",
    )


class Geometry(str, Enum):
    """Certified event shapes: Ann(n, 2n) shielded by B(2n) -/- dB(4n), or B(n)
    shielded by B(n) -/- dB(3n)."""

    ANNULUS = "annulus"
    BOX = "box"


class GapRow(BaseModel):
    n: int
    p_star: float
    pn: PnEstimate
    ipc_lower: float
    iic_upper: float
    ratio: float
    log10_ipc_lower: float
    log10_iic_upper: float
    log10_ratio: float
    log10_ratio_lower: float
    log10_exp_factor: float
    witness: bool
    seeds: str

    @property
    def verdict(self) -> str:
        return "ratio>=2" if self.witness else "inconclusive"


class GapReport(BaseModel):
    geometry: Geometry
    epsilon: float
    rows: list[GapRow]
    skipped: list[int] = Field(default_factory=list)
    c_hat: Estimate
    increasing: bool
    slope: Optional[float] = None
    smallest_witness: Optional[int] = None

    def csv_rows(self) -> list[tuple[Any, ...]]:
        return [
            (
                row.n,
                row.p_star,
                row.ipc_lower,
                row.iic_upper,
                row.ratio,
                row.verdict,
                row.pn.p_hat,
                row.pn.divergence_stat,
                row.seeds,
                row.log10_ipc_lower,
                row.log10_iic_upper,
                row.log10_ratio,
                row.log10_exp_factor,
            )
            for row in self.rows
        ]

    def summary(self) -> str:
        lines = [
            f"{self.geometry.value} gap test, epsilon={self.epsilon}, "
            f"C_hat={self.c_hat.value:.3f} "
            f"[{self.c_hat.lower:.3f}, {self.c_hat.upper:.3f}]"
        ]
        for row in self.rows:
            lines.append(
                f"  n={row.n:<4d} p*={row.p_star:.4f} "
                f"log10 ratio={row.log10_ratio:+.3f} ({row.verdict})"
            )
        lines.append(f"  ratio increasing: {self.increasing}")
        if self.slope is not None:
            lines.append(f"  log-ratio slope vs (p_n - p_c) n^2: {self.slope:.3f}")
        if self.smallest_witness is not None:
            lines.append(f"  smallest n with ratio >= 2: {self.smallest_witness}")
        return "\n".join(lines)


class DsvWindow(BaseModel):
    inner: int
    outer: int
    no_disconnecting: int
    frequency: Estimate | None = None  # None when every sample was censored


class DsvReport(BaseModel):
    source: str
    horizon: int
    samples: int
    censored: int
    windows: list[DsvWindow]
    horizon_too_small: bool

    @property
    def used(self) -> int:
        return self.samples - self.censored

    @property
    def censoring_rate(self) -> float:
        return self.censored / self.samples if self.samples else 0.0

    def csv_rows(self) -> list[tuple[Any, ...]]:
        return [
            (
                self.source,
                w.inner,
                w.outer,
                w.no_disconnecting,
                self.used,
                *(
                    (w.frequency.value, w.frequency.lower, w.frequency.upper)
                    if w.frequency
                    else (None, None, None)
                ),
                self.censored,
                self.censoring_rate,
            )
            for w in self.windows
        ]



SELFTEST_COLUMNS = ("check", "passed", "detail")


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class SelftestReport(BaseModel):
    results: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> list[str]:
        return [result.name for result in self.results if not result.passed]

    def csv_rows(self) -> list[tuple[Any, ...]]:
        return [(r.name, r.passed, r.detail) for r in self.results]
