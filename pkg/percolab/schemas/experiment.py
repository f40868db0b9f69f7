from enum import Enum
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from percolab.config import settings


class Subcommand(str, Enum):
    """Experiments exposed on the command line."""

    INVADE = "invade"
    CROSSING = "crossing"
    CORRLEN = "corrlen"
    ONEARM = "onearm"
    IIC_NU = "iic-nu"
    CERTIFICATE = "certificate"
    GAP = "gap"
    BOX_GAP = "box-gap"
    DSV_COUNT = "dsv-count"
    SELFTEST = "selftest"
    VOLUME = "volume"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSONL = "jsonl"


# Parameters each subcommand cannot run without.
REQUIRED_FIELDS: dict[Subcommand, tuple[str, ...]] = {
    Subcommand.INVADE: ("horizon",),
    Subcommand.CROSSING: ("p", "n"),
    Subcommand.CORRLEN: ("n_list",),
    Subcommand.ONEARM: ("n",),
    Subcommand.IIC_NU: ("n", "N"),
    Subcommand.CERTIFICATE: ("n",),
    Subcommand.GAP: ("n_list",),
    Subcommand.BOX_GAP: ("n_list",),
    Subcommand.DSV_COUNT: ("windows", "horizon"),
    Subcommand.SELFTEST: (),
    Subcommand.VOLUME: ("N", "radii"),
}

LIST_FIELDS = ("n_list", "grid", "radii", "windows")


def _split(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ExperimentConfig(BaseModel):
    """Fully resolved configuration of one run.

    Keys mirror the command-line flags one to one; the flat key=value file format
    stores lists comma-separated and annulus windows as `inner:outer`.
    """

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    subcommand: Subcommand
    n: Optional[int] = Field(None, ge=1, description="Box or annulus scale n.")
    N: Optional[int] = Field(None, ge=1, description="Conditioning radius N.")
    n_list: Optional[list[int]] = Field(None, description="Increasing list of n.")
    p: Optional[float] = Field(None, ge=0.0, le=1.0)
    grid: Optional[list[float]] = Field(None, description="Levels p for optimization.")
    epsilon: float = Field(settings.DEFAULT_EPSILON, gt=0.0, lt=0.5)
    tolerance: float = Field(settings.DEFAULT_TOLERANCE, gt=0.0)
    replicas: int = Field(10_000, ge=1)
    horizon: Optional[int] = Field(None, ge=1, description="Horizon box radius M.")
    steps: Optional[int] = Field(None, ge=0, description="Invasion step cap.")
    burn_in: int = Field(0, ge=0)
    height: Optional[int] = Field(None, ge=1, description="Crossing height.")
    windows: Optional[list[tuple[int, int]]] = None
    source: Literal["ipc", "iic"] = "ipc"
    radii: Optional[list[int]] = None
    cross_check: int = Field(0, ge=0, description="Fields for the soundness check.")
    seed: int = Field(0, ge=0, lt=2**64)
    workers: Optional[int] = Field(None, ge=1)
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV
    trace: Optional[str] = Field(None, description="Invasion trace export path.")

    @field_validator("n_list", "grid", "radii", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("windows", mode="before")
    @classmethod
    def split_windows(cls, value: Any) -> Any:
        value = _split(value)
        if isinstance(value, list):
            return [
                tuple(item.split(":")) if isinstance(item, str) else item
                for item in value
            ]
        return value

    @field_validator("n_list")
    @classmethod
    def increasing(cls, value: Optional[list[int]]) -> Optional[list[int]]:
        if value is not None and any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_list must be strictly increasing")
        return value

    def missing_fields(self) -> list[str]:
        return [
            name
            for name in REQUIRED_FIELDS[self.subcommand]
            if getattr(self, name) is None
        ]

    def resolved_workers(self) -> int:
        return self.workers or settings.resolved_workers

    def as_flat(self) -> dict[str, str]:
        """key=value pairs for the config file format, unset keys omitted."""
        flat: dict[str, str] = {}
        for name, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, Enum):
                value = value.value
            if name == "windows":
                value = ",".join(f"{a}:{b}" for a, b in value)
            elif name in LIST_FIELDS:
                value = ",".join(
                    repr(v) if isinstance(v, float) else str(v) for v in value
                )
            elif isinstance(value, float):
                value = repr(value)
            flat[name] = str(value)
        return flat
