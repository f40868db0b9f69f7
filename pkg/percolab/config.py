import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        case_sensitive=True,
        extra="ignore",
        env_prefix="PERCOLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
    )

    # Lattice
    P_C: float = Field(0.5, gt=0.0, lt=1.0)  # Kesten: bond percolation on Z^2
    MAX_RADIUS: int = 2**20  # edge codes stay packable in 64 bits

    # Estimation
    CONFIDENCE: float = Field(0.95, gt=0.0, lt=1.0)
    DEFAULT_EPSILON: float = 0.02
    DEFAULT_TOLERANCE: float = 0.005
    REPLICA_SCHEDULE_START: int = 1_000
    REPLICA_SCHEDULE_MAX: int = 100_000
    REPLICA_CHUNK: int = 256
    REJECTION_ATTEMPT_CAP: int = 1_000_000
    CENSORING_LIMIT: float = 0.2

    # Parallelism (None means machine parallelism on the command line)
    WORKERS: int | None = None

    # Output
    OUTPUT_SCHEMA_VERSION: int = 1
    SHOW_PROGRESS: bool = True

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = True

    @property
    def resolved_workers(self) -> int:
        """Worker count for command-line runs."""
        return self.WORKERS or os.cpu_count() or 1

    @property
    def replica_schedule(self) -> list[int]:
        """Doubling per-probe replica schedule, capped at the maximum."""
        schedule = []
        count = self.REPLICA_SCHEDULE_START
        while count < self.REPLICA_SCHEDULE_MAX:
            schedule.append(count)
            count *= 2
        schedule.append(self.REPLICA_SCHEDULE_MAX)
        return schedule

    @classmethod
    def load_from_env_file(cls) -> "Settings":
        """Load settings, picking up a local .env file when present."""
        from pathlib import Path

        from dotenv import load_dotenv

        env_file = Path(".env")
        if env_file.exists():
            load_dotenv(env_file, override=False)

        return cls()


settings = Settings.load_from_env_file()
