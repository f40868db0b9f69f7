"""Shared fixtures for the percolab test suite."""

from pathlib import Path

import pytest

from percolab.config import settings
from percolab.schemas.seeds import SeedSpec


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    """Progress bars off for every test."""
    monkeypatch.setattr(settings, "SHOW_PROGRESS", False)


@pytest.fixture
def seed() -> SeedSpec:
    return SeedSpec(master_seed=7, purpose_tag="tests")


@pytest.fixture
def config_file(tmp_path):
    """Write a key=value config file and return its path."""

    def write(*lines: str) -> Path:
        path = tmp_path / "run.config"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def within():
    """Binomial 4-sigma acceptance band around an exact probability."""

    def check(value: float, target: float, trials: int, sigmas: float = 4.0) -> bool:
        return abs(value - target) <= sigmas * (target * (1 - target) / trials) ** 0.5

    return check
