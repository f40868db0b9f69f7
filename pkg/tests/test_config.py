"""Tests for process settings."""

from percolab.config import Settings


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("PERCOLAB_P_C", "0.4")
    monkeypatch.setenv("PERCOLAB_WORKERS", "3")
    loaded = Settings()
    assert loaded.P_C == 0.4
    assert loaded.resolved_workers == 3


def test_settings_hold_only_lab_fields():
    assert not {"ENVIRONMENT", "PROJECT_NAME"} & set(Settings.model_fields)


def test_replica_schedule_doubles_up_to_cap():
    loaded = Settings(REPLICA_SCHEDULE_START=1_000, REPLICA_SCHEDULE_MAX=5_000)
    assert loaded.replica_schedule == [1_000, 2_000, 4_000, 5_000]
