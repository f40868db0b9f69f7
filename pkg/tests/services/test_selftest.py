"""Tests for the built-in oracle suite."""

import pytest

from percolab.exceptions import SoundnessError
from percolab.services import selftest
from percolab.services.selftest import CHECKS, run_selftest


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_check_passes(seed, name):
    passed, detail = CHECKS[name](seed.child(name))
    assert passed, detail


def test_report_lists_every_check(monkeypatch, seed):
    monkeypatch.setattr(
        selftest, "CHECKS", {"a": lambda s: (True, "ok"), "b": lambda s: (True, "")}
    )
    report = run_selftest(seed)
    assert report.passed
    assert [r.name for r in report.results] == ["a", "b"]
    assert report.failures == []


def test_failing_check_raises_soundness_error(monkeypatch, seed):
    monkeypatch.setattr(
        selftest,
        "CHECKS",
        {"good": lambda s: (True, "ok"), "bad": lambda s: (False, "mismatch")},
    )
    with pytest.raises(SoundnessError) as exc:
        run_selftest(seed)
    assert exc.value.exit_code == 4
    assert exc.value.details["failures"] == ["bad"]
