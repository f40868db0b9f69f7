"""Tests for certificates, the gap pipelines and disconnecting-edge counts."""

import math

import pytest

from percolab.config import settings
from percolab.exceptions import RejectionLimitError, ValidationError
from percolab.schemas.estimates import Estimate
from percolab.schemas.reports import Geometry
from percolab.services import domination
from percolab.services.domination import (
    LOG10_TWO,
    CertificateGeometry,
    box_variant_gap,
    certificate_cross_check,
    default_grid,
    disconnection_probability,
    dsv_event_counter,
    gap_test,
    ipc_certificate_bound,
    optimize_certificate,
)
from percolab.services.lattice import Annulus
from percolab.services.near_critical import estimate_pn

C_HAT = Estimate(value=2.0, lower=1.5, upper=2.5, confidence=0.95, label="C")
GRID = [0.5, 0.6, 0.7]


@pytest.mark.parametrize(
    "kind, n, expected",
    [(Geometry.ANNULUS, 1, 16), (Geometry.ANNULUS, 4, 364), (Geometry.BOX, 1, 12)],
)
def test_support_counts(kind, n, expected):
    assert CertificateGeometry(kind, n).support_count == expected


@pytest.mark.parametrize("kind", list(Geometry))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_certificate_factors_are_disjoint(kind, n):
    shape = CertificateGeometry(kind, n)
    shape.check_disjoint(shape.region())


def test_shell_radii():
    annulus = CertificateGeometry(Geometry.ANNULUS, 3)
    box = CertificateGeometry(Geometry.BOX, 3)
    assert (annulus.shell_inner, annulus.shell_outer) == (6, 12)
    assert (box.shell_inner, box.shell_outer) == (3, 9)


def test_geometry_needs_positive_n():
    with pytest.raises(ValidationError):
        CertificateGeometry(Geometry.ANNULUS, 0)


def test_disconnection_is_likely_at_low_density(seed):
    estimate = disconnection_probability(0.05, 2, 2_000, seed)
    assert estimate.value > 0.99


def test_disconnection_is_monotone_in_p(seed):
    low = disconnection_probability(0.5, 1, 2_000, seed)
    high = disconnection_probability(0.7, 1, 2_000, seed)
    assert high.successes <= low.successes


def test_certificate_bound_factorizes(seed):
    outcome = ipc_certificate_bound(2, 0.5, 2_000, seed)
    assert outcome.support_edges == 84
    assert outcome.open_factor == pytest.approx(0.5**84)
    assert outcome.disconnection.value > 0.0
    assert outcome.bound == pytest.approx(0.5**84 * outcome.disconnection.value)
    assert outcome.log10_bound == pytest.approx(math.log10(outcome.bound))
    assert outcome.bound_lower <= outcome.bound
    assert outcome.cross_check is None


def test_certificate_bound_rejects_subcritical_level(seed):
    with pytest.raises(ValidationError):
        ipc_certificate_bound(1, 0.4, 100, seed)


@pytest.mark.parametrize("kind", list(Geometry))
def test_cross_check_every_certificate_is_covered(seed, kind):
    tally = certificate_cross_check(2, 0.5, 200, seed, kind)
    assert tally.fields == 200
    assert tally.certified > 0
    assert tally.covered == tally.certified
    assert tally.censored == 0


@pytest.mark.slow
@pytest.mark.parametrize("kind", list(Geometry))
@pytest.mark.parametrize("n", [1, 2, 4])
def test_cross_check_at_p_c_and_p_n(seed, kind, n):
    pn = estimate_pn(n, epsilon=0.02, seed=seed.child(f"pn/n={n}"))
    for p in (settings.P_C, min(pn.p_hat, 0.99)):
        tally = certificate_cross_check(n, p, 1_000, seed.child(f"p={p}"), kind)
        assert tally.fields == 1_000
        assert tally.covered == tally.certified
        assert tally.censored == 0

def test_certificate_bound_runs_cross_check(seed):
    outcome = ipc_certificate_bound(1, 0.55, 500, seed, cross_check=30)
    assert outcome.cross_check.fields == 30
    assert outcome.cross_check.covered == outcome.cross_check.certified


def test_optimize_certificate_picks_best_level(seed):
    p_star, best = optimize_certificate(1, GRID, 1_000, seed)
    assert p_star in GRID
    for p in GRID:
        assert ipc_certificate_bound(1, p, 1_000, seed).log10_bound <= best.log10_bound


def test_optimized_level_is_supercritical_at_n_4(seed):
    p_star, best = optimize_certificate(4, [0.5, 0.55, 0.6, 0.65], 2_000, seed)
    assert p_star > settings.P_C
    assert best.disconnection.value > 0.0


@pytest.mark.parametrize("grid", [[], [0.4, 0.6], [0.6, 1.0]])
def test_optimize_certificate_rejects_bad_grid(seed, grid):
    with pytest.raises(ValidationError):
        optimize_certificate(1, grid, 10, seed)


def test_default_grid():
    grid = default_grid(0.6)
    assert grid[0] == 0.5
    assert 0.6 in grid
    assert grid[-1] == pytest.approx(0.7)
    assert default_grid(0.5) == [0.5]


def test_gap_rows_combine_both_bounds(seed):
    report = gap_test(
        [1, 2], seed=seed, replicas=500, tolerance=0.05, c_hat=C_HAT, p_grid=GRID
    )
    assert report.geometry == Geometry.ANNULUS
    assert len(report.rows) + len(report.skipped) == 2
    for row in report.rows:
        support = CertificateGeometry(Geometry.ANNULUS, row.n).support_count
        assert row.log10_iic_upper == pytest.approx(
            math.log10(2.0) + support * math.log10(0.5)
        )
        assert row.log10_ratio == pytest.approx(
            row.log10_ipc_lower - row.log10_iic_upper
        )
        assert row.log10_ratio_lower <= row.log10_ratio
        assert row.witness == (row.log10_ratio_lower >= LOG10_TWO)


def test_box_gap_divides_by_one_arm(seed):
    report = box_variant_gap(
        [1], seed=seed, replicas=500, tolerance=0.05, c_hat=C_HAT, p_grid=GRID
    )
    assert report.geometry == Geometry.BOX
    for row in report.rows:
        assert row.log10_iic_upper >= math.log10(2.0) + 12 * math.log10(0.5)


@pytest.mark.slow
def test_gap_grows_with_n(seed):
    report = gap_test([4, 8, 16], seed=seed, replicas=4_000)
    assert not report.skipped
    assert report.increasing
    assert report.slope > 0.0

def test_gap_needs_increasing_sizes(seed):
    with pytest.raises(ValidationError):
        gap_test([2, 1], seed=seed, c_hat=C_HAT)
    with pytest.raises(ValidationError):
        gap_test([], seed=seed, c_hat=C_HAT)


@pytest.mark.parametrize(
    "source, windows, horizon",
    [
        ("dla", [Annulus(1, 2)], 8),
        ("ipc", [], 8),
        ("ipc", [Annulus(1, 5)], 8),
    ],
)
def test_dsv_counter_rejects_bad_arguments(seed, source, windows, horizon):
    with pytest.raises(ValidationError):
        dsv_event_counter(source, windows, horizon, 5, seed)


@pytest.mark.parametrize("source", ["ipc", "iic"])
def test_dsv_counter_small_run(seed, source):
    windows = [Annulus(0, 2), Annulus(1, 2)]
    report = dsv_event_counter(source, windows, 4, 20, seed)
    assert report.samples == 20
    assert report.censored == 0
    assert not report.horizon_too_small
    assert [(w.inner, w.outer) for w in report.windows] == [(0, 2), (1, 2)]
    for window in report.windows:
        assert 0 <= window.no_disconnecting <= 20


def test_dsv_counter_with_every_sample_censored(seed, monkeypatch):
    def exhausted(N, seed, **kwargs):
        raise RejectionLimitError("No accepted configuration", attempts=0, radius=N)

    monkeypatch.setattr(domination, "iic_rejection_sample", exhausted)
    report = dsv_event_counter("iic", [Annulus(1, 2)], 4, 6, seed)
    assert (report.samples, report.censored, report.used) == (6, 6, 0)
    assert report.horizon_too_small
    assert report.windows[0].frequency is None
    row = report.csv_rows()[0]
    assert row[4:8] == (0, None, None, None)
