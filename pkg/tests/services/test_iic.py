"""Tests for arm probabilities, rejection sampling and the nu estimate."""

import pytest

from percolab.exceptions import RejectionLimitError, ValidationError
from percolab.services.connectivity import cluster_of, touches_boundary
from percolab.services.iic import (
    box_arm_probability,
    conditioned_one_arm,
    conditioned_volume_profile,
    iic_rejection_sample,
    nu_annulus_estimate,
    one_arm_probability,
    quasi_mult_constant,
    rejection_acceptance_rate,
)
from percolab.services.lattice import ORIGIN


def test_one_arm_of_unit_box(seed, within):
    # Any of the four edges at the origin reaches dB(1).
    estimate = one_arm_probability(1, 10_000, seed)
    assert within(estimate.value, 15 / 16, 10_000)


def test_one_arm_is_coupled_in_n(seed):
    small = one_arm_probability(2, 1_000, seed)
    large = one_arm_probability(6, 1_000, seed)
    assert large.successes <= small.successes


def test_one_arm_rejects_bad_radius(seed):
    with pytest.raises(ValidationError):
        one_arm_probability(0, 10, seed)


def test_box_arm_is_certain_when_box_reaches_horizon(seed):
    estimate = box_arm_probability(4, 4, 50, seed)
    assert estimate.value == estimate.lower == estimate.upper == 1.0


def test_box_arm_dominates_one_arm(seed):
    rho = box_arm_probability(2, 6, 2_000, seed)
    pi = one_arm_probability(6, 2_000, seed)
    assert rho.value > pi.value


def test_conditioned_one_arm_needs_room(seed):
    with pytest.raises(ValidationError):
        conditioned_one_arm(2, 3, 10, seed)


def test_conditioning_raises_the_arm_probability(seed):
    conditioned = conditioned_one_arm(1, 6, 2_000, seed)
    plain = one_arm_probability(6, 2_000, seed)
    assert conditioned.value > plain.value


def test_rejection_sample_is_connected(seed):
    sample = iic_rejection_sample(4, seed)
    assert sample.accepted
    assert sample.attempts >= 1
    cluster = cluster_of(sample.configuration, ORIGIN)
    assert touches_boundary(cluster, 4)


def test_rejection_sample_is_reproducible(seed):
    first = iic_rejection_sample(3, seed)
    second = iic_rejection_sample(3, seed)
    assert first.attempts == second.attempts
    assert first.configuration.open_edges == second.configuration.open_edges


def test_rejection_cap_raises(seed):
    with pytest.raises(RejectionLimitError) as exc:
        iic_rejection_sample(8, seed, attempt_cap=0)
    assert exc.value.exit_code == 3
    assert exc.value.details["radius"] == 8


def test_acceptance_rate_of_unit_box(seed):
    estimate = rejection_acceptance_rate(1, 200, seed)
    assert 0.85 < estimate.value <= 1.0
    assert estimate.successes == 200


def test_conditioned_volume_profile(seed):
    profile = conditioned_volume_profile(4, [0, 2, 4], 10, seed)
    assert profile[0] == 1.0
    assert profile == sorted(profile)
    with pytest.raises(ValidationError):
        conditioned_volume_profile(4, [5], 1, seed)


def test_quasi_mult_constant_is_at_least_one(seed):
    c_hat = quasi_mult_constant(1, 8, 4_000, seed)
    assert c_hat.upper >= 1.0
    assert c_hat.seed == seed


def test_nu_estimate_sits_in_sandwich(seed):
    estimate = nu_annulus_estimate(1, 4, 4_000, seed)
    assert estimate.annulus_edges == 16
    assert estimate.prefactor == 0.5**16
    assert estimate.value > 0.0
    assert estimate.sandwich_ok


def test_nu_estimate_needs_room(seed):
    with pytest.raises(ValidationError):
        nu_annulus_estimate(2, 7, 10, seed)


@pytest.mark.slow
@pytest.mark.parametrize("n, N", [(1, 16), (1, 32), (2, 16), (2, 32)])
def test_nu_sandwich_on_larger_horizons(seed, n, N):
    estimate = nu_annulus_estimate(n, N, 20_000, seed)
    assert estimate.sandwich_ok
    assert estimate.c_hat.upper >= 1.0


@pytest.mark.slow
@pytest.mark.parametrize("n, N", [(1, 2), (1, 16), (2, 16)])
def test_quasi_mult_constant_interval_reaches_one(seed, n, N):
    assert quasi_mult_constant(n, N, 20_000, seed).upper >= 1.0


@pytest.mark.slow
def test_nu_estimate_is_stable_in_horizon(seed):
    estimates = [
        nu_annulus_estimate(1, N, 20_000, seed.child(f"N={N}")) for N in (8, 16, 32)
    ]
    values = [estimate.value for estimate in estimates]
    assert max(values) <= 1.1 * min(values)
