"""Tests for seeded weight fields and configurations."""

from fractions import Fraction

import numpy as np
import pytest

from percolab.exceptions import ValidationError
from percolab.services.lattice import Annulus, BoxSpec, Edge, Region
from percolab.services.random_field import (
    Configuration,
    Provenance,
    WeightField,
    batch_weights,
    bernoulli_config,
    condition_open,
    enumerate_probability,
    sample_weights,
    threshold,
)
from percolab.utils.stats import wilson_interval


def test_same_seed_same_weights(seed):
    region = Region.box(3)
    assert np.array_equal(
        sample_weights(region, seed).weights, sample_weights(region, seed).weights
    )


def test_weights_do_not_depend_on_region(seed):
    small = sample_weights(BoxSpec(2), seed)
    large = sample_weights(BoxSpec(6), seed)
    for edge, value in small.items():
        assert large.weight(edge) == value


def test_lazy_weights_equal_dense_weights(seed):
    field_ = sample_weights(Region.box(4), seed)
    lazy = [field_.weight_at(i) for i in range(field_.region.n_edges)]
    assert lazy == field_.weights.tolist()


def test_purpose_tags_separate_streams(seed):
    region = Region.box(3)
    a = sample_weights(region, seed.child("a")).weights
    b = sample_weights(region, seed.child("b")).weights
    assert not np.array_equal(a, b)


def test_threshold_is_monotone_in_p(seed):
    field_ = sample_weights(Region.box(6), seed)
    low = threshold(field_, 0.4).open_mask
    high = threshold(field_, 0.6).open_mask
    assert np.all(low <= high)
    assert threshold(field_, 0.0).n_open == 0
    assert threshold(field_, 1.0).n_open == field_.region.n_edges


def test_threshold_rejects_level_outside_unit_interval(seed):
    with pytest.raises(ValidationError):
        threshold(sample_weights(Region.box(1), seed), 1.5)


def test_bernoulli_open_fraction(seed):
    config = bernoulli_config(Region.box(120), 0.5, seed)
    fraction = config.n_open / config.region.n_edges
    assert abs(fraction - 0.5) < 0.005


def test_bernoulli_forced_edges_open(seed):
    forced = Annulus(1, 2).edges
    config = bernoulli_config(BoxSpec(3), 0.1, seed, forced_open=forced)
    assert forced <= config.open_edges
    assert config.forced_open == set(forced)
    assert config.provenance == Provenance.BERNOULLI


def test_bernoulli_single_edge_probability(seed):
    edge = Edge.between((0, 0), (1, 0))
    trials = 10_000
    hits = sum(
        bernoulli_config(BoxSpec(1), 0.5, seed.replica(i)).is_open(edge)
        for i in range(trials)
    )
    estimate = wilson_interval(hits, trials, confidence=0.999)
    assert estimate.lower <= 0.5 <= estimate.upper


def test_bernoulli_forced_edge_outside_region_rejected(seed):
    outside = Edge.between((5, 0), (6, 0))
    with pytest.raises(ValidationError):
        bernoulli_config(BoxSpec(2), 0.5, seed, forced_open=[outside])


def test_configuration_forced_must_be_open():
    region = Region.box(1)
    with pytest.raises(ValidationError):
        Configuration(
            region=region,
            open_mask=np.zeros(region.n_edges, dtype=bool),
            forced_mask=np.ones(region.n_edges, dtype=bool),
            provenance=Provenance.MANUAL,
        )


def test_condition_open_rescales_only_the_given_edges(seed):
    field_ = sample_weights(Region.box(4), seed)
    edges = Annulus(1, 2).edges
    conditioned = condition_open(field_, edges, 0.6)
    for edge, value in field_.items():
        if edge in edges:
            assert conditioned.weight(edge) == pytest.approx(0.6 * value)
            assert conditioned.weight(edge) < 0.6
        else:
            assert conditioned.weight(edge) == value


def test_from_array_rejects_weights_outside_unit_interval():
    region = Region.box(1)
    with pytest.raises(ValidationError):
        WeightField.from_array(region, np.full(region.n_edges, 1.0))


def test_batch_rows_match_replica_fields(seed):
    region = Region.box(3)
    batch = batch_weights(region, seed, 5, 9)
    for row, r in zip(batch, range(5, 9)):
        assert np.array_equal(row, sample_weights(region, seed.replica(r)).weights)


@pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(1, 3)])
def test_enumerate_single_edge(p):
    region = Region.rectangle(0, 0, 1, 0)
    assert enumerate_probability(region, lambda c: c.n_open == 1, p) == p


def test_enumerate_refuses_large_regions():
    with pytest.raises(ValidationError):
        enumerate_probability(Region.box(2), lambda c: True)
