"""Tests for labeling, crossings, clusters and disconnecting edges."""

from fractions import Fraction

import numpy as np
import pytest

from percolab.exceptions import ValidationError
from percolab.services.connectivity import (
    ClusterLabeling,
    FiniteCluster,
    bridges,
    cluster_of,
    connected,
    connection_outcomes,
    disconnecting_edges,
    has_lr_crossing,
    label_batch,
    lr_crossing_batch,
    separated_batch,
    touches_boundary,
)
from percolab.services.lattice import (
    ORIGIN,
    Annulus,
    BoxSpec,
    Edge,
    Region,
    internal_boundary,
)
from percolab.services.near_critical import crossing_probability
from percolab.services.random_field import (
    Configuration,
    batch_weights,
    bernoulli_config,
    enumerate_probability,
)
from percolab.services.selftest import delete_one_disconnecting
from percolab.utils.stats import wilson_interval

UNIT_SQUARE = [
    Edge.between((0, 0), (1, 0)),
    Edge.between((0, 0), (0, 1)),
    Edge.between((1, 0), (1, 1)),
    Edge.between((0, 1), (1, 1)),
]


def test_unit_square_connectivity():
    config = Configuration.from_edges(BoxSpec(2), UNIT_SQUARE)
    assert connected(config, (0, 0), (1, 1))
    assert not connected(config, (0, 0), (2, 0))


def test_connected_rejects_empty_sets():
    config = Configuration.from_edges(BoxSpec(1), [])
    with pytest.raises(ValidationError):
        connected(config, [], (0, 0))


def test_union_find_components():
    labeling = ClusterLabeling(5)
    assert labeling.union(0, 1)
    assert labeling.union(1, 2)
    assert not labeling.union(0, 2)
    assert labeling.connected(0, 2)
    assert not labeling.connected(0, 3)
    assert labeling.component_size(2) == 3
    labeling.freeze()
    with pytest.raises(ValidationError):
        labeling.union(3, 4)


@pytest.mark.parametrize(
    "open_edges, expected",
    [
        ([Edge.between((0, 0), (1, 0))], True),
        ([Edge.between((0, 0), (0, 1)), Edge.between((1, 0), (1, 1))], False),
        ([Edge.between((0, 1), (1, 1))], True),
        ([], False),
    ],
)
def test_unit_crossing_cases(open_edges, expected):
    config = Configuration.from_edges(Region.rectangle(0, 0, 1, 1), open_edges)
    assert has_lr_crossing(config, 1, 1) is expected


def test_crossing_of_unit_square_is_three_quarters():
    value = enumerate_probability(
        Region.rectangle(0, 0, 1, 1), lambda c: has_lr_crossing(c, 1, 1)
    )
    assert value == Fraction(3, 4)


def test_self_dual_rectangle_crossing_is_one_half():
    value = enumerate_probability(
        Region.rectangle(0, 0, 2, 1), lambda c: has_lr_crossing(c, 2, 1)
    )
    assert value == Fraction(1, 2)


@pytest.mark.parametrize(
    "width, replicas",
    [(9, 20_000), pytest.param(17, 100_000, marks=pytest.mark.slow)],
)
def test_self_dual_crossing_by_monte_carlo(seed, width, replicas):
    estimate = crossing_probability(0.5, width, replicas, seed, height=width - 1)
    band = wilson_interval(estimate.successes, replicas, confidence=0.997)
    assert band.lower <= 0.5 <= band.upper


def test_perimeter_ring_cluster():
    ring = Annulus(1, 2).edges
    config = Configuration.from_edges(BoxSpec(3), ring)
    cluster = cluster_of(config, (2, 2))
    assert len(cluster.vertices) == 16
    assert cluster.edges == ring
    assert not cluster.contains_origin
    assert cluster.bounding_box == (-2, -2, 2, 2)


def test_lr_crossing_batch_matches_single(seed):
    rect = Region.rectangle(0, 0, 4, 3)
    configs = [bernoulli_config(rect, 0.5, seed.replica(i)) for i in range(64)]
    batched = lr_crossing_batch(rect, np.stack([c.open_mask for c in configs]))
    assert batched.tolist() == [has_lr_crossing(c, 4, 3) for c in configs]


def test_label_batch_matches_union_find(seed):
    region = Region.box(3)
    configs = [bernoulli_config(region, 0.5, seed.replica(i)) for i in range(32)]
    labels = label_batch(region, np.stack([c.open_mask for c in configs]))
    for row, config in zip(labels, configs):
        labeling = ClusterLabeling.from_configuration(config)
        for u in range(0, region.n_vertices, 5):
            for v in range(0, region.n_vertices, 7):
                assert (row[u] == row[v]) == labeling.connected(u, v)


def test_separated_batch_matches_connected(seed):
    region = Region.box(3)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(3)
    ring = internal_boundary(BoxSpec(3))
    configs = [bernoulli_config(region, 0.55, seed.replica(i)) for i in range(40)]
    separated = separated_batch(
        region, np.stack([c.open_mask for c in configs]), origin, boundary
    )
    assert separated.tolist() == [not connected(c, ORIGIN, ring) for c in configs]


def test_connection_is_coupled_field_by_field(seed):
    region = Region.box(4)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(4)
    weights = batch_weights(region, seed, 0, 1_000)
    reached = [
        ~separated_batch(region, weights < p, origin, boundary)
        for p in (0.4, 0.5, 0.6)
    ]
    for low, high in zip(reached, reached[1:]):
        assert np.all(low <= high)


def test_connection_outcomes_support_removes_edges(seed):
    region = Region.box(2)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(2)
    empty = np.zeros(region.n_edges, dtype=bool)
    outcomes = connection_outcomes(
        region, 1.0, origin, boundary, 10, seed, support=empty
    )
    assert not outcomes.any()
    assert connection_outcomes(region, 1.0, origin, boundary, 10, seed).all()


def test_connection_outcomes_forced_edges(seed):
    region = Region.box(2)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(2)
    path = [Edge.between((0, 0), (1, 0)), Edge.between((1, 0), (2, 0))]
    outcomes = connection_outcomes(
        region, 0.0, origin, boundary, 10, seed, forced=region.edge_mask(path)
    )
    assert outcomes.all()


def test_connection_outcomes_worker_invariance(seed):
    region = Region.box(4)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(4)
    single = connection_outcomes(region, 0.5, origin, boundary, 600, seed, workers=1)
    multi = connection_outcomes(region, 0.5, origin, boundary, 600, seed, workers=4)
    assert np.array_equal(single, multi)


def test_bridges_of_path_and_cycle():
    path = FiniteCluster.from_edges(
        [Edge.between((0, 0), (1, 0)), Edge.between((1, 0), (2, 0))]
    )
    assert bridges(path) == set(path.edges)
    square = FiniteCluster.from_edges(UNIT_SQUARE)
    assert bridges(square) == set()
    assert square.is_connected()


def test_disconnecting_edges_on_lollipop():
    # A square at the origin on a stick reaching the boundary of B(3).
    stick = [Edge.between((i, 0), (i + 1, 0)) for i in range(1, 3)]
    cluster = FiniteCluster.from_edges(UNIT_SQUARE + stick)
    horizon = BoxSpec(3)
    assert touches_boundary(cluster, 3)
    assert disconnecting_edges(cluster, ORIGIN, Annulus(0, 3), horizon) == set(stick)
    assert disconnecting_edges(cluster, ORIGIN, Annulus(1, 3), horizon) == {stick[1]}


@pytest.mark.parametrize("replica", range(25))
def test_disconnecting_edges_match_delete_one_oracle(seed, replica):
    horizon = BoxSpec(4)
    window = Annulus(0, 4)
    config = bernoulli_config(horizon, 0.55, seed.replica(replica))
    cluster = cluster_of(config, ORIGIN)
    if not touches_boundary(cluster, 4):
        pytest.skip("cluster does not reach the horizon")
    assert disconnecting_edges(
        cluster, ORIGIN, window, horizon
    ) == delete_one_disconnecting(cluster.edges, window, 4)


def test_disconnecting_edges_requires_origin():
    cluster = FiniteCluster.from_edges([Edge.between((1, 1), (1, 2))])
    with pytest.raises(ValidationError):
        disconnecting_edges(cluster, ORIGIN, Annulus(0, 2), BoxSpec(2))
