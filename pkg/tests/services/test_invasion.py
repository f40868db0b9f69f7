"""Tests for the invasion process, its stop rules and trace helpers."""

from types import SimpleNamespace

import numpy as np
import pytest

from percolab.exceptions import GeometryError, ValidationError
from percolab.schemas.seeds import SeedSpec
from percolab.services.invasion import (
    Coverage,
    InvasionState,
    StopRule,
    annulus_coverage_event,
    box_volume_profile,
    export_trace,
    invade_step,
    invasion_volume_profile,
    p_open_entry_step,
    run_invasion,
    running_max_trace,
)
from percolab.services.connectivity import cluster_of, touches_boundary
from percolab.services.lattice import ORIGIN, Annulus, Edge, Region
from percolab.services.random_field import WeightField, sample_weights, threshold
from percolab.services.selftest import scan_invasion


def hand_field(region: Region, weights: dict[Edge, float]) -> WeightField:
    return WeightField.from_mapping(region, weights)


def test_hand_trace_first_three_steps():
    right = Edge.between((0, 0), (1, 0))
    up_from_right = Edge.between((1, 0), (1, 1))
    up = Edge.between((0, 0), (0, 1))
    field_ = hand_field(Region.box(2), {right: 0.1, up_from_right: 0.2, up: 0.3})
    state = run_invasion(field_, StopRule(max_steps=3))
    assert state.trace == [(right, 0.1), (up_from_right, 0.2), (up, 0.3)]
    assert state.invaded_vertices == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert not state.censored


@pytest.mark.parametrize("replica", range(20))
def test_trace_matches_full_scan(seed, replica):
    field_ = sample_weights(Region.box(5), seed.replica(replica))
    state = run_invasion(field_, StopRule(max_steps=12))
    oracle = scan_invasion(field_, 12)
    assert state.trace_edges == oracle[: state.step_count]
    if not state.censored:
        assert state.step_count == 12


def test_popped_weight_is_frontier_minimum(seed):
    field_ = sample_weights(Region.box(6), seed)
    state = InvasionState.start(field_)
    for _ in range(30):
        frontier = state.frontier_edges()
        expected = min(
            (field_.weight_at(i), state.region.edge_code_at(i)) for i in frontier
        )
        edge, weight = invade_step(state, field_)
        assert (weight, edge.code) == expected


def test_closes_cycles_around_the_origin():
    ring = Annulus(1, 2).edges
    path = {
        Edge.between((0, 0), (1, 0)): 0.01,
        Edge.between((1, 0), (2, 0)): 0.02,
    }
    field_ = hand_field(Region.box(4), {**path, **{e: 0.05 for e in ring}})
    state = run_invasion(field_, StopRule(annulus=Annulus(1, 2)))
    assert state.step_count == 18
    assert annulus_coverage_event(state, Annulus(1, 2)) == Coverage.COVERED
    assert not state.censored


def test_touching_the_horizon_censors(seed):
    field_ = sample_weights(Region.box(1), seed)
    state = run_invasion(field_, StopRule(max_steps=100))
    assert state.censored
    assert state.step_count == 1


def test_exit_radius_on_the_horizon_is_not_censored(seed):
    field_ = sample_weights(Region.box(3), seed)
    state = run_invasion(field_, StopRule(exit_radius=3))
    assert state.max_norm == 3
    assert not state.censored


def test_censored_run_without_coverage_is_indeterminate(seed):
    field_ = sample_weights(Region.box(2), seed)
    state = run_invasion(field_, StopRule(max_steps=1000))
    assert state.censored
    if annulus_coverage_event(state, Annulus(1, 2)) != Coverage.COVERED:
        assert annulus_coverage_event(state, Annulus(1, 2)) == Coverage.INDETERMINATE


def test_uncensored_run_without_coverage_is_not_covered(seed):
    field_ = sample_weights(Region.box(5), seed)
    state = run_invasion(field_, StopRule(max_steps=1))
    assert annulus_coverage_event(state, Annulus(3, 4)) == Coverage.NOT_COVERED


def test_invaded_graph_is_connected_without_repeats(seed):
    field_ = sample_weights(Region.box(20), seed)
    state = run_invasion(field_, StopRule(max_steps=300), check_every=50)
    assert len(set(state.trace_edges)) == state.step_count
    assert state.cluster().is_connected()
    assert (0, 0) in state.invaded_vertices


def test_identical_fields_give_identical_traces(seed):
    region = Region.box(10)
    first = run_invasion(sample_weights(region, seed), StopRule(max_steps=80))
    second = run_invasion(sample_weights(region, seed), StopRule(max_steps=80))
    assert first.trace == second.trace


def test_stop_rule_needs_a_condition():
    with pytest.raises(ValidationError):
        StopRule()


def test_exit_radius_beyond_horizon_rejected(seed):
    with pytest.raises(GeometryError):
        run_invasion(sample_weights(Region.box(2), seed), StopRule(exit_radius=3))


def test_off_centre_horizon_rejected(seed):
    with pytest.raises(GeometryError):
        InvasionState.start(sample_weights(Region.rectangle(0, 0, 3, 3), seed))


def test_running_max_is_suffix_max():
    state = SimpleNamespace(step_count=4, trace_weights=[0.9, 0.3, 0.7, 0.2])
    assert running_max_trace(state, 0).tolist() == [0.9, 0.7, 0.7, 0.2]
    assert running_max_trace(state, 2).tolist() == [0.7, 0.2]


def test_running_max_of_constant_trace():
    state = SimpleNamespace(step_count=3, trace_weights=[0.4, 0.4, 0.4])
    assert running_max_trace(state, 0).tolist() == [0.4, 0.4, 0.4]


def test_running_max_burn_in_out_of_range():
    state = SimpleNamespace(step_count=2, trace_weights=[0.1, 0.2])
    with pytest.raises(ValidationError):
        running_max_trace(state, 2)


def test_running_max_is_non_increasing(seed):
    field_ = sample_weights(Region.box(40), seed)
    state = run_invasion(field_, StopRule(max_steps=2000))
    maxima = running_max_trace(state, 100)
    assert np.all(np.diff(maxima) <= 0)


@pytest.mark.parametrize("p, expected", [(0.8, 2), (0.75, 2), (0.5, 4), (0.1, None)])
def test_p_open_entry_step(p, expected):
    state = SimpleNamespace(step_count=4, trace_weights=[0.9, 0.3, 0.7, 0.2])
    assert p_open_entry_step(state, p) == expected


def test_box_volume_profile(seed):
    field_ = sample_weights(Region.box(8), seed)
    state = run_invasion(field_, StopRule(exit_radius=8))
    profile = box_volume_profile(state, [0, 2, 4, 8])
    assert profile[0] == 1
    assert profile == sorted(profile)
    assert profile[-1] == len(state.invaded_vertices)


def test_invasion_volume_profile(seed):
    profile = invasion_volume_profile(6, [1, 3, 6], 5, seed)
    assert len(profile) == 3
    assert profile == sorted(profile)
    with pytest.raises(ValidationError):
        invasion_volume_profile(6, [7], 1, seed)


def test_export_trace_csv(tmp_path, seed):
    state = run_invasion(sample_weights(Region.box(6), seed), StopRule(max_steps=5))
    path = tmp_path / "trace.csv"
    export_trace(state, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# percolab-schema: trace/v1"
    assert lines[1] == "step,ax,ay,bx,by,weight"
    assert len(lines) == 2 + state.step_count


def test_export_trace_npy(tmp_path, seed):
    state = run_invasion(sample_weights(Region.box(6), seed), StopRule(max_steps=5))
    path = tmp_path / "trace.npy"
    export_trace(state, path, fmt="npy")
    records = np.load(path)
    assert records["step"].tolist() == list(range(1, state.step_count + 1))
    assert records["weight"].tolist() == state.trace_weights


def test_export_trace_unknown_format(tmp_path, seed):
    state = run_invasion(sample_weights(Region.box(2), seed), StopRule(max_steps=1))
    with pytest.raises(ValidationError):
        export_trace(state, tmp_path / "trace.bin", fmt="bin")


@pytest.mark.slow
def test_running_max_after_burn_in_approaches_critical_level():
    field_ = sample_weights(Region.box(1500), SeedSpec(master_seed=7))
    state = run_invasion(field_, StopRule(max_steps=100_000, exit_radius=1500))
    assert running_max_trace(state, 10_000)[0] < 0.55


@pytest.mark.parametrize("p", [0.45, 0.5, 0.6])
@pytest.mark.parametrize("replica", range(10))
def test_interior_p_open_cluster_is_absorbed_first(seed, replica, p):
    field_ = sample_weights(Region.box(6), seed.replica(replica))
    state = run_invasion(field_, StopRule(exit_radius=6))
    config = threshold(field_, p)
    invaded: set = set()
    pending: list[frozenset] = []

    def reach(vertex) -> None:
        invaded.add(vertex)
        cluster = cluster_of(config, vertex)
        if not touches_boundary(cluster, 6):
            pending.append(frozenset(cluster.vertices))

    reach(ORIGIN)
    for edge, weight in state.trace:
        pending[:] = [c for c in pending if not c <= invaded]
        if pending:
            assert weight < p
        for vertex in edge:
            if vertex not in invaded:
                reach(vertex)
