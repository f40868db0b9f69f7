"""Built-in oracle suite.

Each check compares a library operation against an exact enumeration, a brute-force
recomputation or a closed-form value. Monte Carlo checks run at fixed seeds with
4-sigma acceptance bands, so the suite is deterministic.
"""

import math
from collections import deque
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.stats import kstest

from percolab.config import settings
from percolab.exceptions import SoundnessError
from percolab.schemas.reports import CheckResult, Geometry, SelftestReport
from percolab.schemas.seeds import SeedSpec
from percolab.services.connectivity import (
    ClusterLabeling,
    cluster_of,
    connected,
    connection_outcomes,
    disconnecting_edges,
    has_lr_crossing,
    separated_batch,
    touches_boundary,
)
from percolab.services.domination import certificate_cross_check
from percolab.services.iic import iic_rejection_sample
from percolab.services.invasion import StopRule, run_invasion
from percolab.services.lattice import (
    ORIGIN,
    Annulus,
    BoxSpec,
    Edge,
    Region,
    box_vertices,
    induced_edges,
    internal_boundary,
)
from percolab.services.near_critical import crossing_probability
from percolab.services.random_field import (
    Configuration,
    WeightField,
    bernoulli_config,
    enumerate_probability,
    sample_weights,
)
from percolab.utils.logger import get_logger
from percolab.utils.rng import derive_key, uniform_array, uniform_scalar
from percolab.utils.stats import wilson_interval

logger = get_logger(__name__)

Check = Callable[[SeedSpec], tuple[bool, str]]
CHECKS: dict[str, Check] = {}


def check(name: str) -> Callable[[Check], Check]:
    def register(func: Check) -> Check:
        CHECKS[name] = func
        return func

    return register


def _within(value: float, target: float, trials: int, sigmas: float = 4.0) -> bool:
    return abs(value - target) <= sigmas * math.sqrt(target * (1 - target) / trials)


def scan_invasion(field_: WeightField, steps: int) -> list[int]:
    """Invasion by rescanning every region edge at each step."""
    region = field_.region
    weights = field_.weights
    vertices = {region.vertex_index((0, 0))}
    invaded: set[int] = set()
    trace: list[int] = []
    for _ in range(steps):
        best: tuple[tuple[float, int], int] | None = None
        for index in range(region.n_edges):
            if index in invaded:
                continue
            u, v = region.edge_endpoints(index)
            if u not in vertices and v not in vertices:
                continue
            key = (float(weights[index]), region.edge_code_at(index))
            if best is None or key < best[0]:
                best = (key, index)
        if best is None:
            break
        invaded.add(best[1])
        vertices.update(region.edge_endpoints(best[1]))
        trace.append(best[1])
    return trace


def delete_one_disconnecting(
    edges: frozenset[Edge], window: Annulus, horizon: int
) -> set[Edge]:
    """Window edges whose deletion leaves the origin off the horizon boundary."""
    found = set()
    for removed in edges:
        if not window.contains_edge(removed):
            continue
        adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for e in edges - {removed}:
            adj.setdefault(e.a, []).append(e.b)
            adj.setdefault(e.b, []).append(e.a)
        seen = {ORIGIN}
        queue = deque([ORIGIN])
        while queue:
            for w in adj.get(queue.popleft(), []):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        if all(max(abs(x), abs(y)) < horizon for x, y in seen):
            found.add(removed)
    return found


@check("box-sizes")
def _box_sizes(seed: SeedSpec) -> tuple[bool, str]:
    ok = all(
        len(box_vertices(BoxSpec(n))) == (2 * n + 1) ** 2
        and len(internal_boundary(BoxSpec(n))) == 8 * n
        for n in range(1, 21)
    )
    counts = (
        len(induced_edges(box_vertices(BoxSpec(1)))),
        Annulus(1, 2).edge_count,
        Annulus(4, 8).edge_count,
    )
    return ok and counts == (12, 16, 364), f"B(1), Ann(1,2), Ann(4,8) edges={counts}"


@check("uniform-stream")
def _uniform_stream(seed: SeedSpec) -> tuple[bool, str]:
    region = Region.box(4)
    key = derive_key(seed)
    vector = uniform_array(key, region.edge_codes)
    scalar = [uniform_scalar(key, int(c)) for c in region.edge_codes]
    draws = uniform_array(key, np.arange(100_000, dtype=np.uint64))
    statistic = float(kstest(draws, "uniform").statistic)
    critical = 1.63 / math.sqrt(draws.size)
    ok = vector.tolist() == scalar and statistic < critical
    return ok, f"ks={statistic:.5f} critical={critical:.5f}"


@check("crossing-enumeration")
def _crossing_enumeration(seed: SeedSpec) -> tuple[bool, str]:
    square = enumerate_probability(
        Region.rectangle(0, 0, 1, 1), lambda c: has_lr_crossing(c, 1, 1)
    )
    strip = enumerate_probability(
        Region.rectangle(0, 0, 2, 1), lambda c: has_lr_crossing(c, 2, 1)
    )
    return (square, strip) == (Fraction(3, 4), Fraction(1, 2)), f"{square}, {strip}"


@check("crossing-monte-carlo")
def _crossing_monte_carlo(seed: SeedSpec) -> tuple[bool, str]:
    trials = 20_000
    estimate = crossing_probability(0.5, 1, trials, seed)
    return _within(estimate.value, 0.75, trials), f"value={estimate.value:.4f}"


@check("one-arm-enumeration")
def _one_arm_enumeration(seed: SeedSpec) -> tuple[bool, str]:
    ring = internal_boundary(BoxSpec(1))
    value = enumerate_probability(Region.box(1), lambda c: connected(c, ORIGIN, ring))
    return value == Fraction(15, 16), str(value)


@check("batch-labeling")
def _batch_labeling(seed: SeedSpec) -> tuple[bool, str]:
    region = Region.box(3)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(3)
    ring = internal_boundary(BoxSpec(3))
    mismatches = 0
    for i in range(50):
        config = bernoulli_config(region, 0.5, seed.replica(i))
        batched = bool(separated_batch(region, config.open_mask, origin, boundary)[0])
        labeling = ClusterLabeling.from_configuration(config).freeze()
        single = not any(
            labeling.connected(int(origin[0]), int(b)) for b in boundary
        )
        bfs = not touches_boundary(cluster_of(config, ORIGIN), 3)
        direct = not connected(config, ORIGIN, ring)
        mismatches += len({batched, single, bfs, direct}) > 1
    return mismatches == 0, f"mismatches={mismatches}"


@check("invasion-scan")
def _invasion_scan(seed: SeedSpec) -> tuple[bool, str]:
    region = Region.box(5)
    rule = StopRule(max_steps=12)
    mismatches = 0
    for i in range(100):
        field_ = sample_weights(region, seed.replica(i))
        state = run_invasion(field_, rule)
        oracle = scan_invasion(field_, 12)
        if state.trace_edges != oracle[: state.step_count]:
            mismatches += 1
        elif not state.censored and state.step_count != len(oracle):
            mismatches += 1
    return mismatches == 0, f"mismatches={mismatches}"


@check("disconnecting-edges")
def _disconnecting_edges(seed: SeedSpec) -> tuple[bool, str]:
    horizon = BoxSpec(4)
    window = Annulus(0, 4)
    tested = mismatches = 0
    i = 0
    while tested < 100:
        config = bernoulli_config(horizon, 0.55, seed.replica(i))
        i += 1
        cluster = cluster_of(config, ORIGIN)
        if not touches_boundary(cluster, horizon.n) or len(cluster.edges) > 100:
            continue
        tested += 1
        fast = disconnecting_edges(cluster, ORIGIN, window, horizon)
        slow = delete_one_disconnecting(cluster.edges, window, horizon.n)
        mismatches += fast != slow
    return mismatches == 0, f"clusters={tested} mismatches={mismatches}"


@check("rejection-cylinder")
def _rejection_cylinder(seed: SeedSpec) -> tuple[bool, str]:
    """Conditional law of an origin edge on B(1) given the arm event."""
    region = Region.box(1)
    ring = internal_boundary(BoxSpec(1))
    edge = Edge.between((0, 0), (1, 0))
    joint = enumerate_probability(
        region, lambda c: c.is_open(edge) and connected(c, ORIGIN, ring)
    )
    arm = enumerate_probability(region, lambda c: connected(c, ORIGIN, ring))
    exact = joint / arm
    samples = 2_000
    hits = sum(
        iic_rejection_sample(1, seed.replica(i)).configuration.is_open(edge)
        for i in range(samples)
    )
    ok = exact == Fraction(8, 15) and _within(hits / samples, float(exact), samples)
    return ok, f"exact={exact} empirical={hits / samples:.4f}"


@check("certificate-soundness")
def _certificate_soundness(seed: SeedSpec) -> tuple[bool, str]:
    tallies = [
        certificate_cross_check(n, p, 200, seed.child(f"{g.value}/n={n}/p={p}"), g)
        for g in Geometry
        for n in (1, 2)
        for p in (settings.P_C, 0.6)
    ]
    certified = sum(t.certified for t in tallies)
    covered = sum(t.covered for t in tallies)
    return certified == covered and certified > 0, f"certified={certified}"


@check("wilson-interval")
def _wilson_interval(seed: SeedSpec) -> tuple[bool, str]:
    half = wilson_interval(50, 100, 0.95)
    none = wilson_interval(0, 100, 0.95)
    ok = (
        abs(half.lower - 0.4038) < 1e-3
        and abs(half.upper - 0.5962) < 1e-3
        and none.lower == 0.0
        and none.upper < 0.05
    )
    return ok, f"({half.lower:.4f}, {half.upper:.4f}), upper0={none.upper:.5f}"


@check("worker-invariance")
def _worker_invariance(seed: SeedSpec) -> tuple[bool, str]:
    region = Region.box(4)
    origin = np.array([region.vertex_index(ORIGIN)])
    boundary = region.boundary_vertex_indices(4)
    runs = [
        connection_outcomes(region, 0.5, origin, boundary, 600, seed, workers=w)
        for w in (1, 2)
    ]
    return bool(np.array_equal(*runs)), f"successes={int(runs[0].sum())}"


@check("manual-configuration")
def _manual_configuration(seed: SeedSpec) -> tuple[bool, str]:
    square = [
        Edge.between((0, 0), (1, 0)),
        Edge.between((0, 0), (0, 1)),
        Edge.between((1, 0), (1, 1)),
        Edge.between((0, 1), (1, 1)),
    ]
    config = Configuration.from_edges(BoxSpec(2), square)
    ok = connected(config, (0, 0), (1, 1)) and not connected(config, (0, 0), (2, 0))
    return ok, "unit square"


def run_selftest(seed: SeedSpec | None = None) -> SelftestReport:
    """Run every registered check.

    Raises:
        SoundnessError: If any check fails; the report is attached to the details
    """
    seed = seed or SeedSpec(master_seed=7, purpose_tag="selftest")
    results = []
    for name, func in CHECKS.items():
        passed, detail = func(seed.child(name))
        log = logger.info if passed else logger.error
        log("Self-test check", check=name, passed=passed, detail=detail)
        results.append(CheckResult(name=name, passed=passed, detail=detail))
    report = SelftestReport(results=results)
    if not report.passed:
        raise SoundnessError(
            "Self-test failed", failures=report.failures, results=report.csv_rows()
        )
    return report
