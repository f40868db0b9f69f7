"""Invasion percolation from the origin.

Starting from the origin, each step invades the uninvaded edge of least weight
among the edges touching the invaded vertex set. The frontier is a binary heap of
(weight, edge code, edge index); code order is canonical edge order, which breaks
weight ties. Every edge enters the heap once, when its first endpoint is invaded,
and stays eligible after its second endpoint is invaded so that cycles get closed.

Membership is kept in flat bytearrays over the horizon box, so horizons of radius
in the thousands cost a few bytes per vertex; weights are drawn lazily.
"""

import heapq
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from percolab.exceptions import GeometryError, SoundnessError, ValidationError
from percolab.services.connectivity import FiniteCluster
from percolab.schemas.seeds import SeedSpec
from percolab.services.lattice import Annulus, BoxSpec, Edge, Region, Vertex
from percolab.services.random_field import WeightField, sample_weights
from percolab.utils.io import write_csv
from percolab.utils.logger import get_logger

logger = get_logger(__name__)

TRACE_COLUMNS = ("step", "ax", "ay", "bx", "by", "weight")


class Coverage(str, Enum):
    """Outcome of an annulus-coverage query on a finite run."""

    COVERED = "covered"
    NOT_COVERED = "not_covered"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class StopRule:
    """When to stop growing; at least one condition, the first to fire wins."""

    max_steps: int | None = None
    exit_radius: int | None = None
    annulus: Annulus | None = None
    covered: frozenset[Edge] | None = None

    def __post_init__(self) -> None:
        if (self.target, self.max_steps, self.exit_radius) == (None, None, None):
            raise ValidationError(
                "A stop rule needs at least one condition", field="rule"
            )
        if self.max_steps is not None and self.max_steps < 0:
            raise ValidationError("max_steps must be non-negative", field="max_steps")
        if self.exit_radius is not None and self.exit_radius < 1:
            raise ValidationError("exit_radius must be positive", field="exit_radius")

    @property
    def target(self) -> frozenset[Edge] | None:
        """Edges whose joint invasion stops the run (annulus or explicit set)."""
        if self.annulus is not None:
            return self.annulus.edges | (self.covered or frozenset())
        return self.covered

    def fired(self, state: "InvasionState") -> bool:
        if self.max_steps is not None and state.step_count >= self.max_steps:
            return True
        if self.exit_radius is not None and state.max_norm >= self.exit_radius:
            return True
        return state.target_total > 0 and state.target_invaded >= state.target_total


@dataclass(eq=False)
class InvasionState:
    """Invaded graph, frontier and trace of one invasion run inside a horizon box."""

    horizon: BoxSpec
    region: Region
    vertices: bytearray = field(repr=False)
    edges: bytearray = field(repr=False)
    queued: bytearray = field(repr=False)
    frontier: list[tuple[float, int, int]] = field(default_factory=list, repr=False)
    trace_edges: list[int] = field(default_factory=list, repr=False)
    trace_weights: list[float] = field(default_factory=list, repr=False)
    vertex_order: list[int] = field(default_factory=list, repr=False)
    max_norm: int = 0
    censored: bool = False
    target: frozenset[int] = field(default_factory=frozenset, repr=False)
    target_invaded: int = 0

    @classmethod
    def start(
        cls, field_: WeightField, target: frozenset[Edge] | None = None
    ) -> "InvasionState":
        """G_0: the origin alone, with its incident edges on the frontier."""
        region = field_.region
        m = region.x1
        if m < 1 or (region.x0, region.y0, region.y1) != (-m, -m, m):
            raise GeometryError(
                "Invasion needs a centred box of radius >= 1 as its horizon",
                x0=region.x0,
                x1=region.x1,
            )
        state = cls(
            horizon=BoxSpec(m),
            region=region,
            vertices=bytearray(region.n_vertices),
            edges=bytearray(region.n_edges),
            queued=bytearray(region.n_edges),
            target=frozenset(region.edge_index(e) for e in target or ()),
        )
        state._absorb(region.vertex_index((0, 0)), field_)
        return state

    @property
    def target_total(self) -> int:
        return len(self.target)

    @property
    def step_count(self) -> int:
        return len(self.trace_edges)

    @property
    def touched_horizon(self) -> bool:
        return self.max_norm >= self.horizon.n

    @property
    def invaded_vertices(self) -> set[Vertex]:
        return {self.region.vertex_at(v) for v in self.vertex_order}

    @property
    def invaded_edges(self) -> list[Edge]:
        return [self.region.edge_at(i) for i in self.trace_edges]

    @property
    def trace(self) -> list[tuple[Edge, float]]:
        return list(zip(self.invaded_edges, self.trace_weights))

    def is_invaded(self, edge: Edge) -> bool:
        return bool(self.edges[self.region.edge_index(edge)])

    def frontier_edges(self) -> list[int]:
        """Current frontier edge indices (live heap entries)."""
        return [index for _, _, index in self.frontier if not self.edges[index]]

    def cluster(self) -> FiniteCluster:
        return FiniteCluster.build(self.invaded_vertices, self.invaded_edges)

    def _absorb(self, vertex: int, field_: WeightField) -> None:
        region = self.region
        self.vertices[vertex] = 1
        self.vertex_order.append(vertex)
        self.max_norm = max(self.max_norm, region.vertex_norm_at(vertex))
        for index in region.incident_edges(vertex):
            if self.queued[index]:
                continue
            self.queued[index] = 1
            heapq.heappush(
                self.frontier,
                (field_.weight_at(index), region.edge_code_at(index), index),
            )

    def _record(self, index: int, weight: float) -> None:
        self.edges[index] = 1
        self.trace_edges.append(index)
        self.trace_weights.append(weight)
        if index in self.target:
            self.target_invaded += 1


def invade_step(
    state: InvasionState, field_: WeightField
) -> tuple[Edge, float] | None:
    """Invade the minimum-weight frontier edge.

    Returns the invaded edge and its weight, or None when the frontier is empty;
    the state is then marked censored.
    """
    while state.frontier:
        weight, _, index = heapq.heappop(state.frontier)
        if state.edges[index]:
            continue
        state._record(index, weight)
        for vertex in state.region.edge_endpoints(index):
            if not state.vertices[vertex]:
                state._absorb(vertex, field_)
        return state.region.edge_at(index), weight
    state.censored = True
    return None


def run_invasion(
    field_: WeightField, rule: StopRule, check_every: int = 0
) -> InvasionState:
    """Grow until `rule` fires.

    Touching the internal boundary of the horizon ends the run; it is censored
    unless the rule fired on that same step. `check_every > 0` re-verifies
    connectivity of the invaded graph every that many steps.
    """
    if rule.exit_radius is not None and rule.exit_radius > field_.region.x1:
        raise GeometryError(
            "Exit radius exceeds the horizon",
            exit_radius=rule.exit_radius,
            horizon=field_.region.x1,
        )
    state = InvasionState.start(field_, target=rule.target)
    while not rule.fired(state):
        if state.touched_horizon:
            state.censored = True
            break
        if invade_step(state, field_) is None:
            break
        if check_every and state.step_count % check_every == 0:
            if not state.cluster().is_connected():
                raise SoundnessError(
                    "Invaded graph disconnected", step=state.step_count
                )
    logger.debug(
        "Invasion finished",
        steps=state.step_count,
        max_norm=state.max_norm,
        censored=state.censored,
    )
    return state


def running_max_trace(state: InvasionState, burn_in: int = 0) -> np.ndarray:
    """Suffix maxima M_k = max{tau_j : j >= k} for k >= burn_in."""
    if not 0 <= burn_in < state.step_count:
        raise ValidationError(
            f"burn_in must lie in [0, {state.step_count})", field="burn_in"
        )
    weights = np.asarray(state.trace_weights, dtype=np.float64)
    return np.maximum.accumulate(weights[::-1])[::-1][burn_in:]


def annulus_coverage_event(state: InvasionState, ann: Annulus) -> Coverage:
    """Whether every induced edge of `ann` was invaded.

    A censored run that has not covered the annulus is indeterminate.
    """
    if ann.outer > state.horizon.n:
        raise GeometryError("Annulus exceeds the horizon", outer=ann.outer)
    if all(state.is_invaded(e) for e in ann.edges):
        return Coverage.COVERED
    return Coverage.INDETERMINATE if state.censored else Coverage.NOT_COVERED


def box_volume_profile(state: InvasionState, radii: Sequence[int]) -> list[int]:
    """Invaded vertex counts |IPC ∩ B(k)| for each k in `radii`."""
    norms = np.fromiter(
        (state.region.vertex_norm_at(v) for v in state.vertex_order),
        dtype=np.int64,
        count=len(state.vertex_order),
    )
    return [int(np.count_nonzero(norms <= k)) for k in radii]


def p_open_entry_step(state: InvasionState, p: float) -> int | None:
    """First step k (1-based) from which every invaded weight is below p.

    None when the last invaded weight is not below p or nothing was invaded.
    """
    if state.step_count == 0:
        return None
    suffix = running_max_trace(state, 0)
    below = np.flatnonzero(suffix < p)
    if below.size == 0:
        return None
    return int(below[0]) + 1


def export_trace(state: InvasionState, path: str | Path, fmt: str = "csv") -> None:
    """Write (step, edge, weight) records as CSV or as a structured .npy array."""
    region = state.region
    if fmt == "npy":
        records = np.zeros(
            state.step_count,
            dtype=[
                ("step", "i8"),
                ("ax", "i8"),
                ("ay", "i8"),
                ("bx", "i8"),
                ("by", "i8"),
                ("weight", "f8"),
            ],
        )
        steps = zip(state.trace_edges, state.trace_weights)
        for k, (index, weight) in enumerate(steps):
            a, b = region.edge_at(index)
            records[k] = (k + 1, a.x, a.y, b.x, b.y, weight)
        np.save(Path(path), records)
    elif fmt == "csv":
        rows = (
            (k + 1, *region.edge_at(index)[0], *region.edge_at(index)[1], repr(weight))
            for k, (index, weight) in enumerate(
                zip(state.trace_edges, state.trace_weights)
            )
        )
        write_csv(path, "trace", TRACE_COLUMNS, rows)
    else:
        raise ValidationError(f"Unknown trace format {fmt!r}", field="format")


def invasion_volume_profile(
    horizon: int, radii: Sequence[int], samples: int, seed: SeedSpec
) -> list[float]:
    """Mean box volume profile of the invasion run until it exits B(horizon)."""
    if any(k > horizon for k in radii):
        raise ValidationError(
            "Profile radii must not exceed the horizon", field="radii"
        )
    region = Region.box(horizon)
    rule = StopRule(exit_radius=horizon)
    totals = np.zeros(len(radii), dtype=np.float64)
    for i in range(samples):
        state = run_invasion(sample_weights(region, seed.replica(i)), rule)
        totals += box_volume_profile(state, radii)
    return (totals / samples).tolist()
