"""Connectivity queries on configurations.

Union-find labeling for single configurations, block-diagonal sparse labeling for
whole replica batches, open-path connection events, left-right crossings, cluster
extraction and bridge / disconnecting-edge detection.
"""

from collections import deque
from dataclasses import dataclass
from functools import partial
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from percolab.config import settings
from percolab.exceptions import GeometryError, ValidationError
from percolab.schemas.seeds import SeedSpec
from percolab.services.lattice import Annulus, BoxSpec, Edge, Region, Vertex
from percolab.services.random_field import Configuration, batch_weights
from percolab.utils.replicas import ReplicaPlan, run_replicas


class ClusterLabeling:
    """Union-find forest with union by size and path halving.

    find(u) == find(v) iff u and v are joined by the edges inserted so far.
    Single-owner; after freeze() only queries are allowed.
    """

    def __init__(self, n_nodes: int):
        self.parent = list(range(n_nodes))
        self.size = [1] * n_nodes
        self.frozen = False

    def find(self, u: int) -> int:
        parent = self.parent
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    def union(self, u: int, v: int) -> bool:
        if self.frozen:
            raise ValidationError("Labeling is frozen", field="labeling")
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        if self.size[ru] < self.size[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        self.size[ru] += self.size[rv]
        return True

    def connected(self, u: int, v: int) -> bool:
        return self.find(u) == self.find(v)

    def component_size(self, u: int) -> int:
        return self.size[self.find(u)]

    def freeze(self) -> "ClusterLabeling":
        self.frozen = True
        return self

    @classmethod
    def from_configuration(
        cls, config: Configuration, extra_nodes: int = 0
    ) -> "ClusterLabeling":
        """Labeling of the open edges; nodes past n_vertices are left for terminals."""
        region = config.region
        labeling = cls(region.n_vertices + extra_nodes)
        for index in np.flatnonzero(config.open_mask).tolist():
            labeling.union(*region.edge_endpoints(index))
        return labeling


@dataclass(frozen=True)
class FiniteCluster:
    """A finite connected subgraph of Z^2."""

    vertices: frozenset[Vertex]
    edges: frozenset[Edge]
    contains_origin: bool
    bounding_box: tuple[int, int, int, int]

    @classmethod
    def build(
        cls, vertices: Iterable[Vertex], edges: Iterable[Edge]
    ) -> "FiniteCluster":
        vertex_set = frozenset(Vertex(*v) for v in vertices)
        if not vertex_set:
            raise ValidationError(
                "A cluster needs at least one vertex", field="vertices"
            )
        xs = [v.x for v in vertex_set]
        ys = [v.y for v in vertex_set]
        return cls(
            vertices=vertex_set,
            edges=frozenset(edges),
            contains_origin=Vertex(0, 0) in vertex_set,
            bounding_box=(min(xs), min(ys), max(xs), max(ys)),
        )

    @classmethod
    def from_edges(cls, edges: Iterable[Edge]) -> "FiniteCluster":
        edges = frozenset(edges)
        return cls.build({v for e in edges for v in e}, edges)

    def adjacency(self) -> dict[Vertex, list[tuple[Vertex, Edge]]]:
        adj: dict[Vertex, list[tuple[Vertex, Edge]]] = {v: [] for v in self.vertices}
        for e in self.edges:
            adj[e.a].append((e.b, e))
            adj[e.b].append((e.a, e))
        return adj

    def is_connected(self) -> bool:
        adj = self.adjacency()
        start = next(iter(self.vertices))
        seen = {start}
        queue = deque([start])
        while queue:
            for w, _ in adj[queue.popleft()]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self.vertices)


def _as_set(vertices: Any) -> Iterable[tuple[int, int]]:
    if (
        isinstance(vertices, tuple)
        and len(vertices) == 2
        and isinstance(vertices[0], int)
    ):
        return [vertices]
    return vertices


def _check_vertices(region: Region, vertices: Iterable[Vertex], name: str) -> list[int]:
    vertices = list(vertices)
    if not vertices:
        raise ValidationError(f"{name} must be nonempty", field=name)
    return [region.vertex_index(v) for v in vertices]


def connected(
    config: Configuration,
    s1: Iterable[tuple[int, int]] | tuple[int, int],
    s2: Iterable[tuple[int, int]] | tuple[int, int],
) -> bool:
    """S1 <-> S2: some open path joins a vertex of S1 to a vertex of S2.

    A single vertex may be passed in place of a set.
    """
    first = _check_vertices(config.region, _as_set(s1), "S1")
    second = _check_vertices(config.region, _as_set(s2), "S2")
    labeling = ClusterLabeling.from_configuration(config).freeze()
    roots = {labeling.find(u) for u in first}
    return any(labeling.find(v) in roots for v in second)


def crossing_rectangle(width: int, height: int) -> Region:
    if width < 1 or height < 1:
        raise GeometryError("Crossing rectangle needs w, h >= 1", w=width, h=height)
    return Region.rectangle(0, 0, width, height)


def has_lr_crossing(config: Configuration, width: int, height: int) -> bool:
    """Open left-right crossing of [0, w] x [0, h] using edges inside the rectangle.

    The left and right walls are two virtual union-find nodes.
    """
    rect = crossing_rectangle(width, height)
    if not config.region.contains_region(rect):
        raise GeometryError(
            "Crossing rectangle exceeds the configuration region", w=width, h=height
        )
    sub_open = config.open_mask[config.region.sub_edge_indices(rect)]
    left, right = rect.n_vertices, rect.n_vertices + 1
    labeling = ClusterLabeling(rect.n_vertices + 2)
    for j in range(rect.sy):
        labeling.union(left, j)
        labeling.union(right, (rect.sx - 1) * rect.sy + j)
    for index in np.flatnonzero(sub_open).tolist():
        labeling.union(*rect.edge_endpoints(index))
    return labeling.connected(left, right)


def cluster_of(config: Configuration, v: tuple[int, int]) -> FiniteCluster:
    """Open cluster of v by breadth-first exploration."""
    region = config.region
    start = region.vertex_index(v)
    is_open = config.open_mask
    seen = {start}
    edges: set[int] = set()
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for index in region.incident_edges(u):
            if not is_open[index]:
                continue
            edges.add(index)
            a, b = region.edge_endpoints(index)
            w = b if a == u else a
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return FiniteCluster.build(
        (region.vertex_at(u) for u in seen), (region.edge_at(i) for i in edges)
    )


def batch_rows(n_edges: int, cap: int = 1_000_000) -> int:
    """Replicas per labeling batch so that one batch holds about `cap` edges."""
    return max(1, cap // max(n_edges, 1))


def label_batch(
    region: Region,
    open_masks: np.ndarray,
    terminals: Sequence[np.ndarray] = (),
) -> np.ndarray:
    """Component labels for many configurations of one region at once.

    Replica r occupies node block r of a block-diagonal sparse graph; terminal t is
    an extra node per block joined to the vertex indices `terminals[t]`. Returns an
    array of shape (replicas, n_vertices + len(terminals)); labels are comparable
    within a row.
    """
    open_masks = np.atleast_2d(open_masks)
    replicas = open_masks.shape[0]
    n_vertices = region.n_vertices
    stride = n_vertices + len(terminals)
    base = np.arange(replicas, dtype=np.int64) * stride

    rep, index = np.nonzero(open_masks)
    src = [base[rep] + region.edge_u[index]]
    dst = [base[rep] + region.edge_v[index]]
    for t, vertices in enumerate(terminals):
        vertices = np.asarray(vertices, dtype=np.int64)
        src.append(np.repeat(base + n_vertices + t, vertices.size))
        dst.append((base[:, None] + vertices[None, :]).ravel())

    rows = np.concatenate(src)
    cols = np.concatenate(dst)
    size = replicas * stride
    graph = csr_matrix(
        (np.ones(rows.size, dtype=np.float64), (rows, cols)), shape=(size, size)
    )
    _, labels = connected_components(graph, directed=False)
    return labels.reshape(replicas, stride)


def lr_crossing_batch(rect: Region, open_masks: np.ndarray) -> np.ndarray:
    """Left-right crossing indicator per row of masks over `rect`'s own edges."""
    left = np.flatnonzero(rect.vertex_x == rect.x0)
    right = np.flatnonzero(rect.vertex_x == rect.x1)
    labels = label_batch(rect, open_masks, (left, right))
    n = rect.n_vertices
    return labels[:, n] == labels[:, n + 1]


def separated_batch(
    region: Region,
    open_masks: np.ndarray,
    first: np.ndarray,
    second: np.ndarray,
) -> np.ndarray:
    """Per row: True iff no open path joins vertex set `first` to `second`."""
    labels = label_batch(region, open_masks, (first, second))
    n = region.n_vertices
    return labels[:, n] != labels[:, n + 1]


def _lowlink(
    adj: dict[Vertex, list[tuple[Vertex, Edge]]],
    root: Vertex,
    boundary_radius: int | None,
    seen: dict[Vertex, int],
) -> tuple[list[tuple[Edge, int]], int]:
    """Iterative lowlink DFS from `root`.

    Returns the bridges found, each with the number of horizon-boundary vertices
    in the subtree hanging below it, and the boundary count of the whole tree.
    """
    low: dict[Vertex, int] = {}
    hits: dict[Vertex, int] = {}
    timer = len(seen)

    def enter(v: Vertex) -> None:
        nonlocal timer
        seen[v] = low[v] = timer
        hits[v] = int(boundary_radius is not None and v.norm == boundary_radius)
        timer += 1

    found: list[tuple[Edge, int]] = []
    enter(root)
    stack: list[tuple[Vertex, Edge | None, Iterable[tuple[Vertex, Edge]]]] = [
        (root, None, iter(adj[root]))
    ]
    while stack:
        v, parent_edge, neighbours = stack[-1]
        descended = False
        for w, e in neighbours:
            if e == parent_edge:
                continue
            if w in seen:
                low[v] = min(low[v], seen[w])
            else:
                enter(w)
                stack.append((w, e, iter(adj[w])))
                descended = True
                break
        if descended:
            continue
        stack.pop()
        if stack:
            u = stack[-1][0]
            low[u] = min(low[u], low[v])
            hits[u] += hits[v]
            if low[v] > seen[u]:
                found.append((parent_edge, hits[v]))  # type: ignore[arg-type]
    return found, hits[root]


def bridges(cluster: FiniteCluster) -> set[Edge]:
    """Edges whose removal disconnects the cluster graph."""
    adj = cluster.adjacency()
    seen: dict[Vertex, int] = {}
    result: set[Edge] = set()
    for v in sorted(cluster.vertices):
        if v not in seen:
            found, _ = _lowlink(adj, v, None, seen)
            result.update(e for e, _ in found)
    return result


def disconnecting_edges(
    cluster: FiniteCluster,
    origin: Vertex,
    window: Annulus,
    horizon: BoxSpec,
) -> set[Edge]:
    """Bridges inside `window` that cut the origin off from the horizon boundary.

    "Finite component" is proxied by "component not touching the internal boundary
    of the horizon box". One lowlink pass rooted at the origin gives every bridge
    together with the boundary count of the side away from the origin.
    """
    origin = Vertex(*origin)
    if origin not in cluster.vertices:
        raise ValidationError("Origin is not in the cluster", field="origin")
    found, total = _lowlink(cluster.adjacency(), origin, horizon.n, {})
    return {
        e
        for e, far_side in found
        if total - far_side == 0 and window.contains_edge(e)
    }


def touches_boundary(cluster: FiniteCluster, radius: int) -> bool:
    return any(v.norm == radius for v in cluster.vertices)


def _connection_chunk(
    region: Region,
    p: float,
    source: np.ndarray,
    target: np.ndarray,
    forced: np.ndarray | None,
    support: np.ndarray | None,
    seed: SeedSpec,
    start: int,
    stop: int,
) -> np.ndarray:
    open_masks = batch_weights(region, seed, start, stop) < p
    if forced is not None:
        open_masks |= forced
    if support is not None:
        open_masks &= support
    return ~separated_batch(region, open_masks, source, target)


def connection_outcomes(
    region: Region,
    p: float,
    source: np.ndarray,
    target: np.ndarray,
    replicas: int,
    seed: SeedSpec,
    workers: int = 1,
    forced: np.ndarray | None = None,
    support: np.ndarray | None = None,
) -> np.ndarray:
    """Per replica of `seed`: is vertex set `source` joined to `target` at level p?

    `forced` edges are open regardless of weight; edges outside `support` are
    removed before labeling.
    """
    plan = ReplicaPlan(
        total=replicas,
        seed=seed,
        workers=workers,
        chunk=min(settings.REPLICA_CHUNK, batch_rows(region.n_edges)),
    )
    experiment = partial(_connection_chunk, region, p, source, target, forced, support)
    return run_replicas(plan, experiment, desc="connection").astype(bool)
