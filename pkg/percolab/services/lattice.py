"""Exact integer geometry of the square lattice.

Vertices and edges of Z^2, l-infinity boxes B(n) = [-n, n]^2, their internal
boundaries, annuli Ann(m, n) = B(n) minus B(m), induced edge sets, and `Region`, a
closed lattice rectangle with dense vertex and edge numbering that every simulation
array is indexed by.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
from cachetools import LRUCache, cached

from percolab.config import settings
from percolab.exceptions import GeometryError

# Edge codes pack (a.x, a.y, orientation) so that code order is canonical edge order.
_OFFSET = settings.MAX_RADIUS
_Y_BITS = (2 * settings.MAX_RADIUS).bit_length()
_X_SHIFT = _Y_BITS + 1
_COORD_MASK = (1 << _Y_BITS) - 1

if 2 * _Y_BITS + 1 > 64:
    raise GeometryError(
        "MAX_RADIUS too large for 64-bit edge codes", max_radius=settings.MAX_RADIUS
    )


class Vertex(NamedTuple):
    x: int
    y: int

    @property
    def norm(self) -> int:
        """l-infinity norm."""
        return max(abs(self.x), abs(self.y))

    def neighbors(self) -> tuple["Vertex", "Vertex", "Vertex", "Vertex"]:
        x, y = self
        return (Vertex(x + 1, y), Vertex(x - 1, y), Vertex(x, y + 1), Vertex(x, y - 1))


ORIGIN = Vertex(0, 0)


class Edge(NamedTuple):
    """Nearest-neighbour edge, lexicographically smaller endpoint first."""

    a: Vertex
    b: Vertex

    @classmethod
    def between(cls, u: tuple[int, int], v: tuple[int, int]) -> "Edge":
        u, v = Vertex(*u), Vertex(*v)
        if abs(u.x - v.x) + abs(u.y - v.y) != 1:
            raise GeometryError("Endpoints are not nearest neighbours", u=u, v=v)
        return cls(u, v) if u < v else cls(v, u)

    @property
    def horizontal(self) -> bool:
        return self.a.y == self.b.y

    @property
    def code(self) -> int:
        return edge_code(self.a.x, self.a.y, self.horizontal)

    def touches(self, v: Vertex) -> bool:
        return v == self.a or v == self.b


def _check_radius(*coords: int) -> None:
    for c in coords:
        if abs(c) > settings.MAX_RADIUS:
            raise GeometryError(
                "Coordinate exceeds the configured maximum radius",
                coordinate=c,
                max_radius=settings.MAX_RADIUS,
            )


def edge_code(ax: int, ay: int, horizontal: bool) -> int:
    _check_radius(ax, ay)
    return ((ax + _OFFSET) << _X_SHIFT) | ((ay + _OFFSET) << 1) | int(horizontal)


def decode_edge(code: int) -> Edge:
    ax = (code >> _X_SHIFT) - _OFFSET
    ay = ((code >> 1) & _COORD_MASK) - _OFFSET
    a = Vertex(ax, ay)
    return Edge(a, Vertex(ax + 1, ay) if code & 1 else Vertex(ax, ay + 1))


@dataclass(frozen=True)
class BoxSpec:
    """The l-infinity ball B(n) = [-n, n]^2."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise GeometryError("Box radius must be non-negative", n=self.n)
        _check_radius(self.n)

    @property
    def vertex_count(self) -> int:
        return (2 * self.n + 1) ** 2

    def region(self) -> "Region":
        return Region.box(self.n)


@dataclass(frozen=True)
class Annulus:
    """Ann(m, n) = B(n) minus B(m): vertices with m < norm <= n."""

    inner: int
    outer: int

    def __post_init__(self) -> None:
        if not 0 <= self.inner < self.outer:
            raise GeometryError(
                "Annulus needs 0 <= inner < outer", inner=self.inner, outer=self.outer
            )
        _check_radius(self.outer)

    def contains(self, v: Vertex) -> bool:
        return self.inner < v.norm <= self.outer

    def contains_edge(self, e: Edge) -> bool:
        return self.contains(e.a) and self.contains(e.b)

    @cached_property
    def vertices(self) -> frozenset[Vertex]:
        return frozenset(
            v for v in box_vertices(BoxSpec(self.outer)) if v.norm > self.inner
        )

    @cached_property
    def edges(self) -> frozenset[Edge]:
        return frozenset(induced_edges(self.vertices))

    @cached_property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_mask(self, region: "Region") -> np.ndarray:
        """Boolean mask over `region` edges induced by the annulus."""
        nu = region.vertex_norm[region.edge_u]
        nv = region.vertex_norm[region.edge_v]
        return (nu > self.inner) & (nu <= self.outer) & (nv > self.inner) & (
            nv <= self.outer
        )


def box_vertices(spec: BoxSpec) -> set[Vertex]:
    n = spec.n
    return {Vertex(x, y) for x in range(-n, n + 1) for y in range(-n, n + 1)}


def internal_boundary(spec: BoxSpec) -> set[Vertex]:
    """The 8n vertices of norm exactly n."""
    if spec.n < 1:
        raise GeometryError("Internal boundary needs n >= 1", n=spec.n)
    return {v for v in box_vertices(spec) if v.norm == spec.n}


def induced_edges(region: Iterable[Vertex]) -> set[Edge]:
    """All nearest-neighbour edges with both endpoints in `region`."""
    vertices = {Vertex(*v) for v in region}
    edges = set()
    for v in vertices:
        right = Vertex(v.x + 1, v.y)
        up = Vertex(v.x, v.y + 1)
        if right in vertices:
            edges.add(Edge(v, right))
        if up in vertices:
            edges.add(Edge(v, up))
    return edges


@dataclass(frozen=True)
class Region:
    """Closed lattice rectangle [x0, x1] x [y0, y1] with dense numbering.

    Vertex (x, y) has index (x - x0) * sy + (y - y0). Horizontal edges come first,
    indexed like their left endpoint; vertical edges follow, indexed like their
    lower endpoint within an sx by (sy - 1) block. The edge set is the induced one.
    """

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise GeometryError(
                "Empty rectangle", x0=self.x0, y0=self.y0, x1=self.x1, y1=self.y1
            )
        _check_radius(self.x0, self.y0, self.x1, self.y1)

    @staticmethod
    def box(n: int) -> "Region":
        if n < 0:
            raise GeometryError("Box radius must be non-negative", n=n)
        return _region(-n, -n, n, n)

    @staticmethod
    def rectangle(x0: int, y0: int, x1: int, y1: int) -> "Region":
        return _region(x0, y0, x1, y1)

    @property
    def sx(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def sy(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def n_vertices(self) -> int:
        return self.sx * self.sy

    @property
    def n_horizontal(self) -> int:
        return (self.sx - 1) * self.sy

    @property
    def n_edges(self) -> int:
        return self.n_horizontal + self.sx * (self.sy - 1)

    def contains(self, v: tuple[int, int]) -> bool:
        return self.x0 <= v[0] <= self.x1 and self.y0 <= v[1] <= self.y1

    def contains_region(self, other: "Region") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def vertex_index(self, v: tuple[int, int]) -> int:
        if not self.contains(v):
            raise GeometryError("Vertex outside region", vertex=tuple(v))
        return (v[0] - self.x0) * self.sy + (v[1] - self.y0)

    def vertex_at(self, index: int) -> Vertex:
        i, j = divmod(index, self.sy)
        return Vertex(self.x0 + i, self.y0 + j)

    def vertex_indices(self, vertices: Iterable[tuple[int, int]]) -> np.ndarray:
        return np.fromiter(
            (self.vertex_index(v) for v in vertices), dtype=np.int64
        )

    def edge_index(self, edge: Edge) -> int:
        a, b = edge
        if not (self.contains(a) and self.contains(b)):
            raise GeometryError("Edge outside region", edge=(tuple(a), tuple(b)))
        if edge.horizontal:
            return (a.x - self.x0) * self.sy + (a.y - self.y0)
        return self.n_horizontal + (a.x - self.x0) * (self.sy - 1) + (a.y - self.y0)

    def edge_at(self, index: int) -> Edge:
        if index < self.n_horizontal:
            i, j = divmod(index, self.sy)
            a = Vertex(self.x0 + i, self.y0 + j)
            return Edge(a, Vertex(a.x + 1, a.y))
        i, j = divmod(index - self.n_horizontal, self.sy - 1)
        a = Vertex(self.x0 + i, self.y0 + j)
        return Edge(a, Vertex(a.x, a.y + 1))

    def edge_code_at(self, index: int) -> int:
        """Global code of a region edge, without building the Edge."""
        if index < self.n_horizontal:
            i, j = divmod(index, self.sy)
            return edge_code(self.x0 + i, self.y0 + j, True)
        i, j = divmod(index - self.n_horizontal, self.sy - 1)
        return edge_code(self.x0 + i, self.y0 + j, False)

    def edge_mask(self, edges: Iterable[Edge]) -> np.ndarray:
        mask = np.zeros(self.n_edges, dtype=bool)
        for e in edges:
            mask[self.edge_index(e)] = True
        return mask

    def edge_endpoints(self, index: int) -> tuple[int, int]:
        """Vertex indices (u, v) of an edge, u the canonical first endpoint."""
        sy = self.sy
        if index < self.n_horizontal:
            return index, index + sy
        i, j = divmod(index - self.n_horizontal, sy - 1)
        u = i * sy + j
        return u, u + 1

    def incident_edges(self, vertex: int) -> list[int]:
        """Indices of the (up to four) region edges at a vertex index."""
        sy, nh = self.sy, self.n_horizontal
        i, j = divmod(vertex, sy)
        found = []
        if i < self.sx - 1:
            found.append(vertex)
        if i > 0:
            found.append(vertex - sy)
        if j < sy - 1:
            found.append(nh + i * (sy - 1) + j)
        if j > 0:
            found.append(nh + i * (sy - 1) + j - 1)
        return found

    def vertex_norm_at(self, vertex: int) -> int:
        i, j = divmod(vertex, self.sy)
        return max(abs(self.x0 + i), abs(self.y0 + j))

    @cached_property
    def vertex_x(self) -> np.ndarray:
        return np.repeat(np.arange(self.x0, self.x1 + 1, dtype=np.int64), self.sy)

    @cached_property
    def vertex_y(self) -> np.ndarray:
        return np.tile(np.arange(self.y0, self.y1 + 1, dtype=np.int64), self.sx)

    @cached_property
    def vertex_norm(self) -> np.ndarray:
        return np.maximum(np.abs(self.vertex_x), np.abs(self.vertex_y))

    @cached_property
    def edge_u(self) -> np.ndarray:
        horizontal = np.arange(self.n_horizontal, dtype=np.int64)
        k = np.arange(self.sx * (self.sy - 1), dtype=np.int64)
        i, j = np.divmod(k, self.sy - 1) if self.sy > 1 else (k, k)
        return np.concatenate([horizontal, i * self.sy + j])

    @cached_property
    def edge_v(self) -> np.ndarray:
        nh = self.n_horizontal
        return np.concatenate([self.edge_u[:nh] + self.sy, self.edge_u[nh:] + 1])

    @cached_property
    def edge_horizontal(self) -> np.ndarray:
        mask = np.zeros(self.n_edges, dtype=bool)
        mask[: self.n_horizontal] = True
        return mask

    @cached_property
    def edge_codes(self) -> np.ndarray:
        ax = self.vertex_x[self.edge_u] + _OFFSET
        ay = self.vertex_y[self.edge_u] + _OFFSET
        return (
            (ax.astype(np.uint64) << np.uint64(_X_SHIFT))
            | (ay.astype(np.uint64) << np.uint64(1))
            | self.edge_horizontal.astype(np.uint64)
        )

    def box_vertex_indices(self, n: int) -> np.ndarray:
        """Indices of region vertices inside B(n)."""
        return np.flatnonzero(self.vertex_norm <= n)

    def boundary_vertex_indices(self, n: int) -> np.ndarray:
        """Indices of region vertices on the internal boundary of B(n)."""
        return np.flatnonzero(self.vertex_norm == n)

    def box_edge_mask(self, n: int) -> np.ndarray:
        """Edges with both endpoints in B(n)."""
        return (self.vertex_norm[self.edge_u] <= n) & (
            self.vertex_norm[self.edge_v] <= n
        )

    def sub_edge_indices(self, other: "Region") -> np.ndarray:
        """Indices in this region of every edge of `other`, in `other`'s order."""
        if not self.contains_region(other):
            raise GeometryError("Sub-region not contained in region")
        ax = other.vertex_x[other.edge_u]
        ay = other.vertex_y[other.edge_u]
        horizontal = other.edge_horizontal
        h_index = (ax - self.x0) * self.sy + (ay - self.y0)
        v_index = self.n_horizontal + (ax - self.x0) * (self.sy - 1) + (ay - self.y0)
        return np.where(horizontal, h_index, v_index)


@cached(cache=LRUCache(maxsize=64))
def _region(x0: int, y0: int, x1: int, y1: int) -> Region:
    return Region(x0, y0, x1, y1)
