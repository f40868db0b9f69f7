"""Seeded edge-weight fields and their projections to p-open configurations.

Every edge e carries a weight tau_e ~ Uniform[0, 1). An edge is p-open when
tau_e < p, which couples Bernoulli percolation at every level p to one field.
Weights are drawn from a counter-based stream keyed by (seed, edge code), so an
edge has the same weight in every region that contains it.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from percolab.exceptions import GeometryError, ValidationError
from percolab.schemas.seeds import SeedSpec
from percolab.services.lattice import BoxSpec, Edge, Region
from percolab.utils.rng import derive_key, uniform_array, uniform_scalar


class Provenance(str, Enum):
    FIELD = "field"
    BERNOULLI = "bernoulli"
    MANUAL = "manual"


def _as_region(region: Region | BoxSpec) -> Region:
    return region.region() if isinstance(region, BoxSpec) else region


def _check_level(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"Level p must lie in [0, 1], got {p}", field="p")


@dataclass(frozen=True, eq=False)
class WeightField:
    """Edge weights on a region.

    A sampled field is lazy: `weights` materializes the dense array on first use,
    while `weight_at` draws single edges from the stream, so huge horizons cost only
    the edges actually touched. Explicit fields wrap a given array.
    """

    region: Region
    seed: SeedSpec | None = None
    explicit: np.ndarray | None = field(default=None, repr=False)
    overrides: dict[int, float] = field(default_factory=dict, repr=False)

    @cached_property
    def key(self) -> int | None:
        return derive_key(self.seed) if self.seed is not None else None

    @cached_property
    def weights(self) -> np.ndarray:
        if self.explicit is not None:
            dense = np.asarray(self.explicit, dtype=np.float64).copy()
        else:
            dense = uniform_array(self.key, self.region.edge_codes)
        for index, value in self.overrides.items():
            dense[index] = value
        return dense

    def weight_at(self, index: int) -> float:
        if index in self.overrides:
            return self.overrides[index]
        if self.explicit is not None:
            return float(self.explicit[index])
        if "weights" in self.__dict__:
            return float(self.__dict__["weights"][index])
        return uniform_scalar(self.key, self.region.edge_code_at(index))

    def weight(self, edge: Edge) -> float:
        return self.weight_at(self.region.edge_index(edge))

    def items(self) -> Iterable[tuple[Edge, float]]:
        for index, value in enumerate(self.weights):
            yield self.region.edge_at(index), float(value)

    @classmethod
    def from_array(cls, region: Region, weights: np.ndarray) -> "WeightField":
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (region.n_edges,):
            raise ValidationError(
                f"Expected {region.n_edges} weights, got {weights.shape}",
                field="weights",
            )
        if np.any(weights < 0.0) or np.any(weights >= 1.0):
            raise ValidationError("Weights must lie in [0, 1)", field="weights")
        return cls(region=region, explicit=weights)

    @classmethod
    def from_mapping(
        cls, region: Region, weights: dict[Edge, float], default: float = 0.999
    ) -> "WeightField":
        """Hand-built field; edges not listed get `default`."""
        dense = np.full(region.n_edges, default, dtype=np.float64)
        for edge, value in weights.items():
            dense[region.edge_index(edge)] = value
        return cls.from_array(region, dense)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Open/closed assignment on a region.

    Invariants: forced_open is contained in open; for field provenance
    open = forced_open | {tau_e < p}.
    """

    region: Region
    open_mask: np.ndarray = field(repr=False)
    forced_mask: np.ndarray = field(repr=False)
    provenance: Provenance
    level: float | None = None
    seed: SeedSpec | None = None

    def __post_init__(self) -> None:
        if self.open_mask.shape != (self.region.n_edges,):
            raise ValidationError("Mask does not match region", field="open_mask")
        if np.any(self.forced_mask & ~self.open_mask):
            raise ValidationError("Forced edges must be open", field="forced_mask")

    @property
    def open_edges(self) -> set[Edge]:
        return {self.region.edge_at(int(i)) for i in np.flatnonzero(self.open_mask)}

    @property
    def forced_open(self) -> set[Edge]:
        return {self.region.edge_at(int(i)) for i in np.flatnonzero(self.forced_mask)}

    @property
    def n_open(self) -> int:
        return int(self.open_mask.sum())

    def is_open(self, edge: Edge) -> bool:
        return bool(self.open_mask[self.region.edge_index(edge)])

    @classmethod
    def from_mask(cls, region: Region, open_mask: np.ndarray) -> "Configuration":
        open_mask = np.asarray(open_mask, dtype=bool)
        return cls(
            region=region,
            open_mask=open_mask,
            forced_mask=np.zeros_like(open_mask),
            provenance=Provenance.MANUAL,
        )

    @classmethod
    def from_edges(
        cls, region: Region | BoxSpec, edges: Iterable[Edge]
    ) -> "Configuration":
        region = _as_region(region)
        return cls.from_mask(region, region.edge_mask(edges))


def sample_weights(region: Region | BoxSpec, seed: SeedSpec) -> WeightField:
    return WeightField(region=_as_region(region), seed=seed)


def threshold(field: WeightField, p: float) -> Configuration:
    """The p-open configuration {e : tau_e < p} of a field."""
    _check_level(p)
    open_mask = field.weights < p
    return Configuration(
        region=field.region,
        open_mask=open_mask,
        forced_mask=np.zeros_like(open_mask),
        provenance=Provenance.FIELD,
        level=p,
        seed=field.seed,
    )


def bernoulli_config(
    region: Region | BoxSpec,
    p: float,
    seed: SeedSpec,
    forced_open: Iterable[Edge] = (),
) -> Configuration:
    """Independent Bernoulli(p) edges with a forced-open set.

    Forcing edges open realizes conditioning on "all these edges are open": the
    remaining edges are independent of them.
    """
    _check_level(p)
    region = _as_region(region)
    try:
        forced_mask = region.edge_mask(forced_open)
    except GeometryError as exc:
        raise ValidationError(
            "Forced-open set contains an edge outside the region",
            field="forced_open",
        ) from exc
    draws = uniform_array(derive_key(seed), region.edge_codes)
    return Configuration(
        region=region,
        open_mask=(draws < p) | forced_mask,
        forced_mask=forced_mask,
        provenance=Provenance.BERNOULLI,
        level=p,
        seed=seed,
    )


def condition_open(field: WeightField, edges: Iterable[Edge], p: float) -> WeightField:
    """The field conditioned on every edge of `edges` being p-open.

    Given tau_e < p, tau_e is Uniform[0, p); rescaling the unconditional draw by p
    samples that law exactly and keeps the other weights untouched.
    """
    _check_level(p)
    if p <= 0.0:
        raise ValidationError("Cannot condition on 0-open edges", field="p")
    overrides = dict(field.overrides)
    for edge in edges:
        index = field.region.edge_index(edge)
        overrides[index] = p * field.weight_at(index)
    return WeightField(
        region=field.region,
        seed=field.seed,
        explicit=field.explicit,
        overrides=overrides,
    )


def stream_weights(region: Region, seeds: Sequence[SeedSpec]) -> np.ndarray:
    """One weight row per seed, shape (len(seeds), edges)."""
    keys = np.array([derive_key(s) for s in seeds], dtype=np.uint64)
    return uniform_array(keys[:, None], region.edge_codes[None, :])


def batch_weights(region: Region, seed: SeedSpec, start: int, stop: int) -> np.ndarray:
    """Weights of replicas start..stop-1 of `seed`, shape (replicas, edges).

    Row r equals sample_weights(region, seed.replica(start + r)).weights.
    """
    return stream_weights(region, [seed.replica(r) for r in range(start, stop)])


def enumerate_probability(
    region: Region,
    event: Callable[[Configuration], bool],
    p: Fraction | float = Fraction(1, 2),
    edges: Iterable[Edge] | None = None,
) -> Fraction | float:
    """Exact probability of an event by summing over all configurations.

    Only the listed `edges` (default: all region edges) vary; the others stay closed.
    Exact when `p` is a Fraction. Feasible up to about 2^16 configurations.
    """
    free = (
        np.arange(region.n_edges)
        if edges is None
        else np.array([region.edge_index(e) for e in edges], dtype=np.int64)
    )
    if free.size > 20:
        raise ValidationError(
            f"Refusing to enumerate 2^{free.size} configurations", field="edges"
        )
    total: Fraction | float = Fraction(0) if isinstance(p, Fraction) else 0.0
    n_free = int(free.size)
    for bits in product((False, True), repeat=n_free):
        mask = np.zeros(region.n_edges, dtype=bool)
        mask[free] = bits
        k = sum(bits)
        if event(Configuration.from_mask(region, mask)):
            total += p**k * (1 - p) ** (n_free - k)
    return total
