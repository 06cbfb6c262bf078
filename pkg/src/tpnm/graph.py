"""Core types for temporally consistent networks.

A dataset is a node catalog plus a list of network instances.  Each instance
is an :class:`EventSequence`: the time-ordered trail of nodes (activities)
visited by one evolving network, e.g. one sale moving through a CRM funnel.
Timestamps are integer seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptySequence, NonMonotonicTimestamps, UnknownNode, ValidationError

NodeId = int

SCHEMA_KINDS = ("edge-list", "activity-log", "synthetic")


@dataclass(frozen=True)
class Node:
    id: NodeId
    label: str = ""
    revisitable: bool = True


@dataclass(frozen=True)
class EventSequence:
    """One network instance.

    ``horizon`` is the running time used for unobserved edges; when unset it
    falls back to the last event's timestamp.
    """

    instance_id: str
    events: tuple[tuple[NodeId, int], ...]
    horizon: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "events", tuple((int(v), int(t)) for v, t in self.events)
        )
        if self.horizon is not None:
            object.__setattr__(self, "horizon", int(self.horizon))

    def __len__(self):
        return len(self.events)

    @property
    def nodes(self) -> tuple[NodeId, ...]:
        return tuple(v for v, _ in self.events)

    @property
    def times(self) -> tuple[int, ...]:
        return tuple(t for _, t in self.events)

    @property
    def start(self) -> int:
        return self.events[0][1]

    @property
    def delta(self) -> int:
        return self.horizon if self.horizon is not None else self.events[-1][1]

    def prefix(self, length: int, horizon: int | None = None) -> "EventSequence":
        return EventSequence(self.instance_id, self.events[:length], horizon)

    def shifted(self, offset: int) -> "EventSequence":
        horizon = None if self.horizon is None else self.horizon + offset
        return EventSequence(
            self.instance_id, tuple((v, t + offset) for v, t in self.events), horizon
        )


@dataclass(frozen=True)
class Dataset:
    catalog: tuple[Node, ...]
    instances: tuple[EventSequence, ...]
    schema_kind: str = "activity-log"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.schema_kind not in SCHEMA_KINDS:
            raise ValueError(f"unknown schema kind {self.schema_kind!r}")
        index = {}
        for pos, node in enumerate(self.catalog):
            if node.id in index:
                raise ValidationError(f"duplicate node id {node.id} in catalog")
            index[node.id] = pos
        object.__setattr__(self, "_index", index)
        for seq in self.instances:
            for v in seq.nodes:
                if v not in index:
                    raise UnknownNode(v)

    @property
    def node_ids(self) -> tuple[NodeId, ...]:
        return tuple(node.id for node in self.catalog)

    @property
    def n(self) -> int:
        return len(self.catalog)

    def index_of(self, node: NodeId) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNode(node) from None

    def node(self, node: NodeId) -> Node:
        return self.catalog[self.index_of(node)]

    def with_instances(self, instances: Iterable[EventSequence]) -> "Dataset":
        return Dataset(self.catalog, tuple(instances), self.schema_kind)


def catalog_from_ids(ids: Iterable[NodeId]) -> tuple[Node, ...]:
    return tuple(Node(int(i)) for i in sorted(set(ids)))


@dataclass(frozen=True)
class DatasetStats:
    total_nodes: int
    average_degree: float
    absent: int
    observed: int
    instances: int = 0
    distinct_nodes: int = 0

    @property
    def absent_observed_ratio(self) -> float:
        return self.absent / self.observed if self.observed else float("inf")

    @property
    def ratio(self) -> str:
        """Reduced ``absent:observed`` string, e.g. ``"11:14"``."""
        if self.observed == 0:
            return f"{self.absent}:0"
        if self.absent == 0:
            return f"0:{self.observed}"
        frac = Fraction(self.absent, self.observed)
        return f"{frac.numerator}:{frac.denominator}"

    def to_dict(self) -> dict:
        return {
            "instances": self.instances,
            "total_nodes": self.total_nodes,
            "distinct_nodes": self.distinct_nodes,
            "average_degree": float(f"{self.average_degree:.9g}"),
            "absent": self.absent,
            "observed": self.observed,
            "absent_observed": self.ratio,
            "absent_observed_value": float(f"{self.absent_observed_ratio:.9g}"),
        }


def validate_sequence(
    seq: EventSequence, catalog: Sequence[NodeId] | None = None
) -> EventSequence:
    if not seq.events:
        raise EmptySequence(f"instance {seq.instance_id!r} has no events")
    known = None if catalog is None else set(catalog)
    prev = None
    for i, (v, t) in enumerate(seq.events):
        if known is not None and v not in known:
            raise UnknownNode(v)
        if prev is not None and t <= prev:
            raise NonMonotonicTimestamps(i)
        prev = t
    if seq.horizon is not None and seq.horizon < prev:
        raise ValidationError(
            f"horizon {seq.horizon} precedes last event timestamp {prev}"
        )
    return seq


def dataset_stats(ds: Dataset) -> DatasetStats:
    """Table-III style statistics.

    Each instance is a network over the full catalog, so ``total_nodes`` is
    ``instances * catalog size``.  An (instance, node) cell is *observed* when
    the node takes part in the instance and *absent* otherwise.
    """
    n = ds.n
    if not ds.instances or n == 0:
        return DatasetStats(0, 0.0, 0, 0, len(ds.instances), 0)
    absent = observed = 0
    edge_total = 0
    seen_anywhere = set()
    for seq in ds.instances:
        visited = set(seq.nodes)
        seen_anywhere |= visited
        observed += len(visited)
        absent += n - len(visited)
        pairs = {
            frozenset((a, b)) for a, b in zip(seq.nodes, seq.nodes[1:]) if a != b
        }
        edge_total += len(pairs)
    return DatasetStats(
        total_nodes=n * len(ds.instances),
        # integer accumulation keeps the mean independent of instance order
        average_degree=2.0 * edge_total / (n * len(ds.instances)),
        absent=absent,
        observed=observed,
        instances=len(ds.instances),
        distinct_nodes=len(seen_anywhere),
    )
