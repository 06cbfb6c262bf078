"""Dataset loaders, timestamp randomization and a synthetic workflow generator."""

from __future__ import annotations

import csv
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateTimestamp,
    NoAbsorbingState,
    NonMonotonicTimestamps,
    ParseError,
    UnknownNode,
)
from .graph import Dataset, EventSequence, Node, catalog_from_ids, validate_sequence

log = logging.getLogger(__name__)

CRM_LABELS = {
    1: "Start",
    2: "Client initiated contact",
    3: "Actual contact",
    4: "Appointment set",
    5: "Appointment confirmed",
    6: "Appointment complete",
    7: "In-person visit",
    8: "Test drive",
    9: "Deal negotiation",
    10: "Turn-over",
    11: "Be-back",
    12: "Deal closed",
}

# CRM workflow successors with branch probabilities; 10 -> 12 lets a
# turn-over still close
CRM_TRANSITIONS = {
    1: {2: 0.8, 3: 0.2},
    2: {3: 0.7, 4: 0.1, 7: 0.1, 9: 0.1},
    3: {4: 0.7, 7: 0.2, 9: 0.1},
    4: {5: 1.0},
    5: {6: 1.0},
    6: {7: 0.8, 11: 0.2},
    7: {8: 0.7, 9: 0.2, 10: 0.1},
    8: {9: 0.7, 10: 0.2, 12: 0.1},
    9: {10: 0.5, 8: 0.1, 12: 0.4},
    10: {11: 0.6, 4: 0.1, 12: 0.3},
    11: {12: 0.6, 8: 0.2, 9: 0.1, 10: 0.1},
    12: {},
}

DEFAULT_START_TIME = 1_600_000_000
FB_WINDOW = 72 * 3600


def _parse_time(text: str, line: int, path) -> int:
    """Integer (or float) epoch seconds, else an ISO 8601 timestamp."""
    text = text.strip()
    for convert in (int, lambda x: int(float(x)), _iso):
        try:
            return convert(text)
        except ValueError:
            continue
    raise ParseError(f"bad timestamp {text!r}", line=line, path=str(path))


def _iso(text: str) -> int:
    stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def _parse_int(text: str, what: str, line: int, path) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", line=line, path=str(path)) from None


def _ordered_events(events, strict: bool, sort: bool, instance_id: str):
    """Sort by time if allowed, then make timestamps strictly increasing.

    Equal timestamps are nudged forward one second at a time unless ``strict``.
    """
    if sort:
        events = sorted(events, key=lambda e: e[1])
    out = []
    nudged = 0
    for i, (v, t) in enumerate(events):
        if out:
            if t < events[i - 1][1]:
                raise NonMonotonicTimestamps(i, f"instance {instance_id!r}: timestamp decreases at event {i}")
            if t <= out[-1][1]:
                if strict:
                    raise DuplicateTimestamp(i, f"instance {instance_id!r}: duplicate timestamp at event {i}")
                t = out[-1][1] + 1
                nudged += 1
        out.append((v, t))
    if nudged:
        log.warning("instance %s: nudged %d tied timestamps by +1s", instance_id, nudged)
    return out


def load_catalog(path) -> tuple[Node, ...]:
    """Read ``id,label[,revisitable]`` rows (header optional)."""
    path = Path(path)
    nodes = []
    with path.open(newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if line == 1 and row[0].strip().lower() == "id":
                continue
            node_id = _parse_int(row[0], "node id", line, path)
            label = row[1].strip() if len(row) > 1 else ""
            revisitable = True
            if len(row) > 2 and row[2].strip():
                flag = row[2].strip().lower()
                if flag not in ("0", "1", "true", "false", "yes", "no"):
                    raise ParseError(f"bad revisitable flag {row[2]!r}", line=line, path=str(path))
                revisitable = flag in ("1", "true", "yes")
            nodes.append(Node(node_id, label, revisitable))
    return tuple(nodes)


def load_edge_list(
    path,
    per_source: bool = False,
    sort: bool = True,
    strict: bool = False,
    catalog: Sequence[Node] | None = None,
) -> Dataset:
    """Read ``src dst [weight] timestamp`` lines.

    Each edge becomes an event ``(dst, timestamp)``.  With ``per_source`` the
    events are grouped into one instance per source node, otherwise the file
    is one evolving network.  Lines starting with ``%`` or ``#`` are comments.
    """
    path = Path(path)
    groups: "OrderedDict[str, list]" = OrderedDict()
    ids = set()
    with path.open(encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            text = text.strip()
            if not text or text[0] in "%#":
                continue
            parts = text.split()
            if len(parts) not in (3, 4):
                raise ParseError(f"expected 3 or 4 fields, got {len(parts)}", line=line, path=str(path))
            src = _parse_int(parts[0], "source", line, path)
            dst = _parse_int(parts[1], "destination", line, path)
            if len(parts) == 4:
                try:
                    float(parts[2])
                except ValueError:
                    raise ParseError(f"bad weight {parts[2]!r}", line=line, path=str(path)) from None
            t = _parse_int(parts[-1], "timestamp", line, path)
            ids.update((src, dst))
            key = str(src) if per_source else path.stem
            groups.setdefault(key, []).append((dst, t))
    if catalog is None:
        catalog = catalog_from_ids(ids)
    instances = [
        EventSequence(key, tuple(_ordered_events(ev, strict, sort, key))) for key, ev in groups.items()
    ]
    ds = Dataset(tuple(catalog), tuple(instances), "edge-list")
    for seq in ds.instances:
        validate_sequence(seq, ds.node_ids)
    return ds


def load_activity_csv(
    path, catalog: Sequence[Node] | None = None, strict: bool = False
) -> Dataset:
    """Read an ``instance_id,activity_id,timestamp`` CSV into one instance per id.

    Timestamps are integer seconds or ISO 8601 strings.  Events are sorted
    per instance; ties are nudged by +1 s with a warning unless ``strict``,
    in which case they raise :class:`DuplicateTimestamp`.
    """
    path = Path(path)
    groups: "OrderedDict[str, list]" = OrderedDict()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["instance_id", "activity_id", "timestamp"]
        if header is None or [h.strip().lower() for h in header] != expected:
            raise ParseError(f"header must be {','.join(expected)}", line=1, path=str(path))
        for line, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", line=line, path=str(path))
            node = _parse_int(row[1], "activity id", line, path)
            t = _parse_time(row[2], line, path)
            groups.setdefault(row[0].strip(), []).append((node, t))
    if catalog is None:
        catalog = catalog_from_ids(v for ev in groups.values() for v, _ in ev)
    known = {node.id for node in catalog}
    for ev in groups.values():
        for v, _ in ev:
            if v not in known:
                raise UnknownNode(v)
    instances = [
        EventSequence(key, tuple(_ordered_events(ev, strict, True, key))) for key, ev in groups.items()
    ]
    return Dataset(tuple(catalog), tuple(instances), "activity-log")


def write_activity_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance_id", "activity_id", "timestamp"])
        for seq in ds.instances:
            for v, t in seq.events:
                writer.writerow([seq.instance_id, v, t])


def write_catalog(catalog: Sequence[Node], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label", "revisitable"])
        for node in catalog:
            writer.writerow([node.id, node.label, int(node.revisitable)])


def randomize_timestamps(ds: Dataset, window: int = FB_WINDOW, seed: int = 0) -> Dataset:
    """Give every event a seeded uniform time in ``[start, start + window]``.

    Events are then re-sorted by their new times and ties nudged by +1 s.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for seq in ds.instances:
        start = seq.start
        stamps = rng.integers(start, start + window, size=len(seq), endpoint=True)
        order = np.argsort(stamps, kind="stable")
        events, prev = [], None
        for pos in order:
            t = int(stamps[pos])
            if prev is not None and t <= prev:
                t = prev + 1
            events.append((seq.nodes[pos], t))
            prev = t
        out.append(EventSequence(seq.instance_id, tuple(events)))
    return ds.with_instances(out)


@dataclass(frozen=True)
class SyntheticConfig:
    """Markov workflow generator settings.

    ``dwell_time`` is a ``(min, max)`` pair in seconds or a mapping from the
    destination node to such a pair.  ``missing_rate`` is the target share of
    absent (instance, node) cells; visited activities are dropped as a whole
    until the share is met.  ``keep_nodes`` are never dropped.  With
    ``start_node=None`` each walk starts at a uniformly drawn node, and with
    ``length_range`` set walks stop after a drawn number of events instead of
    running to an absorbing node.
    """

    instance_count: int
    transition_table: Mapping[int, Mapping[int, float]]
    node_count: int = 12
    dwell_time: object = (600, 14400)
    missing_rate: float = 0.0
    seed: int = 0
    start_node: int | None = 1
    length_range: tuple[int, int] | None = None
    keep_nodes: tuple[int, ...] = ()
    start_time: int = DEFAULT_START_TIME
    max_length: int = 40
    labels: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.instance_count < 0:
            raise ValueError("instance_count must be non-negative")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        nodes = set(range(1, self.node_count + 1))
        for src, row in self.transition_table.items():
            if src not in nodes or any(dst not in nodes for dst in row):
                raise UnknownNode(src, f"transition table row {src} refers to nodes outside 1..{self.node_count}")
            if row:
                total = sum(row.values())
                if abs(total - 1.0) > 1e-9 or any(p < 0 for p in row.values()):
                    raise ValueError(f"transition row {src} is not a distribution (sum {total})")
        if self.length_range is None:
            self._check_absorbing()
        elif not 2 <= self.length_range[0] <= self.length_range[1]:
            raise ValueError("length_range must satisfy 2 <= low <= high")

    def _check_absorbing(self):
        starts = [self.start_node] if self.start_node is not None else list(self.transition_table)
        for start in starts:
            seen, stack = {start}, [start]
            found = False
            while stack:
                v = stack.pop()
                row = self.transition_table.get(v, {})
                if not row:
                    found = True
                    break
                for w in row:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            if not found:
                raise NoAbsorbingState(f"no absorbing node reachable from node {start}")

    def dwell_bounds(self, node: int) -> tuple[int, int]:
        if isinstance(self.dwell_time, Mapping):
            return tuple(self.dwell_time[node])
        return tuple(self.dwell_time)


def _walk(cfg: SyntheticConfig, rng) -> list[int]:
    table = cfg.transition_table
    cur = cfg.start_node if cfg.start_node is not None else int(rng.integers(1, cfg.node_count + 1))
    path = [cur]
    limit = cfg.max_length
    if cfg.length_range is not None:
        limit = int(rng.integers(cfg.length_range[0], cfg.length_range[1], endpoint=True))
    while len(path) < limit:
        row = table.get(cur, {})
        if not row:
            break
        targets = list(row)
        probs = np.array([row[t] for t in targets])
        cur = targets[int(rng.choice(len(targets), p=probs / probs.sum()))]
        path.append(cur)
    return path


def synthesize(cfg: SyntheticConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.node_count
    walks = []
    for _ in range(cfg.instance_count):
        path = _walk(cfg, rng)
        gaps = [int(rng.integers(*cfg.dwell_bounds(v), endpoint=True)) for v in path[1:]]
        times = cfg.start_time + np.concatenate([[0], np.cumsum(gaps, dtype=np.int64)])
        walks.append((path, times))

    keep = set(cfg.keep_nodes)
    unvisited = sum(n - len(set(p)) for p, _ in walks)
    droppable = sum(len(set(p) - keep) for p, _ in walks)
    q = 0.0
    if cfg.missing_rate > 0 and droppable:
        q = min(1.0, max(0.0, (cfg.missing_rate * n * len(walks) - unvisited) / droppable))

    instances = []
    for idx, (path, times) in enumerate(walks):
        if q > 0:
            dropped = {v for v in sorted(set(path) - keep) if rng.random() < q}
            mask = np.array([v not in dropped for v in path])
            if mask.sum() < 2:
                mask[:] = False
                mask[0] = mask[-1] = True
            if len(path) < 2:
                mask[:] = True
        else:
            mask = np.ones(len(path), dtype=bool)
        events = tuple((v, int(t)) for v, t, m in zip(path, times, mask) if m)
        instances.append(EventSequence(f"s{idx:06d}", events))
    catalog = tuple(Node(i, cfg.labels.get(i, "")) for i in range(1, n + 1))
    return Dataset(catalog, tuple(instances), "synthetic")


def crm_config(instance_count: int = 1000, missing_rate: float = 0.44, seed: int = 0) -> SyntheticConfig:
    """Heterogeneous CRM-funnel workflow shaped after the twelve CRM activities.

    Start and closing activities are never dropped, so every instance is a
    successful deal.
    """
    return SyntheticConfig(
        instance_count=instance_count,
        transition_table=CRM_TRANSITIONS,
        node_count=12,
        dwell_time=(600, 14400),
        missing_rate=missing_rate,
        seed=seed,
        start_node=1,
        keep_nodes=(1, 12),
        labels=CRM_LABELS,
    )


def deterministic_config(instance_count: int = 1000, seed: int = 0, node_count: int = 12) -> SyntheticConfig:
    """Every node has exactly one successor, a seeded cyclic permutation."""
    rng = np.random.default_rng(seed)
    order = [int(v) + 1 for v in rng.permutation(node_count)]
    table = {order[i]: {order[(i + 1) % node_count]: 1.0} for i in range(node_count)}
    return SyntheticConfig(
        instance_count=instance_count,
        transition_table=table,
        node_count=node_count,
        seed=seed,
        start_node=None,
        length_range=(3, node_count),
    )


def random_successor_config(instance_count: int = 1000, seed: int = 0, node_count: int = 12) -> SyntheticConfig:
    """Successors drawn uniformly from all other nodes: no learnable signal."""
    share = 1.0 / (node_count - 1)
    table = {
        v: {w: share for w in range(1, node_count + 1) if w != v} for v in range(1, node_count + 1)
    }
    return SyntheticConfig(
        instance_count=instance_count,
        transition_table=table,
        node_count=node_count,
        seed=seed,
        start_node=None,
        length_range=(3, node_count),
    )


PRESETS = {
    "crm": crm_config,
    "deterministic": deterministic_config,
    "random": random_successor_config,
}
