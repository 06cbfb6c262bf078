"""Time-parameterized matrices.

For an instance over a catalog of ``n`` nodes, the raw matrix holds temporal
residuals in seconds (divided by ``time_scale``)::

    a(i, j) = |t_ref - t_j|      if the transition i -> j was observed
    a(i, j) = |t_ref(i) - delta| otherwise

and :func:`normalize_tp` maps it into (0, 1] with ``1 / (1 + |a(i,i) - a(i,j)|)``.

TP-initial references the instance's initial event for every row and also
counts the initial event -> every later event as observed.  TP-recent
references the immediately preceding event for observed transitions and the
row node's latest occurrence for unobserved ones.  The diagonal is a
zero-length self transition, so it always normalizes to 1 and unobserved
edges fade towards 0 as the running time grows.
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from .errors import SchemeMismatch, UnknownNode
from .graph import EventSequence, NodeId


class WeightScheme(str, Enum):
    ADJACENCY = "adjacency"
    TP_INITIAL = "tp-initial"
    TP_RECENT = "tp-recent"

    @classmethod
    def parse(cls, value) -> "WeightScheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"adj": "adjacency", "tpi": "tp-initial", "initial": "tp-initial",
                   "tpr": "tp-recent", "recent": "tp-recent"}
        return cls(aliases.get(key, key))


def _index(seq: EventSequence, catalog: Sequence[NodeId] | None) -> dict[NodeId, int]:
    ids = sorted(set(seq.nodes)) if catalog is None else list(catalog)
    index = {v: i for i, v in enumerate(ids)}
    for v in seq.nodes:
        if v not in index:
            raise UnknownNode(v)
    return index


def observed_transitions(seq: EventSequence, scheme: WeightScheme) -> dict:
    """Map (src, dst) -> integer residual in seconds for every observed pair.

    Repeated transitions keep the earliest occurrence under TP-initial and the
    latest under TP-recent.
    """
    scheme = WeightScheme.parse(scheme)
    nodes, times = seq.nodes, seq.times
    t0 = times[0]
    obs: dict[tuple[NodeId, NodeId], int] = {}
    for k in range(1, len(nodes)):
        pair = (nodes[k - 1], nodes[k])
        if scheme is WeightScheme.TP_INITIAL:
            obs.setdefault(pair, times[k] - t0)
            obs.setdefault((nodes[0], nodes[k]), times[k] - t0)
        elif scheme is WeightScheme.TP_RECENT:
            obs[pair] = times[k] - times[k - 1]
        else:
            obs[pair] = 1
    return obs


def raw_temporal_matrix(
    seq: EventSequence,
    scheme: WeightScheme | str,
    catalog: Sequence[NodeId] | None = None,
    delta: int | None = None,
    time_scale: float = 1.0,
) -> np.ndarray:
    scheme = WeightScheme.parse(scheme)
    if scheme is WeightScheme.ADJACENCY:
        raise SchemeMismatch("the adjacency baseline has no temporal matrix")
    index = _index(seq, catalog)
    n = len(index)
    delta = seq.delta if delta is None else int(delta)
    t0 = seq.start

    # residuals stay integer seconds until the final division, which keeps the
    # matrix bit-identical under a common shift of all timestamps
    if scheme is WeightScheme.TP_INITIAL:
        row_ref = [t0] * n
    else:
        row_ref = [t0] * n
        for v, t in seq.events:
            row_ref[index[v]] = t
    raw = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        raw[i, :] = abs(row_ref[i] - delta)
    for (a, b), value in observed_transitions(seq, scheme).items():
        raw[index[a], index[b]] = abs(value)
    np.fill_diagonal(raw, 0)
    return raw / float(time_scale)


def normalize_tp(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    diag = np.diag(raw)[:, None]
    return 1.0 / (1.0 + np.abs(diag - raw))


def adjacency_matrix(
    seq: EventSequence, catalog: Sequence[NodeId] | None = None
) -> np.ndarray:
    """Binary baseline: 1 where a consecutive transition was observed."""
    index = _index(seq, catalog)
    adj = np.zeros((len(index), len(index)))
    for a, b in zip(seq.nodes, seq.nodes[1:]):
        adj[index[a], index[b]] = 1.0
    return adj


def tp_matrix(
    seq: EventSequence,
    scheme: WeightScheme | str,
    catalog: Sequence[NodeId] | None = None,
    delta: int | None = None,
    time_scale: float = 1.0,
) -> np.ndarray:
    """The training target for ``scheme``: a normalized TP-matrix or the binary baseline."""
    scheme = WeightScheme.parse(scheme)
    if scheme is WeightScheme.ADJACENCY:
        return adjacency_matrix(seq, catalog)
    return normalize_tp(raw_temporal_matrix(seq, scheme, catalog, delta, time_scale))
