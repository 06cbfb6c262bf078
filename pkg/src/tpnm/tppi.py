"""Time-parameterized predictive influence and the relative decay it drives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, EmptyInfluence, IndexOutOfRange, InvalidBeta
from .graph import EventSequence, NodeId
from .tpmatrix import WeightScheme


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def _check_pair(f_i, f_j, a_ij):
    f_i = np.asarray(f_i, dtype=float)
    f_j = np.asarray(f_j, dtype=float)
    if f_i.shape != f_j.shape or f_i.ndim != 1:
        raise DimensionMismatch(f"feature shapes differ: {f_i.shape} vs {f_j.shape}")
    # 0 is accepted so the binary adjacency baseline can share this code path
    if not 0.0 <= a_ij <= 1.0:
        raise ValueError(f"temporal weight must lie in [0, 1], got {a_ij}")
    return float(f_i @ f_j) * float(a_ij)


def pair_probability(f_i, f_j, a_ij: float) -> float:
    """sigma(<f_i, f_j> * a_ij)."""
    return float(expit(_check_pair(f_i, f_j, a_ij)))


def log_pair_probability(f_i, f_j, a_ij: float) -> float:
    return float(log_sigmoid(_check_pair(f_i, f_j, a_ij)))


def _feature(f, pos: int, node: NodeId):
    if isinstance(f, np.ndarray):
        return f[pos]
    return f[node]


def _check_beta(beta: float) -> float:
    if not 0.0 <= beta < 1.0:
        raise InvalidBeta(f"beta must lie in [0, 1), got {beta}")
    return float(beta)


def influence_max(
    seq: EventSequence,
    i: int,
    f,
    tp: np.ndarray,
    alpha: int,
    catalog: Sequence[NodeId] | None = None,
) -> float:
    """Product of pair probabilities over the event window ``[i - alpha, i + alpha]``.

    ``f`` is either a mapping node -> feature vector or an ``n x k`` array whose
    rows follow ``catalog``.  The product is accumulated in log space.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if not 0 <= i < len(seq):
        raise IndexOutOfRange(f"event index {i} outside [0, {len(seq)})")
    ids = sorted(set(seq.nodes)) if catalog is None else list(catalog)
    pos = {v: k for k, v in enumerate(ids)}
    nodes = seq.nodes
    vi = nodes[i]
    fi = _feature(f, pos[vi], vi)
    total = 0.0
    for j in range(max(0, i - alpha), min(len(nodes), i + alpha + 1)):
        if j == i:
            continue
        vj = nodes[j]
        total += log_pair_probability(fi, _feature(f, pos[vj], vj), tp[pos[vi], pos[vj]])
    return math.exp(total)


def tppi(seq, i, f, tp, alpha, beta, catalog=None) -> float:
    beta = _check_beta(beta)
    return influence_max(seq, i, f, tp, alpha, catalog) * (1.0 - beta)


def representative_index(seq: EventSequence, scheme: WeightScheme | str) -> dict[NodeId, int]:
    """Event index standing in for each node: earliest under TP-initial, else latest."""
    scheme = WeightScheme.parse(scheme)
    rep: dict[NodeId, int] = {}
    for k, v in enumerate(seq.nodes):
        if scheme is WeightScheme.TP_INITIAL:
            rep.setdefault(v, k)
        else:
            rep[v] = k
    return rep


@dataclass(frozen=True)
class TPPIVector:
    p: Mapping[NodeId, float]
    beta: float
    alpha: int

    def __post_init__(self):
        _check_beta(self.beta)
        for node, value in self.p.items():
            if not 0.0 <= value <= 1.0 - self.beta:
                raise ValueError(f"TPPI of node {node} out of range: {value}")


def tppi_vector(seq, f, tp, alpha, beta, scheme, catalog=None) -> TPPIVector:
    """TPPI for every node taking part in ``seq``."""
    rep = representative_index(seq, scheme)
    p = {v: tppi(seq, k, f, tp, alpha, beta, catalog) for v, k in rep.items()}
    return TPPIVector(p, beta, alpha)


@dataclass(frozen=True)
class DecayValue:
    d: float
    theta: float


def decay(p) -> DecayValue:
    """Relative exponential decay ``exp(-(1 - theta))`` with theta the mean TPPI."""
    if isinstance(p, TPPIVector):
        values = list(p.p.values())
    elif isinstance(p, Mapping):
        values = list(p.values())
    else:
        values = list(np.ravel(p))
    if not values:
        raise EmptyInfluence("decay needs at least one TPPI value")
    theta = float(np.mean(values))
    return DecayValue(math.exp(-(1.0 - theta)), theta)


def classic_decay(theta_param: float, elapsed: float) -> float:
    """Time-only decay ``exp(-theta * (T - t))``, kept for comparison."""
    return math.exp(-theta_param * elapsed)
