"""Latent-factor model trained on TP-matrices with momentum SGD.

The per-instance objective is::

    J = D(t)/2 * sum_snapshots ||A - sigma(U V^T)||_F^2
        + lambda/2 ||U||_F^2 + lambda/2 ||V||_F^2

where ``D(t) = exp(-(1 - theta))`` is the relative decay computed from the
instance's mean TPPI.  Over a dataset the data term is averaged across
instances.  ``lambda`` is both the step size and the regularization weight;
it shrinks by 5% per epoch down to a floor of 1e-4.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import (
    DimensionMismatch,
    EmptyInput,
    NonFinite,
    QueryBeforeLastEvent,
    UnknownNode,
)
from .graph import Dataset, EventSequence, Node, validate_sequence
from .tpmatrix import WeightScheme, tp_matrix
from .tppi import (
    DecayValue,
    TPPIVector,
    _check_beta,
    decay,
    log_sigmoid,
    representative_index,
    tppi,
)

log = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-4
LAMBDA_DECAY = 0.95
STOP_HISTORY = 14


@dataclass(frozen=True)
class Hyperparams:
    beta: float
    alpha: int = 3
    lambda0: float = 0.1
    gamma: float = 0.9
    M: int = 1000
    k: int = 16
    seed: int = 0
    scheme: WeightScheme = WeightScheme.TP_INITIAL
    time_scale: float = 3600.0
    batch_size: int = 16
    snapshots: bool = False
    tolerance: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "scheme", WeightScheme.parse(self.scheme))
        _check_beta(self.beta)
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be a positive integer")
        if not LAMBDA_FLOOR <= self.lambda0 <= 0.1:
            raise ValueError("lambda must lie in [1e-4, 0.1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.M < 1 or self.k < 1 or self.batch_size < 1:
            raise ValueError("M, k and batch_size must be positive")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scheme"] = self.scheme.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparams":
        return cls(**data)


@dataclass(frozen=True)
class FactorModel:
    U: np.ndarray
    V: np.ndarray
    hyperparams: Hyperparams
    catalog: tuple[Node, ...] = ()

    def __post_init__(self):
        if self.U.shape != self.V.shape or self.U.ndim != 2:
            raise DimensionMismatch(f"U {self.U.shape} and V {self.V.shape} differ")
        if self.catalog and len(self.catalog) != self.U.shape[0]:
            raise DimensionMismatch("catalog size does not match the factor rows")
        if not (np.isfinite(self.U).all() and np.isfinite(self.V).all()):
            raise NonFinite("factor matrices contain non-finite entries")

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(node.id for node in self.catalog)


@dataclass
class TrainState:
    U_last: np.ndarray
    V_last: np.ndarray
    E: list = field(default_factory=list)
    lam: float = 0.1
    epoch: int = 0


def _influence_column(p, n: int, ids) -> np.ndarray:
    if isinstance(p, TPPIVector):
        p = p.p
    if isinstance(p, Mapping):
        if ids:
            missing = [v for v in ids if v not in p]
            if missing:
                raise DimensionMismatch(f"TPPI vector lacks nodes {missing}")
            col = np.array([p[v] for v in ids], dtype=float)
        else:
            col = np.array([p[v] for v in sorted(p)], dtype=float)
    else:
        col = np.asarray(p, dtype=float).ravel()
    if col.shape != (n,):
        raise DimensionMismatch(f"TPPI vector has {col.size} entries, expected {n}")
    return col[:, None]


def reconstruction(model: FactorModel, p=None) -> np.ndarray:
    """sigma(U V^T), or ``diag(p) sigma(U V^T)`` when a TPPI vector is supplied.

    ``p`` may be a :class:`TPPIVector`, a node -> value mapping or an array in
    catalog order; it has to cover every node.
    """
    S = expit(model.U @ model.V.T)
    if p is None:
        return S
    return _influence_column(p, S.shape[0], model.node_ids) * S


def _decay_value(p) -> float:
    if isinstance(p, DecayValue):
        return p.d
    if isinstance(p, (int, float)):
        return float(p)
    return decay(p).d


def _targets(A, n):
    mats = [np.asarray(A, dtype=float)] if np.ndim(A) == 2 else [np.asarray(a, dtype=float) for a in A]
    for a in mats:
        if a.shape != (n, n):
            raise DimensionMismatch(f"target shape {a.shape} does not match {n} nodes")
    return mats


def objective(A, model: FactorModel, p, lam: float, weighted: bool = False) -> float:
    """Decayed reconstruction loss plus ridge terms.

    ``A`` is one TP-matrix or a sequence of snapshot matrices whose squared
    residuals are summed.  ``p`` is the TPPI vector; it always sets the decay
    and, with ``weighted=True``, also scales the rows of the reconstruction.
    Training uses the unweighted form.
    """
    d = _decay_value(p)
    R = reconstruction(model, p if weighted else None)
    data = sum(float(np.sum((a - R) ** 2)) for a in _targets(A, R.shape[0]))
    reg = float(np.sum(model.U**2) + np.sum(model.V**2))
    return 0.5 * d * data + 0.5 * lam * reg


def gradients(A, model: FactorModel, p, lam: float, weighted: bool = False):
    """Analytic (dU, dV) of :func:`objective`, holding the TPPI vector fixed."""
    d = _decay_value(p)
    S = expit(model.U @ model.V.T)
    n = S.shape[0]
    scale = _influence_column(p, n, model.node_ids) if weighted else 1.0
    R = scale * S
    resid = sum(a - R for a in _targets(A, n))
    G = -d * resid * scale * S * (1.0 - S)
    return G @ model.V + lam * model.U, G.T @ model.U + lam * model.V


def _heavy_ball(X, X_last, dX, lam, gamma):
    return X - lam * dX + gamma * (X - X_last)


def sgd_step(state: TrainState, model: FactorModel, grads, gamma: float):
    """One heavy-ball update; the previous parameters become the new momentum carriers.

    The learning rate itself is advanced once per epoch by :func:`next_lambda`.
    """
    dU, dV = grads
    if dU.shape != model.U.shape or dV.shape != model.V.shape:
        raise DimensionMismatch("gradient shapes do not match the model")
    U = _heavy_ball(model.U, state.U_last, dU, state.lam, gamma)
    V = _heavy_ball(model.V, state.V_last, dV, state.lam, gamma)
    new_state = replace(state, U_last=model.U, V_last=model.V, E=list(state.E))
    return new_state, replace(model, U=U, V=V)


def next_lambda(lam: float) -> float:
    return max(LAMBDA_FLOOR, lam * LAMBDA_DECAY)


def converged(E: Sequence[float], tolerance: float = 1e-3) -> bool:
    """Stop test comparing the sums of E[m-13..m-10] and E[m-3..m]."""
    if len(E) < STOP_HISTORY:
        return False
    m = len(E) - 1
    early = sum(E[m - 13 : m - 9])
    late = sum(E[m - 3 : m + 1])
    return abs(early - late) < tolerance


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    objective: float
    rmse: float
    mae: float
    lam: float
    decay: float


@dataclass
class TrainResult:
    model: FactorModel
    log: list
    converged: bool
    state: TrainState

    @property
    def epochs(self) -> int:
        return len(self.log)

    @property
    def final_rmse(self) -> float:
        return self.log[-1].rmse


class _Corpus:
    """Stacked training targets and TPPI windows for one dataset."""

    def __init__(self, ds: Dataset, hp: Hyperparams, threads: int = 1):
        self.ids = ds.node_ids
        self.n = n = len(self.ids)
        instances = [seq for seq in ds.instances]
        if not instances:
            raise EmptyInput("training needs at least one instance")
        for seq in instances:
            validate_sequence(seq, self.ids)
        self.N = N = len(instances)

        def build(seq):
            primary = tp_matrix(seq, hp.scheme, self.ids, None, hp.time_scale)
            mats = [primary]
            if hp.snapshots:
                T = len(seq)
                mats = [
                    tp_matrix(seq.prefix(t), hp.scheme, self.ids, None, hp.time_scale)
                    for t in range(max(1, T - hp.alpha), T)
                ] + [primary]
            return primary, mats

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                built = list(pool.map(build, instances))
        else:
            built = [build(seq) for seq in instances]

        self.primary = np.stack([b[0] for b in built])
        mats = [m for b in built for m in b[1]]
        counts = np.array([len(b[1]) for b in built])
        self.targets = np.stack(mats)
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        self.owner = np.repeat(np.arange(N), counts)
        self.snapshots = bool(hp.snapshots)

        index = {v: i for i, v in enumerate(self.ids)}
        self.visited = np.zeros((N, n), dtype=bool)
        inst, vpos, wpos, weight = [], [], [], []
        for s, seq in enumerate(instances):
            nodes = seq.nodes
            for v in nodes:
                self.visited[s, index[v]] = True
            for v, k in representative_index(seq, hp.scheme).items():
                for j in range(max(0, k - hp.alpha), min(len(nodes), k + hp.alpha + 1)):
                    if j == k:
                        continue
                    a, b = index[v], index[nodes[j]]
                    inst.append(s)
                    vpos.append(a)
                    wpos.append(b)
                    weight.append(self.primary[s, a, b])
        self.w_cell = np.asarray(inst, dtype=np.int64) * n + np.asarray(vpos, dtype=np.int64)
        self.w_v = np.asarray(vpos, dtype=np.int64)
        self.w_w = np.asarray(wpos, dtype=np.int64)
        self.w_a = np.asarray(weight, dtype=float)
        self.visited_count = self.visited.sum(axis=1)

    def tppi(self, U: np.ndarray, beta: float) -> np.ndarray:
        """N x n TPPI matrix; nodes absent from an instance get 0."""
        x = np.einsum("ij,ij->i", U[self.w_v], U[self.w_w]) * self.w_a
        L = np.bincount(self.w_cell, weights=log_sigmoid(x), minlength=self.N * self.n)
        P = np.exp(L.reshape(self.N, self.n)) * (1.0 - beta)
        return np.where(self.visited, P, 0.0)

    def decays(self, P: np.ndarray) -> np.ndarray:
        theta = P.sum(axis=1) / self.visited_count
        return np.exp(-(1.0 - theta))

    def batch_targets(self, idx: np.ndarray):
        if not self.snapshots:
            return self.targets[idx], idx
        snaps = np.concatenate([np.arange(self.offsets[s], self.offsets[s + 1]) for s in idx])
        return self.targets[snaps], self.owner[snaps]


def _data_gradient(targets, weights, S, count):
    weighted = np.tensordot(weights, targets, axes=1)
    G = -(weighted - weights.sum() * S) / count
    return G * S * (1.0 - S)


def train(
    ds: Dataset,
    hp: Hyperparams,
    threads: int = 1,
    callback: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Fit U, V with mini-batch heavy-ball SGD until the stop test fires or M epochs pass.

    Each epoch refreshes TPPI (features are the current rows of U) and the
    per-instance decay, then sweeps the instances in a seeded random order.
    """
    corpus = _Corpus(ds, hp, threads)
    rng = np.random.default_rng(hp.seed)
    n, k = corpus.n, hp.k
    U = rng.uniform(0.0, 0.1, size=(n, k))
    V = rng.uniform(0.0, 0.1, size=(n, k))
    state = TrainState(U_last=U.copy(), V_last=V.copy(), lam=hp.lambda0)
    records: list[EpochRecord] = []
    done = False
    flat_primary = corpus.primary

    for epoch in range(1, hp.M + 1):
        P = corpus.tppi(U, hp.beta)
        D = corpus.decays(P)
        lam = state.lam
        U_last, V_last = state.U_last, state.V_last
        order = rng.permutation(corpus.N)
        for start in range(0, corpus.N, hp.batch_size):
            idx = order[start : start + hp.batch_size]
            targets, owners = corpus.batch_targets(idx)
            S = expit(U @ V.T)
            G = _data_gradient(targets, D[owners], S, len(idx))
            dU = G @ V + lam * U
            dV = G.T @ U + lam * V
            U, U_last = _heavy_ball(U, U_last, dU, lam, hp.gamma), U
            V, V_last = _heavy_ball(V, V_last, dV, lam, hp.gamma), V

        S = expit(U @ V.T)
        resid = flat_primary - S
        if corpus.snapshots:
            sq = np.zeros(corpus.N)
            np.add.at(sq, corpus.owner, np.sum((corpus.targets - S) ** 2, axis=(1, 2)))
        else:
            sq = np.sum(resid**2, axis=(1, 2))
        J = 0.5 * float(np.mean(D * sq)) + 0.5 * lam * float(np.sum(U**2) + np.sum(V**2))
        if not math.isfinite(J) or not (np.isfinite(U).all() and np.isfinite(V).all()):
            raise NonFinite(f"objective diverged at epoch {epoch} (lambda={lam:.3g})")
        rec = EpochRecord(
            epoch=epoch,
            objective=J,
            rmse=float(np.sqrt(np.mean(resid**2))),
            mae=float(np.mean(np.abs(resid))),
            lam=lam,
            decay=float(np.mean(D)),
        )
        records.append(rec)
        state.E.append(J)
        state.U_last, state.V_last = U_last, V_last
        state.lam = next_lambda(lam)
        state.epoch = epoch
        if callback is not None:
            callback(rec)
        if converged(state.E, hp.tolerance):
            done = True
            break

    log.info("trained %d epochs, rmse=%.6g, converged=%s", len(records), records[-1].rmse, done)
    model = FactorModel(U, V, hp, ds.catalog)
    return TrainResult(model, records, done, state)


def predict_next(model: FactorModel, seq: EventSequence, query_time: int | None = None):
    """Rank candidate next nodes for ``seq`` at ``query_time``.

    Scores are ``p(last) * sigma(<u_last, v_j>)``.  The current node is never
    a candidate, nor is any already visited node the catalog marks as not
    revisitable.  Ties go to the lower node id.
    """
    hp = model.hyperparams
    ids = model.node_ids
    validate_sequence(seq, ids)
    last_time = seq.times[-1]
    if query_time is None:
        query_time = last_time
    if query_time < last_time:
        raise QueryBeforeLastEvent(
            f"query time {query_time} precedes the last event at {last_time}"
        )
    index = {v: i for i, v in enumerate(ids)}
    tp = tp_matrix(seq, hp.scheme, ids, query_time, hp.time_scale)
    p_last = tppi(seq, len(seq) - 1, model.U, tp, hp.alpha, hp.beta, ids)
    last = seq.nodes[-1]
    scores = p_last * expit(model.V @ model.U[index[last]])
    visited = set(seq.nodes)
    ranked = []
    for node in model.catalog:
        if node.id == last or (node.id in visited and not node.revisitable):
            continue
        ranked.append((node.id, float(scores[index[node.id]])))
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def node_index(model: FactorModel, node: int) -> int:
    try:
        return model.node_ids.index(node)
    except ValueError:
        raise UnknownNode(node) from None
