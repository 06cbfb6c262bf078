"""Metrics, the leave-last-node-out AUC protocol and analysis harnesses."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage
from scipy.spatial.distance import squareform
from scipy.stats import rankdata

from .errors import EmptyInput, InstanceTooShort, LengthMismatch, TooFewInstances
from .graph import Dataset
from .tpmatrix import WeightScheme, tp_matrix
from .trainer import Hyperparams, TrainResult, predict_next, train

log = logging.getLogger(__name__)

UNDEF = "undef"


def fmt(value) -> str:
    """Nine significant digits; undefined values become the ``undef`` token."""
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return UNDEF
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.9g}"


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size != truth.size:
        raise LengthMismatch(f"{pred.size} predictions for {truth.size} targets")
    if pred.size == 0:
        raise EmptyInput("metrics need at least one value")
    return pred, truth


def rmse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for ties; NaN without both classes."""
    scores = np.asarray(scores, dtype=float).ravel()
    pos = np.asarray(labels, dtype=bool).ravel()
    if scores.size != pos.size:
        raise LengthMismatch(f"{scores.size} scores for {pos.size} labels")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class MetricReport:
    rmse: float
    mae: float
    auc: float | None = None
    per_epoch: list = field(default_factory=list)

    @classmethod
    def from_training(cls, result: TrainResult, auc_value: float | None = None) -> "MetricReport":
        rows = [(r.epoch, r.rmse, r.mae, r.lam, r.decay) for r in result.log]
        last = result.log[-1]
        return cls(last.rmse, last.mae, auc_value, rows)

    def to_dict(self) -> dict:
        return {
            "rmse": float(fmt(self.rmse)),
            "mae": float(fmt(self.mae)),
            "auc": None if self.auc is None else float(fmt(self.auc)),
            "epochs": len(self.per_epoch),
        }

    def write_csv(self, path) -> None:
        write_rows(path, ["epoch", "rmse", "mae", "lambda", "decay"], self.per_epoch)

    def write_json(self, path) -> None:
        out = self.to_dict()
        out["per_epoch"] = [
            dict(zip(["epoch", "rmse", "mae", "lambda", "decay"], [float(fmt(x)) for x in row]))
            for row in self.per_epoch
        ]
        for row in out["per_epoch"]:
            row["epoch"] = int(row["epoch"])
        write_json(path, out)


def write_rows(path, header: Sequence[str], rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if x is None else fmt(x) for x in row])


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class AUCReport:
    auc: float
    stages: int
    hits: int
    misses: int
    skipped: int
    stage_aucs: list = field(default_factory=list, repr=False)
    training: TrainResult | None = field(default=None, repr=False)

    @property
    def top1_accuracy(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else float("nan")

    def to_dict(self) -> dict:
        return {
            "auc": float(fmt(self.auc)),
            "stages": self.stages,
            "hits": self.hits,
            "misses": self.misses,
            "skipped": self.skipped,
            "top1_accuracy": float(fmt(self.top1_accuracy)),
        }


def auc_protocol(ds: Dataset, hp: Hyperparams, threads: int = 1) -> AUCReport:
    """Hold out each instance's final event, train on the rest and score every stage.

    At stage ``s`` the model sees the first ``s`` events and ranks candidates
    for event ``s``; the true node is the positive and every other candidate a
    negative.  The reported AUC is the mean of the per-stage AUCs.  The
    terminal stage of each instance also yields a hit when the top-ranked
    candidate is the held-out node.
    """
    kept, skipped = [], 0
    for seq in ds.instances:
        if len(seq) < 2:
            skipped += 1
            log.warning("%s", InstanceTooShort(f"instance {seq.instance_id!r} has fewer than 2 events; skipped"))
            continue
        kept.append(seq)
    if not kept:
        raise InstanceTooShort("no instance has at least 2 events")
    truncated = ds.with_instances(seq.prefix(len(seq) - 1) for seq in kept)
    result = train(truncated, hp, threads=threads)
    model = result.model

    stage_aucs, hits, misses = [], 0, 0
    for seq in kept:
        T = len(seq)
        for s in range(1, T):
            prefix = seq.prefix(s)
            ranked = predict_next(model, prefix)
            target = seq.nodes[s]
            labels = [node == target for node, _ in ranked]
            if s == T - 1:
                if ranked and ranked[0][0] == target:
                    hits += 1
                else:
                    misses += 1
            if any(labels) and not all(labels):
                stage_aucs.append(auc([score for _, score in ranked], labels))
    value = float(np.mean(stage_aucs)) if stage_aucs else float("nan")
    return AUCReport(value, len(stage_aucs), hits, misses, skipped, stage_aucs, result)


SCHEME_ORDER = (WeightScheme.ADJACENCY, WeightScheme.TP_INITIAL, WeightScheme.TP_RECENT)


@dataclass
class AblationResult:
    curves: dict
    results: dict = field(repr=False, default_factory=dict)

    @property
    def finals(self) -> dict:
        return {scheme: curve[-1] for scheme, curve in self.curves.items()}

    def rows(self):
        length = max(len(c) for c in self.curves.values())
        for epoch in range(length):
            yield [epoch + 1] + [
                self.curves[s][epoch] if epoch < len(self.curves[s]) else None for s in SCHEME_ORDER
            ]

    def write_csv(self, path) -> None:
        write_rows(path, ["epoch"] + [s.value for s in SCHEME_ORDER], self.rows())


def ablation_curves(ds: Dataset, hp: Hyperparams, threads: int = 1) -> AblationResult:
    """Per-epoch training RMSE for the three weight schemes, all else equal."""
    curves, results = {}, {}
    for scheme in SCHEME_ORDER:
        result = train(ds, replace(hp, scheme=scheme), threads=threads)
        curves[scheme] = [r.rmse for r in result.log]
        results[scheme] = result
        log.info("%s: final rmse %.6g after %d epochs", scheme.value, curves[scheme][-1], result.epochs)
    return AblationResult(curves, results)


@dataclass
class CorrelationReport:
    node_ids: tuple
    coefficients: np.ndarray
    cluster_order: tuple
    undefined_pairs: list
    linkage_method: str = "average"

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.coefficients)

    def write_csv(self, path) -> None:
        rows = [[node] + list(row) for node, row in zip(self.node_ids, self.coefficients)]
        write_rows(path, ["node"] + [str(v) for v in self.node_ids], rows)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.node_ids),
            "coefficients": [[fmt(x) for x in row] for row in self.coefficients],
            "cluster_order": list(self.cluster_order),
            "undefined_pairs": [list(p) for p in self.undefined_pairs],
            "linkage": f"{self.linkage_method}, distance 1-|r|",
        }


def correlation_rows(ds: Dataset, scheme, time_scale: float = 3600.0) -> np.ndarray:
    """instances x nodes matrix: presence flags or mean incoming TP weight."""
    scheme = WeightScheme.parse(scheme)
    ids = ds.node_ids
    n = len(ids)
    rows = np.zeros((len(ds.instances), n))
    off_diagonal = ~np.eye(n, dtype=bool)
    for s, seq in enumerate(ds.instances):
        if scheme is WeightScheme.ADJACENCY:
            for v in set(seq.nodes):
                rows[s, ds.index_of(v)] = 1.0
        else:
            A = tp_matrix(seq, scheme, ids, None, time_scale)
            rows[s] = np.where(off_diagonal, A, 0.0).sum(axis=0) / max(n - 1, 1)
    return rows


def pearson_matrix(X: np.ndarray) -> np.ndarray:
    """Column-wise Pearson coefficients; NaN wherever a column has zero variance."""
    X = np.asarray(X, dtype=float)
    centered = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(centered**2, axis=0))
    flat = norms <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    safe = np.where(flat, 1.0, norms)
    R = (centered.T @ centered) / np.outer(safe, safe)
    R = np.clip(R, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    R[flat, :] = np.nan
    R[:, flat] = np.nan
    return R


def correlation_analysis(ds: Dataset, scheme, time_scale: float = 3600.0) -> CorrelationReport:
    """Pearson correlation between node columns plus an average-linkage ordering.

    Pairs that involve a constant column are undefined and are placed at the
    maximum distance 1 for clustering.
    """
    if len(ds.instances) < 2:
        raise TooFewInstances("correlation analysis needs at least 2 instances")
    R = pearson_matrix(correlation_rows(ds, scheme, time_scale))
    ids = ds.node_ids
    undefined = [
        (ids[i], ids[j]) for i in range(len(ids)) for j in range(i, len(ids)) if np.isnan(R[i, j])
    ]
    dist = np.where(np.isnan(R), 1.0, 1.0 - np.abs(R))
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    if len(ids) > 1:
        order = leaves_list(linkage(squareform(dist, checks=False), method="average"))
    else:
        order = np.arange(len(ids))
    return CorrelationReport(tuple(ids), R, tuple(ids[i] for i in order), undefined)


@dataclass
class BenchReport:
    rows: list

    @property
    def ratio(self) -> float:
        """Time per instance of the largest size over that of the smallest."""
        first, last = self.rows[0], self.rows[-1]
        return (last[1] / last[0]) / (first[1] / first[0])

    @property
    def linear(self) -> bool:
        return self.ratio <= 2.0

    def write_csv(self, path) -> None:
        write_rows(
            path,
            ["instances", "seconds", "seconds_per_instance", "epochs"],
            [(size, sec, sec / size, epochs) for size, sec, epochs in self.rows],
        )


def runtime_bench(
    sizes: Sequence[int], hp: Hyperparams, make_dataset, threads: int = 1
) -> BenchReport:
    """Wall time of training on generated datasets of increasing size.

    ``make_dataset(size)`` returns the dataset for one size; generation is not
    timed.
    """
    sizes = list(sizes)
    if not sizes:
        raise EmptyInput("no sizes to benchmark")
    if any(s <= 0 for s in sizes):
        raise ValueError("benchmark sizes must be positive")
    if sizes != sorted(sizes):
        raise ValueError("benchmark sizes must be ascending")
    rows = []
    for size in sizes:
        ds = make_dataset(size)
        start = time.perf_counter()
        result = train(ds, hp, threads=threads)
        elapsed = time.perf_counter() - start
        rows.append((size, elapsed, result.epochs))
        log.info("bench %d instances: %.3fs over %d epochs", size, elapsed, result.epochs)
    return BenchReport(rows)
