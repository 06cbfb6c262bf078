"""Self-describing JSON model files.

Floats are written with ``repr``, the shortest decimal that round-trips to the
same IEEE-754 double, so loading a saved model reproduces U and V bit for bit.
Keys are sorted so that equal models serialize to identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .graph import Node
from .trainer import FactorModel, Hyperparams

SCHEMA = "tpnm-model"
VERSION = 1


def model_to_dict(model: FactorModel) -> dict:
    return {
        "schema": SCHEMA,
        "version": VERSION,
        "catalog": [
            {"id": node.id, "label": node.label, "revisitable": node.revisitable}
            for node in model.catalog
        ],
        "hyperparams": model.hyperparams.to_dict(),
        "k": int(model.U.shape[1]),
        "U": model.U.tolist(),
        "V": model.V.tolist(),
    }


def model_from_dict(data: dict) -> FactorModel:
    if data.get("schema") != SCHEMA:
        raise ParseError(f"not a model file (schema {data.get('schema')!r})")
    if data.get("version") != VERSION:
        raise ParseError(f"unsupported model version {data.get('version')!r}")
    try:
        catalog = tuple(
            Node(int(c["id"]), str(c.get("label", "")), bool(c.get("revisitable", True)))
            for c in data["catalog"]
        )
        hp = Hyperparams.from_dict(data["hyperparams"])
        k = int(data["k"])
        U = np.array(data["U"], dtype=float).reshape(len(catalog), k)
        V = np.array(data["V"], dtype=float).reshape(len(catalog), k)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    return FactorModel(U, V, hp, catalog)


def dumps(model: FactorModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def save_model(model: FactorModel, path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path) -> FactorModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from exc
    return model_from_dict(data)
