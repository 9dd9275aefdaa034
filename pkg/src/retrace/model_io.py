"""Versioned JSON serialization for trained models.

One self-describing document format covers all three model kinds. The
``schema_version`` field is mandatory and checked on load, so stale model
files fail loudly instead of deserializing into garbage.
"""

from __future__ import annotations

import json
from typing import TextIO

import numpy as np

from .classify import BinarySvm, KnnModel, Standardizer, SvmModel
from .gmm import GmmModel, StandardizedGmm
from .trace_model import ActivityClass

SCHEMA_VERSION = 1


def _standardizer_dict(s: Standardizer) -> dict:
    return {"means": s.means.tolist(), "stds": s.stds.tolist()}


def _standardizer_from(d: dict) -> Standardizer:
    return Standardizer(
        means=np.asarray(d["means"], dtype=np.float64),
        stds=np.asarray(d["stds"], dtype=np.float64),
    )


def _model_dict(model) -> dict:
    if isinstance(model, KnnModel):
        return {
            "schema_version": SCHEMA_VERSION,
            "model_type": "knn",
            "standardizer": _standardizer_dict(model.standardizer),
            "hyperparameters": {"k": model.k},
            "classes": [c.value for c in model.classes],
            "payload": {
                "points": model.points.tolist(),
                "labels": model.labels.tolist(),
            },
        }
    if isinstance(model, SvmModel):
        machines = []
        for (i, j), m in sorted(model.machines.items()):
            machines.append(
                {
                    "pair": [i, j],
                    "sv_points": m.sv_points.tolist(),
                    "sv_labels": m.sv_labels.tolist(),
                    "alpha": m.alpha.tolist(),
                    "bias": m.bias,
                }
            )
        return {
            "schema_version": SCHEMA_VERSION,
            "model_type": "svm",
            "standardizer": _standardizer_dict(model.standardizer),
            "hyperparameters": {"C": model.C, "gamma": model.gamma},
            "classes": [c.value for c in model.classes],
            "payload": {
                "machines": machines,
                "skipped_pairs": [list(p) for p in model.skipped_pairs],
            },
        }
    if isinstance(model, StandardizedGmm):
        g = model.gmm
        return {
            "schema_version": SCHEMA_VERSION,
            "model_type": "gmm",
            "standardizer": _standardizer_dict(model.standardizer),
            "hyperparameters": {"k": g.k},
            "classes": [],
            "payload": {
                "weights": g.weights.tolist(),
                "means": g.means.tolist(),
                "variances": g.variances.tolist(),
                "log_likelihood": g.log_likelihood,
                "n_iter": g.n_iter,
                "converged": g.converged,
            },
        }
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def dump_model(stream: TextIO, model) -> None:
    json.dump(_model_dict(model), stream, indent=2, sort_keys=True)
    stream.write("\n")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        dump_model(fh, model)


def _load_knn(doc: dict) -> KnnModel:
    return KnnModel(
        k=int(doc["hyperparameters"]["k"]),
        standardizer=_standardizer_from(doc["standardizer"]),
        points=np.asarray(doc["payload"]["points"], dtype=np.float64),
        labels=np.asarray(doc["payload"]["labels"], dtype=np.int64),
        classes=tuple(ActivityClass.from_slug(s) for s in doc["classes"]),
    )


def _load_svm(doc: dict) -> SvmModel:
    hyper = doc["hyperparameters"]
    machines = {}
    for m in doc["payload"]["machines"]:
        machines[tuple(m["pair"])] = BinarySvm(
            sv_points=np.asarray(m["sv_points"], dtype=np.float64),
            sv_labels=np.asarray(m["sv_labels"], dtype=np.float64),
            alpha=np.asarray(m["alpha"], dtype=np.float64),
            bias=float(m["bias"]),
            gamma=float(hyper["gamma"]),
            C=float(hyper["C"]),
        )
    return SvmModel(
        standardizer=_standardizer_from(doc["standardizer"]),
        classes=tuple(ActivityClass.from_slug(s) for s in doc["classes"]),
        machines=machines,
        C=float(hyper["C"]),
        gamma=float(hyper["gamma"]),
        skipped_pairs=tuple(
            tuple(p) for p in doc["payload"].get("skipped_pairs", [])
        ),
    )


def _load_gmm(doc: dict) -> StandardizedGmm:
    p = doc["payload"]
    gmm = GmmModel(
        weights=np.asarray(p["weights"], dtype=np.float64),
        means=np.asarray(p["means"], dtype=np.float64),
        variances=np.asarray(p["variances"], dtype=np.float64),
        log_likelihood=float(p["log_likelihood"]),
        n_iter=int(p["n_iter"]),
        converged=bool(p["converged"]),
        ll_history=(),
    )
    return StandardizedGmm(
        standardizer=_standardizer_from(doc["standardizer"]), gmm=gmm
    )


_LOADERS = {"knn": _load_knn, "svm": _load_svm, "gmm": _load_gmm}


def load_model(path):
    """Load any serialized model; rejects unknown schema versions."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported model schema version {version!r} "
            f"(expected {SCHEMA_VERSION})"
        )
    model_type = doc.get("model_type")
    if model_type not in _LOADERS:
        raise ValueError(f"unknown model type {model_type!r}")
    return _LOADERS[model_type](doc)
