"""Versioned JSON persistence for fitted models.

Model files are human-inspectable JSON. Floats are written with Python's
shortest round-trip repr, so a save/load cycle reproduces transform
outputs bit for bit. Per-sample arrays (training labels and scores) are
not persisted; they are functions of the stored parameters and the data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import ColumnSchema, _atomic_write_text
from .errors import DataError
from .hierarchy import CorexHierarchy
from .layer import CorexLayer, _ModelArrays

FORMAT_VERSION = 1


def _schema_to_json(schema: list[ColumnSchema]) -> list[dict]:
    return [
        {
            "name": col.name,
            "kind": col.kind,
            "cardinality": col.cardinality,
            "missing_allowed": col.missing_allowed,
        }
        for col in schema
    ]


def _schema_from_json(items: list[dict]) -> list[ColumnSchema]:
    return [
        ColumnSchema(
            name=item["name"],
            kind=item["kind"],
            cardinality=item["cardinality"],
            missing_allowed=item.get("missing_allowed", True),
        )
        for item in items
    ]


def _params_to_json(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, np.ndarray):
            value = value.tolist()
        elif isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, np.integer):
            value = int(value)
        elif isinstance(value, np.floating):
            value = float(value)
        out[key] = value
    return out


def _layer_to_json(layer: CorexLayer) -> dict:
    layer._check_fitted()
    arrays = layer._arrays
    return {
        "params": _params_to_json(layer.get_params()),
        "schema": _schema_to_json(layer.schema_),
        "n_samples": int(layer.n_samples_),
        "alpha": layer.alpha_.tolist(),
        "mi": layer.mi_.tolist(),
        "priors": arrays.priors.tolist(),
        "discrete_tables": arrays.disc_tables.tolist(),
        "discrete_counts": arrays.disc_counts.tolist(),
        "gaussian_mu": arrays.gauss_mu.tolist(),
        "gaussian_sigma": arrays.gauss_sigma.tolist(),
        "pooled_mu": arrays.pooled_mu.tolist(),
        "pooled_sigma": arrays.pooled_sigma.tolist(),
        "tc": layer.tc_,
        "tc_per_factor": layer.tc_per_factor_.tolist(),
        "trace": list(layer.trace_),
        "trace_factors": layer.trace_factors_.tolist(),
        "n_iter": int(layer.n_iter_),
        "restart_objectives": list(layer.restart_objectives_),
    }


def _layer_from_json(doc: dict) -> CorexLayer:
    params = dict(doc["params"])
    if params.get("fixed_alpha") is not None:
        params["fixed_alpha"] = np.asarray(params["fixed_alpha"], dtype=np.float64)
    layer = CorexLayer(**params)
    layer.schema_ = _schema_from_json(doc["schema"])
    layer.n_features_in_ = len(layer.schema_)
    layer.n_samples_ = int(doc["n_samples"])
    layer.alpha_ = np.asarray(doc["alpha"], dtype=np.float64)
    layer.mi_ = np.asarray(doc["mi"], dtype=np.float64)
    layer._arrays = _ModelArrays(
        priors=np.asarray(doc["priors"], dtype=np.float64),
        disc_tables=np.asarray(doc["discrete_tables"], dtype=np.float64),
        disc_counts=np.asarray(doc["discrete_counts"], dtype=np.float64),
        gauss_mu=np.asarray(doc["gaussian_mu"], dtype=np.float64),
        gauss_sigma=np.asarray(doc["gaussian_sigma"], dtype=np.float64),
        pooled_mu=np.asarray(doc["pooled_mu"], dtype=np.float64),
        pooled_sigma=np.asarray(doc["pooled_sigma"], dtype=np.float64),
    )
    layer.tc_ = float(doc["tc"])
    layer.tc_per_factor_ = np.asarray(doc["tc_per_factor"], dtype=np.float64)
    layer.trace_ = [float(v) for v in doc["trace"]]
    layer.trace_factors_ = np.asarray(doc["trace_factors"], dtype=np.float64)
    layer.n_iter_ = int(doc["n_iter"])
    layer.restart_objectives_ = [float(v) for v in doc["restart_objectives"]]
    return layer


def model_to_dict(model: CorexLayer | CorexHierarchy) -> dict:
    """JSON-ready document for a fitted layer or hierarchy."""
    if isinstance(model, CorexLayer):
        return {
            "format_version": FORMAT_VERSION,
            "model": "layer",
            "layer": _layer_to_json(model),
        }
    if isinstance(model, CorexHierarchy):
        model._check_fitted()
        return {
            "format_version": FORMAT_VERSION,
            "model": "hierarchy",
            "params": _params_to_json(model.get_params()),
            "layers": [_layer_to_json(layer) for layer in model.layers_],
            "layer_contributions": [float(c) for c in model.layer_contributions_],
            "lower_bound": float(model.lower_bound_),
            "stopped_early": bool(model.stopped_early_),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict) -> CorexLayer | CorexHierarchy:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version: {version!r}")
    kind = doc.get("model")
    if kind == "layer":
        return _layer_from_json(doc["layer"])
    if kind == "hierarchy":
        params = dict(doc["params"])
        hier = CorexHierarchy(**params)
        hier.layers_ = [_layer_from_json(item) for item in doc["layers"]]
        hier.layer_contributions_ = [float(c) for c in doc["layer_contributions"]]
        hier.lower_bound_ = float(doc["lower_bound"])
        hier.tc_ = hier.lower_bound_
        hier.n_layers_ = len(hier.layers_)
        hier.stopped_early_ = bool(doc["stopped_early"])
        return hier
    raise DataError(f"unrecognized model kind: {kind!r}")


def save_model(model: CorexLayer | CorexHierarchy, path: str | Path) -> None:
    """Write a fitted model as versioned JSON (atomic replace)."""
    doc = model_to_dict(model)
    _atomic_write_text(path, json.dumps(doc, indent=1, allow_nan=False))


def load_model(path: str | Path) -> CorexLayer | CorexHierarchy:
    """Load a model written by save_model; inverse up to bit-for-bit
    transform behavior."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError("model file must contain a JSON object")
    return model_from_dict(doc)
