"""Versioned JSON model documents.

A document holds both halves of the data, the squared residuals the variance
forest was trained on, the two forests as nested nodes, the scaling applied to
the raw features, and the resolved run configuration. Loading rebuilds the
exact ``FgsModel`` without refitting anything.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bandwidth import KernelFamily, KernelSpec
from .dataset import Dataset, ScalingParams
from .errors import DataError
from .forest import ForestModel, VarianceModel
from .smoother import FgsModel

FORMAT = "fgs-model"
VERSION = 1


def _data_doc(data: Dataset) -> dict:
    return {"features": data.features.tolist(), "response": data.response.tolist()}


def _data_from(doc: dict, names) -> Dataset:
    return Dataset(np.asarray(doc["features"], dtype=float), np.asarray(doc["response"], dtype=float), tuple(names))


def model_document(model: FgsModel, scaling: ScalingParams | None = None, config: dict | None = None,
                   bounds: np.ndarray | None = None) -> dict:
    names = list(model.smoothing.feature_names)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "config": config or {},
        "feature_names": names,
        "scaling": scaling.to_dict() if scaling is not None else None,
        "bounds": None if bounds is None else np.asarray(bounds, dtype=float).tolist(),
        "smoother": {
            "kernel": model.kernel.family.value,
            "kernel_convention": model.kernel_convention,
            "eps_rel": model.eps_rel,
            "default_h": model.default_h,
            "scale_by_n": model.scale_by_n,
        },
        "forest_data": _data_doc(model.forest.data),
        "smoothing_data": _data_doc(model.smoothing),
        "forest": model.forest.to_dict(),
        "variance": None,
    }
    if model.variance is not None:
        doc["variance"] = {**model.variance.to_dict(), "squared_residuals": model.variance.forest.data.response.tolist()}
    return doc


def dumps(doc: dict) -> str:
    # sorted keys and repr floats: reruns with the same seed are byte-identical
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def save_model(path, model: FgsModel, scaling: ScalingParams | None = None, config: dict | None = None,
               bounds=None) -> None:
    Path(path).write_text(dumps(model_document(model, scaling, config, bounds)), encoding="utf-8")


def model_from_document(doc: dict) -> tuple[FgsModel, ScalingParams | None, dict]:
    if doc.get("format") != FORMAT:
        raise DataError("not an fgs model document")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported model version {doc.get('version')!r} (expected {VERSION})")
    names = doc["feature_names"]
    d1 = _data_from(doc["forest_data"], names)
    d2 = _data_from(doc["smoothing_data"], names)
    forest = ForestModel.from_dict(doc["forest"], d1)
    variance = None
    if doc.get("variance") is not None:
        v = doc["variance"]
        resid = d1.with_response(np.asarray(v["squared_residuals"], dtype=float))
        variance = VarianceModel.from_dict(v, resid)
    sm = doc["smoother"]
    model = FgsModel(
        forest,
        d2,
        variance,
        KernelSpec(KernelFamily(sm["kernel"])),
        sm["eps_rel"],
        default_h=sm["default_h"],
        scale_by_n=sm["scale_by_n"],
        kernel_convention=sm["kernel_convention"],
    )
    scaling = ScalingParams.from_dict(doc["scaling"]) if doc.get("scaling") else None
    return model, scaling, doc


def load_model(path) -> tuple[FgsModel, ScalingParams | None, dict]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"model file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {p} is not valid JSON: {exc}") from None
    return model_from_document(doc)
