"""Python front end for the pinnbridge C++ core.

Bridge parameters are plain dicts using the same snake_case keys as the HTTP
API (beam_count, beam_lengths_mm, beam_diameter_mm, mean_angle_deg, ...).
"""

import json

from . import _pinnbridge as _core
from ._pinnbridge import (
    Model,
    PinnbridgeError,
    augment_csv,
    feature_names,
    feature_schema_hash,
    load_model,
    render_truss,
    segment_angle,
    synthesize_csv,
)

__all__ = [
    "Model",
    "PinnbridgeError",
    "augment_csv",
    "compute_metrics",
    "extract",
    "feature_names",
    "feature_schema_hash",
    "feature_vector",
    "load_model",
    "physics_residuals",
    "predict",
    "render_truss",
    "segment_angle",
    "synthesize_csv",
    "train",
    "weight_from_geometry",
]


def feature_vector(params):
    return _core.feature_vector(json.dumps(params))


def weight_from_geometry(params):
    return _core.weight_from_geometry(json.dumps(params))


def physics_residuals(params, weight_g, arch="pikan"):
    return json.loads(_core.physics_residuals(json.dumps(params), weight_g, arch))


def compute_metrics(truth, pred):
    return json.loads(_core.compute_metrics(list(truth), list(pred)))


def predict(model, params):
    return model.predict(json.dumps(params))


def train(csv_text, arch="pikan", seed=42, test_fraction=0.2, epochs=None, lambda_physics=None):
    """Split, train and score on the held-out part. Returns (model, metrics, history_csv)."""
    model, metrics, history = _core.train(csv_text, arch, seed, test_fraction, epochs, lambda_physics)
    return model, json.loads(metrics), history


def extract(image_bytes, scale_factor):
    return json.loads(_core.extract(bytes(image_bytes), scale_factor))
