"""Shared model plumbing: the tagged TrainedModel wrapper and scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import BloodCountRecord
from ..errors import ManifestMismatch

# Probabilities are clamped away from {0, 1} before reporting so log-loss
# and downstream arithmetic never see infinities from pure leaves.
PROB_CLAMP = 1e-6


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def clamp_proba(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class TrainedModel:
    """One of the four families, plus the manifest and training provenance."""

    family: str
    model: object
    feature_manifest: tuple[str, ...]
    provenance: dict

    def __post_init__(self):
        if not hasattr(self.model, "raw_scores"):
            raise TypeError(f"{type(self.model).__name__} lacks a raw_scores method")


def records_matrix(
    records: Sequence[BloodCountRecord], manifest: Sequence[str]
) -> np.ndarray:
    """Stack records into manifest order, independent of field ordering."""
    rows = []
    for rec in records:
        try:
            rows.append([rec.features[name] for name in manifest])
        except KeyError as exc:
            raise ManifestMismatch(
                f"record {rec.patient_id!r} lacks feature {exc.args[0]!r}"
            ) from None
    return np.array(rows, dtype=float)


def predict_proba_matrix(trained: TrainedModel, records: Sequence[BloodCountRecord]) -> np.ndarray:
    """Positive-class probabilities for a batch of records."""
    X = records_matrix(records, trained.feature_manifest)
    scores = trained.model.raw_scores(X, trained.feature_manifest)
    return clamp_proba(np.asarray(scores, dtype=float))


def predict_proba(trained: TrainedModel, record: BloodCountRecord) -> float:
    """Probability of the positive class for a single record."""
    return float(predict_proba_matrix(trained, [record])[0])
