"""Shared fixtures: synthetic cohorts, source-format CSVs, optional real data."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import pytest

from hemascreen.dataset import (
    FEATURE_NAMES,
    BloodCountRecord,
    Label,
    Location,
    select_cohort,
)

# Class-conditional shifts used by every synthetic cohort: positives move
# the way the screening features are expected to (monocytes up;
# leukocytes, eosinophils, platelets down), so models are learnable and
# the significance screen has known answers.
POSITIVE_SHIFTS = {
    "monocytes": 1.2,
    "leukocytes": -1.0,
    "eosinophils": -1.1,
    "platelets": -0.9,
    "mpv": 0.5,
    "rbc": 0.4,
}


def make_record(pid, label=Label.Negative, location=Location.Community, age=5, **overrides):
    features = {name: 0.0 for name in FEATURE_NAMES}
    features.update(overrides)
    return BloodCountRecord(
        patient_id=str(pid),
        age_quantile=age,
        location=location,
        label=label,
        features=features,
    )


def synthetic_records(n, pos_fraction, location, rng, prefix="p"):
    records = []
    n_pos = max(2, int(round(n * pos_fraction)))
    for i in range(n):
        positive = i < n_pos
        features = {name: float(rng.normal()) for name in FEATURE_NAMES}
        if positive:
            for name, shift in POSITIVE_SHIFTS.items():
                features[name] += shift
        records.append(
            BloodCountRecord(
                patient_id=f"{prefix}{i:04d}",
                age_quantile=int(rng.integers(0, 20)),
                location=location,
                label=Label.Positive if positive else Label.Negative,
                features=features,
            )
        )
    return records


@pytest.fixture
def rng():
    return np.random.default_rng(20240317)


@pytest.fixture
def community_cohort(rng):
    records = synthetic_records(160, 0.2, Location.Community, rng)
    return select_cohort(records, [Location.Community], provenance={"source_digest": "synthetic"})


@pytest.fixture
def small_cohort(rng):
    records = synthetic_records(60, 0.35, Location.RegularWard, rng, prefix="w")
    return select_cohort(records, [Location.RegularWard], provenance={"source_digest": "synthetic"})


# --- source-format CSV, exercising the column-mapping path ---

SOURCE_FEATURE_HEADERS = {name: f"Lab {name.upper()}" for name in FEATURE_NAMES}
SOURCE_MAPPING = {
    "features": SOURCE_FEATURE_HEADERS,
    "patient_id": "Subject",
    "age_quantile": "Age bucket",
    "label": "PCR result",
    "label_positive_value": "detected",
    "admission_flags": {
        "RegularWard": "Ward admit",
        "SemiIntensive": "Semi admit",
        "ICU": "ICU admit",
    },
    "pathogens": {"Influenza B": "Flu B", "Rhinovirus/Enterovirus": "Rhino"},
}


def records_to_source_rows(records):
    """Render records in the foreign-header format for parser tests."""
    header = ["Subject", "Age bucket", "PCR result", "Ward admit", "Semi admit", "ICU admit"]
    header += [SOURCE_FEATURE_HEADERS[name] for name in FEATURE_NAMES]
    header += ["Flu B", "Rhino"]
    lines = [",".join(header)]
    flag_cols = {
        Location.Community: ("0", "0", "0"),
        Location.RegularWard: ("1", "0", "0"),
        Location.SemiIntensive: ("0", "1", "0"),
        Location.ICU: ("0", "0", "1"),
    }
    for rec in records:
        row = [
            rec.patient_id,
            "" if rec.age_quantile is None else str(rec.age_quantile),
            "detected" if rec.label is Label.Positive else "not_detected",
            *flag_cols[rec.location],
        ]
        row += [repr(rec.features[name]) for name in FEATURE_NAMES]
        for pathogen in ("Influenza B", "Rhinovirus/Enterovirus"):
            result = rec.pathogen_panel.get(pathogen)
            row.append(result.value if result is not None else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def source_files(tmp_path_factory):
    """A synthetic source CSV + mapping JSON on disk (community + ward + icu)."""
    rng = np.random.default_rng(99)
    records = (
        synthetic_records(150, 0.12, Location.Community, rng, prefix="c")
        + synthetic_records(48, 0.4, Location.RegularWard, rng, prefix="w")
        + synthetic_records(12, 0.3, Location.ICU, rng, prefix="i")
    )
    root = tmp_path_factory.mktemp("source")
    data = root / "source.csv"
    data.write_text(records_to_source_rows(records), encoding="utf-8")
    mapping = root / "mapping.json"
    mapping.write_text(json.dumps(SOURCE_MAPPING, indent=2), encoding="utf-8")
    return {"data": data, "mapping": mapping, "n_records": len(records)}


# --- the real public dataset, if supplied ---

def real_dataset_path() -> Path | None:
    path = os.environ.get("HEMASCREEN_DATA")
    if path and Path(path).exists():
        return Path(path)
    return None


requires_dataset = pytest.mark.skipif(
    real_dataset_path() is None,
    reason="public dataset not supplied (set HEMASCREEN_DATA to the source CSV)",
)
