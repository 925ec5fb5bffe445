"""Hospital CSV ingestion, cohort selection, and tabulations.

The public source file is an RFC-4180 CSV with one row per tested patient.
A :class:`ColumnMapping` decouples the canonical field names used
throughout the pipeline from whatever headers a particular snapshot of the
source file carries.  Parsing keeps exactly the rows whose 14 modeling
features are all present and parseable; everything else is counted per
exclusion reason and reported, never silently dropped.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    ConflictingAdmission,
    DegenerateFeature,
    EmptyCohort,
    MalformedHeader,
    MalformedRow,
)

# Canonical modeling features, in the fixed order used for manifests,
# tie-breaking, and serialization.  Neutrophils and age quantile are
# deliberately absent: neutrophils is not reported for all usable rows and
# age is kept as metadata only.
FEATURE_NAMES: tuple[str, ...] = (
    "hematocrit",
    "hemoglobin",
    "platelets",
    "mpv",
    "rbc",
    "lymphocytes",
    "mchc",
    "leukocytes",
    "basophils",
    "mch",
    "eosinophils",
    "mcv",
    "monocytes",
    "rbcdw",
)

PATHOGEN_NAMES: tuple[str, ...] = (
    "Adenovirus",
    "Bordetella pertussis",
    "Chlamydophila pneumoniae",
    "Coronavirus 229E",
    "Coronavirus HKU1",
    "Coronavirus NL63",
    "Coronavirus OC43",
    "Influenza A H1N1 2009",
    "Influenza A",
    "Influenza B",
    "Metapneumovirus",
    "Parainfluenza 1",
    "Parainfluenza 2",
    "Parainfluenza 3",
    "Parainfluenza 4",
    "Respiratory Syncytial Virus",
    "Rhinovirus/Enterovirus",
)


class Location(str, Enum):
    Community = "Community"
    RegularWard = "RegularWard"
    SemiIntensive = "SemiIntensive"
    ICU = "ICU"


class Label(str, Enum):
    Positive = "positive"
    Negative = "negative"


class PathogenResult(str, Enum):
    positive = "positive"
    negative = "negative"
    not_tested = "not_tested"


_TRUE_FLAGS = {"1", "t", "true", "yes"}
_FALSE_FLAGS = {"0", "f", "false", "no", ""}
_POSITIVE_PANEL = {"detected", "positive"}
_NEGATIVE_PANEL = {"not_detected", "negative"}


@dataclass(frozen=True)
class BloodCountRecord:
    """One patient row: identity, setting, rt-PCR label, and 14 z-scored features."""

    patient_id: str
    age_quantile: int | None
    location: Location
    label: Label
    features: dict[str, float]
    pathogen_panel: dict[str, PathogenResult] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.features) != set(FEATURE_NAMES):
            missing = set(FEATURE_NAMES) - set(self.features)
            extra = set(self.features) - set(FEATURE_NAMES)
            raise ValueError(
                f"record {self.patient_id!r}: features must be exactly the canonical 14 "
                f"(missing={sorted(missing)}, extra={sorted(extra)})"
            )
        for name, value in self.features.items():
            if not math.isfinite(value):
                raise ValueError(f"record {self.patient_id!r}: non-finite {name}={value}")
        if not isinstance(self.location, Location):
            raise ValueError(f"record {self.patient_id!r}: bad location {self.location!r}")
        if not isinstance(self.label, Label):
            raise ValueError(f"record {self.patient_id!r}: bad label {self.label!r}")

    def feature_vector(self, manifest: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([self.features[name] for name in manifest], dtype=float)


@dataclass(frozen=True)
class Cohort:
    """A validated, site-filtered set of records plus the feature manifest."""

    records: tuple[BloodCountRecord, ...]
    feature_manifest: tuple[str, ...]
    site_filter: frozenset[Location]
    provenance: dict

    def __post_init__(self):
        ids = set()
        for rec in self.records:
            if rec.location not in self.site_filter:
                raise ValueError(
                    f"record {rec.patient_id!r} at {rec.location.value} outside site filter"
                )
            if rec.patient_id in ids:
                raise ValueError(f"duplicate patient_id {rec.patient_id!r}")
            ids.add(rec.patient_id)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_positive(self) -> int:
        return sum(1 for r in self.records if r.label is Label.Positive)

    @property
    def n_negative(self) -> int:
        return len(self.records) - self.n_positive

    def labels(self) -> list[Label]:
        return [r.label for r in self.records]

    def design_matrix(self) -> np.ndarray:
        """Records stacked as an (n, 14) array in manifest order."""
        return np.array([r.feature_vector(self.feature_manifest) for r in self.records])

    def label_array(self) -> np.ndarray:
        """Labels as 0/1 with positive = 1."""
        return np.array([1 if r.label is Label.Positive else 0 for r in self.records])


@dataclass(frozen=True)
class ColumnMapping:
    """Canonical field names -> source CSV headers, plus value conventions.

    ``feature_headers`` must cover all 14 canonical features.  Location is
    taken either from a single ``location`` column holding the canonical
    enum values, or derived from the three 0/1 admission flags (all false
    means Community).  Pathogen columns are optional.
    """

    feature_headers: dict[str, str]
    patient_id: str
    label: str
    label_positive_value: str
    age_quantile: str | None = None
    location: str | None = None
    admission_flags: dict[str, str] | None = None  # location name -> header
    pathogen_headers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        missing = set(FEATURE_NAMES) - set(self.feature_headers)
        if missing:
            raise ValueError(f"mapping lacks feature headers for {sorted(missing)}")
        if self.location is None and not self.admission_flags:
            raise ValueError("mapping needs a location column or admission flag headers")
        if self.admission_flags:
            bad = set(self.admission_flags) - {
                Location.RegularWard.value,
                Location.SemiIntensive.value,
                Location.ICU.value,
            }
            if bad:
                raise ValueError(f"unknown admission flag locations {sorted(bad)}")
        headers = list(self.feature_headers.values())
        if len(set(headers)) != len(headers):
            raise ValueError("two canonical features map to the same header")

    @classmethod
    def from_json(cls, source: str | Path | TextIO) -> "ColumnMapping":
        if isinstance(source, (str, Path)):
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        else:
            raw = json.load(source)
        return cls(
            feature_headers=dict(raw["features"]),
            patient_id=raw["patient_id"],
            label=raw["label"],
            label_positive_value=raw["label_positive_value"],
            age_quantile=raw.get("age_quantile"),
            location=raw.get("location"),
            admission_flags=raw.get("admission_flags"),
            pathogen_headers=dict(raw.get("pathogens", {})),
        )

    def to_json(self) -> dict:
        out = {
            "features": dict(self.feature_headers),
            "patient_id": self.patient_id,
            "label": self.label,
            "label_positive_value": self.label_positive_value,
        }
        if self.age_quantile:
            out["age_quantile"] = self.age_quantile
        if self.location:
            out["location"] = self.location
        if self.admission_flags:
            out["admission_flags"] = dict(self.admission_flags)
        if self.pathogen_headers:
            out["pathogens"] = dict(self.pathogen_headers)
        return out


def canonical_mapping(pathogens: bool = True) -> ColumnMapping:
    """The identity mapping used to re-read cohort CSVs written by this package."""
    return ColumnMapping(
        feature_headers={name: name for name in FEATURE_NAMES},
        patient_id="patient_id",
        label="label",
        label_positive_value=Label.Positive.value,
        age_quantile="age_quantile",
        location="location",
        pathogen_headers={name: name for name in PATHOGEN_NAMES} if pathogens else {},
    )


def default_source_mapping() -> ColumnMapping:
    """Mapping for the public hospital CSV, shipped as package data."""
    path = Path(__file__).parent / "data" / "einstein_mapping.json"
    return ColumnMapping.from_json(path)


@dataclass
class ParseResult:
    """Outcome of one CSV ingestion: kept records plus per-reason exclusions."""

    records: list[BloodCountRecord]
    n_rows: int
    excluded: dict[str, int]
    source_digest: str

    @property
    def n_excluded(self) -> int:
        return sum(self.excluded.values())

    def report(self) -> dict:
        return {
            "schema": "hemascreen.ingestion-report/1",
            "rows_read": self.n_rows,
            "records_kept": len(self.records),
            "excluded": dict(sorted(self.excluded.items())),
            "source_digest": self.source_digest,
        }


def _parse_flag(cell: str, header: str, row_index: int) -> bool:
    norm = cell.strip().lower()
    if norm in _TRUE_FLAGS:
        return True
    if norm in _FALSE_FLAGS:
        return False
    raise MalformedRow(row_index, f"unparseable admission flag {header!r}={cell!r}")


def parse_dataset(csv_stream: str | Path | TextIO, mapping: ColumnMapping) -> ParseResult:
    """Parse the source CSV into validated records.

    Keeps exactly the rows with all 14 features present and parseable.
    Rows missing any feature (or the label) are excluded and counted by
    reason.  A non-empty cell that fails to parse in an otherwise complete
    row raises :class:`MalformedRow` with its 1-based data row index.
    """
    if isinstance(csv_stream, (str, Path)):
        text = Path(csv_stream).read_text(encoding="utf-8")
    else:
        text = csv_stream.read()
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()

    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise MalformedHeader("CSV has no header row")
    headers = set(reader.fieldnames)

    required = [mapping.patient_id, mapping.label]
    required += [mapping.feature_headers[name] for name in FEATURE_NAMES]
    if mapping.location is not None:
        required.append(mapping.location)
    else:
        required += list(mapping.admission_flags.values())
    missing = [h for h in required if h not in headers]
    if missing:
        raise MalformedHeader(f"mapped headers absent from CSV: {missing}")

    pathogen_cols = {
        name: header for name, header in mapping.pathogen_headers.items() if header in headers
    }
    age_col = mapping.age_quantile if mapping.age_quantile in headers else None

    records: list[BloodCountRecord] = []
    excluded = {"incomplete_features": 0, "missing_label": 0}
    n_rows = 0
    positive_value = mapping.label_positive_value.strip().lower()

    for row_index, row in enumerate(reader, start=1):
        n_rows += 1

        label_cell = (row.get(mapping.label) or "").strip()
        if not label_cell:
            excluded["missing_label"] += 1
            continue

        features: dict[str, float] = {}
        complete = True
        for name in FEATURE_NAMES:
            cell = (row.get(mapping.feature_headers[name]) or "").strip()
            if not cell:
                complete = False
                break
            try:
                value = float(cell)
            except ValueError:
                raise MalformedRow(row_index, f"unparseable {name}={cell!r}") from None
            if not math.isfinite(value):
                raise MalformedRow(row_index, f"non-finite {name}={cell!r}")
            features[name] = value
        if not complete:
            excluded["incomplete_features"] += 1
            continue

        if mapping.location is not None:
            loc_cell = (row.get(mapping.location) or "").strip()
            try:
                location = Location(loc_cell)
            except ValueError:
                raise MalformedRow(row_index, f"unknown location {loc_cell!r}") from None
        else:
            set_flags = [
                loc_name
                for loc_name, header in mapping.admission_flags.items()
                if _parse_flag(row.get(header) or "", header, row_index)
            ]
            if len(set_flags) > 1:
                raise ConflictingAdmission(row_index)
            location = Location(set_flags[0]) if set_flags else Location.Community

        label = (
            Label.Positive if label_cell.lower() == positive_value else Label.Negative
        )

        age_quantile = None
        if age_col is not None:
            age_cell = (row.get(age_col) or "").strip()
            if age_cell:
                try:
                    age_quantile = int(float(age_cell))
                except ValueError:
                    raise MalformedRow(row_index, f"unparseable age quantile {age_cell!r}") from None

        panel: dict[str, PathogenResult] = {}
        for pathogen, header in pathogen_cols.items():
            cell = (row.get(header) or "").strip().lower()
            if cell in _POSITIVE_PANEL:
                panel[pathogen] = PathogenResult.positive
            elif cell in _NEGATIVE_PANEL:
                panel[pathogen] = PathogenResult.negative
            elif cell:
                # Any other non-empty marker is an untested/indeterminate slot.
                panel[pathogen] = PathogenResult.not_tested
        tested = {k: v for k, v in panel.items() if v is not PathogenResult.not_tested}

        records.append(
            BloodCountRecord(
                patient_id=(row.get(mapping.patient_id) or f"row-{row_index}").strip(),
                age_quantile=age_quantile,
                location=location,
                label=label,
                features=features,
                pathogen_panel=tested,
            )
        )

    return ParseResult(records=records, n_rows=n_rows, excluded=excluded, source_digest=digest)


def select_cohort(
    records: Iterable[BloodCountRecord],
    site_filter: Iterable[Location],
    provenance: dict | None = None,
) -> Cohort:
    """Filter records to the requested locations."""
    sites = frozenset(Location(s) for s in site_filter)
    if not sites:
        raise ValueError("site_filter must be non-empty")
    kept = tuple(r for r in records if r.location in sites)
    if not kept:
        raise EmptyCohort(f"no records in {sorted(s.value for s in sites)}")
    prov = dict(provenance or {})
    prov["site_filter"] = sorted(s.value for s in sites)
    return Cohort(
        records=kept,
        feature_manifest=FEATURE_NAMES,
        site_filter=sites,
        provenance=prov,
    )


def standardize(values: Sequence[float]) -> tuple[np.ndarray, float, float]:
    """Center and scale to sample mean 0, sample sd 1 (n-1 denominator).

    Returns the transformed values together with the fitted mean and sd so
    the same transform can be replayed on unseen data.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("standardize needs at least 2 values")
    if not np.all(np.isfinite(arr)):
        raise ValueError("standardize needs finite values")
    if arr.max() == arr.min():
        raise DegenerateFeature("feature has zero spread")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    return (arr - mean) / sd, mean, sd


def cohort_summary(records: Iterable[BloodCountRecord]) -> dict:
    """Per-location outcome counts and per-pathogen positive counts.

    The outcome table mirrors the source publication's cohort breakdown
    (counts with within-location percentages); the pathogen table counts
    positives per pathogen and location over the records that carry a
    pathogen panel.
    """
    records = list(records)
    locations = [loc.value for loc in Location]

    outcome: dict[str, dict] = {}
    for loc in locations:
        at_loc = [r for r in records if r.location.value == loc]
        pos = sum(1 for r in at_loc if r.label is Label.Positive)
        outcome[loc] = _outcome_cell(pos, len(at_loc))
    total_pos = sum(1 for r in records if r.label is Label.Positive)
    outcome["Total"] = _outcome_cell(total_pos, len(records))

    with_panel = [r for r in records if r.pathogen_panel]
    pathogen_rows: dict[str, dict] = {}
    for pathogen in PATHOGEN_NAMES:
        row = {}
        for loc in locations:
            row[loc] = sum(
                1
                for r in with_panel
                if r.location.value == loc
                and r.pathogen_panel.get(pathogen) is PathogenResult.positive
            )
        row["Total"] = sum(row[loc] for loc in locations)
        pathogen_rows[pathogen] = row
    grand = {
        loc: sum(pathogen_rows[p][loc] for p in PATHOGEN_NAMES)
        for loc in locations + ["Total"]
    }

    return {
        "schema": "hemascreen.summary/1",
        "outcome_by_location": outcome,
        "records_with_pathogen_panel": len(with_panel),
        "pathogen_positives": pathogen_rows,
        "pathogen_totals": grand,
    }


def _outcome_cell(pos: int, total: int) -> dict:
    neg = total - pos
    return {
        "total": total,
        "positive": pos,
        "negative": neg,
        "positive_pct": round(100.0 * pos / total) if total else 0,
        "negative_pct": round(100.0 * neg / total) if total else 0,
    }


def cohort_to_csv(cohort: Cohort, stream: TextIO) -> None:
    """Re-serialize a cohort with canonical headers (round-trip stable)."""
    fieldnames = ["patient_id", "age_quantile", "location", "label"]
    fieldnames += list(cohort.feature_manifest)
    fieldnames += list(PATHOGEN_NAMES)
    writer = csv.DictWriter(stream, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for rec in cohort.records:
        row = {
            "patient_id": rec.patient_id,
            "age_quantile": "" if rec.age_quantile is None else rec.age_quantile,
            "location": rec.location.value,
            "label": rec.label.value,
        }
        for name in cohort.feature_manifest:
            row[name] = repr(rec.features[name])
        for pathogen in PATHOGEN_NAMES:
            result = rec.pathogen_panel.get(pathogen)
            row[pathogen] = result.value if result is not None else ""
        writer.writerow(row)
