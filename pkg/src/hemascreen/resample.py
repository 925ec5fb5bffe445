"""Stratified k-fold planning and SMOTE minority oversampling.

Fold plans are built once from (labels, k, repeats, master_seed) and are
immutable afterwards; every shuffle uses a seed derived from the master
seed, the repeat index, and the class, so plans are reproducible and folds
can be consumed concurrently without changing results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import BloodCountRecord, Label
from .errors import BadNeighborCount, TooFewMinority, TooFewPerClass
from .seeding import rng_for

SMOTE_ID_PREFIX = "smote-"
DEFAULT_K_NEIGHBORS = 5


@dataclass(frozen=True)
class FoldPlan:
    """Per-repeat assignment of every record index to a fold."""

    k: int
    repeats: int
    master_seed: int
    assignments: tuple[np.ndarray, ...]  # one array per repeat, index -> fold id

    @property
    def n_records(self) -> int:
        return len(self.assignments[0])

    def test_indices(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[repeat] == fold)

    def train_indices(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[repeat] != fold)

    def to_json(self) -> dict:
        return {
            "schema": "hemascreen.fold-plan/1",
            "k": self.k,
            "repeats": self.repeats,
            "master_seed": self.master_seed,
            "assignments": [a.tolist() for a in self.assignments],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, raw: dict) -> "FoldPlan":
        return cls(
            k=raw["k"],
            repeats=raw["repeats"],
            master_seed=raw["master_seed"],
            assignments=tuple(np.array(a, dtype=int) for a in raw["assignments"]),
        )


def stratified_kfold(labels, k: int, repeats: int = 1, master_seed: int = 0) -> FoldPlan:
    """Assign indices to k folds per repeat, preserving class balance.

    Within each repeat the members of each class are shuffled with a
    class- and repeat-derived seed, then dealt round-robin to folds, so
    per-fold class counts never deviate from the ideal count/k by 1 or
    more.
    """
    labels = list(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    classes = sorted(set(labels), key=str)
    class_indices = {c: np.flatnonzero(np.array([lab == c for lab in labels])) for c in classes}
    for c, idx in class_indices.items():
        if len(idx) < k:
            raise TooFewPerClass(f"class {c} has {len(idx)} members, fewer than k={k}")

    assignments = []
    for repeat in range(repeats):
        fold_of = np.empty(len(labels), dtype=int)
        for c in classes:
            key = c.value if isinstance(c, Label) else c
            rng = rng_for(master_seed, "fold-shuffle", repeat, key)
            shuffled = rng.permutation(class_indices[c])
            fold_of[shuffled] = np.arange(len(shuffled)) % k
        assignments.append(fold_of)
    return FoldPlan(k=k, repeats=repeats, master_seed=master_seed, assignments=tuple(assignments))


@dataclass(frozen=True)
class SyntheticBatch:
    """Synthetic minority samples with their interpolation parents."""

    samples: np.ndarray  # (n_synthetic, n_features)
    parent_pairs: tuple[tuple[int, int], ...]
    seed: int


def smote(
    minority: np.ndarray,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    n_synthetic: int = 0,
    seed: int = 0,
) -> SyntheticBatch:
    """Interpolate new minority points between members and their neighbors.

    Each synthetic sample is x + t*(x_nn - x) with t uniform on [0, 1) and
    x_nn drawn uniformly from x's k nearest minority neighbors (Euclidean,
    self excluded, distance ties broken by index).  Base points are cycled
    round-robin so the synthetic mass spreads over the whole minority.
    """
    minority = np.asarray(minority, dtype=float)
    if minority.ndim != 2 or minority.shape[0] < 2:
        raise TooFewMinority("need at least 2 minority samples")
    n_min = minority.shape[0]
    if not (1 <= k_neighbors <= n_min - 1):
        raise BadNeighborCount(f"k_neighbors={k_neighbors} outside [1, {n_min - 1}]")
    if n_synthetic < 0:
        raise ValueError("n_synthetic must be >= 0")

    diff = minority[:, None, :] - minority[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    neighbor_ids = np.argsort(dist, axis=1, kind="stable")[:, :k_neighbors]

    rng = rng_for(seed, "smote")
    samples = np.empty((n_synthetic, minority.shape[1]))
    parents: list[tuple[int, int]] = []
    for s in range(n_synthetic):
        base = s % n_min
        nn = int(neighbor_ids[base, rng.integers(k_neighbors)])
        t = rng.random()
        samples[s] = minority[base] + t * (minority[nn] - minority[base])
        parents.append((base, nn))
    return SyntheticBatch(samples=samples, parent_pairs=tuple(parents), seed=seed)


def balance_training_fold(
    train_records: list[BloodCountRecord],
    seed: int,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
) -> list[BloodCountRecord]:
    """SMOTE the minority class of a training fold up to exact parity.

    Synthetic records get unmistakable patient ids (``smote-...``) so any
    leak into a test fold is detectable.  An already balanced fold is
    returned unchanged.
    """
    pos = [r for r in train_records if r.label is Label.Positive]
    neg = [r for r in train_records if r.label is Label.Negative]
    if len(pos) == len(neg):
        return list(train_records)
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    n_needed = len(majority) - len(minority)
    if len(minority) < 2:
        raise TooFewMinority(f"minority class has {len(minority)} member(s)")

    from .dataset import FEATURE_NAMES  # canonical feature order

    matrix = np.array([r.feature_vector(FEATURE_NAMES) for r in minority])
    k = min(k_neighbors, len(minority) - 1)
    batch = smote(matrix, k_neighbors=k, n_synthetic=n_needed, seed=seed)

    synthetic = []
    for i, (vector, (base, _nn)) in enumerate(zip(batch.samples, batch.parent_pairs)):
        parent = minority[base]
        synthetic.append(
            BloodCountRecord(
                patient_id=f"{SMOTE_ID_PREFIX}{seed:016x}-{i}",
                age_quantile=parent.age_quantile,
                location=parent.location,
                label=parent.label,
                features={name: float(v) for name, v in zip(FEATURE_NAMES, vector)},
                pathogen_panel={},
            )
        )
    return list(train_records) + synthetic
