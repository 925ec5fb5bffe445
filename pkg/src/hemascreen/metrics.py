"""ROC/AUC rank statistics, threshold metrics, and the cross-validation harness.

AUC is computed in its rank form: the fraction of (positive, negative)
pairs where the positive scores higher, ties counting one half.  The ROC
curve groups tied scores into single steps, which makes the trapezoidal
integral of the curve agree with the rank form exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Cohort
from .errors import SingleClass
from .resample import FoldPlan, SMOTE_ID_PREFIX, balance_training_fold
from .seeding import derive_seed
from .stats import midranks


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep as (fpr, tpr, threshold) points, plus the trapezoid AUC."""

    points: tuple[tuple[float, float, float], ...]
    auc: float

    def __post_init__(self):
        fprs = [p[0] for p in self.points]
        tprs = [p[1] for p in self.points]
        assert fprs[0] == 0.0 and tprs[0] == 0.0, "curve must start at (0,0)"
        assert fprs[-1] == 1.0 and tprs[-1] == 1.0, "curve must end at (1,1)"
        assert all(a <= b for a, b in zip(fprs, fprs[1:])), "fpr must be non-decreasing"
        assert all(a <= b for a, b in zip(tprs, tprs[1:])), "tpr must be non-decreasing"


@dataclass(frozen=True)
class ThresholdMetrics:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn)

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp)

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / (self.tp + self.fp + self.tn + self.fn)

    @property
    def normalized_confusion(self) -> list[list[float]]:
        """Rows are true classes (negative, positive), row-normalized."""
        neg = self.tn + self.fp
        pos = self.tp + self.fn
        return [
            [self.tn / neg, self.fp / neg],
            [self.fn / pos, self.tp / pos],
        ]

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "normalized_confusion": self.normalized_confusion,
        }


def _check_two_classes(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    pos_mask = labels.astype(bool)
    n_pos = int(pos_mask.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"need both classes, got {n_pos} positive / {n_neg} negative")
    return pos_mask, ~pos_mask


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outranks a random negative (ties = 1/2)."""
    scores = np.asarray(scores, dtype=float)
    pos_mask, _ = _check_two_classes(np.asarray(labels))
    n_pos = int(pos_mask.sum())
    n_neg = scores.size - n_pos
    ranks = midranks(scores)
    rank_sum_pos = float(ranks[pos_mask].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """Sweep thresholds over the distinct scores descending, with sentinels.

    Tied scores collapse into a single step, so the point count is the
    number of distinct scores plus the two sentinel endpoints.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos_mask, neg_mask = _check_two_classes(labels)
    n_pos = int(pos_mask.sum())
    n_neg = int(neg_mask.sum())

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos_mask[order].astype(int)

    points: list[tuple[float, float, float]] = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i = 0
    n = scores.size
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        block_pos = int(sorted_pos[i : j + 1].sum())
        tp += block_pos
        fp += (j - i + 1) - block_pos
        points.append((fp / n_neg, tp / n_pos, float(sorted_scores[i])))
        i = j + 1
    points.append((1.0, 1.0, float("-inf")))

    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    area = float(np.trapezoid(ys, xs))
    return RocCurve(points=tuple(points), auc=area)


def metrics_at(scores: Sequence[float], labels: Sequence[int], threshold: float) -> ThresholdMetrics:
    """Confusion counts and rates when predicting positive iff score >= threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos_mask, neg_mask = _check_two_classes(labels)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & pos_mask))
    fn = int(np.sum(~predicted & pos_mask))
    fp = int(np.sum(predicted & neg_mask))
    tn = int(np.sum(~predicted & neg_mask))
    return ThresholdMetrics(threshold=float(threshold), tp=tp, fp=fp, tn=tn, fn=fn)


def optimal_cutoff(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Candidate threshold (a distinct score) maximizing Youden's J.

    Ties on J resolve to the lowest qualifying threshold.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos_mask, neg_mask = _check_two_classes(labels)
    n_pos = int(pos_mask.sum())
    n_neg = int(neg_mask.sum())

    candidates = np.unique(scores)  # ascending
    best_t = float(candidates[0])
    best_j = -np.inf
    # descending cumulative counts: at threshold t, predicted positive = scores >= t
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    cum_pos = np.cumsum(pos_mask[order].astype(int))
    for t in candidates:
        k = int(np.searchsorted(-sorted_scores, -t, side="right"))  # count of scores >= t
        tp = int(cum_pos[k - 1]) if k > 0 else 0
        fp = k - tp
        j = tp / n_pos - fp / n_neg
        if j > best_j or (j == best_j and t < best_t):
            best_j = j
            best_t = float(t)
    return best_t


@dataclass(frozen=True)
class ModelSpec:
    """One of the four classifier families plus hyperparameter overrides."""

    family: str  # ann | rf | glmnet | lr-ml | lr-mle | lr-mlep
    hyperparams: dict = field(default_factory=dict)

    FAMILIES = ("ann", "rf", "glmnet", "lr-ml", "lr-mle", "lr-mlep")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")


@dataclass
class FoldResult:
    repeat: int
    fold: int
    auc: float
    at_cutoff: ThresholdMetrics
    at_half: ThresholdMetrics
    roc: RocCurve
    n_train: int
    n_test: int


@dataclass
class EvalReport:
    """Per-fold and aggregate cross-validated performance for one model."""

    model_family: str
    hyperparams: dict
    master_seed: int
    k: int
    repeats: int
    smote: bool
    cohort_digest: str
    folds: list[FoldResult]

    def _series(self, pick) -> np.ndarray:
        return np.array([pick(f) for f in self.folds], dtype=float)

    def aggregate(self) -> dict:
        out = {}
        metrics = {
            "auc": lambda f: f.auc,
            "sensitivity": lambda f: f.at_cutoff.sensitivity,
            "specificity": lambda f: f.at_cutoff.specificity,
            "accuracy": lambda f: f.at_cutoff.accuracy,
            "sensitivity_at_half": lambda f: f.at_half.sensitivity,
            "specificity_at_half": lambda f: f.at_half.specificity,
            "accuracy_at_half": lambda f: f.at_half.accuracy,
        }
        for name, pick in metrics.items():
            series = self._series(pick)
            sd = float(series.std(ddof=1)) if series.size > 1 else 0.0
            out[name] = {"mean": float(series.mean()), "sd": sd}
        return out

    def to_json(self) -> dict:
        return {
            "schema": "hemascreen.eval-report/1",
            "model": {"family": self.model_family, "hyperparams": _jsonable(self.hyperparams)},
            "master_seed": self.master_seed,
            "k": self.k,
            "repeats": self.repeats,
            "smote": self.smote,
            "cohort_digest": self.cohort_digest,
            "aggregate": self.aggregate(),
            "folds": [
                {
                    "repeat": f.repeat,
                    "fold": f.fold,
                    "auc": f.auc,
                    "n_train": f.n_train,
                    "n_test": f.n_test,
                    "at_cutoff": f.at_cutoff.to_json(),
                    "at_half": f.at_half.to_json(),
                    "roc_points": [[p[0], p[1], _jsonable_float(p[2])] for p in f.roc.points],
                }
                for f in self.folds
            ],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _jsonable_float(v: float):
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return _jsonable_float(obj)
    return obj


def cross_validate(
    cohort: Cohort,
    model_spec: ModelSpec,
    fold_plan: FoldPlan,
    smote: bool = False,
) -> EvalReport:
    """Train and score one model family across every (repeat, fold) pair.

    Per fold: the training portion is optionally SMOTE-balanced, the model
    is trained with a fold-derived seed, and the untouched test fold is
    scored.  The operating threshold is chosen on the original training
    rows only (Youden's J), then applied to the test fold; metrics at the
    fixed 0.5 threshold are reported alongside.  Fold results are merged
    in deterministic (repeat, fold) order.
    """
    from .models import train_for_spec, predict_proba_matrix

    records = list(cohort.records)
    if fold_plan.n_records != len(records):
        raise ValueError("fold plan was built over a different record count")
    master = fold_plan.master_seed
    cohort_ids = {r.patient_id for r in records}

    folds: list[FoldResult] = []
    for repeat in range(fold_plan.repeats):
        for fold in range(fold_plan.k):
            test_idx = fold_plan.test_indices(repeat, fold)
            train_idx = fold_plan.train_indices(repeat, fold)
            train_records = [records[i] for i in train_idx]
            test_records = [records[i] for i in test_idx]

            # Leakage guard: test rows must be original cohort members.
            for rec in test_records:
                assert rec.patient_id in cohort_ids
                assert not rec.patient_id.startswith(SMOTE_ID_PREFIX)

            fit_records = train_records
            if smote:
                fit_records = balance_training_fold(
                    train_records, seed=derive_seed(master, "smote", repeat, fold)
                )

            model = train_for_spec(
                model_spec,
                fit_records,
                cohort.feature_manifest,
                seed=derive_seed(master, "fit", repeat, fold),
            )

            train_scores = predict_proba_matrix(model, train_records)
            train_labels = np.array([1 if r.label.value == "positive" else 0 for r in train_records])
            cutoff = optimal_cutoff(train_scores, train_labels)

            test_scores = predict_proba_matrix(model, test_records)
            test_labels = np.array([1 if r.label.value == "positive" else 0 for r in test_records])

            curve = roc_curve(test_scores, test_labels)
            folds.append(
                FoldResult(
                    repeat=repeat,
                    fold=fold,
                    auc=auc(test_scores, test_labels),
                    at_cutoff=metrics_at(test_scores, test_labels, cutoff),
                    at_half=metrics_at(test_scores, test_labels, 0.5),
                    roc=curve,
                    n_train=len(fit_records),
                    n_test=len(test_records),
                )
            )

    return EvalReport(
        model_family=model_spec.family,
        hyperparams=dict(model_spec.hyperparams),
        master_seed=master,
        k=fold_plan.k,
        repeats=fold_plan.repeats,
        smote=smote,
        cohort_digest=str(cohort.provenance.get("source_digest", "")),
        folds=folds,
    )
