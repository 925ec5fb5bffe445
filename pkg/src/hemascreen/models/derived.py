"""The linear blood-count score and its one-dimensional logistic fit.

The score adds monocytes and subtracts leukocytes, eosinophils, and
platelets (all z-scored), with 2- and 3-term variants.  A scalar logistic
regression on the score gives a probability; it is fit by Newton's method
with an explicit cap when the classes are perfectly separable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import BloodCountRecord
from ..errors import SingleClass
from .common import sigmoid

SCORE_VARIANTS: dict[str, dict[str, float]] = {
    "ml": {"monocytes": 1.0, "leukocytes": -1.0},
    "mle": {"monocytes": 1.0, "leukocytes": -1.0, "eosinophils": -1.0},
    "mlep": {"monocytes": 1.0, "leukocytes": -1.0, "eosinophils": -1.0, "platelets": -1.0},
}

SLOPE_CAP = 50.0
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100


def derived_score(record: BloodCountRecord, variant: str = "mlep") -> float:
    """Signed sum of the named features for one record."""
    weights = SCORE_VARIANTS[variant]
    return float(sum(w * record.features[name] for name, w in weights.items()))


def derived_scores(records: Sequence[BloodCountRecord], variant: str = "mlep") -> np.ndarray:
    return np.array([derived_score(r, variant) for r in records])


@dataclass
class DerivedScoreModel:
    variant: str
    term_weights: dict[str, float]
    slope: float
    intercept: float
    perfect_separation: bool = False

    def score_values(self, X: np.ndarray, manifest: Sequence[str]) -> np.ndarray:
        cols = {name: manifest.index(name) for name in self.term_weights}
        v = np.zeros(X.shape[0])
        for name, w in self.term_weights.items():
            v += w * X[:, cols[name]]
        return v

    def raw_scores(self, X: np.ndarray, manifest: Sequence[str]) -> np.ndarray:
        return sigmoid(self.slope * self.score_values(X, manifest) + self.intercept)


def _fit_intercept_only(values: np.ndarray, y: np.ndarray, slope: float) -> float:
    """1-D Newton for the intercept with the slope held fixed (concave)."""
    b = 0.0
    for _ in range(NEWTON_MAX_ITER):
        p = sigmoid(slope * values + b)
        grad = float(np.mean(p - y))
        hess = float(np.mean(p * (1.0 - p)))
        if hess <= 0:
            break
        step = grad / hess
        b -= step
        if abs(step) < NEWTON_TOL:
            break
    return b


def train_logistic_scalar(y_values, labels, variant: str = "mlep") -> DerivedScoreModel:
    """Newton fit of P(positive) = sigmoid(slope*y + intercept).

    Perfectly separable inputs get a capped-slope fallback model, flagged
    as such; ranking metrics are unaffected by the cap since the sigmoid
    is monotone in y either way.
    """
    values = np.asarray(y_values, dtype=float)
    y = np.asarray(labels, dtype=float)
    if y.min() == y.max():
        raise SingleClass("training labels contain a single class")

    pos = values[y == 1]
    neg = values[y == 0]
    separated_up = pos.min() > neg.max()
    separated_down = pos.max() < neg.min()
    if separated_up or separated_down:
        slope = SLOPE_CAP if separated_up else -SLOPE_CAP
        intercept = _fit_intercept_only(values, y, slope)
        return DerivedScoreModel(
            variant=variant,
            term_weights=dict(SCORE_VARIANTS.get(variant, {})),
            slope=slope,
            intercept=intercept,
            perfect_separation=True,
        )

    a, b = 0.0, 0.0
    capped = False
    for _ in range(NEWTON_MAX_ITER):
        p = sigmoid(a * values + b)
        w = p * (1.0 - p)
        g = np.array([np.mean((p - y) * values), np.mean(p - y)])
        h = np.array(
            [
                [np.mean(w * values * values), np.mean(w * values)],
                [np.mean(w * values), np.mean(w)],
            ]
        )
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            # constant score values: slope unidentifiable, keep intercept-only
            a = 0.0
            b = _fit_intercept_only(values, y, 0.0)
            break
        a -= step[0]
        b -= step[1]
        if abs(a) > SLOPE_CAP:  # quasi-separation drift
            a = SLOPE_CAP if a > 0 else -SLOPE_CAP
            b = _fit_intercept_only(values, y, a)
            capped = True
            break
        if max(abs(step[0]), abs(step[1])) < NEWTON_TOL:
            break

    return DerivedScoreModel(
        variant=variant,
        term_weights=dict(SCORE_VARIANTS.get(variant, {})),
        slope=float(a),
        intercept=float(b),
        perfect_separation=capped,
    )
