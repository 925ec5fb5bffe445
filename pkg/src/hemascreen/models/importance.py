"""Variable importance: permutation AUC drop (forest) or |coefficient| (glmnet)."""

from __future__ import annotations

import numpy as np

from ..errors import UnsupportedModel
from ..seeding import rng_for
from .common import TrainedModel
from .elastic_net import ElasticNetModel
from .forest import RandomForestModel

N_PERMUTATIONS = 10


def variable_importance(
    trained: TrainedModel,
    X_eval: np.ndarray,
    y_eval,
    seed: int = 0,
    n_permutations: int = N_PERMUTATIONS,
) -> list[tuple[str, float]]:
    """Per-feature importance, normalized so the maximum is 100.

    Forests use the mean AUC drop over seeded permutations of each column
    of the evaluation set (model-agnostic and checkable against synthetic
    oracles); elastic nets use |coefficient| at the selected penalty.
    Sorted descending, ties broken by manifest order.
    """
    manifest = trained.feature_manifest
    inner = trained.model

    if isinstance(inner, RandomForestModel):
        X_eval = np.asarray(X_eval, dtype=float)
        y_eval = np.asarray(y_eval)
        from ..metrics import auc

        baseline = auc(inner.predict_proba(X_eval), y_eval)
        raw = []
        for j, name in enumerate(manifest):
            drops = []
            for rep in range(n_permutations):
                rng = rng_for(seed, "perm", name, rep)
                shuffled = X_eval.copy()
                shuffled[:, j] = rng.permutation(shuffled[:, j])
                drops.append(baseline - auc(inner.predict_proba(shuffled), y_eval))
            raw.append(max(0.0, float(np.mean(drops))))
    elif isinstance(inner, ElasticNetModel):
        raw = [float(abs(c)) for c in inner.coefficients]
    else:
        raise UnsupportedModel(
            f"variable importance is undefined for family {trained.family!r}"
        )

    peak = max(raw)
    scaled = [100.0 * v / peak if peak > 0 else 0.0 for v in raw]
    order = sorted(range(len(manifest)), key=lambda j: (-scaled[j], j))
    return [(manifest[j], scaled[j]) for j in order]
