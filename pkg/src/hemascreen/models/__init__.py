"""The four classifier families behind one TrainedModel interface."""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from ..dataset import BloodCountRecord, Label
from .ann import AnnConfig, AnnModel, ann_config_from, train_ann
from .common import (
    PROB_CLAMP,
    TrainedModel,
    clamp_proba,
    predict_proba,
    predict_proba_matrix,
    records_matrix,
    sigmoid,
)
from .derived import (
    SCORE_VARIANTS,
    DerivedScoreModel,
    derived_score,
    derived_scores,
    train_logistic_scalar,
)
from .elastic_net import ElasticNetModel, PathPoint, train_elastic_net
from .forest import RandomForestModel, Tree, bootstrap_indices, train_random_forest
from .importance import variable_importance

__all__ = [
    "AnnConfig",
    "AnnModel",
    "DerivedScoreModel",
    "ElasticNetModel",
    "PathPoint",
    "PROB_CLAMP",
    "RandomForestModel",
    "SCORE_VARIANTS",
    "TrainedModel",
    "Tree",
    "bootstrap_indices",
    "clamp_proba",
    "derived_score",
    "derived_scores",
    "load_model",
    "model_from_json",
    "model_to_json",
    "save_model",
    "predict_proba",
    "predict_proba_matrix",
    "records_matrix",
    "sigmoid",
    "train_ann",
    "train_elastic_net",
    "train_for_spec",
    "train_logistic_scalar",
    "train_random_forest",
    "variable_importance",
]

MODEL_SCHEMA = "hemascreen.model/1"


def train_for_spec(model_spec, records: Sequence[BloodCountRecord], manifest, seed: int) -> TrainedModel:
    """Train one family on a batch of records with a fixed seed."""
    manifest = tuple(manifest)
    family = model_spec.family
    hp = dict(model_spec.hyperparams)
    y = np.array([1 if r.label is Label.Positive else 0 for r in records])

    if family == "ann":
        X = records_matrix(records, manifest)
        inner = train_ann(X, y, config=ann_config_from(hp), seed=seed)
    elif family == "rf":
        X = records_matrix(records, manifest)
        inner = train_random_forest(
            X,
            y,
            n_trees=hp.get("n_trees", 500),
            mtry=hp.get("mtry"),
            min_leaf=hp.get("min_leaf", 1),
            seed=seed,
        )
    elif family == "glmnet":
        X = records_matrix(records, manifest)
        inner = train_elastic_net(
            X,
            y,
            alpha=hp.get("alpha", 1.0),
            lambda_selection=hp.get("lambda_selection", "cv"),
            n_lambdas=hp.get("n_lambdas", 100),
            seed=seed,
        )
    elif family.startswith("lr-"):
        variant = family[3:]
        values = derived_scores(records, variant)
        inner = train_logistic_scalar(values, y, variant=variant)
    else:
        raise ValueError(f"unknown model family {family!r}")

    return TrainedModel(
        family=family,
        model=inner,
        feature_manifest=manifest,
        provenance={"seed": seed, "hyperparams": hp},
    )


def model_to_json(trained: TrainedModel) -> dict:
    """Versioned, loss-free serialization of any family."""
    inner = trained.model
    if isinstance(inner, ElasticNetModel):
        params = {
            "coefficients": inner.coefficients.tolist(),
            "intercept": inner.intercept,
            "lambda": inner.lam,
            "alpha": inner.alpha,
            "lambda_path": [
                {"lambda": pt.lam, "coefficients": pt.coefficients.tolist(), "intercept": pt.intercept}
                for pt in inner.lambda_path
            ],
        }
    elif isinstance(inner, RandomForestModel):
        params = {
            "n_trees": inner.n_trees,
            "mtry": inner.mtry,
            "min_leaf": inner.min_leaf,
            "seed": inner.seed,
            "n_train": inner.n_train,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "class_probs": t.class_probs.tolist(),
                    "bootstrap_seed": t.bootstrap_seed,
                }
                for t in inner.trees
            ],
        }
    elif isinstance(inner, AnnModel):
        params = {
            "weights": [w.tolist() for w in inner.weights],
            "biases": [b.tolist() for b in inner.biases],
            "config": {
                "hidden": list(inner.config.hidden),
                "activation": inner.config.activation,
                "epochs": inner.config.epochs,
                "learning_rate": inner.config.learning_rate,
                "batch_size": inner.config.batch_size,
                "beta1": inner.config.beta1,
                "beta2": inner.config.beta2,
                "eps": inner.config.eps,
            },
            "seed": inner.seed,
            "loss_trace": list(inner.loss_trace),
        }
    elif isinstance(inner, DerivedScoreModel):
        params = {
            "variant": inner.variant,
            "term_weights": dict(inner.term_weights),
            "slope": inner.slope,
            "intercept": inner.intercept,
            "perfect_separation": inner.perfect_separation,
        }
    else:
        raise TypeError(f"unknown model type {type(inner).__name__}")

    return {
        "schema": MODEL_SCHEMA,
        "family": trained.family,
        "feature_manifest": list(trained.feature_manifest),
        "provenance": trained.provenance,
        "params": params,
    }


def model_from_json(raw: dict) -> TrainedModel:
    if raw.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unknown model schema {raw.get('schema')!r}")
    family = raw["family"]
    params = raw["params"]
    if family == "glmnet":
        inner = ElasticNetModel(
            coefficients=np.array(params["coefficients"]),
            intercept=params["intercept"],
            lam=params["lambda"],
            alpha=params["alpha"],
            lambda_path=[
                PathPoint(pt["lambda"], np.array(pt["coefficients"]), pt["intercept"])
                for pt in params.get("lambda_path", [])
            ],
        )
    elif family == "rf":
        inner = RandomForestModel(
            trees=[
                Tree(
                    feature=np.array(t["feature"], dtype=int),
                    threshold=np.array(t["threshold"], dtype=float),
                    left=np.array(t["left"], dtype=int),
                    right=np.array(t["right"], dtype=int),
                    class_probs=np.array(t["class_probs"], dtype=float),
                    bootstrap_seed=t["bootstrap_seed"],
                )
                for t in params["trees"]
            ],
            n_trees=params["n_trees"],
            mtry=params["mtry"],
            min_leaf=params["min_leaf"],
            seed=params["seed"],
            n_train=params["n_train"],
        )
    elif family == "ann":
        cfg = params["config"]
        inner = AnnModel(
            weights=[np.array(w) for w in params["weights"]],
            biases=[np.array(b) for b in params["biases"]],
            config=AnnConfig(
                hidden=tuple(cfg["hidden"]),
                activation=cfg["activation"],
                epochs=cfg["epochs"],
                learning_rate=cfg["learning_rate"],
                batch_size=cfg["batch_size"],
                beta1=cfg["beta1"],
                beta2=cfg["beta2"],
                eps=cfg["eps"],
            ),
            seed=params["seed"],
            loss_trace=list(params["loss_trace"]),
        )
    elif family.startswith("lr-"):
        inner = DerivedScoreModel(
            variant=params["variant"],
            term_weights=dict(params["term_weights"]),
            slope=params["slope"],
            intercept=params["intercept"],
            perfect_separation=params["perfect_separation"],
        )
    else:
        raise ValueError(f"unknown model family {family!r}")

    return TrainedModel(
        family=family,
        model=inner,
        feature_manifest=tuple(raw["feature_manifest"]),
        provenance=dict(raw["provenance"]),
    )


def save_model(trained: TrainedModel, path) -> None:
    from pathlib import Path

    Path(path).write_text(
        json.dumps(model_to_json(trained), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path) -> TrainedModel:
    from pathlib import Path

    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
