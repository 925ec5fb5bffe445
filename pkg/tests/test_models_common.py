"""TrainedModel wrapper: scoring, manifests, serialization, importance."""

import numpy as np
import pytest

from hemascreen.dataset import FEATURE_NAMES, Label, Location
from hemascreen.errors import ManifestMismatch, UnsupportedModel
from hemascreen.metrics import ModelSpec
from hemascreen.models import (
    PROB_CLAMP,
    TrainedModel,
    model_from_json,
    model_to_json,
    predict_proba,
    predict_proba_matrix,
    records_matrix,
    train_for_spec,
    variable_importance,
)
from hemascreen.models.elastic_net import ElasticNetModel
from hemascreen.models.forest import train_random_forest

from conftest import make_record, synthetic_records


def zero_enet():
    return TrainedModel(
        family="glmnet",
        model=ElasticNetModel(
            coefficients=np.zeros(14), intercept=0.0, lam=1.0, alpha=1.0
        ),
        feature_manifest=FEATURE_NAMES,
        provenance={"seed": 0, "hyperparams": {}},
    )


class TestPredictProba:
    def test_zero_model_gives_half(self):
        rec = make_record("x", monocytes=2.0, mcv=-1.0)
        assert predict_proba(zero_enet(), rec) == 0.5

    def test_pure_forest_is_clamped(self, rng):
        X = rng.normal(size=(15, 14))
        forest = train_random_forest(X, np.ones(15, dtype=int), n_trees=5, seed=0)
        trained = TrainedModel("rf", forest, FEATURE_NAMES, {"seed": 0})
        rec = make_record("y")
        assert predict_proba(trained, rec) == 1.0 - PROB_CLAMP

    def test_derived_model_is_sigmoid_of_score(self, rng):
        records = synthetic_records(80, 0.3, Location.Community, rng)
        trained = train_for_spec(ModelSpec("lr-mlep"), records, FEATURE_NAMES, seed=1)
        rec = records[0]
        from hemascreen.models.derived import derived_score

        inner = trained.model
        expected = 1 / (1 + np.exp(-(inner.slope * derived_score(rec, "mlep") + inner.intercept)))
        assert predict_proba(trained, rec) == pytest.approx(expected)

    def test_field_order_irrelevant(self, rng):
        from hemascreen.dataset import BloodCountRecord

        records = synthetic_records(60, 0.3, Location.Community, rng)
        trained = train_for_spec(ModelSpec("lr-mle"), records, FEATURE_NAMES, seed=2)
        rec = records[0]
        clone = BloodCountRecord(
            patient_id="clone",
            age_quantile=rec.age_quantile,
            location=rec.location,
            label=rec.label,
            features=dict(reversed(list(rec.features.items()))),
        )
        assert list(clone.features) != list(rec.features)
        assert predict_proba(trained, clone) == predict_proba(trained, rec)

    def test_manifest_mismatch(self):
        trained = TrainedModel(
            family="glmnet",
            model=ElasticNetModel(np.zeros(2), 0.0, 1.0, 1.0),
            feature_manifest=("monocytes", "definitely_not_a_feature"),
            provenance={},
        )
        with pytest.raises(ManifestMismatch):
            predict_proba(trained, make_record("z"))

    def test_batch_matches_singles(self, rng):
        records = synthetic_records(20, 0.4, Location.Community, rng)
        trained = train_for_spec(ModelSpec("rf", {"n_trees": 10}), records, FEATURE_NAMES, seed=3)
        batch = predict_proba_matrix(trained, records)
        singles = [predict_proba(trained, r) for r in records]
        np.testing.assert_allclose(batch, singles)


class TestSerialization:
    @pytest.mark.parametrize(
        "spec",
        [
            ModelSpec("glmnet", {"lambda_selection": 0.05, "n_lambdas": 12}),
            ModelSpec("rf", {"n_trees": 8}),
            ModelSpec("ann", {"epochs": 3, "hidden": [6, 5, 4]}),
            ModelSpec("lr-mlep"),
            ModelSpec("lr-ml"),
        ],
    )
    def test_round_trip_preserves_scores(self, rng, spec):
        records = synthetic_records(50, 0.3, Location.Community, rng)
        trained = train_for_spec(spec, records, FEATURE_NAMES, seed=4)
        loaded = model_from_json(model_to_json(trained))
        probe = synthetic_records(10, 0.5, Location.Community, rng, prefix="probe")
        np.testing.assert_array_equal(
            predict_proba_matrix(trained, probe), predict_proba_matrix(loaded, probe)
        )
        assert loaded.family == trained.family
        assert loaded.feature_manifest == trained.feature_manifest

    def test_schema_enforced(self):
        with pytest.raises(ValueError, match="schema"):
            model_from_json({"schema": "something-else", "family": "rf"})


class TestVariableImportance:
    def build_labeled_matrix(self, rng, n=250):
        """Column 0 equals the label; column 1 is pure noise."""
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        X = rng.normal(size=(n, 14))
        X[:, 0] = y + rng.normal(0, 0.01, n)  # label leaked into feature 0
        return X, y

    def records_from(self, X, y, prefix="m"):
        records = []
        for i in range(len(y)):
            features = {name: float(X[i, j]) for j, name in enumerate(FEATURE_NAMES)}
            records.append(
                make_record(
                    f"{prefix}{i}",
                    label=Label.Positive if y[i] else Label.Negative,
                    **features,
                )
            )
        return records

    def test_label_feature_dominates_forest(self, rng):
        X, y = self.build_labeled_matrix(rng)
        records = self.records_from(X[:150], y[:150])
        trained = train_for_spec(ModelSpec("rf", {"n_trees": 40}), records, FEATURE_NAMES, seed=5)
        table = variable_importance(trained, X[150:], y[150:], seed=6)
        assert table[0][0] == FEATURE_NAMES[0]
        assert table[0][1] == 100.0
        by_name = dict(table)
        noise = [v for k, v in by_name.items() if k != FEATURE_NAMES[0]]
        assert max(noise) < 5.0

    def test_glmnet_importance_is_coefficient_magnitude(self, rng):
        X, y = self.build_labeled_matrix(rng)
        records = self.records_from(X[:150], y[:150])
        spec = ModelSpec("glmnet", {"n_lambdas": 30})
        trained = train_for_spec(spec, records, FEATURE_NAMES, seed=7)
        table = variable_importance(trained, X[150:], y[150:])
        assert table[0][0] == FEATURE_NAMES[0]
        assert table[0][1] == 100.0
        coefs = np.abs(trained.model.coefficients)
        by_name = dict(table)
        for j, name in enumerate(FEATURE_NAMES):
            assert by_name[name] == pytest.approx(100 * coefs[j] / coefs.max())
        # lasso zeros map to zero bars
        assert any(v == 0.0 for v in by_name.values())

    def test_unsupported_families(self, rng):
        records = synthetic_records(40, 0.4, Location.Community, rng)
        for family, hp in (("ann", {"epochs": 1}), ("lr-mlep", {})):
            trained = train_for_spec(ModelSpec(family, hp), records, FEATURE_NAMES, seed=8)
            X = records_matrix(records, FEATURE_NAMES)
            y = [1 if r.label is Label.Positive else 0 for r in records]
            with pytest.raises(UnsupportedModel):
                variable_importance(trained, X, y)

    def test_importance_non_negative(self, rng):
        records = synthetic_records(80, 0.3, Location.Community, rng)
        trained = train_for_spec(ModelSpec("rf", {"n_trees": 20}), records, FEATURE_NAMES, seed=9)
        probe = synthetic_records(40, 0.3, Location.Community, rng, prefix="e")
        X = records_matrix(probe, FEATURE_NAMES)
        y = [1 if r.label is Label.Positive else 0 for r in probe]
        table = variable_importance(trained, X, y)
        assert all(v >= 0 for _, v in table)
        assert len(table) == 14
