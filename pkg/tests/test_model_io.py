import json

import numpy as np
import pytest

from retrace import ActivityClass, load_model, save_model, train_knn, train_svm
from retrace.entropy import FeatureVector
from retrace.gmm import fit_standardized_gmm
from retrace.model_io import SCHEMA_VERSION

CLASSES = list(ActivityClass)


@pytest.fixture()
def training_data():
    rng = np.random.default_rng(0)
    centers = [(0, 0), (6, 0), (0, 6), (6, 6), (3, 12)]
    vectors, labels = [], []
    i = 0
    for cls, center in zip(CLASSES, centers):
        for x, y in rng.normal(loc=center, scale=0.5, size=(10, 2)):
            vectors.append(FeatureVector(f"t{i}", float(x), float(y), 10, 5))
            labels.append(cls)
            i += 1
    return vectors, labels


def test_knn_roundtrip_preserves_predictions(training_data, tmp_path):
    vectors, labels = training_data
    model = train_knn(vectors, labels)
    path = tmp_path / "knn.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.predict_labels(vectors) == model.predict_labels(vectors)
    assert np.array_equal(loaded.predict_scores(vectors),
                          model.predict_scores(vectors))


def test_svm_roundtrip_preserves_predictions(training_data, tmp_path):
    vectors, labels = training_data
    model = train_svm(vectors, labels)
    path = tmp_path / "svm.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.predict_labels(vectors) == model.predict_labels(vectors)
    assert np.allclose(loaded.predict_scores(vectors),
                       model.predict_scores(vectors))


def test_gmm_roundtrip_preserves_assignments(training_data, tmp_path):
    vectors, _ = training_data
    model = fit_standardized_gmm(vectors, k=5, seed=3)
    path = tmp_path / "gmm.json"
    save_model(model, path)
    loaded = load_model(path)
    ids_a, resp_a = model.assign(vectors)
    ids_b, resp_b = loaded.assign(vectors)
    assert np.array_equal(ids_a, ids_b)
    assert np.allclose(resp_a, resp_b, atol=1e-12)


def test_document_is_self_describing(training_data, tmp_path):
    vectors, labels = training_data
    path = tmp_path / "m.json"
    save_model(train_knn(vectors, labels), path)
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["model_type"] == "knn"
    assert set(doc["standardizer"]) == {"means", "stds"}
    assert doc["hyperparameters"]["k"] == 3


def test_version_mismatch_rejected(training_data, tmp_path):
    vectors, labels = training_data
    path = tmp_path / "m.json"
    save_model(train_knn(vectors, labels), path)
    doc = json.loads(path.read_text())
    doc["schema_version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="unsupported model schema version"):
        load_model(path)


def test_unknown_type_rejected(training_data, tmp_path):
    vectors, labels = training_data
    path = tmp_path / "m.json"
    save_model(train_knn(vectors, labels), path)
    doc = json.loads(path.read_text())
    doc["model_type"] = "forest"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="unknown model type"):
        load_model(path)


def test_serialization_deterministic(training_data, tmp_path):
    vectors, labels = training_data
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_model(train_svm(vectors, labels), a)
    save_model(train_svm(vectors, labels), b)
    assert a.read_bytes() == b.read_bytes()
