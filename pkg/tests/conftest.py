import numpy as np
import pytest

from binscan.corpusgen import generate_default_corpus
from binscan.nn import ModelSpec


class ScriptedModel:
    """Stands in for a network: each plane's first pixel encodes the class it predicts."""

    def __init__(self, classes: int):
        self.spec = ModelSpec(classes=classes)

    @staticmethod
    def payload(pred: int) -> bytes:
        return bytes([10 + 50 * pred]) * 256

    def predict_proba(self, planes):
        pred = np.rint((planes[:, 0, 0] * 255 - 10) / 50).astype(int)
        probs = np.full((len(planes), self.spec.classes), 0.01)
        probs[np.arange(len(planes)), pred] = 1.0
        return probs / probs.sum(axis=1, keepdims=True)


@pytest.fixture
def scripted_model():
    return ScriptedModel


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_default_corpus(root, 12, seed=21)
    return root
