import numpy as np
import pytest

from promptsteal import dataset as ds
from promptsteal import stealer as st
from promptsteal import synth
from promptsteal.prompts import build_vocabulary, parse_prompt


@pytest.fixture(scope="session")
def small_setup():
    """Small planted-glyph world shared by the unit tests: 20 labels, 32x32
    images, and a classifier trained well enough to recover planted modifiers."""
    modifiers, taxonomy = synth.synthetic_label_space(per_category=4)
    artists = [m for m in modifiers if m.startswith("painter")]
    records = synth.make_planted_records(400, modifiers, seed=7, size=(32, 32))
    split = ds.dedupe_and_split(records, 0.8, seed=1)
    vocab = build_vocabulary([parse_prompt(r.prompt) for r in split.train], 0, taxonomy)
    cfg = st.StealerConfig(epochs=30, train_seed=0, input_size=32)
    clf = st.train_classifier(split, vocab, cfg)
    return {
        "modifiers": modifiers,
        "artists": artists,
        "taxonomy": taxonomy,
        "records": records,
        "split": split,
        "vocab": vocab,
        "cfg": cfg,
        "clf": clf,
    }


@pytest.fixture()
def planted_image():
    def make(keys, seed=0, size=(32, 32), subject="a scene"):
        prompt = ", ".join([subject] + list(keys))
        return synth.make_planted_image(keys, seed=seed, size=size, prompt=prompt, subject=subject)

    return make


class FakeClassifier:
    """Duck-typed classifier with scripted posteriors, for threshold-rule tests."""

    def __init__(self, labels, rows):
        self.labels = tuple(labels)
        self.rows = np.asarray(rows, dtype=np.float64)
        self.forward_calls_ = 0
        self._cursor = 0

    def predict_proba(self, X):
        self.forward_calls_ += 1
        row = self.rows[min(self._cursor, len(self.rows) - 1)]
        self._cursor += 1
        return np.tile(row, (len(X), 1))


@pytest.fixture()
def fake_classifier():
    return FakeClassifier
