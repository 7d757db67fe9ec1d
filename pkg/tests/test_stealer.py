from collections import Counter

import numpy as np
import pytest

from promptsteal import dataset as ds
from promptsteal import synth
from promptsteal.prompts import build_vocabulary, parse_prompt
from promptsteal.stealer import (
    Attack,
    CaptionError,
    MockCaptionModel,
    ModifierClassifier,
    StealerConfig,
    StealerError,
    StolenPrompt,
    load_classifier,
    multi_hot,
    predict_modifiers,
    sanitize_subject,
    save_classifier,
    steal_prompt,
    train_classifier,
)


class TestPredictModifiers:
    def test_strict_threshold(self, fake_classifier, planted_image):
        clf = fake_classifier(["m1", "m2", "m3", "m4"], [[0.7, 0.61, 0.60, 0.2]])
        picked = predict_modifiers(clf, planted_image(["x"]), 0.6)
        assert {m for m, _ in picked} == {"m1", "m2"}

    def test_tau_one_empty(self, fake_classifier, planted_image):
        clf = fake_classifier(["m1", "m2"], [[1.0, 0.99]])
        assert predict_modifiers(clf, planted_image(["x"]), 1.0) == ()

    def test_tau_zero_keeps_positive(self, fake_classifier, planted_image):
        clf = fake_classifier(["m1", "m2", "m3"], [[0.5, 0.0, 0.001]])
        picked = predict_modifiers(clf, planted_image(["x"]), 0.0)
        assert {m for m, _ in picked} == {"m1", "m3"}

    def test_posteriors_returned(self, fake_classifier, planted_image):
        clf = fake_classifier(["m1"], [[0.9]])
        assert predict_modifiers(clf, planted_image(["x"]), 0.5) == (("m1", 0.9),)

    def test_tau_out_of_range(self, fake_classifier, planted_image):
        clf = fake_classifier(["m1"], [[0.9]])
        with pytest.raises(ValueError):
            predict_modifiers(clf, planted_image(["x"]), 1.5)

    def test_antitone_in_threshold(self, small_setup):
        clf = small_setup["clf"]
        img = small_setup["split"].test[0].load_image()
        prev = None
        for tau in [0.0, 0.2, 0.4, 0.6, 0.8, 0.95]:
            picked = {m for m, _ in predict_modifiers(clf, img, tau)}
            if prev is not None:
                assert picked <= prev
            prev = picked

    def test_posteriors_in_unit_interval(self, small_setup):
        clf = small_setup["clf"]
        probs = clf.predict_proba([small_setup["split"].test[0].load_image()])
        assert probs.min() >= 0.0 and probs.max() <= 1.0


class TestStealPrompt:
    def test_composition(self, fake_classifier, planted_image):
        caption = MockCaptionModel(fixed="a cat")
        clf = fake_classifier(["8k"], [[0.9]])
        stolen = steal_prompt(caption, clf, planted_image(["8k"]), StealerConfig())
        assert stolen.compose() == "a cat, 8k"
        assert stolen.attack is Attack.STEALER

    def test_empty_prediction_is_caption_alone(self, fake_classifier, planted_image):
        caption = MockCaptionModel(fixed="a dog")
        clf = fake_classifier(["8k"], [[0.1]])
        stolen = steal_prompt(caption, clf, planted_image(["x"]), StealerConfig())
        assert stolen.compose() == "a dog"
        assert stolen.modifiers == ()

    def test_elapsed_recorded(self, fake_classifier, planted_image):
        stolen = steal_prompt(
            MockCaptionModel(fixed="s"), fake_classifier(["a"], [[0.9]]),
            planted_image(["a"]), StealerConfig(),
        )
        assert stolen.elapsed_seconds > 0

    def test_exactly_one_caption_and_one_forward(self, fake_classifier, planted_image):
        caption = MockCaptionModel(fixed="a cat")
        clf = fake_classifier(["8k"], [[0.9]])
        steal_prompt(caption, clf, planted_image(["8k"]), StealerConfig())
        assert caption.calls == 1
        assert clf.forward_calls_ == 1

    def test_comma_in_caption_sanitized(self, fake_classifier, planted_image):
        caption = MockCaptionModel(fixed="a cat, sitting")
        clf = fake_classifier(["8k"], [[0.9]])
        stolen = steal_prompt(caption, clf, planted_image(["x"]), StealerConfig())
        assert stolen.subject == "a cat sitting"
        assert stolen.to_parsed().subject == "a cat sitting"

    def test_planted_modifiers_recovered(self, small_setup):
        clf = small_setup["clf"]
        mods = ["painter00", "flavor01"]
        img = synth.make_planted_image(
            mods, seed=123, size=(32, 32), prompt="a scene, painter00, flavor01",
            subject="a scene",
        )
        stolen = steal_prompt(MockCaptionModel(), clf, img, small_setup["cfg"])
        assert stolen.subject == "a scene"
        assert set(mods) <= set(stolen.modifier_names)


class TestSanitizeSubject:
    def test_empty_caption_errors(self):
        with pytest.raises(CaptionError):
            sanitize_subject("   ")

    def test_collapse(self):
        assert sanitize_subject(" a  cat ") == "a cat"


class TestTraining:
    def test_empty_vocab_errors(self, small_setup):
        vocab = small_setup["vocab"]
        empty = type(vocab)(entries={}, min_count=0)
        with pytest.raises(StealerError):
            train_classifier(small_setup["split"], empty, small_setup["cfg"])

    def test_empty_train_errors(self, small_setup):
        split = ds.DatasetSplit(train=[], test=small_setup["split"].test, seed=0)
        with pytest.raises(StealerError):
            train_classifier(split, small_setup["vocab"], small_setup["cfg"])

    def test_same_seed_identical_posteriors(self, small_setup):
        # Desk-sized retrain twice; the small_setup classifier is the third copy.
        cfg = StealerConfig(epochs=2, train_seed=9, input_size=32)
        split = small_setup["split"]
        vocab = small_setup["vocab"]
        probe = split.test[0].load_image()
        a = train_classifier(split, vocab, cfg).predict_proba([probe])
        b = train_classifier(split, vocab, cfg).predict_proba([probe])
        assert np.abs(a - b).max() <= 1e-6

    def test_unfitted_predict_errors(self):
        clf = ModifierClassifier(labels=("a",))
        with pytest.raises(StealerError):
            clf.predict_proba([np.zeros((8, 8, 3), dtype=np.float32)])

    def test_sklearn_get_params(self, small_setup):
        params = small_setup["clf"].get_params()
        assert {"labels", "input_size", "epochs", "batch_size", "learning_rate", "seed"} <= set(params)

    def test_predict_sets(self, small_setup):
        clf = small_setup["clf"]
        rec = small_setup["split"].test[0]
        sets = clf.predict([rec.load_image()], threshold=0.6)
        assert isinstance(sets[0], set)


class TestLabelSpaceAblation:
    def test_vocab_sizes_match_brute_force_and_classifiers_build(self, small_setup):
        split = small_setup["split"]
        taxonomy = small_setup["taxonomy"]
        prompts = [parse_prompt(r.prompt) for r in split.train]
        brute = Counter()
        for p in prompts:
            brute.update(p.modifiers)
        for min_count in (0, 2, 5):
            vocab = build_vocabulary(prompts, min_count, taxonomy)
            expected = {m for m, c in brute.items() if c > min_count}
            assert set(vocab.labels) == expected
            cfg = StealerConfig(epochs=1, train_seed=0, input_size=32)
            clf = train_classifier(split, vocab, cfg)
            assert len(clf.labels) == len(vocab)


class TestCheckpoint:
    def test_roundtrip(self, small_setup, tmp_path):
        clf, vocab, cfg = small_setup["clf"], small_setup["vocab"], small_setup["cfg"]
        path = tmp_path / "clf.pt"
        save_classifier(clf, path, cfg)
        loaded, sidecar = load_classifier(path, vocab)
        assert sidecar["threshold"] == cfg.threshold
        assert sidecar["min_count"] == cfg.min_count
        assert sidecar["train_seed"] == cfg.train_seed
        probe = small_setup["split"].test[0].load_image()
        assert np.allclose(clf.predict_proba([probe]), loaded.predict_proba([probe]))

    def test_label_space_hash_verified(self, small_setup, tmp_path):
        clf, cfg = small_setup["clf"], small_setup["cfg"]
        path = tmp_path / "clf.pt"
        save_classifier(clf, path, cfg)
        other_prompts = [parse_prompt("s, zzz"), parse_prompt("t, zzz")]
        other_vocab = build_vocabulary(other_prompts, 1, small_setup["taxonomy"])
        with pytest.raises(StealerError):
            load_classifier(path, other_vocab)


class TestStolenPrompt:
    def test_to_parsed_dedupes(self):
        stolen = StolenPrompt("s", (("8k", 0.9), ("8k", 0.8)), Attack.STEALER, 0.1)
        assert stolen.to_parsed().modifiers == ("8k",)

    def test_multi_hot_respects_label_order(self, small_setup):
        vocab = small_setup["vocab"]
        v = multi_hot([vocab.labels[2], vocab.labels[0]], vocab)
        assert v[0] == 1.0 and v[2] == 1.0 and v.sum() == 2.0

    def test_multi_hot_ignores_out_of_vocab(self, small_setup):
        v = multi_hot(["definitely-not-a-label"], small_setup["vocab"])
        assert v.sum() == 0.0
