import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from promptsteal import synth
from promptsteal.embedding import (
    EmbeddingError,
    MockEmbeddingBackend,
    SerializedBackend,
    cosine,
    embed_image,
    embed_text,
    embed_texts,
    tokenize,
)
from promptsteal.images import to_png_bytes


@pytest.fixture()
def backend():
    return MockEmbeddingBackend(seed=0)


class TestCosine:
    def test_identical_is_one(self):
        v = np.array([0.3, -0.2, 0.9])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_is_zero(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_computed_value(self):
        # 1/sqrt(2) by hand
        assert cosine(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(
            0.70711, abs=1e-5
        )

    def test_dim_mismatch_errors(self):
        with pytest.raises(ValueError):
            cosine(np.ones(3), np.ones(4))

    def test_zero_vector_errors(self):
        with pytest.raises(EmbeddingError):
            cosine(np.zeros(3), np.ones(3))

    @given(
        hs.lists(hs.floats(-1e3, 1e3), min_size=4, max_size=4),
        hs.lists(hs.floats(-1e3, 1e3), min_size=4, max_size=4),
    )
    @settings(max_examples=500)
    def test_bounds_and_symmetry(self, a, b):
        a, b = np.array(a), np.array(b)
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        c = cosine(a, b)
        assert abs(c) <= 1 + 1e-9
        assert c == pytest.approx(cosine(b, a), abs=1e-12)

    def test_fuzz_10k_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            a = rng.standard_normal(8)
            b = rng.standard_normal(8)
            c = cosine(a, b)
            assert abs(c) <= 1 + 1e-9
            assert cosine(a, a) == pytest.approx(1.0, abs=1e-9)
            assert c == pytest.approx(cosine(b, a), abs=1e-12)


class TestMockText:
    def test_deterministic(self, backend):
        a = embed_text(backend, "a cat, 8k")
        b = embed_text(backend, "a cat, 8k")
        assert np.array_equal(a, b)

    def test_unit_norm(self, backend):
        for text in ["x", "a cat, 8k, artstation", "one two three"]:
            assert np.linalg.norm(embed_text(backend, text)) == pytest.approx(1.0, abs=1e-6)

    def test_order_invariant_bag(self, backend):
        assert np.array_equal(embed_text(backend, "a b"), embed_text(backend, "b a"))

    def test_commas_split_tokens(self, backend):
        assert np.array_equal(embed_text(backend, "a,b"), embed_text(backend, "a b"))

    def test_empty_text_errors(self, backend):
        with pytest.raises(EmbeddingError):
            embed_text(backend, "")
        with pytest.raises(EmbeddingError):
            embed_text(backend, "   ")

    def test_restart_determinism(self):
        # A fresh backend instance (fresh process stand-in) embeds identically.
        a = embed_text(MockEmbeddingBackend(seed=3), "wolf portrait, 8k")
        b = embed_text(MockEmbeddingBackend(seed=3), "wolf portrait, 8k")
        assert np.array_equal(a, b)

    def test_seed_changes_vectors(self):
        a = embed_text(MockEmbeddingBackend(seed=0), "wolf")
        b = embed_text(MockEmbeddingBackend(seed=1), "wolf")
        assert not np.array_equal(a, b)

    def test_token_disjoint_is_exactly_zero(self, backend):
        # Fixed fixture; verify the bucket assumption before freezing 0.0.
        t1, t2 = "alpha beta gamma", "delta epsilon zeta"
        buckets1 = {backend._bucket(t) for t in tokenize(t1)}
        buckets2 = {backend._bucket(t) for t in tokenize(t2)}
        assert not buckets1 & buckets2, "fixture tokens must not collide"
        assert cosine(embed_text(backend, t1), embed_text(backend, t2)) == 0.0

    def test_overlap_similarity_is_enumerable(self, backend):
        # cos == |shared| / sqrt(|A| * |B|) for collision-free single-count bags
        a = embed_text(backend, "alpha beta gamma delta")
        b = embed_text(backend, "alpha beta zeta eta")
        assert cosine(a, b) == pytest.approx(2 / 4, abs=1e-12)


class TestMockImage:
    def test_planted_image_embeds_as_prompt(self, backend, planted_image):
        img = planted_image(["8k", "artstation"], subject="a scene")
        v_img = embed_image(backend, img)
        v_txt = embed_text(backend, "a scene, 8k, artstation")
        assert np.allclose(v_img, v_txt)

    def test_metadata_survives_png_roundtrip(self, backend, planted_image):
        img = planted_image(["8k"], subject="a scene")
        v1 = embed_image(backend, img)
        v2 = embed_image(backend, to_png_bytes(img))
        assert np.array_equal(v1, v2)

    def test_same_image_twice(self, backend, planted_image):
        img = planted_image(["smooth"])
        assert np.array_equal(embed_image(backend, img), embed_image(backend, img))

    def test_unit_norm(self, backend, planted_image):
        assert np.linalg.norm(embed_image(backend, planted_image(["x"]))) == pytest.approx(
            1.0, abs=1e-6
        )

    def test_no_metadata_still_deterministic(self, backend):
        img = synth.make_planted_image(["q"], seed=1, size=(8, 8))  # no prompt metadata
        assert np.array_equal(embed_image(backend, img), embed_image(backend, img))

    def test_planted_modifier_wins_candidate_set(self, backend):
        # Brute force over a candidate set using the mock's own definition:
        # the planted modifier text must rank first.
        candidates = ["glowfish", "darkmoth", "starfern", "mudlark"]
        img = synth.make_planted_image(
            ["glowfish"], seed=0, size=(16, 16), prompt="glowfish"
        )
        v_img = embed_image(backend, img)
        sims = {c: cosine(v_img, embed_text(backend, c)) for c in candidates}
        assert max(sims, key=sims.get) == "glowfish"
        assert sims["glowfish"] == pytest.approx(1.0, abs=1e-12)


class TestInstrumentation:
    def test_counts_and_reset(self, backend, planted_image):
        backend.reset_counts()
        embed_text(backend, "a")
        embed_texts(backend, ["b", "c"])
        embed_image(backend, planted_image(["x"]))
        assert backend.text_calls == 3
        assert backend.image_calls == 1
        backend.reset_counts()
        assert backend.text_calls == backend.image_calls == 0


class TestSerializedBackend:
    def test_wraps_and_matches(self, planted_image):
        inner = MockEmbeddingBackend(seed=0)
        wrapped = SerializedBackend(MockEmbeddingBackend(seed=0))
        assert wrapped.thread_safe
        assert np.array_equal(
            embed_text(wrapped, "a cat"), embed_text(inner, "a cat")
        )
        img = planted_image(["8k"])
        assert np.array_equal(embed_image(wrapped, img), embed_image(inner, img))
