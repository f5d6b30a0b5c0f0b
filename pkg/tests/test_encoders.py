import numpy as np
import numpy.testing as npt
import pytest

from riskseq import encoders
from riskseq.data import Post, UserRecord
from riskseq.errors import ConfigError, DataFormatError, ValidationError


def make_user(texts, user_id="u0", label=0, start=1000):
    posts = [Post(t, start + 3600 * i) for i, t in enumerate(texts)]
    return UserRecord(user_id, posts, label)


class TestHashingEncode:
    def test_empty_text_zero_vector(self):
        npt.assert_array_equal(encoders.hashing_encode("", 16, 0), np.zeros(16))

    def test_punctuation_only_zero_vector(self):
        npt.assert_array_equal(encoders.hashing_encode("... !!", 16, 0), np.zeros(16))

    def test_deterministic(self):
        a = encoders.hashing_encode("the odds were long", 32, 5)
        b = encoders.hashing_encode("the odds were long", 32, 5)
        npt.assert_array_equal(a, b)

    def test_bag_of_words_order_invariance(self):
        a = encoders.hashing_encode("aaa bbb", 16, 1)
        b = encoders.hashing_encode("bbb aaa", 16, 1)
        npt.assert_array_equal(a, b)

    def test_case_insensitive(self):
        a = encoders.hashing_encode("Poker NIGHT", 16, 1)
        b = encoders.hashing_encode("poker night", 16, 1)
        npt.assert_array_equal(a, b)

    def test_unit_norm_or_zero(self):
        rng = np.random.RandomState(2)
        words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
        for _ in range(50):
            text = " ".join(rng.choice(words, size=rng.randint(1, 10)))
            vec = encoders.hashing_encode(text, 16, 3)
            norm = np.linalg.norm(vec)
            assert norm == pytest.approx(1.0, abs=1e-12) or norm == 0.0

    def test_seed_changes_embedding(self):
        a = encoders.hashing_encode("casino night", 64, 0)
        b = encoders.hashing_encode("casino night", 64, 1)
        assert not np.array_equal(a, b)

    def test_width_too_small(self):
        with pytest.raises(ValidationError):
            encoders.hashing_encode("hello", 4, 0)


class TestEmotionScores:
    def test_no_hits_uniform(self):
        lex = encoders.default_lexicon()
        npt.assert_allclose(encoders.emotion_scores("completely plain words", lex),
                            np.full(7, 1.0 / 7.0), atol=1e-15)

    def test_single_class_dominance(self):
        lex = encoders.default_lexicon()
        idx = encoders.EMOTION_NAMES.index("joy")
        scores = encoders.emotion_scores("happy happy joy", lex)
        assert int(np.argmax(scores)) == idx

    def test_self_concatenation_invariance(self):
        lex = encoders.default_lexicon()
        text = "sad and angry about the lost bet"
        once = encoders.emotion_scores(text, lex)
        twice = encoders.emotion_scores(text + " " + text, lex)
        npt.assert_allclose(once, twice, atol=1e-12)

    def test_sum_one_and_strictly_positive(self):
        lex = encoders.default_lexicon()
        rng = np.random.RandomState(4)
        pool = ["sad", "happy", "scared", "table", "casino", "wow", "gross", "mad"]
        for _ in range(50):
            text = " ".join(rng.choice(pool, size=rng.randint(0, 12)))
            scores = encoders.emotion_scores(text, lex)
            assert abs(scores.sum() - 1.0) <= 1e-9
            assert (scores > 0).all() and (scores < 1).all()

    def test_smoothing_values(self):
        lex = encoders.default_lexicon()
        idx = encoders.EMOTION_NAMES.index("anger")
        scores = encoders.emotion_scores("furious", lex)
        npt.assert_allclose(scores[idx], (1 + 1 / 7) / 2, atol=1e-12)
        others = np.delete(scores, idx)
        npt.assert_allclose(others, (1 / 7) / 2, atol=1e-12)


class TestEmotionLexicon:
    def test_invalid_index_rejected(self):
        with pytest.raises(ValidationError):
            encoders.EmotionLexicon({"word": 7})

    def test_needs_seven_unique_names(self):
        with pytest.raises(ValidationError):
            encoders.EmotionLexicon({}, names=("a", "b"))

    def test_default_covers_all_classes(self):
        lex = encoders.default_lexicon()
        assert set(lex.token_to_index.values()) == set(range(7))
        assert lex.names == encoders.EMOTION_NAMES


def random_store(rng, width=12, has_emotion=True, n=20):
    store = encoders.EmbeddingStore(width, has_emotion)
    for k in range(n):
        user = f"user{rng.randint(0, 6)}"
        idx = k
        emo = None
        if has_emotion:
            raw = rng.uniform(0.01, 1.0, size=7)
            emo = raw / raw.sum()
        store.add(user, idx, rng.randn(width), emo)
    return store


class TestEmbeddingStore:
    def test_round_trip_with_emotion(self, tmp_path):
        rng = np.random.RandomState(7)
        for trial in range(5):
            store = random_store(rng, width=8 + trial, has_emotion=True)
            path = tmp_path / f"store{trial}.tsv"
            encoders.write_embedding_store(store, path)
            assert encoders.load_embedding_store(path) == store

    def test_round_trip_text_only(self, tmp_path):
        rng = np.random.RandomState(8)
        store = random_store(rng, width=9, has_emotion=False)
        path = tmp_path / "store.tsv"
        encoders.write_embedding_store(store, path)
        assert encoders.load_embedding_store(path) == store

    def test_empty_file_with_header(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("#width 64\n", encoding="utf-8")
        store = encoders.load_embedding_store(path)
        assert store.width == 64 and len(store) == 0

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("u1\t0\t1.0,2.0\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 1"):
            encoders.load_embedding_store(path)

    def test_wrong_width_names_key(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("#width 3\nu1\t0\t1.0,2.0\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match=r"line 2.*u1"):
            encoders.load_embedding_store(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.tsv"
        path.write_text("#width 2\nu1\t0\t1.0,2.0\nu1\t0\t3.0,4.0\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 3.*duplicate"):
            encoders.load_embedding_store(path)

    def test_unparseable_float(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("#width 2\nu1\t0\t1.0,zzz\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 2"):
            encoders.load_embedding_store(path)

    def test_bad_post_index(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("#width 2\nu1\tx\t1.0,2.0\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 2"):
            encoders.load_embedding_store(path)

    def test_mixed_emotion_presence(self, tmp_path):
        path = tmp_path / "mixed.tsv"
        path.write_text(
            "#width 2\n"
            "u1\t0\t1.0,2.0\t0.1,0.1,0.1,0.1,0.1,0.1,0.4\n"
            "u1\t1\t3.0,4.0\n",
            encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 3.*all-present or all-absent"):
            encoders.load_embedding_store(path)

    def test_missing_lookup_names_key(self):
        store = encoders.EmbeddingStore(4, has_emotion=False)
        with pytest.raises(ValidationError, match="'ghost', 3"):
            store.get_text("ghost", 3)

    def test_float_values_bit_exact_round_trip(self, tmp_path):
        store = encoders.EmbeddingStore(3, has_emotion=False)
        values = np.array([0.1, 1.0 / 3.0, 2.0 ** -40])
        store.add("u", 0, values)
        path = tmp_path / "s.tsv"
        encoders.write_embedding_store(store, path)
        loaded = encoders.load_embedding_store(path)
        npt.assert_array_equal(loaded.get_text("u", 0), values)


class TestEncodeUser:
    def test_single_post_shapes(self):
        user = make_user(["just one post"])
        text, emo = encoders.encode_user(
            user, encoders.HashingTextEncoder(16, 0), encoders.LexiconEmotionEncoder())
        assert text.shape == (1, 16) and emo.shape == (1, 7)

    def test_permuting_posts_permutes_rows(self):
        lex = encoders.LexiconEmotionEncoder()
        enc = encoders.HashingTextEncoder(16, 0)
        a = make_user(["first post here", "second sad post"])
        b = make_user(["second sad post", "first post here"])
        ta, _ = encoders.encode_user(a, enc, lex)
        tb, _ = encoders.encode_user(b, enc, lex)
        npt.assert_array_equal(ta[0], tb[1])
        npt.assert_array_equal(ta[1], tb[0])

    def test_rows_unit_norm_or_zero(self):
        user = make_user(["alpha beta", "", "gamma delta alpha"])
        text, _ = encoders.encode_user(
            user, encoders.HashingTextEncoder(64, 1), encoders.LexiconEmotionEncoder())
        assert text.shape == (3, 64)
        norms = np.linalg.norm(text, axis=1)
        for n in norms:
            assert n == pytest.approx(1.0, abs=1e-12) or n == 0.0

    def test_streams_are_independent(self):
        user = make_user(["sad lost bet", "happy day"])
        enc = encoders.HashingTextEncoder(16, 0)
        lex = encoders.LexiconEmotionEncoder()
        _, emo = encoders.encode_user(user, enc, lex)
        direct = np.array([encoders.emotion_scores(p.text, lex.lexicon) for p in user.posts])
        npt.assert_array_equal(emo, direct)


class TestConcatEncode:
    def test_single_post_equals_post_encoding(self):
        user = make_user(["lonely post"])
        enc = encoders.HashingTextEncoder(16, 0)
        npt.assert_array_equal(encoders.concat_encode(user, enc),
                               enc.encode_text("lonely post"))

    def test_equals_joined_text(self):
        user = make_user(["one two", "three four"])
        enc = encoders.HashingTextEncoder(16, 0)
        npt.assert_array_equal(encoders.concat_encode(user, enc),
                               enc.encode_text("one two three four"))

    def test_same_token_multiset_same_vector(self):
        enc = encoders.HashingTextEncoder(32, 0)
        a = make_user(["red blue", "green"])
        b = make_user(["green red", "blue"])
        npt.assert_array_equal(encoders.concat_encode(a, enc),
                               encoders.concat_encode(b, enc))

    def test_store_encoder_rejected(self):
        store = encoders.EmbeddingStore(8, has_emotion=False)
        store.add("u0", 0, np.ones(8))
        user = make_user(["text"])
        with pytest.raises(ConfigError):
            encoders.concat_encode(user, encoders.StoreTextEncoder(store))


class TestStoreEncoders:
    def test_text_replay(self):
        store = encoders.EmbeddingStore(4, has_emotion=False)
        store.add("u0", 0, [1.0, 2.0, 3.0, 4.0])
        enc = encoders.StoreTextEncoder(store)
        npt.assert_array_equal(enc.encode("u0", 0, "ignored"), [1, 2, 3, 4])

    def test_missing_vector_errors(self):
        store = encoders.EmbeddingStore(4, has_emotion=False)
        enc = encoders.StoreTextEncoder(store)
        with pytest.raises(ValidationError):
            enc.encode("u9", 2, "whatever")

    def test_emotion_encoder_requires_emotion(self):
        store = encoders.EmbeddingStore(4, has_emotion=False)
        with pytest.raises(ConfigError):
            encoders.StoreEmotionEncoder(store)
