import numpy as np
import numpy.testing as npt
import pytest

from riskseq import pipeline
from riskseq.data import GeneratorSpec, Post, UserRecord, generate_synthetic
from riskseq.encoders import HashingTextEncoder, LexiconEmotionEncoder
from riskseq.errors import ConfigError, ValidationError
from riskseq.model import ModelConfig, init_params
from riskseq.training import TrainConfig

D_TEXT = 16


def balanced_corpus(n=40, seed=0, posts_min=2, posts_max=6):
    spec = GeneratorSpec(n_users=n, n_positive=n // 2,
                         posts_min=posts_min, posts_max=posts_max)
    return generate_synthetic(spec, seed)


def encoders():
    return HashingTextEncoder(d_text=D_TEXT, seed=0), LexiconEmotionEncoder()


def make_user(n_posts=4, text="placed a bet again", label=1, gap=43200):
    posts = [Post(text=f"{text} {i}", timestamp=1_600_000_000 + gap * i)
             for i in range(n_posts)]
    return UserRecord(user_id="u_test", posts=posts, label=label)


class TestEncodeForModel:
    def test_sequential_shapes(self):
        text_enc, emo_enc = encoders()
        config = ModelConfig.for_architecture("LSTMTd", d_text=D_TEXT)
        user = make_user(n_posts=5)
        text, emotion, decay, label = pipeline.encode_for_model(
            user, config, text_enc, emo_enc)
        assert text.shape == (5, D_TEXT)
        assert emotion.shape == (5, 7)
        assert decay.shape == (5,)
        assert decay[0] == 1.0
        assert label == 1

    def test_baseline_single_row(self):
        text_enc, emo_enc = encoders()
        config = ModelConfig.for_architecture("TextBaseline", d_text=D_TEXT)
        text, emotion, decay, label = pipeline.encode_for_model(
            make_user(n_posts=5, label=0), config, text_enc, emo_enc)
        assert text.shape == (1, D_TEXT)
        assert emotion.shape == (1, 7)
        npt.assert_array_equal(decay, [1.0])
        assert label == 0

    def test_max_posts_keeps_recent_tail(self):
        text_enc, emo_enc = encoders()
        config = ModelConfig.for_architecture("LSTM", d_text=D_TEXT)
        user = make_user(n_posts=6)
        full = pipeline.encode_for_model(user, config, text_enc, emo_enc)
        cut = pipeline.encode_for_model(user, config, text_enc, emo_enc,
                                        max_posts=3)
        assert cut[0].shape == (3, D_TEXT)
        npt.assert_array_equal(cut[0], full[0][3:])
        assert cut[2][0] == 1.0


class TestPredictAndEvaluate:
    def setup_method(self):
        self.text_enc, self.emo_enc = encoders()
        self.config = ModelConfig.for_architecture(
            "LSTM", d_text=D_TEXT, hidden_size=6, init_seed=1)
        self.params = init_params(self.config)
        corpus = balanced_corpus(n=20)
        self.encoded = pipeline.encode_users(
            list(corpus), self.config, self.text_enc, self.emo_enc)

    def test_predict_shapes_and_consistency(self):
        predicted, scores, labels = pipeline.predict(
            self.config, self.params, self.encoded, batch_size=6)
        assert predicted.shape == scores.shape == labels.shape == (20,)
        assert np.all((scores >= 0) & (scores <= 1))
        npt.assert_array_equal(predicted, (scores > 0.5).astype(np.int64))

    def test_evaluate_model_fills_ranking_metrics(self):
        report = pipeline.evaluate_model(self.config, self.params,
                                         self.encoded, seed=7)
        assert report.auroc is not None
        assert report.auprc is not None
        assert 0.0 <= report.auroc <= 1.0
        assert 0.0 <= report.auprc <= 1.0
        assert report.seed == 7

    def test_empty_users_rejected(self):
        with pytest.raises(ValidationError, match="at least one"):
            pipeline.predict(self.config, self.params, [])


class TestPrepareSplits:
    def test_balanced_corpus_split_sizes(self):
        corpus = balanced_corpus(n=40)
        train_c, val_c, test_c = pipeline.prepare_splits(
            corpus, (0.6, 0.2, 0.2), seed=0, use_downsample=False)
        assert (len(train_c), len(val_c), len(test_c)) == (24, 8, 8)

    def test_downsample_balances_before_split(self):
        spec = GeneratorSpec(n_users=40, n_positive=8, posts_min=2, posts_max=5)
        corpus = generate_synthetic(spec, 3)
        train_c, val_c, test_c = pipeline.prepare_splits(
            corpus, (0.5, 0.25, 0.25), seed=0, use_downsample=True)
        total = len(train_c) + len(val_c) + len(test_c)
        assert total == 16
        positives = sum(u.label for c in (train_c, val_c, test_c) for u in c)
        assert positives == 8

    def test_same_seed_reproduces_split(self):
        corpus = balanced_corpus(n=30)
        a = pipeline.prepare_splits(corpus, (0.6, 0.2, 0.2), seed=5,
                                    use_downsample=False)
        b = pipeline.prepare_splits(corpus, (0.6, 0.2, 0.2), seed=5,
                                    use_downsample=False)
        for split_a, split_b in zip(a, b):
            assert [u.user_id for u in split_a] == [u.user_id for u in split_b]


class TestRunExperiment:
    def run(self, seed=0, architecture="LSTM", **kwargs):
        text_enc, emo_enc = encoders()
        return pipeline.run_experiment(
            balanced_corpus(n=40), architecture, seed,
            text_encoder=text_enc, emotion_encoder=emo_enc,
            use_downsample=False, hidden_size=6,
            train_config=TrainConfig(epochs=2, batch_size=8, initial_lr=0.01),
            **kwargs)

    def test_result_fields(self):
        result = self.run(seed=4)
        assert result.seed == 4
        assert result.report.seed == 4
        assert result.history.n_epochs == 2
        assert result.model_config.architecture == "LSTM"
        assert result.model_config.init_seed == 4

    def test_same_seed_is_deterministic(self):
        a = self.run(seed=2)
        b = self.run(seed=2)
        assert a.report == b.report
        for name in a.params.names():
            assert a.params[name].tobytes() == b.params[name].tobytes()

    def test_eval_split_selector(self):
        result = self.run(seed=1, eval_split="train")
        assert 0.0 <= result.report.f1 <= 1.0
        with pytest.raises(ConfigError, match="split"):
            self.run(seed=1, eval_split="holdout")


class TestMultiSeedRun:
    def test_aggregates_two_seeds(self):
        text_enc, emo_enc = encoders()
        agg = pipeline.multi_seed_run(
            balanced_corpus(n=30), "LSTM", [0, 1],
            text_encoder=text_enc, emotion_encoder=emo_enc,
            use_downsample=False, hidden_size=6,
            train_config=TrainConfig(epochs=1, batch_size=8, initial_lr=0.01))
        assert len(agg.reports) == 2
        assert [r.seed for r in agg.reports] == [0, 1]
        assert "f1" in agg.mean and "f1" in agg.std

    def test_requires_two_distinct_seeds(self):
        text_enc, emo_enc = encoders()
        with pytest.raises(ValidationError, match="at least 2"):
            pipeline.multi_seed_run(balanced_corpus(n=20), "LSTM", [0],
                                    text_encoder=text_enc,
                                    emotion_encoder=emo_enc)
        with pytest.raises(ValidationError, match="distinct"):
            pipeline.multi_seed_run(balanced_corpus(n=20), "LSTM", [1, 1],
                                    text_encoder=text_enc,
                                    emotion_encoder=emo_enc)

    def test_failure_names_the_seed(self):
        # 4 users cannot produce a non-empty test split, so every run fails
        text_enc, emo_enc = encoders()
        with pytest.raises(ValidationError, match="seed 0"):
            pipeline.multi_seed_run(balanced_corpus(n=4), "LSTM", [0, 1],
                                    text_encoder=text_enc,
                                    emotion_encoder=emo_enc,
                                    use_downsample=False)


class TestExcerpt:
    def test_short_text_unchanged(self):
        assert pipeline.excerpt("hello") == "hello"

    def test_exact_limit_unchanged(self):
        text = "x" * 200
        assert pipeline.excerpt(text) == text

    def test_long_text_cut_with_marker_inside_limit(self):
        cut = pipeline.excerpt("y" * 201)
        assert len(cut) == 200
        assert cut.endswith("...")
        assert cut[:197] == "y" * 197


class TestAttentionReport:
    def setup_method(self):
        self.text_enc, self.emo_enc = encoders()
        self.config = ModelConfig.for_architecture(
            "LSTMTdA", d_text=D_TEXT, hidden_size=6, init_seed=2)
        self.params = init_params(self.config)

    def report(self, users, **kwargs):
        return pipeline.attention_report(self.config, self.params, users,
                                         self.text_enc, self.emo_enc,
                                         **kwargs)

    def test_rows_sorted_and_normalized(self):
        users = [make_user(n_posts=5), make_user(n_posts=3, label=0)]
        rows = self.report(users)
        assert len(rows) == 2
        for user, row in zip(users, rows):
            assert row["user_id"] == user.user_id
            assert row["label"] == user.label
            assert row["n_posts"] == len(user.posts)
            weights = [p["weight"] for p in row["posts"]]
            assert weights == sorted(weights, reverse=True)
            assert sum(weights) == pytest.approx(1.0, abs=1e-9)
            assert len(row["posts"]) == len(user.posts)

    def test_top_k_limits_posts(self):
        rows = self.report([make_user(n_posts=6)], top_k=2)
        assert len(rows[0]["posts"]) == 2

    def test_truncation_reports_original_indices(self):
        rows = self.report([make_user(n_posts=6)], max_posts=2)
        indices = {p["post_index"] for p in rows[0]["posts"]}
        assert indices == {4, 5}
        assert rows[0]["n_posts"] == 6

    def test_excerpts_respect_limit(self):
        long_post = Post(text="word " * 100, timestamp=1_600_000_000)
        user = UserRecord(user_id="long", posts=[long_post], label=1)
        rows = self.report([user])
        assert len(rows[0]["posts"][0]["excerpt"]) <= 200
        assert rows[0]["posts"][0]["excerpt"].endswith("...")

    def test_non_attention_architecture_rejected(self):
        config = ModelConfig.for_architecture("LSTM", d_text=D_TEXT,
                                              hidden_size=6)
        with pytest.raises(ConfigError, match="attention"):
            pipeline.attention_report(config, init_params(config),
                                      [make_user()], self.text_enc,
                                      self.emo_enc)

    def test_bad_top_k_rejected(self):
        with pytest.raises(ConfigError, match="top_k"):
            self.report([make_user()], top_k=0)
