"""End-to-end orchestration: encoding corpora for a model, prediction,
seeded experiment runs, cross-seed aggregation, and attention audits."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Corpus, UserRecord, compute_decay, downsample, pad_and_mask, split, truncate_user
from .encoders import concat_encode, encode_user
from .errors import ConfigError, EngineError, ValidationError
from .metrics import MetricsReport, SeedAggregate, auprc, auroc, classification_metrics
from .model import ModelConfig, forward
from .training import TrainConfig, TrainHistory, train

EXCERPT_LIMIT = 200


def encode_for_model(user: UserRecord, model_config: ModelConfig,
                     text_encoder, emotion_encoder, max_posts=None):
    """One (text, emotion, decay, label) tuple for a user.

    Sequential architectures get one row per post plus the decay vector;
    the no-recurrence baseline gets a single concatenated-text row.
    """
    if max_posts is not None:
        user = truncate_user(user, max_posts)
    if model_config.architecture == "TextBaseline":
        vector = concat_encode(user, text_encoder)
        return (vector[None, :], np.zeros((1, 7)), np.ones(1), user.label)
    text, emotion = encode_user(user, text_encoder, emotion_encoder)
    return (text, emotion, compute_decay(user.timestamps()), user.label)


def encode_users(users, model_config: ModelConfig, text_encoder,
                 emotion_encoder, max_posts=None):
    return [encode_for_model(u, model_config, text_encoder, emotion_encoder,
                             max_posts=max_posts) for u in users]


def predict(model_config: ModelConfig, params, encoded_users, batch_size=32):
    """Returns (predicted labels, positive-class scores, true labels) in
    input order."""
    if not encoded_users:
        raise ValidationError("prediction needs at least one user")
    predictions = []
    scores = []
    labels = []
    for start in range(0, len(encoded_users), batch_size):
        chunk = encoded_users[start:start + batch_size]
        batch = pad_and_mask(chunk)
        trace = forward(model_config, params, batch, training=False)
        predictions.append(np.argmax(trace.Y, axis=1))
        scores.append(trace.Y[:, 1])
        labels.append(batch.labels)
    return (np.concatenate(predictions), np.concatenate(scores),
            np.concatenate(labels))


def evaluate_model(model_config: ModelConfig, params, encoded_users,
                   batch_size=32, seed=None) -> MetricsReport:
    """Confusion metrics plus both ranking metrics on positive-class scores."""
    predicted, scores, labels = predict(model_config, params, encoded_users,
                                        batch_size=batch_size)
    report = classification_metrics(predicted, labels)
    report.auroc = auroc(scores, labels)
    report.auprc = auprc(scores, labels)
    report.seed = seed
    return report


def prepare_splits(corpus: Corpus, fractions, seed: int, use_downsample=True,
                   downsample_seed=None, split_seed=None):
    """Optional downsampling followed by a stratified split. The run seed
    drives both stages unless stage-specific seeds are given."""
    if use_downsample:
        ds_seed = downsample_seed if downsample_seed is not None else seed
        corpus = downsample(corpus, ds_seed)
    sp_seed = split_seed if split_seed is not None else seed
    return split(corpus, fractions, sp_seed)


@dataclass
class ExperimentResult:
    model_config: ModelConfig
    params: object
    history: TrainHistory
    report: MetricsReport
    seed: int


def run_experiment(corpus: Corpus, architecture: str, seed: int, *,
                   text_encoder, emotion_encoder,
                   fractions=(0.6, 0.2, 0.2), use_downsample=True,
                   downsample_seed=None, split_seed=None,
                   hidden_size=64, dropout_rate=None, pool="mean",
                   init_seed=None, train_config: Optional[TrainConfig] = None,
                   max_posts=None, eval_split="test",
                   log=None) -> ExperimentResult:
    """Split, encode, train, and evaluate one architecture for one seed.

    The seed controls the split, the downsample draw, parameter init, and
    the shuffle order unless stage-specific overrides are passed.
    """
    if eval_split not in ("train", "val", "test"):
        raise ConfigError(f"unknown evaluation split {eval_split!r}")
    model_config = ModelConfig.for_architecture(
        architecture, d_text=text_encoder.width, hidden_size=hidden_size,
        dropout_rate=dropout_rate, pool=pool,
        init_seed=init_seed if init_seed is not None else seed)
    base = train_config if train_config is not None else TrainConfig()
    tc = dataclasses.replace(base, seed=seed)

    train_corpus, val_corpus, test_corpus = prepare_splits(
        corpus, fractions, seed, use_downsample=use_downsample,
        downsample_seed=downsample_seed, split_seed=split_seed)
    encode = lambda users: encode_users(list(users), model_config,
                                        text_encoder, emotion_encoder,
                                        max_posts=max_posts)
    train_users = encode(train_corpus)
    val_users = encode(val_corpus)
    params, history = train(model_config, tc, train_users, val_users, log=log)

    chosen = {"train": train_users, "val": val_users,
              "test": encode(test_corpus)}[eval_split]
    report = evaluate_model(model_config, params, chosen,
                            batch_size=tc.batch_size, seed=seed)
    return ExperimentResult(model_config=model_config, params=params,
                            history=history, report=report, seed=seed)


def _reraise_with_seed(seed: int, exc: Exception):
    message = f"run for seed {seed} failed: {exc}"
    try:
        wrapped = type(exc)(message)
    except Exception:
        wrapped = EngineError(message)
    raise wrapped from exc


def multi_seed_run(corpus: Corpus, architecture: str, seeds, *,
                   text_encoder, emotion_encoder,
                   **experiment_kwargs) -> SeedAggregate:
    """Trains and evaluates once per seed and aggregates the reports. Any
    failure is re-raised naming the offending seed."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValidationError(
            f"multi-seed runs need at least 2 seeds, got {len(seeds)}")
    if len(set(seeds)) != len(seeds):
        raise ValidationError("seeds must be distinct")
    reports = []
    for seed in seeds:
        try:
            result = run_experiment(corpus, architecture, seed,
                                    text_encoder=text_encoder,
                                    emotion_encoder=emotion_encoder,
                                    **experiment_kwargs)
        except Exception as exc:
            _reraise_with_seed(seed, exc)
        reports.append(result.report)
    return SeedAggregate.from_reports(reports)


def excerpt(text: str, limit: int = EXCERPT_LIMIT) -> str:
    """At most `limit` characters, with a trailing ellipsis marker counted
    inside the limit when the text was cut."""
    if len(text) <= limit:
        return text
    return text[:limit - 3] + "..."


def attention_report(model_config: ModelConfig, params, users,
                     text_encoder, emotion_encoder, top_k=None,
                     max_posts=None):
    """Per-user ranked lists of (post index, excerpt, attention weight).

    Indices refer to positions in the user's full post list even when a
    truncation limit drops older posts. Weights are reported unrounded and
    sum to 1 over each user's live posts before any top-k cut.
    """
    if not model_config.use_attention:
        raise ConfigError(
            f"architecture {model_config.architecture} has no attention "
            "weights to report")
    if top_k is not None and top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    rows = []
    for user in users:
        kept = truncate_user(user, max_posts) if max_posts is not None else user
        offset = len(user.posts) - len(kept.posts)
        encoded = encode_for_model(kept, model_config, text_encoder,
                                   emotion_encoder)
        batch = pad_and_mask([encoded])
        trace = forward(model_config, params, batch, training=False)
        weights = trace.attention_weights[0, :len(kept.posts)]
        order = sorted(range(len(kept.posts)),
                       key=lambda j: (-weights[j], j))
        if top_k is not None:
            order = order[:top_k]
        rows.append({
            "user_id": user.user_id,
            "label": user.label,
            "n_posts": len(user.posts),
            "posts": [{
                "post_index": offset + j,
                "weight": float(weights[j]),
                "excerpt": excerpt(kept.posts[j].text),
            } for j in order],
        })
    return rows
