"""Command-line entry point: generate, train, evaluate, compare, and
attention commands over one YAML config, with flags for seed, output
path, worker count, and report size.

Exit codes: 0 success, 1 configuration or validation problems, 2 I/O and
data-format problems, 3 numerical aborts.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import EngineConfig
from .data import generate_synthetic, load_corpus, save_corpus
from .encoders import (HashingTextEncoder, LexiconEmotionEncoder,
                       StoreEmotionEncoder, StoreTextEncoder,
                       load_embedding_store)
from .errors import (ConfigError, DataFormatError, EngineError,
                     IncompatibleCheckpointError, NumericalAbort)
from .fileio import atomic_open
from .metrics import SeedAggregate, wilcoxon_signed_rank
from .model import ModelConfig
from .pipeline import (attention_report, encode_users, evaluate_model,
                       prepare_splits, run_experiment)
from .training import load_checkpoint, save_history, train

METRICS_CSV_COLUMNS = ("model", "seed", "accuracy", "precision", "recall",
                       "f1", "auroc", "auprc")
COMPARISON_COLUMNS = ("comparison", "z", "p", "sig")


class _Parser(argparse.ArgumentParser):
    """Maps argparse usage errors into the config exit code."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskseq",
                     description="train and audit post-history risk models")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": "write a synthetic labeled corpus",
        "train": "train one model and write checkpoint plus history",
        "evaluate": "score a checkpoint on a corpus split",
        "compare": "train several architectures across seeds and test pairs",
        "attention": "rank each user's posts by attention weight",
    }
    for name, help_text in commands.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True,
                         help="path to the YAML config")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the run seed")
        cmd.add_argument("--out", default=None,
                         help="override the command's main output path")
        cmd.add_argument("--workers", type=int, default=None,
                         help="parallel training workers for compare")
        cmd.add_argument("--top-k", type=int, default=None, dest="top_k",
                         help="posts per user in the attention report")
    return parser


def build_encoders(config: EngineConfig):
    enc = config.encoder
    if enc.mode == "hashing":
        return (HashingTextEncoder(d_text=enc.d_text, seed=enc.hash_seed),
                LexiconEmotionEncoder())
    store = load_embedding_store(enc.store_path)
    text_encoder = StoreTextEncoder(store)
    emotion_encoder = (StoreEmotionEncoder(store) if store.has_emotion
                       else LexiconEmotionEncoder())
    return text_encoder, emotion_encoder


def _run_seed(config: EngineConfig, args) -> int:
    return args.seed if args.seed is not None else config.training.seed


def load_source_corpus(config: EngineConfig):
    """The corpus file wins when a path is configured; otherwise the
    generator block produces the corpus in memory."""
    dataset = config.dataset
    if dataset.path is not None:
        return load_corpus(dataset.path)
    return generate_synthetic(dataset.generator, dataset.generator_seed)


def _check_inputs_exist(config: EngineConfig, need_corpus, need_checkpoint):
    if config.encoder.mode == "store" and not os.path.exists(config.encoder.store_path):
        raise FileNotFoundError(
            f"embedding store {config.encoder.store_path} does not exist")
    if need_corpus and config.dataset.path is not None \
            and not os.path.exists(config.dataset.path):
        raise FileNotFoundError(
            f"corpus file {config.dataset.path} does not exist")
    if need_checkpoint and not os.path.exists(config.training.checkpoint_path):
        raise FileNotFoundError(
            f"checkpoint {config.training.checkpoint_path} does not exist")


def _split_users(config: EngineConfig, corpus, seed):
    parts = prepare_splits(corpus, config.dataset.fractions, seed,
                           use_downsample=config.dataset.downsample,
                           downsample_seed=config.dataset.downsample_seed,
                           split_seed=config.dataset.split_seed)
    by_name = dict(zip(("train", "val", "test"), parts))
    return by_name[config.evaluation.split]


def _load_matching_checkpoint(config: EngineConfig, text_width: int):
    params, ckpt_config = load_checkpoint(config.training.checkpoint_path)
    wanted = config.model
    mismatched = [
        f"architecture {ckpt_config.architecture!r} != {wanted.architecture!r}"
        if ckpt_config.architecture != wanted.architecture else None,
        f"hidden_size {ckpt_config.hidden_size} != {wanted.hidden_size}"
        if ckpt_config.hidden_size != wanted.hidden_size else None,
        f"pool {ckpt_config.pool!r} != {wanted.pool!r}"
        if ckpt_config.pool != wanted.pool else None,
        f"text width {ckpt_config.d_text} != encoder width {text_width}"
        if ckpt_config.d_text != text_width else None,
    ]
    mismatched = [m for m in mismatched if m]
    if mismatched:
        raise IncompatibleCheckpointError(
            "checkpoint does not fit the configured model: "
            + "; ".join(mismatched))
    return params, ckpt_config


def _write_metrics_csv(path, rows):
    with atomic_open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_CSV_COLUMNS)
        for model_name, report in rows:
            writer.writerow([model_name, report.seed, report.accuracy,
                             report.precision, report.recall, report.f1,
                             report.auroc, report.auprc])


def cmd_generate(config: EngineConfig, args) -> None:
    if config.dataset.generator is None:
        raise ConfigError("generate needs a dataset.generator block")
    out = args.out if args.out is not None else config.dataset.path
    if out is None:
        raise ConfigError("generate needs --out or a dataset.path to write to")
    seed = args.seed if args.seed is not None else config.dataset.generator_seed
    corpus = generate_synthetic(config.dataset.generator, seed)
    save_corpus(corpus, out)
    print(f"wrote {corpus.n_total} users ({corpus.n_positive} positive, "
          f"{corpus.n_negative} negative) to {out}")


def cmd_train(config: EngineConfig, args) -> None:
    _check_inputs_exist(config, need_corpus=True, need_checkpoint=False)
    text_encoder, emotion_encoder = build_encoders(config)
    seed = _run_seed(config, args)
    model_settings = config.model
    model_config = ModelConfig.for_architecture(
        model_settings.architecture, d_text=text_encoder.width,
        hidden_size=model_settings.hidden_size,
        dropout_rate=model_settings.dropout_rate, pool=model_settings.pool,
        init_seed=(model_settings.init_seed
                   if model_settings.init_seed is not None else seed))
    checkpoint_path = args.out if args.out is not None \
        else config.training.checkpoint_path
    tc = config.training.to_train_config(seed, checkpoint_path=checkpoint_path)

    corpus = load_source_corpus(config)
    train_corpus, val_corpus, _ = prepare_splits(
        corpus, config.dataset.fractions, seed,
        use_downsample=config.dataset.downsample,
        downsample_seed=config.dataset.downsample_seed,
        split_seed=config.dataset.split_seed)
    train_users = encode_users(list(train_corpus), model_config, text_encoder,
                               emotion_encoder, max_posts=config.dataset.max_posts)
    val_users = encode_users(list(val_corpus), model_config, text_encoder,
                             emotion_encoder, max_posts=config.dataset.max_posts)
    _, history = train(model_config, tc, train_users, val_users, log=print)
    save_history(history, config.training.history_path)
    print(f"best epoch {history.best_epoch} "
          f"(val_loss={history.val_loss[history.best_epoch]:.6f}); "
          f"checkpoint {checkpoint_path}, history {config.training.history_path}")


def cmd_evaluate(config: EngineConfig, args) -> None:
    _check_inputs_exist(config, need_corpus=True, need_checkpoint=True)
    text_encoder, emotion_encoder = build_encoders(config)
    seed = _run_seed(config, args)
    params, ckpt_config = _load_matching_checkpoint(config, text_encoder.width)
    corpus = load_source_corpus(config)
    users = _split_users(config, corpus, seed)
    encoded = encode_users(list(users), ckpt_config, text_encoder,
                           emotion_encoder, max_posts=config.dataset.max_posts)
    report = evaluate_model(ckpt_config, params, encoded,
                            batch_size=config.training.batch_size, seed=seed)

    out = args.out if args.out is not None else config.evaluation.metrics_path
    payload = dict(report.to_dict(), model=ckpt_config.architecture,
                   split=config.evaluation.split)
    with atomic_open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_metrics_csv(config.evaluation.metrics_csv,
                       [(ckpt_config.architecture, report)])
    print(f"{ckpt_config.architecture} on {config.evaluation.split}: "
          f"f1={report.f1:.4f} auroc={report.auroc:.4f} "
          f"auprc={report.auprc:.4f} ({out})")


def _compare_task(payload):
    (corpus, architecture, seed, text_encoder, emotion_encoder,
     experiment_kwargs) = payload
    result = run_experiment(corpus, architecture, seed,
                            text_encoder=text_encoder,
                            emotion_encoder=emotion_encoder,
                            **experiment_kwargs)
    return architecture, seed, result.report


def _significance_label(level) -> str:
    return "" if level is None else repr(level)


def cmd_compare(config: EngineConfig, args) -> None:
    architectures = config.evaluation.architectures
    if len(architectures) < 2:
        raise ConfigError(
            "compare needs at least 2 architectures in evaluation.architectures")
    seeds = config.evaluation.seeds
    if len(seeds) < 2:
        raise ConfigError("compare needs at least 2 evaluation seeds")
    _check_inputs_exist(config, need_corpus=True, need_checkpoint=False)
    workers = args.workers if args.workers is not None \
        else config.evaluation.workers
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    text_encoder, emotion_encoder = build_encoders(config)
    corpus = load_source_corpus(config)
    base_tc = dataclasses.replace(config.training.to_train_config(0),
                                  checkpoint_path=None)
    experiment_kwargs = dict(
        fractions=config.dataset.fractions,
        use_downsample=config.dataset.downsample,
        downsample_seed=config.dataset.downsample_seed,
        split_seed=config.dataset.split_seed,
        hidden_size=config.model.hidden_size,
        dropout_rate=config.model.dropout_rate,
        pool=config.model.pool,
        train_config=base_tc,
        max_posts=config.dataset.max_posts,
        eval_split=config.evaluation.split,
    )
    payloads = [(corpus, arch, seed, text_encoder, emotion_encoder,
                 experiment_kwargs)
                for arch in architectures for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_compare_task, payloads))
    else:
        outcomes = [_compare_task(p) for p in payloads]

    by_arch = {arch: {} for arch in architectures}
    for arch, seed, report in outcomes:
        by_arch[arch][seed] = report
    metric = config.evaluation.metric
    rows = [(arch, by_arch[arch][seed])
            for arch in architectures for seed in seeds]
    _write_metrics_csv(config.evaluation.metrics_csv, rows)

    aggregates = {arch: SeedAggregate.from_reports(
        [by_arch[arch][seed] for seed in seeds]) for arch in architectures}
    for arch in architectures:
        agg = aggregates[arch]
        print(f"{arch}: {metric} mean={agg.mean[metric]:.4f} "
              f"std={agg.std[metric]:.4f} over {len(seeds)} seeds")

    comparison_rows = []
    for first, second in zip(architectures, architectures[1:]):
        result = wilcoxon_signed_rank(aggregates[first].metric_values(metric),
                                      aggregates[second].metric_values(metric))
        comparison_rows.append((f"{first} vs {second}", result))
    out = args.out if args.out is not None else config.evaluation.comparison_path
    with atomic_open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_COLUMNS)
        for name, result in comparison_rows:
            writer.writerow([name, result.z_value, result.p_value,
                             _significance_label(result.significant_at)])
    for name, result in comparison_rows:
        sig = _significance_label(result.significant_at) or "ns"
        print(f"{name}: z={result.z_value:.4f} p={result.p_value:.6g} [{sig}]")
    print(f"wrote per-seed metrics to {config.evaluation.metrics_csv} "
          f"and comparisons to {out}")


def cmd_attention(config: EngineConfig, args) -> None:
    arch = config.model.architecture
    model_config = ModelConfig.for_architecture(arch)
    if not model_config.use_attention:
        raise ConfigError(
            f"architecture {arch} has no attention weights to report")
    _check_inputs_exist(config, need_corpus=True, need_checkpoint=True)
    text_encoder, emotion_encoder = build_encoders(config)
    seed = _run_seed(config, args)
    params, ckpt_config = _load_matching_checkpoint(config, text_encoder.width)
    corpus = load_source_corpus(config)
    users = list(_split_users(config, corpus, seed))
    top_k = args.top_k if args.top_k is not None else config.evaluation.top_k
    rows = attention_report(ckpt_config, params, users, text_encoder,
                            emotion_encoder, top_k=top_k,
                            max_posts=config.dataset.max_posts)
    out = args.out if args.out is not None else config.evaluation.attention_path
    with atomic_open(out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"wrote attention rankings for {len(rows)} users to {out}")


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "attention": cmd_attention,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = EngineConfig.from_yaml(args.config)
        _COMMANDS[args.command](config, args)
        return 0
    except NumericalAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
