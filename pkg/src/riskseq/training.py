"""Mini-batch training with Adam, learning-rate schedules, gradient
clipping, validation-tracked checkpointing, and a binary checkpoint file
format with integrity checking."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import pad_and_mask
from .errors import (ConfigError, IncompatibleCheckpointError, IntegrityError,
                     NumericalAbort, ValidationError)
from .fileio import atomic_open
from .metrics import classification_metrics
from .model import ModelConfig, backward, check_params, forward, init_params
from .numeric import ParameterSet, adam_step, clip_by_global_norm, bce_loss

SCHEDULES = ("constant", "step_decay")

CHECKPOINT_MAGIC = b"RSEQCKPT"
CHECKPOINT_VERSION = 1
_CHECKSUM_BYTES = 32
_PREFIX = struct.Struct("<8sIQ")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    initial_lr: float = 0.001
    schedule: str = "constant"
    schedule_factor: float = 0.5
    schedule_every: int = 2
    clip_norm: Optional[float] = 5.0
    seed: int = 0
    checkpoint_path: Optional[str] = None

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.initial_lr < 0.0:
            raise ConfigError(f"initial_lr must be >= 0, got {self.initial_lr}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(
                f"unknown schedule {self.schedule!r}, expected one of {SCHEDULES}")
        if self.schedule == "step_decay":
            if self.schedule_factor <= 0.0:
                raise ConfigError("schedule_factor must be positive")
            if self.schedule_every < 1:
                raise ConfigError("schedule_every must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0.0:
            raise ConfigError(
                "clip_norm must be positive; use null to disable clipping")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        return self


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Learning rate for a 0-based epoch index."""
    if epoch < 0:
        raise ConfigError(f"epoch index must be non-negative, got {epoch}")
    if config.schedule == "constant":
        return config.initial_lr
    return config.initial_lr * config.schedule_factor ** (epoch // config.schedule_every)


@dataclass
class TrainHistory:
    """Per-epoch curves plus the 0-based index of the epoch whose
    validation loss was lowest."""
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_f1: list = field(default_factory=list)
    best_epoch: int = -1

    def to_dict(self):
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "val_f1": list(self.val_f1),
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_dict(cls, d) -> "TrainHistory":
        return cls(train_loss=list(d["train_loss"]), val_loss=list(d["val_loss"]),
                   val_f1=list(d["val_f1"]), best_epoch=int(d["best_epoch"]))

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)


def save_history(history: TrainHistory, path) -> None:
    with atomic_open(path, "w", encoding="utf-8") as fh:
        json.dump(history.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_history(path) -> TrainHistory:
    with open(path, "r", encoding="utf-8") as fh:
        return TrainHistory.from_dict(json.load(fh))


def _max_param_magnitude(params: ParameterSet) -> float:
    return max(float(np.abs(params[name]).max()) for name in params.names())


def save_checkpoint(params: ParameterSet, config: ModelConfig, path) -> None:
    """Binary layout: magic, version, header-length, JSON header (model
    config, optimizer step count, array manifest), float64 payloads in
    manifest order (values then both Adam moments per array), and a
    trailing SHA-256 over everything before it."""
    check_params(config, params)
    names = list(params.names())
    header = {
        "config": dataclasses.asdict(config),
        "step_count": params.step_count,
        "arrays": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    digest = hashlib.sha256()
    with atomic_open(path, "wb") as fh:
        def emit(chunk):
            digest.update(chunk)
            fh.write(chunk)

        emit(_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)))
        emit(header_bytes)
        for name in names:
            emit(np.ascontiguousarray(params[name]).tobytes())
            emit(np.ascontiguousarray(params.moment1(name)).tobytes())
            emit(np.ascontiguousarray(params.moment2(name)).tobytes())
        fh.write(digest.digest())


def load_checkpoint(path, expected_config: Optional[ModelConfig] = None):
    """Returns (params, config). Raises IntegrityError for truncation or
    corruption and IncompatibleCheckpointError for version or model-config
    mismatches."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _PREFIX.size + _CHECKSUM_BYTES:
        raise IntegrityError(f"checkpoint {path} is truncated")
    magic, version, header_len = _PREFIX.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise IntegrityError(f"{path} is not a checkpoint file (bad magic)")
    if version != CHECKPOINT_VERSION:
        raise IncompatibleCheckpointError(
            f"checkpoint version {version} is not supported "
            f"(expected {CHECKPOINT_VERSION})")
    if hashlib.sha256(data[:-_CHECKSUM_BYTES]).digest() != data[-_CHECKSUM_BYTES:]:
        raise IntegrityError(f"checkpoint {path} failed its integrity check")
    body_start = _PREFIX.size
    if body_start + header_len + _CHECKSUM_BYTES > len(data):
        raise IntegrityError(f"checkpoint {path} is truncated")
    try:
        header = json.loads(data[body_start:body_start + header_len])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"checkpoint {path} has a corrupt header: {exc}")
    try:
        config = ModelConfig(**header["config"])
    except TypeError as exc:
        raise IncompatibleCheckpointError(
            f"checkpoint {path} carries unrecognized config fields: {exc}")
    config.validate()
    if expected_config is not None and config != expected_config:
        diffs = [f.name for f in dataclasses.fields(ModelConfig)
                 if getattr(config, f.name) != getattr(expected_config, f.name)]
        raise IncompatibleCheckpointError(
            "checkpoint does not match the requested model configuration "
            f"(differs in: {', '.join(diffs)})")

    payload = data[body_start + header_len:-_CHECKSUM_BYTES]
    params = ParameterSet()
    offset = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8
        chunks = []
        for _ in range(3):
            if offset + nbytes > len(payload):
                raise IntegrityError(f"checkpoint {path} is truncated")
            chunks.append(np.frombuffer(payload, dtype=np.float64,
                                        count=nbytes // 8, offset=offset)
                          .reshape(shape).copy())
            offset += nbytes
        params.add(entry["name"], chunks[0])
        params.moment1(entry["name"])[...] = chunks[1]
        params.moment2(entry["name"])[...] = chunks[2]
    if offset != len(payload):
        raise IntegrityError(
            f"checkpoint {path} has {len(payload) - offset} unexpected trailing bytes")
    params.step_count = int(header["step_count"])
    check_params(config, params)
    return params, config


def _dropout_seed(seed: int, epoch: int, batch_index: int) -> int:
    return seed * 1_000_003 + epoch * 8191 + batch_index


def evaluate_loss_and_f1(model_config: ModelConfig, params: ParameterSet,
                         users, batch_size: int):
    """Mean per-user loss plus F1 of argmax predictions over a fixed-order
    user list."""
    if not users:
        raise ValidationError("evaluation needs at least one user")
    total = 0.0
    predicted = []
    true = []
    for start in range(0, len(users), batch_size):
        chunk = users[start:start + batch_size]
        batch = pad_and_mask(chunk)
        trace = forward(model_config, params, batch, training=False)
        total += bce_loss(trace.Y, batch.labels) * len(chunk)
        predicted.extend(np.argmax(trace.Y, axis=1).tolist())
        true.extend(batch.labels.tolist())
    loss = total / len(users)
    f1 = classification_metrics(predicted, true).f1
    return loss, f1


def train(model_config: ModelConfig, train_config: TrainConfig,
          train_users, val_users, log=print):
    """Runs the full loop and returns (best parameters, history).

    Users are (text, emotion, decay, label) tuples. Training order is
    reshuffled every epoch from the config seed; identical configs and
    identical inputs reproduce identical parameters bit for bit. The best
    parameters are the ones from the epoch with the lowest validation
    loss, re-checkpointed on every strict improvement.
    """
    model_config.validate()
    train_config.validate()
    if not train_users:
        raise ValidationError("training needs at least one user")
    if not val_users:
        raise ValidationError("validation split must not be empty")

    params = init_params(model_config)
    rng = np.random.RandomState(train_config.seed)
    history = TrainHistory()
    best_val = math.inf
    best_params = None
    n = len(train_users)

    for epoch in range(train_config.epochs):
        lr = lr_schedule(epoch, train_config)
        order = rng.permutation(n)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, n, train_config.batch_size)):
            chunk = [train_users[i] for i in order[start:start + train_config.batch_size]]
            batch = pad_and_mask(chunk)
            trace = forward(model_config, params, batch, training=True,
                            dropout_seed=_dropout_seed(train_config.seed,
                                                       epoch, batch_index))
            loss = bce_loss(trace.Y, batch.labels)
            if not math.isfinite(loss):
                raise NumericalAbort(
                    "training loss became non-finite", epoch=epoch,
                    batch=batch_index, max_param=_max_param_magnitude(params))
            grads, _ = backward(model_config, params, trace, batch.labels)
            if train_config.clip_norm is not None:
                grads = clip_by_global_norm(grads, train_config.clip_norm)
            adam_step(params, grads, lr)
            loss_sum += loss * len(chunk)

        train_loss = loss_sum / n
        val_loss, val_f1 = evaluate_loss_and_f1(
            model_config, params, val_users, train_config.batch_size)
        if not math.isfinite(val_loss):
            raise NumericalAbort(
                "validation loss became non-finite", epoch=epoch,
                max_param=_max_param_magnitude(params))
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.val_f1.append(val_f1)
        if val_loss < best_val:
            best_val = val_loss
            history.best_epoch = epoch
            best_params = params.copy()
            if train_config.checkpoint_path is not None:
                save_checkpoint(best_params, model_config,
                                train_config.checkpoint_path)
        if log is not None:
            log(f"epoch {epoch}: train_loss={train_loss:.6f} "
                f"val_loss={val_loss:.6f} val_f1={val_f1:.4f} lr={lr:.6g}")

    return best_params, history
