"""Batched inference over a corpus and interchange-format output.

Text vectors are the encoder's leading classification-token hidden state;
emotion vectors are the classifier's softmax distribution over its 7
labels, computed in float64 so every row sums to 1 up to rounding. Both
models run frozen in inference mode, so rerunning the export reproduces
the file byte for byte.
"""

import os
import tempfile
from dataclasses import dataclass

from embedding_exporter.corpus import read_corpus
from embedding_exporter.errors import DependencyError, ExportError

EMOTION_LABELS = 7


@dataclass(frozen=True)
class ExportManifest:
    corpus_path: str
    output_path: str
    text_model: str
    emotion_model: str
    batch_size: int = 16
    device: str = "cpu"

    def validate(self):
        if not os.path.exists(self.corpus_path):
            raise FileNotFoundError(f"corpus file not found: {self.corpus_path}")
        if self.batch_size < 1:
            raise ExportError(f"batch_size must be >= 1, got {self.batch_size}")
        out_dir = os.path.dirname(os.path.abspath(self.output_path))
        if not os.path.isdir(out_dir):
            raise ExportError(f"output directory does not exist: {out_dir}")
        return self


def _load_text_encoder(identifier, device):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(identifier)
        model = AutoModel.from_pretrained(identifier)
    except (OSError, ValueError, EnvironmentError) as exc:
        raise DependencyError(
            f"cannot resolve text encoder {identifier!r}: {exc}") from None
    return tokenizer, model.to(torch.device(device)).eval()


def _load_emotion_classifier(identifier, device):
    import torch
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(identifier)
        model = AutoModelForSequenceClassification.from_pretrained(identifier)
    except (OSError, ValueError, EnvironmentError) as exc:
        raise DependencyError(
            f"cannot resolve emotion classifier {identifier!r}: {exc}") from None
    n_labels = int(model.config.num_labels)
    if n_labels != EMOTION_LABELS:
        raise DependencyError(
            f"emotion classifier {identifier!r} has {n_labels} labels, "
            f"expected {EMOTION_LABELS}")
    return tokenizer, model.to(torch.device(device)).eval()


def _encode_batches(texts, tokenizer, model, device, batch_size, pool):
    import torch

    max_length = getattr(model.config, "max_position_embeddings", None)
    rows = []
    with torch.inference_mode():
        for start in range(0, len(texts), batch_size):
            chunk = texts[start:start + batch_size]
            encoded = tokenizer(chunk, padding=True, truncation=True,
                                max_length=max_length, return_tensors="pt")
            encoded = {k: v.to(torch.device(device)) for k, v in encoded.items()}
            rows.append(pool(model(**encoded)))
    return torch.cat(rows, dim=0).to(torch.float64).cpu().numpy()


def export_embeddings(manifest: ExportManifest):
    """Writes the interchange file and returns the record count."""
    import torch

    manifest.validate()
    users = read_corpus(manifest.corpus_path)
    seen = set()
    records = []
    for user in users:
        if user.user_id in seen:
            raise ExportError(
                f"duplicate user_id {user.user_id!r}; interchange keys "
                "(user_id, post_index) must be unique")
        seen.add(user.user_id)
        for index, post in enumerate(user.posts):
            records.append((user.user_id, index, post.text))

    text_tokenizer, text_model = _load_text_encoder(
        manifest.text_model, manifest.device)
    emotion_tokenizer, emotion_model = _load_emotion_classifier(
        manifest.emotion_model, manifest.device)

    texts = [text for _, _, text in records]
    vectors = _encode_batches(
        texts, text_tokenizer, text_model, manifest.device,
        manifest.batch_size, lambda out: out.last_hidden_state[:, 0, :])
    logits = _encode_batches(
        texts, emotion_tokenizer, emotion_model, manifest.device,
        manifest.batch_size, lambda out: out.logits)
    emotions = torch.softmax(torch.from_numpy(logits), dim=-1).numpy()

    width = vectors.shape[1]
    out_dir = os.path.dirname(os.path.abspath(manifest.output_path))
    fd, tmp_path = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#width {width}\n")
            for (user_id, index, _), vec, emo in zip(records, vectors,
                                                     emotions):
                if "\t" in user_id or "\n" in user_id:
                    raise ExportError(
                        f"user_id {user_id!r} contains a tab or newline")
                fh.write("\t".join([
                    user_id,
                    str(index),
                    ",".join(repr(v) for v in vec.tolist()),
                    ",".join(repr(v) for v in emo.tolist()),
                ]) + "\n")
        os.replace(tmp_path, manifest.output_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    return len(records)
