"""Builders for tiny offline model directories used in tests.

The models are randomly initialized (seeded) miniature BERTs saved with
their tokenizers, so tests exercise the real loading, tokenization,
pooling, and softmax paths without any network access or large weights.
"""

import os

VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
         "the", "a", "day", "long", "win", "lose", "bet", "happy", "sad",
         "game", "night", "odds", "slot", "luck", "tired"]


def _write_tokenizer(directory):
    from transformers import BertTokenizerFast

    os.makedirs(directory, exist_ok=True)
    vocab_path = os.path.join(directory, "vocab.txt")
    with open(vocab_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizerFast(vocab_file=vocab_path,
                                  model_max_length=32)
    tokenizer.save_pretrained(directory)


def _tiny_config(**extra):
    from transformers import BertConfig

    return BertConfig(vocab_size=len(VOCAB), hidden_size=16,
                      num_hidden_layers=1, num_attention_heads=2,
                      intermediate_size=32, max_position_embeddings=32,
                      **extra)


def build_tiny_text_model(directory, seed=0):
    """Seeded miniature encoder saved under `directory`; returns the path."""
    import torch
    from transformers import BertModel

    torch.manual_seed(seed)
    model = BertModel(_tiny_config())
    _write_tokenizer(directory)
    model.save_pretrained(directory)
    return directory


def build_tiny_emotion_model(directory, seed=0, num_labels=7):
    """Seeded miniature sequence classifier saved under `directory`."""
    import torch
    from transformers import BertForSequenceClassification

    torch.manual_seed(seed)
    model = BertForSequenceClassification(
        _tiny_config(num_labels=num_labels))
    _write_tokenizer(directory)
    model.save_pretrained(directory)
    return directory
