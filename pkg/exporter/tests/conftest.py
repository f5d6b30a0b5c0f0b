import json

import pytest

from embedding_exporter.testing import (build_tiny_emotion_model,
                                        build_tiny_text_model)


@pytest.fixture(scope="session")
def text_model_dir(tmp_path_factory):
    return build_tiny_text_model(
        str(tmp_path_factory.mktemp("models") / "text"))


@pytest.fixture(scope="session")
def emotion_model_dir(tmp_path_factory):
    return build_tiny_emotion_model(
        str(tmp_path_factory.mktemp("models") / "emotion"))


@pytest.fixture(scope="session")
def five_label_model_dir(tmp_path_factory):
    return build_tiny_emotion_model(
        str(tmp_path_factory.mktemp("models") / "five"), num_labels=5)


def write_corpus(path, users):
    with open(path, "w", encoding="utf-8") as fh:
        for user in users:
            fh.write(json.dumps(user) + "\n")
    return str(path)


def toy_users(n_users=2, n_posts=3):
    texts = ["win bet happy day", "lose slot sad night", "long odds game",
             "tired luck day", "a the win"]
    return [
        {"user_id": f"u{i}", "label": i % 2,
         "posts": [{"text": texts[(i + j) % len(texts)],
                    "timestamp": 1000 * i + 10 * j}
                   for j in range(n_posts)]}
        for i in range(n_users)
    ]
