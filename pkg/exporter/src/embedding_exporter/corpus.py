"""Reader for the one-user-per-line JSONL corpus format.

The schema mirrors what the sequence engine reads and writes: each line is
an object with a non-empty string `user_id`, an integer `label` in {0, 1},
and a non-empty `posts` list of `{"text": str, "timestamp": int >= 0}`.
Posts are re-sorted by timestamp (stable), so the post indices this
package exports line up with the engine's per-user indexing.
"""

import json
from dataclasses import dataclass

from embedding_exporter.errors import CorpusFormatError


@dataclass(frozen=True)
class Post:
    text: str
    timestamp: int


@dataclass(frozen=True)
class User:
    user_id: str
    label: int
    posts: tuple


def read_corpus(path):
    """All users in file order; raises CorpusFormatError with a line number."""
    users = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                raise CorpusFormatError(f"line {line_no}: blank line in corpus file")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: invalid JSON: {exc}") from None
            users.append(_parse_user(obj, line_no))
    return users


def _parse_user(obj, line_no):
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"line {line_no}: record is not a JSON object")
    user_id = obj.get("user_id")
    if not isinstance(user_id, str) or not user_id:
        raise CorpusFormatError(f"line {line_no}: missing or non-string user_id")
    label = obj.get("label")
    if type(label) is not int or label not in (0, 1):
        raise CorpusFormatError(f"line {line_no}: label must be 0 or 1, got {label!r}")
    raw_posts = obj.get("posts")
    if not isinstance(raw_posts, list) or not raw_posts:
        raise CorpusFormatError(f"line {line_no}: posts must be a non-empty list")
    posts = []
    for k, raw in enumerate(raw_posts):
        if not isinstance(raw, dict) or not isinstance(raw.get("text"), str) \
                or type(raw.get("timestamp")) is not int:
            raise CorpusFormatError(
                f"line {line_no}: post {k} of user {user_id!r} is malformed")
        if raw["timestamp"] < 0:
            raise CorpusFormatError(
                f"line {line_no}: post {k} of user {user_id!r} has negative timestamp")
        posts.append(Post(raw["text"], raw["timestamp"]))
    posts.sort(key=lambda p: p.timestamp)
    return User(user_id, label, tuple(posts))
