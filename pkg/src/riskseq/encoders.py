"""Per-post text vectors and 7-class emotion distributions.

Two interchangeable encoder families: a deterministic hashing bag-of-words
encoder plus a lexicon emotion scorer (self-contained, desk scale), and
file-backed encoders that replay precomputed vectors from the embedding
interchange format (for plugging in real transformer outputs).
"""

from __future__ import annotations

import hashlib
import re
from typing import Optional

import numpy as np

from .errors import ConfigError, DataFormatError, ValidationError
from .fileio import atomic_open

EMOTION_NAMES = ("anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise")

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

# Desk-scale stand-in for a pretrained emotion classifier: a small keyword
# lexicon over the 7 classes above.
DEFAULT_LEXICON_WORDS = {
    "anger": ("angry", "furious", "rage", "mad", "hate", "annoyed", "livid"),
    "disgust": ("disgust", "disgusting", "gross", "nasty", "awful", "repulsed"),
    "fear": ("afraid", "scared", "fear", "terrified", "panic", "anxious", "worried", "dread"),
    "joy": ("happy", "joy", "great", "excited", "awesome", "love", "fun", "thrilled"),
    "neutral": ("okay", "fine", "meh", "whatever", "normal", "usual", "regular"),
    "sadness": ("sad", "depressed", "miserable", "crying", "hopeless", "regret",
                "broke", "lost", "debt", "ruined", "empty"),
    "surprise": ("surprised", "shocked", "wow", "unexpected", "sudden", "stunned"),
}


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _token_hash(token: str, seed: int) -> int:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def hashing_encode(text: str, d_text: int, seed: int) -> np.ndarray:
    """Signed feature-hashing bag of words, L2-normalized.

    Empty text (or text with no word tokens) maps to the zero vector; the
    zero vector is not normalized.
    """
    if d_text < 8:
        raise ValidationError(f"hashing encoder width must be >= 8, got {d_text}")
    vec = np.zeros(d_text, dtype=np.float64)
    for token in tokenize(text):
        h = _token_hash(token, seed)
        bucket = h % d_text
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[bucket] += sign
    norm = np.sqrt(np.sum(vec * vec))
    if norm > 0.0:
        vec /= norm
    return vec


class EmotionLexicon:
    """Maps lowercase tokens to one of 7 emotion indices."""

    def __init__(self, token_to_index: dict[str, int],
                 names: tuple[str, ...] = EMOTION_NAMES):
        if len(names) != 7 or len(set(names)) != 7:
            raise ValidationError(f"expected 7 unique emotion names, got {names!r}")
        for token, idx in token_to_index.items():
            if not 0 <= idx < 7:
                raise ValidationError(
                    f"lexicon token {token!r} maps to invalid emotion index {idx}")
        self.token_to_index = dict(token_to_index)
        self.names = tuple(names)

    @classmethod
    def from_word_lists(cls, words_by_emotion: dict[str, tuple]) -> "EmotionLexicon":
        names = tuple(words_by_emotion)
        mapping = {}
        for idx, name in enumerate(names):
            for word in words_by_emotion[name]:
                mapping[word.lower()] = idx
        return cls(mapping, names)


def default_lexicon() -> EmotionLexicon:
    return EmotionLexicon.from_word_lists(DEFAULT_LEXICON_WORDS)


def emotion_scores(text: str, lexicon: EmotionLexicon) -> np.ndarray:
    """Smoothed lexicon-hit ratios over the 7 emotion classes.

    Hit counts are normalized first, then 1/7 uniform smoothing mass is
    mixed in, so the output is strictly positive, sums to 1, and is
    invariant to repeating the text (count ratios are preserved).
    """
    counts = np.zeros(7, dtype=np.float64)
    for token in tokenize(text):
        idx = lexicon.token_to_index.get(token)
        if idx is not None:
            counts[idx] += 1.0
    total = counts.sum()
    if total > 0.0:
        counts /= total
    smoothed = counts + 1.0 / 7.0
    return smoothed / smoothed.sum()


class EmbeddingStore:
    """Precomputed (user_id, post_index) -> vector map of fixed width."""

    def __init__(self, width: int, has_emotion: bool):
        if width < 1:
            raise ValidationError(f"store width must be >= 1, got {width}")
        self.width = width
        self.has_emotion = has_emotion
        self._text: dict[tuple[str, int], np.ndarray] = {}
        self._emotion: dict[tuple[str, int], np.ndarray] = {}

    def __len__(self):
        return len(self._text)

    def keys(self):
        return self._text.keys()

    def add(self, user_id: str, post_index: int,
            vector, emotion=None) -> None:
        key = (user_id, post_index)
        if key in self._text:
            raise DataFormatError(f"duplicate embedding key {key!r}")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.width,):
            raise DataFormatError(
                f"vector for {key!r} has width {vec.shape}, store width is {self.width}")
        if self.has_emotion:
            if emotion is None:
                raise DataFormatError(f"record {key!r} is missing its emotion block")
            emo = np.asarray(emotion, dtype=np.float64)
            if emo.shape != (7,):
                raise DataFormatError(
                    f"emotion vector for {key!r} has shape {emo.shape}, expected (7,)")
            self._emotion[key] = emo
        elif emotion is not None:
            raise DataFormatError(
                f"record {key!r} carries an emotion block in an emotion-free store")
        self._text[key] = vec

    def get_text(self, user_id: str, post_index: int) -> np.ndarray:
        key = (user_id, post_index)
        if key not in self._text:
            raise ValidationError(f"no stored embedding for {key!r}")
        return self._text[key]

    def get_emotion(self, user_id: str, post_index: int) -> np.ndarray:
        if not self.has_emotion:
            raise ConfigError("store was loaded without emotion vectors")
        key = (user_id, post_index)
        if key not in self._emotion:
            raise ValidationError(f"no stored emotion vector for {key!r}")
        return self._emotion[key]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if (self.width, self.has_emotion) != (other.width, other.has_emotion):
            return False
        if set(self._text) != set(other._text):
            return False
        for key, vec in self._text.items():
            if not np.array_equal(vec, other._text[key]):
                return False
            if self.has_emotion and not np.array_equal(self._emotion[key], other._emotion[key]):
                return False
        return True


def _parse_floats(field: str, expect: int, line_no: int, what: str) -> np.ndarray:
    parts = field.split(",")
    if len(parts) != expect:
        raise DataFormatError(
            f"line {line_no}: {what} has {len(parts)} values, expected {expect}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"line {line_no}: unparseable float in {what}: {exc}") from None


def load_embedding_store(path) -> EmbeddingStore:
    """Parse the line-oriented interchange format.

    Grammar: header `#width <d>`, then one record per line:
    `user_id<TAB>post_index<TAB>v1,...,vd[<TAB>e1,...,e7]`. The emotion
    block must be present on all records or on none.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataFormatError("line 1: missing `#width <d>` header")
    header = lines[0]
    m = re.fullmatch(r"#width (\d+)", header)
    if not m:
        raise DataFormatError(f"line 1: expected `#width <d>` header, got {header!r}")
    width = int(m.group(1))
    if width < 1:
        raise DataFormatError(f"line 1: width must be >= 1, got {width}")

    store: Optional[EmbeddingStore] = None
    for offset, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) not in (3, 4):
            raise DataFormatError(
                f"line {offset}: expected 3 or 4 tab-separated fields, got {len(fields)}")
        user_id, index_field, vector_field = fields[0], fields[1], fields[2]
        if not user_id:
            raise DataFormatError(f"line {offset}: empty user_id")
        try:
            post_index = int(index_field)
        except ValueError:
            raise DataFormatError(
                f"line {offset}: post_index {index_field!r} is not an integer") from None
        if post_index < 0:
            raise DataFormatError(f"line {offset}: negative post_index {post_index}")
        has_emotion = len(fields) == 4
        if store is None:
            store = EmbeddingStore(width, has_emotion)
        elif has_emotion != store.has_emotion:
            raise DataFormatError(
                f"line {offset}: emotion block must be all-present or all-absent per file")
        vec = _parse_floats(vector_field, width, offset, f"vector for ({user_id!r}, {post_index})")
        emo = _parse_floats(fields[3], 7, offset, "emotion block") if has_emotion else None
        try:
            store.add(user_id, post_index, vec, emo)
        except DataFormatError as exc:
            raise DataFormatError(f"line {offset}: {exc}") from None
    if store is None:
        # Header-only file: a valid empty store. Emotion presence is
        # unknowable, so default to text-only.
        store = EmbeddingStore(width, has_emotion=False)
    return store


def write_embedding_store(store: EmbeddingStore, path) -> None:
    """Inverse of load_embedding_store; floats via repr so values round-trip."""
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#width {store.width}\n")
        for user_id, post_index in sorted(store.keys()):
            if "\t" in user_id or "\n" in user_id:
                raise ValidationError(f"user_id {user_id!r} contains a tab or newline")
            vec = store.get_text(user_id, post_index)
            fields = [user_id, str(post_index), ",".join(repr(v) for v in vec.tolist())]
            if store.has_emotion:
                emo = store.get_emotion(user_id, post_index)
                fields.append(",".join(repr(v) for v in emo.tolist()))
            fh.write("\t".join(fields) + "\n")


class HashingTextEncoder:
    """Deterministic bag-of-words text encoder (stand-in for a transformer)."""

    def __init__(self, d_text: int = 64, seed: int = 0):
        if d_text < 8:
            raise ValidationError(f"hashing encoder width must be >= 8, got {d_text}")
        self.width = d_text
        self.seed = seed

    def encode(self, user_id: str, post_index: int, text: str) -> np.ndarray:
        return self.encode_text(text)

    def encode_text(self, text: str) -> np.ndarray:
        return hashing_encode(text, self.width, self.seed)


class LexiconEmotionEncoder:
    """Emotion distribution scorer backed by a keyword lexicon."""

    width = 7

    def __init__(self, lexicon: Optional[EmotionLexicon] = None):
        self.lexicon = lexicon if lexicon is not None else default_lexicon()

    def encode(self, user_id: str, post_index: int, text: str) -> np.ndarray:
        return emotion_scores(text, self.lexicon)


class StoreTextEncoder:
    """Replays precomputed text vectors from an EmbeddingStore."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self.width = store.width

    def encode(self, user_id: str, post_index: int, text: str) -> np.ndarray:
        return self.store.get_text(user_id, post_index)


class StoreEmotionEncoder:
    """Replays precomputed emotion vectors from an EmbeddingStore."""

    width = 7

    def __init__(self, store: EmbeddingStore):
        if not store.has_emotion:
            raise ConfigError("embedding store has no emotion vectors")
        self.store = store

    def encode(self, user_id: str, post_index: int, text: str) -> np.ndarray:
        return self.store.get_emotion(user_id, post_index)


def encode_user(user, text_encoder, emotion_encoder):
    """Encode one user's posts into (L x d_text, L x 7) matrices.

    The two streams are produced independently, row i from post i in
    chronological order.
    """
    if not user.posts:
        raise ValidationError(f"user {user.user_id!r} has no posts")
    text_rows = [text_encoder.encode(user.user_id, i, post.text)
                 for i, post in enumerate(user.posts)]
    emotion_rows = [emotion_encoder.encode(user.user_id, i, post.text)
                    for i, post in enumerate(user.posts)]
    return np.array(text_rows, dtype=np.float64), np.array(emotion_rows, dtype=np.float64)


def concat_encode(user, text_encoder) -> np.ndarray:
    """Encode all of a user's posts joined by single spaces into one vector."""
    if not user.posts:
        raise ValidationError(f"user {user.user_id!r} has no posts")
    if not hasattr(text_encoder, "encode_text"):
        raise ConfigError(
            "concatenation baseline needs a text encoder that accepts raw text; "
            "file-backed stores hold per-post vectors only")
    joined = " ".join(post.text for post in user.posts)
    return text_encoder.encode_text(joined)
