"""Corpus data model, JSONL ingestion, synthetic generation, downsampling,
stratified splitting, time-decay computation, and sequence padding."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .encoders import DEFAULT_LEXICON_WORDS
from .errors import ConfigError, DataFormatError, ValidationError
from .fileio import atomic_open

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class Post:
    text: str
    timestamp: int


class UserRecord:
    """One user's chronological post history plus binary label."""

    def __init__(self, user_id: str, posts, label: int):
        if not posts:
            raise ValidationError(f"user {user_id!r} has no posts")
        if label not in (0, 1):
            raise ValidationError(f"user {user_id!r} has label {label!r}, expected 0 or 1")
        for a, b in zip(posts, posts[1:]):
            if b.timestamp < a.timestamp:
                raise ValidationError(
                    f"user {user_id!r} has decreasing timestamps "
                    f"({a.timestamp} then {b.timestamp})")
        for p in posts:
            if p.timestamp < 0:
                raise ValidationError(
                    f"user {user_id!r} has negative timestamp {p.timestamp}")
        self.user_id = user_id
        self.posts = list(posts)
        self.label = int(label)

    def __len__(self):
        return len(self.posts)

    def timestamps(self):
        return [p.timestamp for p in self.posts]

    def __eq__(self, other):
        if not isinstance(other, UserRecord):
            return NotImplemented
        return (self.user_id == other.user_id and self.label == other.label
                and self.posts == other.posts)


class Corpus:
    def __init__(self, users):
        self.users = list(users)
        self.n_total = len(self.users)
        self.n_negative = sum(1 for u in self.users if u.label == 0)
        self.n_positive = self.n_total - self.n_negative

    def __len__(self):
        return self.n_total

    def __iter__(self):
        return iter(self.users)


def load_corpus(path) -> Corpus:
    """Read one user per line; posts are re-sorted by timestamp (stable)."""
    users = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                raise DataFormatError(f"line {line_no}: blank line in corpus file")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"line {line_no}: invalid JSON: {exc}") from None
            users.append(_parse_user(obj, line_no))
    return Corpus(users)


def _parse_user(obj, line_no: int) -> UserRecord:
    if not isinstance(obj, dict):
        raise DataFormatError(f"line {line_no}: record is not a JSON object")
    user_id = obj.get("user_id")
    if not isinstance(user_id, str) or not user_id:
        raise DataFormatError(f"line {line_no}: missing or non-string user_id")
    label = obj.get("label")
    if type(label) is not int or label not in (0, 1):
        raise DataFormatError(f"line {line_no}: label must be 0 or 1, got {label!r}")
    raw_posts = obj.get("posts")
    if not isinstance(raw_posts, list):
        raise DataFormatError(f"line {line_no}: posts must be a list")
    if not raw_posts:
        raise ValidationError(f"line {line_no}: user {user_id!r} has an empty posts list")
    posts = []
    for k, rp in enumerate(raw_posts):
        if not isinstance(rp, dict) or not isinstance(rp.get("text"), str) \
                or type(rp.get("timestamp")) is not int:
            raise DataFormatError(
                f"line {line_no}: post {k} of user {user_id!r} is malformed")
        if rp["timestamp"] < 0:
            raise DataFormatError(
                f"line {line_no}: post {k} of user {user_id!r} has negative timestamp")
        posts.append(Post(rp["text"], rp["timestamp"]))
    posts.sort(key=lambda p: p.timestamp)
    return UserRecord(user_id, posts, label)


def save_corpus(corpus: Corpus, path) -> None:
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as fh:
        for user in corpus.users:
            obj = {
                "user_id": user.user_id,
                "label": user.label,
                "posts": [{"text": p.text, "timestamp": p.timestamp} for p in user.posts],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


def corpus_summary(corpus: Corpus) -> dict:
    counts = sorted(len(u) for u in corpus.users)
    quant = {}
    if counts:
        arr = np.asarray(counts, dtype=np.float64)
        quant = {
            "min": int(arr.min()),
            "p25": float(np.percentile(arr, 25)),
            "median": float(np.percentile(arr, 50)),
            "p75": float(np.percentile(arr, 75)),
            "max": int(arr.max()),
            "mean": float(arr.mean()),
        }
    return {
        "users": corpus.n_total,
        "positive": corpus.n_positive,
        "negative": corpus.n_negative,
        "posts_per_user": quant,
    }


# --- synthetic corpus generation ------------------------------------------

FILLER_WORDS = (
    "today morning coffee work meeting lunch walk park weather rain sunny cold "
    "warm dinner cooking recipe music song album guitar movie show series episode "
    "book reading chapter garden flowers dog cat running gym bike ride trip travel "
    "flight train weekend holiday family kids school class homework project office "
    "email phone update news article photo camera picture beach mountain hiking "
    "trail river lake city street market shopping store groceries bread cheese "
    "pizza pasta salad tea juice breakfast sleep nap dream early busy quiet slow "
    "new old small big blue green red house room kitchen table chair window door "
    "car drive road traffic friend neighbor game team match practice coach season "
    "ticket concert festival painting puzzle chess laundry repair garage plant "
    "coffee mug umbrella library museum bridge harbor island forest snow wind"
).split()

GAMBLING_WORDS = (
    "casino", "bet", "bets", "poker", "slots", "jackpot", "odds", "wager",
    "roulette", "blackjack", "stake", "parlay", "bookie", "lottery", "chips",
    "payout",
)

# Emotion words the planted (distress) posts draw from, versus the casual
# coloring of incidental mentions. Both reuse the scorer's default lexicon
# so the emotion channel can observe the difference.
DISTRESS_WORDS = tuple(DEFAULT_LEXICON_WORDS["sadness"]
                       + DEFAULT_LEXICON_WORDS["anger"]
                       + DEFAULT_LEXICON_WORDS["fear"])
CASUAL_WORDS = tuple(DEFAULT_LEXICON_WORDS["joy"] + DEFAULT_LEXICON_WORDS["neutral"])
ALL_LEXICON_WORDS = tuple(w for words in DEFAULT_LEXICON_WORDS.values() for w in words)

LATE_QUARTILE = 0.75


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for the synthetic corpus.

    signal_strength s scales every class-dependent behavior, so s=0 makes
    positive and negative users statistically identical. recency r moves the
    planting probability mass from uniform-over-positions toward the final
    quartile of each positive user's timeline.
    """

    n_users: int = 438
    n_positive: int = 24
    posts_min: int = 3
    posts_max: int = 60
    signal_strength: float = 0.8
    recency: float = 0.9
    base_plant_rate: float = 0.35
    late_plant_rate: float = 0.9
    casual_mention_rate: float = 0.12
    complaint_rate: float = 0.18
    busy_negative_rate: float = 0.2
    busy_casual_rate: float = 0.5
    recovered_negative_rate: float = 0.2
    recovered_plant_rate: float = 0.6
    recovery_silence_days: float = 30.0
    background_emotion_rate: float = 0.1
    gap_days_mean: float = 3.0
    burst_gap_days: float = 0.25
    base_time: int = 1_500_000_000

    def validate(self):
        if self.n_users < 1:
            raise ConfigError(f"n_users must be >= 1, got {self.n_users}")
        if not 0 <= self.n_positive <= self.n_users:
            raise ConfigError(
                f"n_positive {self.n_positive} must be in [0, {self.n_users}]")
        if not 1 <= self.posts_min <= self.posts_max:
            raise ConfigError(
                f"need 1 <= posts_min <= posts_max, got {self.posts_min}..{self.posts_max}")
        for name in ("signal_strength", "recency", "base_plant_rate",
                     "late_plant_rate", "casual_mention_rate",
                     "complaint_rate", "busy_negative_rate",
                     "busy_casual_rate", "recovered_negative_rate",
                     "recovered_plant_rate", "background_emotion_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.busy_negative_rate + self.recovered_negative_rate > 1.0:
            raise ConfigError("busy and recovered negative rates sum past 1")
        if self.gap_days_mean <= 0 or self.burst_gap_days < 0 \
                or self.recovery_silence_days <= 0:
            raise ConfigError("gap parameters must be positive")
        if self.base_time < 0:
            raise ConfigError(f"base_time must be >= 0, got {self.base_time}")
        return self


FULL_SCALE_SPEC = GeneratorSpec(n_users=4384, n_positive=245, posts_min=3,
                                posts_max=240)


def position_quantile(index: int, length: int) -> float:
    return index / (length - 1) if length > 1 else 1.0


def generate_synthetic(spec: GeneratorSpec, seed: int) -> Corpus:
    """Draws a corpus where the positive class is marked by gambling tokens
    co-occurring with distress-emotion mass, planted mostly late in the
    timeline, plus shortened posting gaps (bursts) over the same late
    region. Negative users are confusable on purpose: casual gambling
    mentions with joyful coloring, gambling-free distress complaints, a
    busy subpopulation whose late timeline is just as bursty and
    mention-heavy as a positive user's but stays joyful, and a recovered
    subpopulation whose third-quartile posts carry the full co-occurrence
    burst but go quiet for weeks before a clean tail. Token counts, gaps,
    or emotion coloring alone therefore separate poorly; the clean signal
    is co-occurrence that is still recent in wall-clock time."""
    spec.validate()
    rng = np.random.RandomState(seed)
    s = spec.signal_strength
    r = spec.recency
    users = []
    width = len(str(max(spec.n_users - 1, 1)))
    for i in range(spec.n_users):
        positive = i < spec.n_positive
        length = int(rng.randint(spec.posts_min, spec.posts_max + 1))
        t = spec.base_time + int(rng.randint(0, 30 * 86400))
        # both classes consume the same draws at every step, so at
        # signal 0 their streams stay exactly exchangeable
        subtype = rng.random_sample()
        busy = not positive and subtype < s * spec.busy_negative_rate
        recovered = (not positive and not busy
                     and subtype > 1.0 - s * spec.recovered_negative_rate)
        entered_late = False
        posts = []
        for j in range(length):
            q = position_quantile(j, length)
            in_late = q >= LATE_QUARTILE
            in_mid = 0.5 <= q < LATE_QUARTILE
            words = [str(w) for w in
                     rng.choice(FILLER_WORDS, size=rng.randint(6, 14))]
            planted = False
            casual = False
            complaint = False
            first_draw = rng.random_sample()
            second_draw = rng.random_sample()
            if positive:
                late_term = spec.late_plant_rate if in_late else 0.0
                p_plant = s * ((1.0 - r) * spec.base_plant_rate + r * late_term)
                planted = first_draw < p_plant
            elif recovered:
                planted = in_mid and first_draw < s * spec.recovered_plant_rate
            else:
                p_casual = s * (spec.busy_casual_rate if busy and in_late
                                else spec.casual_mention_rate)
                casual = first_draw < p_casual
                complaint = not casual and second_draw < s * spec.complaint_rate
            if planted:
                if rng.random_sample() < 0.7:
                    words += [str(w) for w in
                              rng.choice(GAMBLING_WORDS, size=rng.randint(1, 4))]
                words += [str(w) for w in
                          rng.choice(DISTRESS_WORDS, size=rng.randint(3, 6))]
            elif casual:
                words.append(str(rng.choice(GAMBLING_WORDS)))
                words += [str(w) for w in
                          rng.choice(CASUAL_WORDS, size=rng.randint(2, 5))]
            elif complaint:
                words += [str(w) for w in
                          rng.choice(DISTRESS_WORDS, size=rng.randint(2, 5))]
            if rng.random_sample() < spec.background_emotion_rate:
                words.append(str(rng.choice(ALL_LEXICON_WORDS)))
            rng.shuffle(words)
            if j > 0:
                gap_days = rng.exponential(spec.gap_days_mean)
                if ((positive or busy) and in_late) or (recovered and in_mid):
                    gap_days = (1.0 - s) * gap_days \
                        + s * spec.burst_gap_days * rng.random_sample()
                elif recovered and in_late and not entered_late:
                    silence = spec.recovery_silence_days \
                        * (0.75 + 0.5 * rng.random_sample())
                    gap_days = (1.0 - s) * gap_days + s * silence
                t += int(round(gap_days * SECONDS_PER_DAY))
            entered_late = entered_late or in_late
            posts.append(Post(" ".join(words), t))
        users.append(UserRecord(f"u{i:0{width}d}", posts, 1 if positive else 0))
    return Corpus(users)


# --- class balancing and splitting ----------------------------------------

def downsample(corpus: Corpus, seed: int) -> Corpus:
    """Keep the minority class whole; sample the majority down to its size,
    uniformly without replacement."""
    if corpus.n_positive == corpus.n_negative:
        return corpus
    minority_label = 1 if corpus.n_positive < corpus.n_negative else 0
    minority_idx = [k for k, u in enumerate(corpus.users) if u.label == minority_label]
    majority_idx = [k for k, u in enumerate(corpus.users) if u.label != minority_label]
    if not minority_idx:
        raise ValidationError("downsample: minority class is empty")
    rng = np.random.RandomState(seed)
    chosen = rng.choice(len(majority_idx), size=len(minority_idx), replace=False)
    keep = set(minority_idx) | {majority_idx[c] for c in chosen}
    return Corpus([u for k, u in enumerate(corpus.users) if k in keep])


def _largest_remainder(n: int, fractions) -> list[int]:
    exact = [n * f for f in fractions]
    counts = [int(np.floor(e)) for e in exact]
    leftover = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda k: (-(exact[k] - counts[k]), k))
    for k in order[:leftover]:
        counts[k] += 1
    return counts


def split(corpus: Corpus, fractions, seed: int):
    """Stratified (by label) partition into train/val/test Corpora."""
    if len(fractions) != 3:
        raise ConfigError(f"expected 3 split fractions, got {len(fractions)}")
    fr = [float(f) for f in fractions]
    if any(f < 0 for f in fr):
        raise ConfigError(f"split fractions must be non-negative, got {fr}")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {sum(fr)!r}")
    rng = np.random.RandomState(seed)
    buckets = ([], [], [])
    for label in (0, 1):
        members = [u for u in corpus.users if u.label == label]
        counts = _largest_remainder(len(members), fr)
        if any(c == 0 for c in counts):
            raise ValidationError(
                f"stratification failed: a split would receive zero users of class {label} "
                f"(class size {len(members)}, fractions {fr})")
        order = rng.permutation(len(members))
        at = 0
        for k, c in enumerate(counts):
            for pos in order[at:at + c]:
                buckets[k].append(members[pos])
            at += c
    return Corpus(buckets[0]), Corpus(buckets[1]), Corpus(buckets[2])


def truncate_user(user: UserRecord, max_posts: int) -> UserRecord:
    """Keep only the most recent max_posts posts (explicit-config path)."""
    if max_posts < 1:
        raise ConfigError(f"max_posts must be >= 1, got {max_posts}")
    if len(user.posts) <= max_posts:
        return user
    return UserRecord(user.user_id, user.posts[-max_posts:], user.label)


# --- decay, padding, batching ----------------------------------------------

def compute_decay(timestamps) -> np.ndarray:
    """decay[0] = 1, decay[i] = exp(-(t_i - t_{i-1}) / 86400)."""
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.ndim != 1 or ts.size < 1:
        raise ValidationError(f"expected a non-empty 1-D timestamp list, got shape {ts.shape}")
    diffs = np.diff(ts)
    if (diffs < 0).any():
        at = int(np.argmax(diffs < 0))
        raise ValidationError(
            f"timestamps decrease at position {at + 1} ({ts[at]} then {ts[at + 1]})")
    out = np.empty(ts.size, dtype=np.float64)
    out[0] = 1.0
    out[1:] = np.exp(-diffs / SECONDS_PER_DAY)
    return out


class EncodedBatch:
    """Padded per-user tensors plus validity mask.

    mask[i][j] = 1 iff j < lengths[i]; every padded position is exactly zero
    in the text, emotion, and decay tensors.
    """

    def __init__(self, text_tensor, emotion_tensor, decay, mask, labels, lengths):
        self.text_tensor = text_tensor
        self.emotion_tensor = emotion_tensor
        self.decay = decay
        self.mask = mask
        self.labels = labels
        self.lengths = lengths
        self.validate()

    @property
    def batch_size(self):
        return self.text_tensor.shape[0]

    @property
    def max_len(self):
        return self.text_tensor.shape[1]

    def validate(self):
        b, L, _ = self.text_tensor.shape
        if self.emotion_tensor.shape[:2] != (b, L) or self.emotion_tensor.shape[2] != 7:
            raise ValidationError(
                f"emotion tensor {self.emotion_tensor.shape} does not match batch ({b}, {L}, 7)")
        if self.decay.shape != (b, L) or self.mask.shape != (b, L):
            raise ValidationError("decay/mask shape does not match batch")
        if self.labels.shape != (b,) or self.lengths.shape != (b,):
            raise ValidationError("labels/lengths shape does not match batch")
        expected_mask = (np.arange(L)[None, :] < self.lengths[:, None]).astype(np.float64)
        if not np.array_equal(self.mask, expected_mask):
            raise ValidationError("mask does not equal the lengths pattern")
        pad = self.mask == 0.0
        if np.any(self.text_tensor[pad] != 0.0) or np.any(self.emotion_tensor[pad] != 0.0) \
                or np.any(self.decay[pad] != 0.0):
            raise ValidationError("padded positions must be exactly zero")
        live_decay = self.decay[self.mask == 1.0]
        if np.any(live_decay <= 0.0) or np.any(live_decay > 1.0):
            raise ValidationError("decay values must lie in (0, 1] on real positions")


def pad_and_mask(encoded_users, L_max=None) -> EncodedBatch:
    """encoded_users: list of (text L x d, emotion L x 7, decay L, label)."""
    if not encoded_users:
        raise ValidationError("cannot pad an empty batch")
    lengths = [t.shape[0] for t, _, _, _ in encoded_users]
    if L_max is None:
        L_max = max(lengths)
    if L_max < 1:
        raise ValidationError(f"L_max must be >= 1, got {L_max}")
    over = [k for k, n in enumerate(lengths) if n > L_max]
    if over:
        raise ValidationError(
            f"user at batch position {over[0]} has {lengths[over[0]]} posts, "
            f"exceeding L_max={L_max}; truncation must be requested explicitly")
    d_text = encoded_users[0][0].shape[1]
    b = len(encoded_users)
    text = np.zeros((b, L_max, d_text), dtype=np.float64)
    emotion = np.zeros((b, L_max, 7), dtype=np.float64)
    decay = np.zeros((b, L_max), dtype=np.float64)
    labels = np.zeros(b, dtype=np.int64)
    for k, (t, e, d, label) in enumerate(encoded_users):
        n = t.shape[0]
        if t.shape[1] != d_text:
            raise ValidationError(
                f"text width {t.shape[1]} at batch position {k} differs from {d_text}")
        if e.shape != (n, 7):
            raise ValidationError(
                f"emotion matrix {e.shape} at batch position {k} is not ({n}, 7)")
        if d.shape != (n,):
            raise ValidationError(
                f"decay vector {d.shape} at batch position {k} is not ({n},)")
        text[k, :n] = t
        emotion[k, :n] = e
        decay[k, :n] = d
        labels[k] = label
    lengths_arr = np.asarray(lengths, dtype=np.int64)
    mask = (np.arange(L_max)[None, :] < lengths_arr[:, None]).astype(np.float64)
    return EncodedBatch(text, emotion, decay, mask, labels, lengths_arr)
