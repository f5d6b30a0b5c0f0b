"""Recurrent architectures over padded post sequences.

A text stream (and optionally an emotion stream) runs through a masked
LSTM or GRU; the streams are fused by element-wise product, scaled by the
per-post time-decay factors, pooled (additive self-attention or masked
mean), and classified by a softmax head. Backward passes are hand-derived
BPTT; masked timesteps copy state through unchanged and contribute no
gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .numeric import ParameterSet, dropout_mask, softmax

EMOTION_WIDTH = 7

# architecture -> (cell, dropout?, decay?, emotion?, attention?)
ARCHITECTURES = {
    "TextBaseline": (None, False, False, False, False),
    "GRUd": ("gru", True, False, False, False),
    "GRUdTd": ("gru", True, True, False, False),
    "LSTM": ("lstm", False, False, False, False),
    "LSTMTd": ("lstm", False, True, False, False),
    "LSTMTdA": ("lstm", False, True, False, True),
    "EmoLSTMTd": ("lstm", False, True, True, False),
    "EmoLSTMTdA": ("lstm", False, True, True, True),
}

SEQUENTIAL_ARCHITECTURES = tuple(a for a in ARCHITECTURES if a != "TextBaseline")

POOL_MODES = ("mean", "last")


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    d_text: int = 64
    hidden_size: int = 64
    dropout_rate: float = 0.0
    use_decay: bool = False
    use_emotion: bool = False
    use_attention: bool = False
    pool: str = "mean"
    init_seed: int = 0

    @classmethod
    def for_architecture(cls, architecture: str, d_text: int = 64,
                         hidden_size: int = 64, dropout_rate=None,
                         pool: str = "mean", init_seed: int = 0) -> "ModelConfig":
        if architecture not in ARCHITECTURES:
            raise ConfigError(
                f"unknown architecture {architecture!r}; choose from "
                f"{sorted(ARCHITECTURES)}")
        _, has_dropout, decay, emotion, attention = ARCHITECTURES[architecture]
        if dropout_rate is None:
            dropout_rate = 0.3 if has_dropout else 0.0
        return cls(architecture=architecture, d_text=d_text,
                   hidden_size=hidden_size, dropout_rate=dropout_rate,
                   use_decay=decay, use_emotion=emotion,
                   use_attention=attention, pool=pool,
                   init_seed=init_seed).validate()

    def validate(self) -> "ModelConfig":
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        cell, has_dropout, decay, emotion, attention = ARCHITECTURES[self.architecture]
        if (self.use_decay, self.use_emotion, self.use_attention) != (decay, emotion, attention):
            raise ConfigError(
                f"flags (decay={self.use_decay}, emotion={self.use_emotion}, "
                f"attention={self.use_attention}) are inconsistent with "
                f"architecture {self.architecture}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.dropout_rate > 0.0 and not has_dropout:
            raise ConfigError(
                f"architecture {self.architecture} does not take dropout")
        if self.hidden_size < 1:
            raise ConfigError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if self.d_text < 1:
            raise ConfigError(f"d_text must be >= 1, got {self.d_text}")
        if self.pool not in POOL_MODES:
            raise ConfigError(f"pool must be 'mean' or 'last', got {self.pool!r}")
        return self

    @property
    def cell(self):
        return ARCHITECTURES[self.architecture][0]

    @property
    def is_sequential(self):
        return self.cell is not None


def parameter_shapes(config: ModelConfig) -> dict:
    """Name -> shape map, in creation order."""
    h = config.hidden_size
    d = config.d_text
    if not config.is_sequential:
        return {"head.W": (d, 2), "head.b": (2,)}
    gates = 4 * h if config.cell == "lstm" else 3 * h
    shapes = {"text.W": (d, gates), "text.U": (h, gates), "text.b": (gates,)}
    if config.use_emotion:
        shapes.update({"emotion.W": (EMOTION_WIDTH, gates),
                       "emotion.U": (h, gates), "emotion.b": (gates,)})
    if config.use_attention:
        shapes.update({"attention.W": (h, h), "attention.b": (h,),
                       "attention.v": (h,)})
    shapes.update({"head.W": (h, 2), "head.b": (2,)})
    return shapes


def init_params(config: ModelConfig) -> ParameterSet:
    """Uniform [-1/sqrt(h), 1/sqrt(h)] draws, seeded; the baseline head uses
    1/sqrt(d_text) since it has no hidden layer."""
    config.validate()
    rng = np.random.RandomState(config.init_seed)
    scale = 1.0 / np.sqrt(config.hidden_size if config.is_sequential else config.d_text)
    params = ParameterSet()
    for name, shape in parameter_shapes(config).items():
        params.add(name, rng.uniform(-scale, scale, size=shape))
    return params


def check_params(config: ModelConfig, params: ParameterSet) -> None:
    for name, shape in parameter_shapes(config).items():
        if name not in params:
            raise ConfigError(f"parameter set is missing {name!r} for {config.architecture}")
        if params[name].shape != shape:
            raise ConfigError(
                f"parameter {name!r} has shape {params[name].shape}, "
                f"expected {shape} for {config.architecture}")


# --- recurrent cells --------------------------------------------------------

def _check_cell_shapes(inputs, mask, w, u, b, gates_per_h):
    if inputs.ndim != 3:
        raise DimensionError(f"expected (b, L, d) inputs, got {inputs.shape}")
    bsz, L, d = inputs.shape
    h = u.shape[0]
    if w.shape != (d, gates_per_h * h):
        raise DimensionError(
            f"input weight {w.shape} does not conform to inputs {inputs.shape} "
            f"with hidden size {h}")
    if u.shape != (h, gates_per_h * h) or b.shape != (gates_per_h * h,):
        raise DimensionError(
            f"recurrent weight {u.shape} / bias {b.shape} malformed for hidden size {h}")
    if mask.shape != (bsz, L):
        raise DimensionError(f"mask {mask.shape} does not match inputs {inputs.shape}")
    return bsz, L, h


def lstm_forward(inputs, mask, w, u, b):
    """Returns (hidden states (b, L, h), cache). Zero initial state; steps
    with mask 0 copy hidden and cell state through unchanged."""
    bsz, L, h = _check_cell_shapes(inputs, mask, w, u, b, 4)
    H = np.zeros((bsz, L, h))
    cache = {"i": np.zeros((bsz, L, h)), "f": np.zeros((bsz, L, h)),
             "g": np.zeros((bsz, L, h)), "o": np.zeros((bsz, L, h)),
             "tc": np.zeros((bsz, L, h)), "c_prev": np.zeros((bsz, L, h)),
             "h_prev": np.zeros((bsz, L, h)), "inputs": inputs, "mask": mask}
    h_t = np.zeros((bsz, h))
    c_t = np.zeros((bsz, h))
    for t in range(L):
        m = mask[:, t:t + 1]
        x = inputs[:, t]
        cache["h_prev"][:, t] = h_t
        cache["c_prev"][:, t] = c_t
        pre = x @ w + h_t @ u + b
        i = _sigmoid(pre[:, :h])
        f = _sigmoid(pre[:, h:2 * h])
        g = np.tanh(pre[:, 2 * h:3 * h])
        o = _sigmoid(pre[:, 3 * h:])
        c_hat = f * c_t + i * g
        tc = np.tanh(c_hat)
        h_hat = o * tc
        c_t = m * c_hat + (1.0 - m) * c_t
        h_t = m * h_hat + (1.0 - m) * h_t
        cache["i"][:, t] = i
        cache["f"][:, t] = f
        cache["g"][:, t] = g
        cache["o"][:, t] = o
        cache["tc"][:, t] = tc
        H[:, t] = h_t
    return H, cache


def lstm_backward(d_H, cache, w, u):
    """BPTT for lstm_forward. Returns (dW, dU, db, d_inputs)."""
    inputs, mask = cache["inputs"], cache["mask"]
    bsz, L, d = inputs.shape
    h = u.shape[0]
    dW = np.zeros_like(w)
    dU = np.zeros_like(u)
    db = np.zeros(4 * h)
    d_inputs = np.zeros_like(inputs)
    dh_next = np.zeros((bsz, h))
    dc_next = np.zeros((bsz, h))
    for t in range(L - 1, -1, -1):
        m = mask[:, t:t + 1]
        i, f, g, o = (cache[k][:, t] for k in ("i", "f", "g", "o"))
        tc = cache["tc"][:, t]
        c_prev = cache["c_prev"][:, t]
        h_prev = cache["h_prev"][:, t]
        dh = d_H[:, t] + dh_next
        dc = dc_next
        dh_hat = m * dh
        dh_carry = (1.0 - m) * dh
        dc_hat = m * dc
        dc_carry = (1.0 - m) * dc
        do = dh_hat * tc
        dc_hat = dc_hat + dh_hat * o * (1.0 - tc * tc)
        df = dc_hat * c_prev
        di = dc_hat * g
        dg = dc_hat * i
        dc_prev = dc_hat * f + dc_carry
        dpre = np.concatenate([di * i * (1.0 - i),
                               df * f * (1.0 - f),
                               dg * (1.0 - g * g),
                               do * o * (1.0 - o)], axis=1)
        dW += inputs[:, t].T @ dpre
        dU += h_prev.T @ dpre
        db += dpre.sum(axis=0)
        d_inputs[:, t] = dpre @ w.T
        dh_next = dh_carry + dpre @ u.T
        dc_next = dc_prev
    return dW, dU, db, d_inputs


def gru_forward(inputs, mask, w, u, b):
    """Update/reset-gate GRU: h_t = (1 - z) * h_prev + z * h_tilde, with the
    same masked copy-through semantics as lstm_forward."""
    bsz, L, h = _check_cell_shapes(inputs, mask, w, u, b, 3)
    H = np.zeros((bsz, L, h))
    cache = {"z": np.zeros((bsz, L, h)), "r": np.zeros((bsz, L, h)),
             "ht": np.zeros((bsz, L, h)), "rh": np.zeros((bsz, L, h)),
             "h_prev": np.zeros((bsz, L, h)), "inputs": inputs, "mask": mask}
    h_t = np.zeros((bsz, h))
    for t in range(L):
        m = mask[:, t:t + 1]
        x = inputs[:, t]
        cache["h_prev"][:, t] = h_t
        pre_x = x @ w + b
        pre_h = h_t @ u
        z = _sigmoid(pre_x[:, :h] + pre_h[:, :h])
        r = _sigmoid(pre_x[:, h:2 * h] + pre_h[:, h:2 * h])
        rh = r * h_t
        h_tilde = np.tanh(pre_x[:, 2 * h:] + rh @ u[:, 2 * h:])
        h_hat = (1.0 - z) * h_t + z * h_tilde
        h_t = m * h_hat + (1.0 - m) * h_t
        cache["z"][:, t] = z
        cache["r"][:, t] = r
        cache["ht"][:, t] = h_tilde
        cache["rh"][:, t] = rh
        H[:, t] = h_t
    return H, cache


def gru_backward(d_H, cache, w, u):
    """BPTT for gru_forward. Returns (dW, dU, db, d_inputs)."""
    inputs, mask = cache["inputs"], cache["mask"]
    bsz, L, d = inputs.shape
    h = u.shape[0]
    dW = np.zeros_like(w)
    dU = np.zeros_like(u)
    db = np.zeros(3 * h)
    d_inputs = np.zeros_like(inputs)
    dh_next = np.zeros((bsz, h))
    for t in range(L - 1, -1, -1):
        m = mask[:, t:t + 1]
        z, r, h_tilde, rh = (cache[k][:, t] for k in ("z", "r", "ht", "rh"))
        h_prev = cache["h_prev"][:, t]
        dh = d_H[:, t] + dh_next
        dh_hat = m * dh
        dh_prev = (1.0 - m) * dh
        dz = dh_hat * (h_tilde - h_prev)
        dh_tilde = dh_hat * z
        dh_prev = dh_prev + dh_hat * (1.0 - z)
        da = dh_tilde * (1.0 - h_tilde * h_tilde)
        drh = da @ u[:, 2 * h:].T
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r
        dpre_z = dz * z * (1.0 - z)
        dpre_r = dr * r * (1.0 - r)
        dpre = np.concatenate([dpre_z, dpre_r, da], axis=1)
        dW += inputs[:, t].T @ dpre
        db += dpre.sum(axis=0)
        dU[:, :2 * h] += h_prev.T @ np.concatenate([dpre_z, dpre_r], axis=1)
        dU[:, 2 * h:] += rh.T @ da
        d_inputs[:, t] = dpre @ w.T
        dh_prev = dh_prev + np.concatenate([dpre_z, dpre_r], axis=1) @ u[:, :2 * h].T
        dh_next = dh_prev
    return dW, dU, db, d_inputs


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# --- fusion, decay, pooling -------------------------------------------------

def fuse(h_text, h_emotion):
    """Element-wise product of the two stream's hidden state tensors."""
    if h_text.shape != h_emotion.shape:
        raise DimensionError(
            f"cannot fuse streams of shapes {h_text.shape} and {h_emotion.shape}")
    return h_text * h_emotion


def apply_decay(h_fused, decay):
    """Scale each timestep's hidden vector by its decay factor."""
    if decay.shape != h_fused.shape[:2]:
        raise DimensionError(
            f"decay {decay.shape} does not match hidden states {h_fused.shape}")
    if np.any(decay < 0.0) or np.any(decay > 1.0):
        raise ValidationError("decay factors must lie in [0, 1]")
    return h_fused * decay[:, :, None]


def attention_pool(h_combined, mask, w, u_bias, v):
    """Additive self-attention: score_j = v . tanh(W h_j + b), softmax over
    the masked-in positions only. Padded positions get weight exactly 0.

    Rows are reduced over their own real length so the result is bit-equal
    regardless of how far the batch is padded.
    """
    bsz, L, h = h_combined.shape
    if w.shape != (h, h) or u_bias.shape != (h,) or v.shape != (h,):
        raise DimensionError(
            f"attention parameters {(w.shape, u_bias.shape, v.shape)} do not "
            f"match hidden size {h}")
    lengths = mask.sum(axis=1).astype(np.int64)
    att_out = np.zeros((bsz, h))
    weights = np.zeros((bsz, L))
    cache = {"u": [], "lengths": lengths, "h": h_combined}
    for row in range(bsz):
        n = int(lengths[row])
        if n == 0:
            raise ValidationError(f"attention over a fully-masked row {row}")
        if np.any(mask[row, :n] != 1.0) or np.any(mask[row, n:] != 0.0):
            raise ValidationError("mask must be a contiguous prefix of ones")
        states = h_combined[row, :n]
        u_rows = np.tanh(states @ w + u_bias)
        scores = u_rows @ v
        shifted = np.exp(scores - scores.max())
        w_row = shifted / shifted.sum()
        weights[row, :n] = w_row
        att_out[row] = w_row @ states
        cache["u"].append(u_rows)
    return att_out, weights, cache


def attention_backward(d_att, weights, cache, w, v):
    """Returns (dW, db, dv, d_h_combined) for attention_pool."""
    h_combined = cache["h"]
    lengths = cache["lengths"]
    dW = np.zeros_like(w)
    db = np.zeros(w.shape[0])
    dv = np.zeros_like(v)
    d_h = np.zeros_like(h_combined)
    for row in range(h_combined.shape[0]):
        n = int(lengths[row])
        states = h_combined[row, :n]
        u_rows = cache["u"][row]
        w_row = weights[row, :n]
        dw_row = states @ d_att[row]
        d_h[row, :n] += np.outer(w_row, d_att[row])
        dscore = w_row * (dw_row - float(w_row @ dw_row))
        dv += u_rows.T @ dscore
        du = np.outer(dscore, v) * (1.0 - u_rows * u_rows)
        dW += states.T @ du
        db += du.sum(axis=0)
        d_h[row, :n] += du @ w.T
    return dW, db, dv, d_h


def mean_pool(h_states, mask):
    """Mean over masked-in timesteps, reduced per row over its real length."""
    bsz, L, h = h_states.shape
    lengths = mask.sum(axis=1).astype(np.int64)
    out = np.zeros((bsz, h))
    for row in range(bsz):
        n = int(lengths[row])
        if n == 0:
            raise ValidationError(f"mean pooling over a fully-masked row {row}")
        out[row] = h_states[row, :n].sum(axis=0) / n
    return out


def mean_pool_backward(d_out, mask, shape):
    d_h = np.zeros(shape)
    lengths = mask.sum(axis=1).astype(np.int64)
    for row in range(shape[0]):
        n = int(lengths[row])
        d_h[row, :n] = d_out[row] / n
    return d_h


def last_pool(h_states, mask):
    """Hidden state at each row's final real timestep."""
    lengths = mask.sum(axis=1).astype(np.int64)
    bsz, L, h = h_states.shape
    out = np.zeros((bsz, h))
    for row in range(bsz):
        n = int(lengths[row])
        if n == 0:
            raise ValidationError(f"last pooling over a fully-masked row {row}")
        out[row] = h_states[row, n - 1]
    return out


def last_pool_backward(d_out, mask, shape):
    d_h = np.zeros(shape)
    lengths = mask.sum(axis=1).astype(np.int64)
    for row in range(shape[0]):
        d_h[row, int(lengths[row]) - 1] = d_out[row]
    return d_h


# --- full architectures -----------------------------------------------------

class ForwardTrace:
    """Everything forward computed, plus the caches backward needs."""

    def __init__(self, config, batch, Y, pooled, H_text=None, H_emotion=None,
                 H_fused=None, H_combined=None, attention_weights=None,
                 caches=None, training=False, emotion_overridden=False):
        self.config = config
        self.batch = batch
        self.Y = Y
        self.pooled = pooled
        self.H_text = H_text
        self.H_emotion = H_emotion
        self.H_fused = H_fused
        self.H_combined = H_combined
        self.attention_weights = attention_weights
        self.caches = caches or {}
        self.training = training
        self.emotion_overridden = emotion_overridden


def text_baseline_forward(params, vectors):
    """Softmax(FC(vector)) on one concatenation-encoded vector per user."""
    w, b = params["head.W"], params["head.b"]
    if vectors.ndim != 2 or vectors.shape[1] != w.shape[0]:
        raise DimensionError(
            f"input vectors {vectors.shape} do not match head weight {w.shape}")
    return softmax(vectors @ w + b)


def forward(config: ModelConfig, params: ParameterSet, batch, training=False,
            dropout_seed=0, emotion_hidden_override=None) -> ForwardTrace:
    """Run the architecture named by config over one padded batch."""
    config.validate()
    check_params(config, params)
    if not config.is_sequential:
        if batch.max_len != 1:
            raise ConfigError(
                "the concatenation baseline consumes single-vector batches "
                f"(got padded length {batch.max_len})")
        vectors = batch.text_tensor[:, 0, :]
        Y = text_baseline_forward(params, vectors)
        return ForwardTrace(config, batch, Y, pooled=vectors,
                            caches={"baseline": vectors}, training=training)

    if batch.text_tensor.shape[2] != config.d_text:
        raise ConfigError(
            f"batch text width {batch.text_tensor.shape[2]} does not match "
            f"configured d_text {config.d_text}")
    cell_fwd = lstm_forward if config.cell == "lstm" else gru_forward
    caches = {}
    H_text, caches["text"] = cell_fwd(
        batch.text_tensor, batch.mask, params["text.W"], params["text.U"],
        params["text.b"])
    if config.dropout_rate > 0.0 and training:
        mask_d = dropout_mask(H_text.shape, config.dropout_rate, dropout_seed)
        H_text = H_text * mask_d
        caches["dropout"] = mask_d
    H_emotion = None
    emotion_overridden = emotion_hidden_override is not None
    if config.use_emotion:
        if emotion_overridden:
            H_emotion = np.asarray(emotion_hidden_override, dtype=np.float64)
            if H_emotion.shape != H_text.shape:
                raise DimensionError(
                    f"emotion override {H_emotion.shape} does not match "
                    f"hidden states {H_text.shape}")
        else:
            H_emotion, caches["emotion"] = cell_fwd(
                batch.emotion_tensor, batch.mask, params["emotion.W"],
                params["emotion.U"], params["emotion.b"])
        H_fused = fuse(H_text, H_emotion)
    else:
        H_fused = H_text
    H_combined = apply_decay(H_fused, batch.decay) if config.use_decay else H_fused
    attention_weights = None
    if config.use_attention:
        pooled, attention_weights, caches["attention"] = attention_pool(
            H_combined, batch.mask, params["attention.W"],
            params["attention.b"], params["attention.v"])
    elif config.pool == "mean":
        pooled = mean_pool(H_combined, batch.mask)
    else:
        pooled = last_pool(H_combined, batch.mask)
    Y = softmax(pooled @ params["head.W"] + params["head.b"])
    return ForwardTrace(config, batch, Y, pooled, H_text=H_text,
                        H_emotion=H_emotion, H_fused=H_fused,
                        H_combined=H_combined,
                        attention_weights=attention_weights, caches=caches,
                        training=training, emotion_overridden=emotion_overridden)


def backward(config: ModelConfig, params: ParameterSet, trace: ForwardTrace,
             targets):
    """Gradients of the mean binary cross-entropy of trace.Y against targets.

    Returns (parameter gradients, input gradients); input gradients cover
    the text tensor and, when an emotion stream ran, the emotion tensor.
    Decay factors and dropout masks are constants.
    """
    targets = np.asarray(targets)
    Y = trace.Y
    n = Y.shape[0]
    if targets.shape != (n,):
        raise ValidationError(f"targets {targets.shape} do not match batch size {n}")
    one_hot = np.zeros_like(Y)
    one_hot[np.arange(n), targets] = 1.0
    d_logits = (Y - one_hot) / n

    if not config.is_sequential:
        vectors = trace.caches.get("baseline")
        if vectors is None:
            raise ValidationError("forward trace is missing cached activations")
        grads = {"head.W": vectors.T @ d_logits, "head.b": d_logits.sum(axis=0)}
        return grads, {"text": (d_logits @ params["head.W"].T)[:, None, :]}

    if "text" not in trace.caches:
        raise ValidationError("forward trace is missing cached activations")
    grads = {"head.W": trace.pooled.T @ d_logits, "head.b": d_logits.sum(axis=0)}
    d_pooled = d_logits @ params["head.W"].T
    mask = trace.batch.mask

    if config.use_attention:
        dW, db, dv, d_combined = attention_backward(
            d_pooled, trace.attention_weights, trace.caches["attention"],
            params["attention.W"], params["attention.v"])
        grads["attention.W"] = dW
        grads["attention.b"] = db
        grads["attention.v"] = dv
    elif config.pool == "mean":
        d_combined = mean_pool_backward(d_pooled, mask, trace.H_combined.shape)
    else:
        d_combined = last_pool_backward(d_pooled, mask, trace.H_combined.shape)

    d_fused = d_combined * trace.batch.decay[:, :, None] if config.use_decay \
        else d_combined

    input_grads = {}
    cell_bwd = lstm_backward if config.cell == "lstm" else gru_backward
    if config.use_emotion:
        d_text_states = d_fused * trace.H_emotion
        if not trace.emotion_overridden:
            d_emotion_states = d_fused * trace.H_text
            dW, dU, db, d_emotion_in = cell_bwd(
                d_emotion_states, trace.caches["emotion"],
                params["emotion.W"], params["emotion.U"])
            grads["emotion.W"] = dW
            grads["emotion.U"] = dU
            grads["emotion.b"] = db
            input_grads["emotion"] = d_emotion_in
    else:
        d_text_states = d_fused
    if "dropout" in trace.caches:
        d_text_states = d_text_states * trace.caches["dropout"]
    dW, dU, db, d_text_in = cell_bwd(d_text_states, trace.caches["text"],
                                     params["text.W"], params["text.U"])
    grads["text.W"] = dW
    grads["text.U"] = dU
    grads["text.b"] = db
    input_grads["text"] = d_text_in
    return grads, input_grads
