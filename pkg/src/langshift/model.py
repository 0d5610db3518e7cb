"""Decoder-only transformer built on the numerics tape.

Pre-norm residual blocks, learned absolute positions, tanh-approximate gelu
MLPs, and a causal mask applied additively before the row softmax. The mask
value is a finite -1e9: after max-shifting, exp underflows to an exact 0.0
for every future position, so causality holds exactly while all tensor values
stay finite.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InputError, ParameterError
from .numerics import (
    Parameter,
    RngState,
    Tensor,
    add,
    backward,
    cross_entropy,
    embedding,
    gelu,
    layer_norm,
    matmul,
    mul,
    reshape,
    softmax_rows,
    transpose,
)

MASK_VALUE = -1e9
LN_EPS = 1e-5
INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    tied_output reuses the token embedding as the output projection; the
    large presets tie it so their parameter counts land at the advertised
    sizes, while the small presets keep a separate head.
    """

    n_layers: int
    d_model: int
    n_heads: int
    seq_len: int
    vocab_size: int
    preset: str = ""
    tied_output: bool = False
    init_std: float = INIT_STD

    def validate(self) -> None:
        if self.n_layers < 1 or self.d_model < 1 or self.n_heads < 1:
            raise ConfigError(f"layer/width/head counts must be positive: {self}")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.seq_len < 2:
            raise ConfigError(f"seq_len must be at least 2, got {self.seq_len}")
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be at least 2, got {self.vocab_size}")
        if self.init_std <= 0:
            raise ConfigError(f"init_std must be positive, got {self.init_std}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


PRESETS: dict[str, ModelConfig] = {
    # Desk-scale presets for tests and demos.
    "pico": ModelConfig(1, 32, 2, 64, 512, preset="pico"),
    "nano": ModelConfig(2, 64, 2, 128, 512, preset="nano"),
    # Reference-scale presets; 64K vocabulary, tied output head.
    "126m": ModelConfig(12, 768, 12, 2048, 64000, preset="126m", tied_output=True),
    "356m": ModelConfig(24, 1024, 16, 2048, 64000, preset="356m", tied_output=True),
    "1.3b": ModelConfig(24, 2048, 32, 2048, 64000, preset="1.3b", tied_output=True),
}


def get_preset(name: str, **overrides) -> ModelConfig:
    """Preset config by name, with optional field overrides."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = replace(PRESETS[name], **overrides) if overrides else PRESETS[name]
    cfg.validate()
    return cfg


class ModelParams:
    """Ordered name -> Parameter mapping for one model instance.

    One training run owns its instance exclusively; the optimizer mutates the
    buffers in place.
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, np.ndarray]):
        config.validate()
        self.config = config
        expected = parameter_shapes(config)
        if list(tensors) != list(expected):
            raise ConfigError(
                f"parameter names do not match config: got {list(tensors)[:4]}..., "
                f"expected {list(expected)[:4]}..."
            )
        self.params: dict[str, Parameter] = {}
        for name, arr in tensors.items():
            if tuple(arr.shape) != expected[name]:
                raise ConfigError(
                    f"parameter {name} has shape {tuple(arr.shape)}, expected {expected[name]}"
                )
            self.params[name] = Parameter(np.asarray(arr, dtype=np.float32), name)

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def names(self) -> list[str]:
        return list(self.params)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def num_params(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def reset_moments(self) -> None:
        for p in self.params.values():
            p.reset_moments()

    def copy(self) -> "ModelParams":
        clone = ModelParams(
            self.config, {n: p.value.data.copy() for n, p in self.params.items()}
        )
        for n, p in self.params.items():
            clone.params[n].first_moment.data[...] = p.first_moment.data
            clone.params[n].second_moment.data[...] = p.second_moment.data
        return clone


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter order and shapes for a config."""
    d, v = config.d_model, config.vocab_size
    shapes: dict[str, tuple[int, ...]] = {
        "wte": (v, d),
        "wpe": (config.seq_len, d),
    }
    for i in range(config.n_layers):
        h = f"h{i}."
        shapes[h + "ln1.gain"] = (d,)
        shapes[h + "ln1.bias"] = (d,)
        shapes[h + "attn.wq"] = (d, d)
        shapes[h + "attn.bq"] = (d,)
        shapes[h + "attn.wk"] = (d, d)
        shapes[h + "attn.bk"] = (d,)
        shapes[h + "attn.wv"] = (d, d)
        shapes[h + "attn.bv"] = (d,)
        shapes[h + "attn.wo"] = (d, d)
        shapes[h + "attn.bo"] = (d,)
        shapes[h + "ln2.gain"] = (d,)
        shapes[h + "ln2.bias"] = (d,)
        shapes[h + "mlp.w1"] = (d, 4 * d)
        shapes[h + "mlp.b1"] = (4 * d,)
        shapes[h + "mlp.w2"] = (4 * d, d)
        shapes[h + "mlp.b2"] = (d,)
    shapes["lnf.gain"] = (d,)
    shapes["lnf.bias"] = (d,)
    if not config.tied_output:
        shapes["lm_head"] = (d, v)
    return shapes


def count_parameters(config: ModelConfig) -> int:
    """Closed-form parameter count; matches ModelParams.num_params()."""
    d, v = config.d_model, config.vocab_size
    per_layer = 4 * (d * d + d) + 2 * (d + d) + (4 * d * d + 4 * d) + (4 * d * d + d)
    total = v * d + config.seq_len * d + config.n_layers * per_layer + 2 * d
    if not config.tied_output:
        total += d * v
    return total


def init_model(config: ModelConfig, rng: RngState) -> ModelParams:
    """Fresh parameters: N(0, init_std) weights, zero biases, unit gains.

    Projections that feed a residual stream (attention output, second MLP
    matrix) are drawn at init_std / sqrt(2 * n_layers) so the stream's
    variance stays flat with depth.
    """
    config.validate()
    gen = rng.generator()
    std = config.init_std
    residual_std = std / math.sqrt(2.0 * config.n_layers)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith((".gain",)):
            tensors[name] = np.ones(shape, dtype=np.float32)
        elif name.endswith((".bias", ".bq", ".bk", ".bv", ".bo", ".b1", ".b2")):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            s = residual_std if name.endswith((".attn.wo", ".mlp.w2")) else std
            tensors[name] = gen.normal(0.0, s, size=shape).astype(np.float32)
    return ModelParams(config, tensors)


def _causal_mask(t: int, dtype) -> Tensor:
    mask = np.triu(np.full((t, t), MASK_VALUE, dtype=dtype), k=1)
    return Tensor(mask)


def _linear(x: Tensor, w: Parameter, b: Parameter) -> Tensor:
    return add(matmul(x, w.value), b.value)


def forward(params: ModelParams, tokens) -> Tensor:
    """Logits (batch, time, vocab) for a batch of token id rows."""
    cfg = params.config
    tokens = np.asarray(tokens)
    if tokens.ndim != 2:
        raise InputError(f"tokens must be (batch, time), got shape {tokens.shape}")
    b, t = tokens.shape
    if b < 1 or t < 1:
        raise InputError(f"empty token batch: shape {tokens.shape}")
    if t > cfg.seq_len:
        raise InputError(f"sequence length {t} exceeds model seq_len {cfg.seq_len}")

    x = add(
        embedding(params["wte"].value, tokens),
        embedding(params["wpe"].value, np.arange(t)),
    )
    mask = _causal_mask(t, x.data.dtype)
    scale = 1.0 / math.sqrt(cfg.head_dim)

    for i in range(cfg.n_layers):
        h = f"h{i}."
        a = layer_norm(x, params[h + "ln1.gain"].value, params[h + "ln1.bias"].value, LN_EPS)
        q = _linear(a, params[h + "attn.wq"], params[h + "attn.bq"])
        k = _linear(a, params[h + "attn.wk"], params[h + "attn.bk"])
        v = _linear(a, params[h + "attn.wv"], params[h + "attn.bv"])
        # (b, t, d) -> (b, heads, t, head_dim)
        q = transpose(reshape(q, (b, t, cfg.n_heads, cfg.head_dim)), (0, 2, 1, 3))
        k = transpose(reshape(k, (b, t, cfg.n_heads, cfg.head_dim)), (0, 2, 1, 3))
        v = transpose(reshape(v, (b, t, cfg.n_heads, cfg.head_dim)), (0, 2, 1, 3))
        att = mul(matmul(q, transpose(k, (0, 1, 3, 2))), scale)
        att = softmax_rows(add(att, mask))
        out = matmul(att, v)
        out = reshape(transpose(out, (0, 2, 1, 3)), (b, t, cfg.d_model))
        out = _linear(out, params[h + "attn.wo"], params[h + "attn.bo"])
        x = add(x, out)

        m = layer_norm(x, params[h + "ln2.gain"].value, params[h + "ln2.bias"].value, LN_EPS)
        m = gelu(_linear(m, params[h + "mlp.w1"], params[h + "mlp.b1"]))
        m = _linear(m, params[h + "mlp.w2"], params[h + "mlp.b2"])
        x = add(x, m)

    x = layer_norm(x, params["lnf.gain"].value, params["lnf.bias"].value, LN_EPS)
    if cfg.tied_output:
        return matmul(x, transpose(params["wte"].value, (1, 0)))
    return matmul(x, params["lm_head"].value)


def loss_and_grads(params: ModelParams, batch) -> tuple[float, list[Tensor]]:
    """Next-token loss over a packed batch, plus gradients in parameter order.

    batch is (batch, length) token ids; inputs are batch[:, :-1] and targets
    batch[:, 1:]. Gradient buffers are zeroed first, so each call stands alone.
    """
    batch = np.asarray(batch)
    if batch.ndim != 2 or batch.shape[0] < 1 or batch.shape[1] < 2:
        raise InputError(f"batch must be (rows >= 1, length >= 2), got shape {batch.shape}")
    params.zero_grad()
    logits = forward(params, batch[:, :-1])
    loss = cross_entropy(logits, batch[:, 1:])
    backward(loss)
    return loss.item(), [p.gradient for p in params.parameters()]


def sequence_losses(params: ModelParams, rows, chunk: int = 8) -> np.ndarray:
    """Per-row mean next-token loss for a list of equal-length packed rows.

    Rows are processed in fixed chunks but each row's loss depends only on
    its own ids, so the result is independent of chunking; callers that need
    a set-level loss take the mean over this array in index order.
    """
    rows = [np.asarray(r) for r in rows]
    if not rows:
        raise InputError("no rows to evaluate")
    length = rows[0].shape[0]
    if length < 2 or any(r.shape != (length,) for r in rows):
        raise InputError("rows must share one length of at least 2")
    out = np.zeros(len(rows), dtype=np.float64)
    for lo in range(0, len(rows), chunk):
        batch = np.stack(rows[lo : lo + chunk])
        logits = forward(params, batch[:, :-1]).data
        flat = logits.reshape(-1, logits.shape[-1])
        ids = batch[:, 1:].reshape(-1)
        z = flat - flat.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        nll = lse - z[np.arange(flat.shape[0]), ids]
        out[lo : lo + batch.shape[0]] = nll.reshape(batch.shape[0], -1).mean(axis=1)
    return out


def sample_next(params: ModelParams, context, temperature: float, rng: RngState) -> int:
    """Draw one next-token id from the temperature-scaled distribution.

    temperature -> 0 approaches argmax; the draw consumes one rng counter,
    so a fixed RngState gives a fixed token.
    """
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    context = np.asarray(context)
    if context.ndim != 1 or context.size < 1:
        raise InputError(f"context must be a non-empty id row, got shape {context.shape}")
    logits = forward(params, context[None, :]).data[0, -1].astype(np.float64)
    z = logits / temperature
    z -= z.max()
    probs = np.exp(z)
    probs /= probs.sum()
    u = rng.draw().random()
    return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, probs.size - 1))
