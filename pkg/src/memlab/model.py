"""Decoder-style transformer for causal and masked language modeling.

One architecture serves both objectives: the causal task applies a strict
lower-triangular attention mask, the masked task attends bidirectionally.
Blocks are pre-layer-norm, positions are learned absolute embeddings, and
input/output embeddings are tied unless configured otherwise. Dropout and
weight decay are permanently zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, InputError
from .tensor import Tensor

CAUSAL = "causal"
MASKED = "masked"


@dataclass
class TransformerConfig:
    n_layers: int
    n_heads: int
    d_model: int
    vocab_size: int
    d_ffn: int | None = None
    max_seq_len: int = 512
    task: str = CAUSAL
    tie_embeddings: bool = True

    def __post_init__(self):
        if self.d_ffn is None:
            self.d_ffn = 4 * self.d_model
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )
        if self.max_seq_len < 2:
            raise ConfigError("max_seq_len must be >= 2")
        if self.task not in (CAUSAL, MASKED):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.n_layers < 0 or self.vocab_size < 1:
            raise ConfigError("n_layers must be >= 0 and vocab_size >= 1")

    @property
    def param_count(self) -> int:
        """Exact number of scalar learnable parameters (closed form)."""
        d, f, v = self.d_model, self.d_ffn, self.vocab_size
        per_layer = (
            2 * d                      # ln1 gain+bias
            + 3 * (d * d + d)          # q, k, v projections
            + (d * d + d)              # output projection
            + 2 * d                    # ln2 gain+bias
            + (d * f + f)              # ffn in
            + (f * d + d)              # ffn out
        )
        total = v * d + self.max_seq_len * d + self.n_layers * per_layer + 2 * d
        if not self.tie_embeddings:
            total += d * v
        return total

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_model": self.d_model,
            "vocab_size": self.vocab_size,
            "d_ffn": self.d_ffn,
            "max_seq_len": self.max_seq_len,
            "task": self.task,
            "tie_embeddings": self.tie_embeddings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformerConfig":
        return cls(**d)


# Architecture presets. The paper-scale rows carry their published max LR and
# global batch size (tokens per update); the harness refuses to train them
# without an explicit override. The desk grid spans roughly two orders of
# magnitude in parameter count at desk vocabularies; desk-mini sits between
# tiny and small to give sweeps on weak machines a fourth cheap point.
PRESETS: dict[str, dict] = {
    "paper-125M": dict(n_layers=12, n_heads=12, d_model=768, lr=6.0e-4, batch_tokens=500_000),
    "paper-355M": dict(n_layers=24, n_heads=16, d_model=1024, lr=3.0e-4, batch_tokens=500_000),
    "paper-1.3B": dict(n_layers=24, n_heads=32, d_model=2048, lr=2.0e-4, batch_tokens=1_000_000),
    "paper-2.7B": dict(n_layers=32, n_heads=32, d_model=2560, lr=1.6e-4, batch_tokens=1_000_000),
    "paper-6.7B": dict(n_layers=32, n_heads=32, d_model=4096, lr=1.2e-4, batch_tokens=2_000_000),
    "paper-13B": dict(n_layers=40, n_heads=40, d_model=5120, lr=1.0e-4, batch_tokens=2_000_000),
    "desk-tiny": dict(n_layers=2, n_heads=2, d_model=64),
    "desk-mini": dict(n_layers=3, n_heads=4, d_model=96),
    "desk-small": dict(n_layers=4, n_heads=4, d_model=128),
    "desk-mid": dict(n_layers=4, n_heads=6, d_model=192),
    "desk-medium": dict(n_layers=6, n_heads=8, d_model=256),
    "desk-large": dict(n_layers=8, n_heads=8, d_model=384),
    "desk-xlarge": dict(n_layers=10, n_heads=8, d_model=512),
}

DESK_GRID = ["desk-tiny", "desk-mini", "desk-small", "desk-mid", "desk-medium",
             "desk-large", "desk-xlarge"]

# Max-LR anchors from the published scale table: (param count, max LR).
_LR_ANCHORS = [
    (125e6, 6.0e-4),
    (355e6, 3.0e-4),
    (1.3e9, 2.0e-4),
    (2.7e9, 1.6e-4),
    (6.7e9, 1.2e-4),
    (13e9, 1.0e-4),
]


def max_lr_for_params(n_params: int) -> float:
    """Geometric interpolation of the published (N, LR) anchors.

    Least-squares power law lr = a * N^b through the six anchors,
    evaluated at any N. Desk-scale N extrapolates to a few 1e-3.
    """
    logs_n = np.log([n for n, _ in _LR_ANCHORS])
    logs_lr = np.log([lr for _, lr in _LR_ANCHORS])
    b, log_a = np.polyfit(logs_n, logs_lr, 1)
    return float(np.exp(log_a + b * math.log(n_params)))


def config_from_preset(
    name: str,
    vocab_size: int,
    task: str = CAUSAL,
    max_seq_len: int = 512,
    tie_embeddings: bool = True,
) -> TransformerConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    p = PRESETS[name]
    return TransformerConfig(
        n_layers=p["n_layers"],
        n_heads=p["n_heads"],
        d_model=p["d_model"],
        vocab_size=vocab_size,
        max_seq_len=max_seq_len,
        task=task,
        tie_embeddings=tie_embeddings,
    )


@dataclass
class ModelState:
    """A configuration plus all learnable parameters.

    Parameter names and shapes are fully determined by the config, so
    serialization round-trips are bit-exact.
    """

    config: TransformerConfig
    params: dict[str, Tensor]
    rng_seed: int
    dtype: np.dtype = field(default=np.dtype(np.float32))

    def named_parameters(self):
        return self.params.items()


def param_shapes(config: TransformerConfig) -> dict[str, tuple]:
    d, f, v = config.d_model, config.d_ffn, config.vocab_size
    shapes: dict[str, tuple] = {
        "tok_emb": (v, d),
        "pos_emb": (config.max_seq_len, d),
    }
    for i in range(config.n_layers):
        pre = f"h{i}."
        shapes[pre + "ln1.g"] = (d,)
        shapes[pre + "ln1.b"] = (d,)
        for nm in ("wq", "wk", "wv", "wo"):
            shapes[pre + f"attn.{nm}"] = (d, d)
        for nm in ("bq", "bk", "bv", "bo"):
            shapes[pre + f"attn.{nm}"] = (d,)
        shapes[pre + "ln2.g"] = (d,)
        shapes[pre + "ln2.b"] = (d,)
        shapes[pre + "ffn.w1"] = (d, f)
        shapes[pre + "ffn.b1"] = (f,)
        shapes[pre + "ffn.w2"] = (f, d)
        shapes[pre + "ffn.b2"] = (d,)
    shapes["ln_f.g"] = (d,)
    shapes["ln_f.b"] = (d,)
    if not config.tie_embeddings:
        shapes["w_out"] = (d, v)
    return shapes


def build_model(config: TransformerConfig, seed: int, dtype=np.float32) -> ModelState:
    """Initialize parameters from seeded normal(0, 0.02); LN gains 1, biases 0."""
    rng = np.random.Generator(np.random.PCG64(seed))
    dtype = np.dtype(dtype)
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("g",):
            data = np.ones(shape, dtype=dtype)
        elif leaf in ("b", "bq", "bk", "bv", "bo", "b1", "b2"):
            data = np.zeros(shape, dtype=dtype)
        else:
            data = rng.normal(0.0, 0.02, size=shape).astype(dtype)
        params[name] = Tensor(data, requires_grad=True)
    return ModelState(config=config, params=params, rng_seed=seed, dtype=dtype)


def _causal_mask(t: int, dtype) -> np.ndarray:
    m = np.zeros((t, t), dtype=dtype)
    m[np.triu_indices(t, k=1)] = T.MASK_NEG
    return m


_MASK_CACHE: dict[tuple, np.ndarray] = {}


def _cached_causal_mask(t: int, dtype) -> np.ndarray:
    key = (t, np.dtype(dtype).str)
    if key not in _MASK_CACHE:
        _MASK_CACHE[key] = _causal_mask(t, dtype)
    return _MASK_CACHE[key]


def forward(model: ModelState, batch: np.ndarray, lengths: np.ndarray | None = None) -> Tensor:
    """Teacher-forced logits for a batch of token ids.

    ``batch`` is (B, T) int; sequences shorter than T are right-padded and
    ``lengths`` gives the valid prefix per row. For the causal task padding
    needs no mask (pad sits after every valid query); for the masked task
    padded key columns are masked out so they cannot leak into valid rows.
    Returns logits of shape (B, T, V).
    """
    cfg = model.config
    b, t = batch.shape
    if t > cfg.max_seq_len:
        raise InputError(f"sequence length {t} exceeds max_seq_len {cfg.max_seq_len}")
    if batch.max() >= cfg.vocab_size or batch.min() < 0:
        raise InputError("token id out of vocabulary range")
    p = model.params
    d, h = cfg.d_model, cfg.n_heads
    hd = d // h
    dtype = model.dtype

    x = T.add(T.embedding(p["tok_emb"], batch), T.slice_rows(p["pos_emb"], t))  # (B,T,d)
    x = T.reshape(x, (b * t, d))

    if cfg.task == CAUSAL:
        mask = _cached_causal_mask(t, dtype)  # (T,T), broadcast over (B,H)
    else:
        if lengths is not None and (np.asarray(lengths) < t).any():
            key_pad = np.zeros((b, 1, 1, t), dtype=dtype)
            cols = np.arange(t)[None, :] >= np.asarray(lengths)[:, None]
            key_pad[:, 0, 0, :] = np.where(cols, T.MASK_NEG, 0.0).astype(dtype)
            mask = key_pad
        else:
            mask = None

    inv_sqrt_hd = 1.0 / math.sqrt(hd)
    for i in range(cfg.n_layers):
        pre = f"h{i}."
        hn = T.layer_norm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
        q = T.add(T.matmul(hn, p[pre + "attn.wq"]), p[pre + "attn.bq"])
        k = T.add(T.matmul(hn, p[pre + "attn.wk"]), p[pre + "attn.bk"])
        v = T.add(T.matmul(hn, p[pre + "attn.wv"]), p[pre + "attn.bv"])
        q = T.transpose(T.reshape(q, (b, t, h, hd)), (0, 2, 1, 3))
        k = T.transpose(T.reshape(k, (b, t, h, hd)), (0, 2, 1, 3))
        v = T.transpose(T.reshape(v, (b, t, h, hd)), (0, 2, 1, 3))
        scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), inv_sqrt_hd)
        if mask is not None:
            scores = T.add_const(scores, mask)
        attnw = T.softmax(scores, axis=-1)
        ctx = T.matmul(attnw, v)  # (B,H,T,hd)
        ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (b * t, d))
        proj = T.add(T.matmul(ctx, p[pre + "attn.wo"]), p[pre + "attn.bo"])
        x = T.add(x, proj)

        hn2 = T.layer_norm(x, p[pre + "ln2.g"], p[pre + "ln2.b"])
        f1 = T.gelu(T.add(T.matmul(hn2, p[pre + "ffn.w1"]), p[pre + "ffn.b1"]))
        f2 = T.add(T.matmul(f1, p[pre + "ffn.w2"]), p[pre + "ffn.b2"])
        x = T.add(x, f2)

    xf = T.layer_norm(x, p["ln_f.g"], p["ln_f.b"])
    if cfg.tie_embeddings:
        logits = T.matmul(xf, T.transpose(p["tok_emb"], (1, 0)))
    else:
        logits = T.matmul(xf, p["w_out"])
    return T.reshape(logits, (b, t, cfg.vocab_size))
