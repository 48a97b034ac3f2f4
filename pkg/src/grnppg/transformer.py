"""Patch-token Transformer encoder for binary pulse classification.

Three wirings share the same encoder:

``vanilla``
    encoder -> mean pool -> dense -> sigmoid.
``grn_intermediate``
    a GRN block filters every token after the last encoder layer, before pooling.
``grn_attention``
    inside each attention block, every head's softmax-weighted value output
    passes through its own GRN before the heads are concatenated.

A 256-sample pulse is cut into non-overlapping patches of ``patch_size``
samples, each projected to ``d_model`` and offset by a fixed sinusoidal
position code.  Encoder layers are post-norm:
``x = LN(x + drop(MHA(x)))``, then ``x = LN(x + drop(FF(x)))``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import activations as act
from . import autodiff as ad
from . import metrics as mt
from .gating import GatingSpec, GrnBlock, gating_spec
from .layers import LayerNorm, Linear, Module

PULSE_LEN = 256
VARIANTS = ("vanilla", "grn_intermediate", "grn_attention")


class DataError(ValueError):
    """Training data cannot be used as given (e.g. a class is missing)."""


@dataclass
class ModelConfig:
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 4
    d_ff: int | None = None
    dropout: float = 0.25
    learning_rate: float = 6e-4
    batch_size: int = 96
    patch_size: int = 8
    variant: str = "grn_intermediate"
    gating: str = "glu"
    seed: int = 0
    epochs: int = 30

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if self.patch_size < 1 or PULSE_LEN % self.patch_size:
            raise ValueError(f"patch_size={self.patch_size} must divide {PULSE_LEN}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        gating_spec(self.gating)  # validates the name
        if self.d_ff is None:
            self.d_ff = self.d_model

    @property
    def n_tokens(self) -> int:
        return PULSE_LEN // self.patch_size

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def gating_spec(self) -> GatingSpec:
        return gating_spec(self.gating)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def sinusoidal_encoding(n_tokens: int, d_model: int) -> np.ndarray:
    pos = np.arange(n_tokens)[:, None]
    i = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d_model)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class EncoderLayer(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        d = cfg.d_model
        self.q = Linear(d, d, rng)
        self.k = Linear(d, d, rng)
        self.v = Linear(d, d, rng)
        self.o = Linear(d, d, rng)
        self.ff1 = Linear(d, cfg.d_ff, rng)
        self.ff2 = Linear(cfg.d_ff, d, rng)
        self.norm1 = LayerNorm(d)
        self.norm2 = LayerNorm(d)
        self.head_grns: list[GrnBlock] = []
        if cfg.variant == "grn_attention":
            self.head_grns = [GrnBlock(cfg.head_dim, rng, cfg.gating_spec, cfg.dropout)
                              for _ in range(cfg.n_heads)]
        self._n_heads = cfg.n_heads
        self._dropout = cfg.dropout
        self._relu = act.kind("relu")


HeadHook = Callable[[int, ad.Tensor], ad.Tensor]


def multi_head_attention(layer: EncoderLayer, x: ad.Tensor, head_hook: HeadHook | None = None,
                         return_weights: bool = False):
    """Scaled dot-product attention over ``x`` of shape ``[batch, tokens, d_model]``.

    ``head_hook(h, out_h)`` may transform each head's ``[batch, tokens,
    head_dim]`` output before concatenation.  Returns the output projection,
    plus the ``[batch, heads, tokens, tokens]`` weights when requested.
    """
    if x.ndim != 3 or x.shape[-1] != layer.q.W.shape[0]:
        raise ad.DimensionError(f"attention expects [batch, tokens, {layer.q.W.shape[0]}], "
                                f"got {x.shape}")
    B, T, d = x.shape
    h = layer._n_heads
    hd = d // h

    def split(t):
        return ad.transpose(ad.reshape(t, (B, T, h, hd)), (0, 2, 1, 3))

    q, k, v = split(layer.q(x)), split(layer.k(x)), split(layer.v(x))
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(hd))
    weights = ad.softmax_rows(scores)
    heads = ad.matmul(weights, v)  # [B, h, T, hd]
    if head_hook is None:
        merged = ad.reshape(ad.transpose(heads, (0, 2, 1, 3)), (B, T, d))
    else:
        merged = ad.concat([head_hook(i, heads[:, i]) for i in range(h)], axis=-1)
    out = layer.o(merged)
    return (out, weights) if return_weights else out


def grn_attention(layer: EncoderLayer, x: ad.Tensor, rng: np.random.Generator | None = None,
                  training: bool = False, return_weights: bool = False):
    """Attention with a per-head GRN between the softmax-weighted values and concatenation."""
    if not layer.head_grns:
        raise ValueError("layer has no per-head GRN blocks (variant is not grn_attention)")
    return multi_head_attention(
        layer, x, head_hook=lambda i, t: layer.head_grns[i](t, rng, training),
        return_weights=return_weights)


def encoder_layer_forward(layer: EncoderLayer, x: ad.Tensor, rng=None,
                          training: bool = False) -> ad.Tensor:
    if layer.head_grns:
        attn = grn_attention(layer, x, rng, training)
    else:
        attn = multi_head_attention(layer, x)
    x = layer.norm1(ad.add(x, ad.dropout(attn, layer._dropout, rng, training)))
    ff = layer.ff2(act.apply(layer._relu, layer.ff1(x)))
    return layer.norm2(ad.add(x, ad.dropout(ff, layer._dropout, rng, training)))


class ClassifierModel(Module):
    """Patch embedding, encoder stack, optional per-token GRN, mean pool, one logit.

    Weights are GlorotNormal except the output layer, which starts at zero so
    the untrained classifier is uninformative (probability 0.5 everywhere).
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else _init_rng(cfg.seed)
        self._cfg = cfg
        self.embed = Linear(cfg.patch_size, cfg.d_model, rng)
        self.layers = [EncoderLayer(cfg, rng) for _ in range(cfg.n_layers)]
        self.grn = (GrnBlock(cfg.d_model, rng, cfg.gating_spec, cfg.dropout)
                    if cfg.variant == "grn_intermediate" else None)
        self.head = Linear(cfg.d_model, 1, rng)
        # zero output weights: an untrained model predicts exactly 0.5
        self.head.W.data[...] = 0.0
        self._pos = sinusoidal_encoding(cfg.n_tokens, cfg.d_model)

    @property
    def config(self) -> ModelConfig:
        return self._cfg

    def __call__(self, pulses, rng=None, training: bool = False) -> ad.Tensor:
        return logits(self, pulses, rng, training)


def _seed_streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(int(seed)).spawn(n)]


def _init_rng(seed: int) -> np.random.Generator:
    return _seed_streams(seed, 3)[0]


def build_model(cfg: ModelConfig) -> ClassifierModel:
    return ClassifierModel(cfg)


def _as_batch(pulses) -> np.ndarray:
    X = np.asarray(pulses.data if isinstance(pulses, ad.Tensor) else pulses, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != PULSE_LEN:
        raise ValueError(f"pulses must have {PULSE_LEN} samples, got shape {X.shape}")
    return X


def embed_pulses(model: ClassifierModel, pulses) -> ad.Tensor:
    """Token sequences ``[batch, 256 / patch_size, d_model]``."""
    X = _as_batch(pulses)
    cfg = model.config
    patches = ad.Tensor(X.reshape(X.shape[0], cfg.n_tokens, cfg.patch_size))
    tokens = model.embed(patches)
    return ad.add(tokens, ad.Tensor(np.broadcast_to(model._pos, tokens.shape)))


def embed_pulse(model: ClassifierModel, pulse) -> ad.Tensor:
    """Tokens of a single pulse, shape ``[256 / patch_size, d_model]``."""
    samples = getattr(pulse, "samples", pulse)
    if np.asarray(samples).shape != (PULSE_LEN,):
        raise ValueError(f"a pulse must have exactly {PULSE_LEN} samples")
    return embed_pulses(model, samples)[0]


def encode(model: ClassifierModel, pulses, rng=None, training: bool = False) -> ad.Tensor:
    x = embed_pulses(model, pulses)
    for layer in model.layers:
        x = encoder_layer_forward(layer, x, rng, training)
    return x


def logits(model: ClassifierModel, pulses, rng=None, training: bool = False) -> ad.Tensor:
    x = encode(model, pulses, rng, training)
    if model.grn is not None:
        x = model.grn(x, rng, training)
    pooled = ad.mean(x, axis=1)
    return ad.reshape(model.head(pooled), (pooled.shape[0],))


def predict_proba(model: ClassifierModel, pulses, batch_size: int = 512) -> np.ndarray:
    X = _as_batch(pulses)
    out = []
    with ad.no_grad():
        for s in range(0, len(X), batch_size):
            z = logits(model, X[s:s + batch_size]).data
            out.append(0.5 * (1.0 + np.tanh(0.5 * z)))
    return np.concatenate(out) if out else np.empty(0)


def forward(model: ClassifierModel, pulse) -> float:
    """Artifact probability of one pulse."""
    samples = getattr(pulse, "samples", pulse)
    return float(predict_proba(model, np.asarray(samples)[None, :])[0])


def latent_features(model: ClassifierModel, pulses, batch_size: int = 512
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Mean-pooled features before and after the intermediate GRN (evaluation mode)."""
    if model.grn is None:
        raise ValueError("latent features before/after GRN need a grn_intermediate model")
    X = _as_batch(pulses)
    before, after = [], []
    with ad.no_grad():
        for s in range(0, len(X), batch_size):
            x = encode(model, X[s:s + batch_size])
            before.append(x.data.mean(axis=1))
            after.append(model.grn(x).data.mean(axis=1))
    return np.concatenate(before), np.concatenate(after)


# ---------------------------------------------------------------- training


@dataclass
class TrainingTrace:
    """Per-epoch learning curves for the training and validation splits.

    ``train`` metrics come from the training-mode predictions made while the
    epoch ran (Keras style); ``validation`` metrics from an evaluation pass
    after the epoch.
    """

    train: list[dict] = field(default_factory=list)
    validation: list[dict] = field(default_factory=list)
    batch_losses: list[float] = field(default_factory=list)
    train_index: np.ndarray | None = None
    val_index: np.ndarray | None = None

    def rows(self) -> list[dict]:
        out = []
        for tr, va in zip(self.train, self.validation):
            out.append({"split": "train", **tr})
            out.append({"split": "validation", **va})
        return out


def _epoch_metrics(epoch: int, loss: float, prob: np.ndarray, y: np.ndarray) -> dict:
    rep = mt.evaluate(prob, y)
    return {"epoch": epoch, "loss": float(loss), "auc": rep.auc, "accuracy": rep.accuracy,
            "precision": rep.precision, "recall": rep.recall, "f1": rep.f1}


def _bce(prob: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(prob, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def train(model: ClassifierModel, X, y, cfg: ModelConfig | None = None,
          adasyn: mt.AdasynConfig | None = mt.AdasynConfig(),
          train_fraction: float = 0.7, split: tuple[np.ndarray, np.ndarray] | None = None,
          progress: Callable[[int, dict, dict], None] | None = None) -> TrainingTrace:
    """Fit ``model`` with Adam on binary cross-entropy.

    The data is split ``train_fraction``/rest per class (or by the given
    ``split`` index pair); ADASYN, when configured, only augments the training
    part.  Weights are updated in place.
    """
    cfg = cfg or model.config
    X = _as_batch(X)
    y = np.asarray(y).astype(np.int64)
    if len(X) != len(y):
        raise DataError("pulses and labels differ in length")
    streams = _seed_streams(cfg.seed, 3)
    split_rng, batch_rng = streams[1], streams[2]
    if split is None:
        tr_idx, va_idx = mt.stratified_split(y, train_fraction, split_rng)
    else:
        tr_idx, va_idx = (np.asarray(i) for i in split)
    X_tr, y_tr = X[tr_idx], y[tr_idx]
    if np.sum(y_tr == 0) == 0 or np.sum(y_tr == 1) == 0:
        raise DataError("training split is missing a class")
    if adasyn is not None:
        X_tr, y_tr = mt.adasyn_resample(X_tr, y_tr, adasyn)
    X_va, y_va = X[va_idx], y[va_idx]

    params = model.parameters()
    opt = ad.Adam(params, lr=cfg.learning_rate)
    trace = TrainingTrace(train_index=tr_idx, val_index=va_idx)
    n = len(X_tr)
    for epoch in range(1, cfg.epochs + 1):
        order = batch_rng.permutation(n)
        probs = np.empty(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            z = logits(model, X_tr[idx], batch_rng, training=True)
            loss = ad.bce_with_logits(z, y_tr[idx])
            opt.zero_grad()
            ad.backward(loss)
            opt.step()
            trace.batch_losses.append(float(loss.data))
            total += float(loss.data) * len(idx)
            probs[idx] = 0.5 * (1.0 + np.tanh(0.5 * z.data))
        tr_row = _epoch_metrics(epoch, total / n, probs, y_tr[:n])
        if len(X_va):
            pv = predict_proba(model, X_va)
            va_row = _epoch_metrics(epoch, _bce(pv, y_va), pv, y_va)
        else:
            va_row = {"epoch": epoch, "loss": float("nan"), "auc": float("nan"),
                      "accuracy": float("nan"), "precision": float("nan"),
                      "recall": float("nan"), "f1": float("nan")}
        trace.train.append(tr_row)
        trace.validation.append(va_row)
        if progress is not None:
            progress(epoch, tr_row, va_row)
    return trace


def permute_heads(model: ClassifierModel, perm: Sequence[int]) -> None:
    """Reorder attention heads in place (with matching output-projection rows).

    The network function is unchanged; used to check head symmetry.
    """
    cfg = model.config
    hd = cfg.head_dim
    cols = np.concatenate([np.arange(p * hd, (p + 1) * hd) for p in perm])
    for layer in model.layers:
        for lin in (layer.q, layer.k, layer.v):
            lin.W.data[...] = lin.W.data[:, cols]
            lin.b.data[...] = lin.b.data[cols]
        layer.o.W.data[...] = layer.o.W.data[cols, :]
        if layer.head_grns:
            layer.head_grns = [layer.head_grns[p] for p in perm]
