"""Gated linear / non-linear units and the gated residual network block.

Two gating forms share one layer type:

* GLU form:  ``act(x W + b) * (x V + c)``, only the gate branch is activated.
* GnLU form: ``act(x W + b) * act(x V + c)``, both branches activated.

The GRN block computes ``LayerNorm(a + gate(W1 ELU(W2 a + b2) + b1))`` with
dropout applied to the pre-gate projection during training.  All internal
widths equal the block width so the residual add needs no projection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import activations as act
from . import autodiff as ad
from .layers import LayerNorm, Linear, Module

GLU = "glu"
GNLU = "gnlu"

# variant id -> (table label, activation name, form)
GLU_VARIANTS: dict[str, tuple[str, str]] = {
    "bilinearglu": ("BilinearGLU", "linear"),
    "glu": ("GLU", "sigmoid"),
    "hardglu": ("hardGLU", "hard_sigmoid"),
    "softsignglu": ("SoftsignGLU", "softsign"),
    "snakeglu": ("SnakeGLU", "snake"),
    "liglu": ("LiGLU", "lisht"),
    "reglu": ("ReGLU", "relu"),
    "eglu": ("EGLU", "elu"),
    "geglu": ("GEGLU", "gelu"),
    "seglu": ("SeGLU", "selu"),
    "swiglu": ("SwiGLU", "swish"),
    "miglu": ("MiGLU", "mish"),
}
GNLU_VARIANTS: dict[str, tuple[str, str]] = {
    "gnlu": ("GnLU", "sigmoid"),
    "lignlu": ("LiGnLU", "lisht"),
    "mignlu": ("MiGnLU", "mish"),
    "segnlu": ("SeGnLU", "selu"),
    "swignlu": ("SwiGnLU", "swish"),
}
VARIANT_NAMES: tuple[str, ...] = tuple(GLU_VARIANTS) + tuple(GNLU_VARIANTS)


@dataclass(frozen=True)
class GatingSpec:
    activation: act.ActivationKind
    form: str = GLU

    def __post_init__(self):
        if self.form not in (GLU, GNLU):
            raise ValueError(f"gating form must be 'glu' or 'gnlu', got {self.form!r}")
        if self.form == GNLU and self.activation.name == "linear":
            raise ValueError("GnLU with a linear activation duplicates BilinearGLU")

    @property
    def name(self) -> str:
        for table, form in ((GLU_VARIANTS, GLU), (GNLU_VARIANTS, GNLU)):
            if form != self.form:
                continue
            for key, (_, act_name) in table.items():
                if act_name == self.activation.name:
                    return key
        raise KeyError(self)

    @property
    def label(self) -> str:
        return variant_label(self.name)


def gating_spec(name: str) -> GatingSpec:
    """Look up a catalog variant by its lowercase name, e.g. ``"swiglu"``."""
    key = name.lower()
    if key in GLU_VARIANTS:
        return GatingSpec(act.kind(GLU_VARIANTS[key][1]), GLU)
    if key in GNLU_VARIANTS:
        return GatingSpec(act.kind(GNLU_VARIANTS[key][1]), GNLU)
    raise ValueError(f"unknown gating variant {name!r}; valid names: {', '.join(VARIANT_NAMES)}")


def variant_label(name: str) -> str:
    key = name.lower()
    if key in GLU_VARIANTS:
        return GLU_VARIANTS[key][0]
    if key in GNLU_VARIANTS:
        return GNLU_VARIANTS[key][0]
    raise ValueError(f"unknown gating variant {name!r}; valid names: {', '.join(VARIANT_NAMES)}")


class GatedLayer(Module):
    """``act(x W + b)`` gating ``x V + c`` (GLU) or ``act(x V + c)`` (GnLU)."""

    def __init__(self, d_in: int, d_out: int, spec: GatingSpec, rng: np.random.Generator):
        self.W = ad.glorot_normal_init((d_in, d_out), rng)
        self.b = ad.Tensor(np.zeros(d_out), requires_grad=True)
        self.V = ad.glorot_normal_init((d_in, d_out), rng)
        self.c = ad.Tensor(np.zeros(d_out), requires_grad=True)
        self._spec = spec

    @property
    def spec(self) -> GatingSpec:
        return self._spec

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return gated_forward(self, x)

    def suppress(self) -> None:
        """Set weights so the layer outputs (numerically) zero for every input."""
        if self._spec.form == GLU:
            self.V.data[...] = 0.0
            self.c.data[...] = 0.0
        elif self._spec.activation.name == "sigmoid":
            self.b.data[...] = -20.0
            self.c.data[...] = -20.0
        else:
            # lisht, mish, selu and swish all vanish at the origin
            self.V.data[...] = 0.0
            self.c.data[...] = 0.0


def gated_forward(layer: GatedLayer, x: ad.Tensor) -> ad.Tensor:
    if x.shape[-1] != layer.W.shape[0]:
        raise ad.DimensionError(f"gated layer expects last dim {layer.W.shape[0]}, got {x.shape}")
    k = layer.spec.activation
    gate = act.apply(k, ad.add(ad.matmul(x, layer.W), layer.b))
    value = ad.add(ad.matmul(x, layer.V), layer.c)
    if layer.spec.form == GNLU:
        value = act.apply(k, value)
    return ad.mul(gate, value)


class GrnBlock(Module):
    """Gated residual network block of width ``d``.

    ``input_proj`` holds W2/b2, ``hidden_proj`` W1/b1 and ``gate`` the
    W3/b3 (activated) and W4/b4 (value) branches.
    """

    def __init__(self, d: int, rng: np.random.Generator, spec: GatingSpec | None = None,
                 dropout_p: float = 0.25):
        if not 0.0 <= dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        spec = spec or gating_spec("glu")
        self.input_proj = Linear(d, d, rng)
        self.hidden_proj = Linear(d, d, rng)
        self.gate = GatedLayer(d, d, spec, rng)
        self.norm = LayerNorm(d)
        self._d = d
        self._dropout_p = dropout_p
        self._elu = act.kind("elu")

    @property
    def width(self) -> int:
        return self._d

    def __call__(self, a: ad.Tensor, rng: np.random.Generator | None = None,
                 training: bool = False) -> ad.Tensor:
        return grn_forward(self, a, rng, training)

    def suppress_gate(self) -> None:
        self.gate.suppress()


def grn_forward(block: GrnBlock, a: ad.Tensor, rng: np.random.Generator | None = None,
                training: bool = False) -> ad.Tensor:
    if a.shape[-1] != block.width:
        raise ad.DimensionError(f"GRN of width {block.width} got input {a.shape}")
    theta2 = act.apply(block._elu, block.input_proj(a))
    theta1 = block.hidden_proj(theta2)
    theta1 = ad.dropout(theta1, block._dropout_p, rng, training)
    return block.norm(ad.add(a, block.gate(theta1)))
