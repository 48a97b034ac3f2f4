"""Activation catalog used by the gated units.

Eleven nonlinear functions plus ``Linear``.  Each kind exposes an exact
forward formula and an analytic derivative; :func:`apply` wraps both into a
single differentiable graph node.

At kinks the derivative takes the value of the left-hand limit:
``ReLU'(0) = 0``, ``hard_sigmoid'(-1) = 0`` and ``hard_sigmoid'(1) = 0.5``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, expit

from . import autodiff as ad

SELU_GAMMA = 1.05070098
SELU_ALPHA = 1.67326324

_NAMES = ("sigmoid", "hard_sigmoid", "softsign", "snake", "lisht", "relu", "elu",
          "gelu", "selu", "swish", "mish", "linear")


@dataclass(frozen=True)
class ActivationKind:
    """An activation name plus its (fixed) shape parameters.

    ``alpha`` is used by ELU and SELU, ``gamma`` by SELU, ``a`` by Snake and
    ``beta`` by Swish.  Other kinds ignore them.
    """

    name: str
    alpha: float = 1.0
    gamma: float = 1.0
    a: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.name not in _NAMES:
            raise ValueError(f"unknown activation {self.name!r}; valid: {', '.join(_NAMES)}")
        if self.name == "snake" and self.a <= 0:
            raise ValueError("snake frequency a must be > 0")
        if self.name in ("elu", "selu") and self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.name == "selu" and self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.name == "swish" and self.beta <= 0:
            raise ValueError("swish beta must be > 0")


def kind(name: str, **params) -> ActivationKind:
    """Build an :class:`ActivationKind` with this toolkit's default parameters."""
    name = name.lower()
    if name == "selu":
        params.setdefault("gamma", SELU_GAMMA)
        params.setdefault("alpha", SELU_ALPHA)
    return ActivationKind(name, **params)


ALL_KINDS: tuple[str, ...] = _NAMES


def _softplus(x):
    return np.logaddexp(0.0, x)


def _norm_pdf(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def forward(k: ActivationKind, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = k.name
    if n == "sigmoid":
        return expit(x)
    if n == "hard_sigmoid":
        return np.clip((x + 1.0) / 2.0, 0.0, 1.0)
    if n == "softsign":
        return x / (1.0 + np.abs(x))
    if n == "snake":
        return x + np.sin(k.a * x) ** 2 / k.a
    if n == "lisht":
        return x * np.tanh(x)
    if n == "relu":
        return np.maximum(x, 0.0)
    if n == "elu":
        return np.where(x > 0, x, k.alpha * np.expm1(np.minimum(x, 0.0)))
    if n == "gelu":
        return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))
    if n == "selu":
        return k.gamma * np.where(x > 0, x, k.alpha * np.expm1(np.minimum(x, 0.0)))
    if n == "swish":
        return x * expit(k.beta * x)
    if n == "mish":
        return x * np.tanh(_softplus(x))
    return x.copy()  # linear


def derivative(k: ActivationKind, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = k.name
    if n == "sigmoid":
        s = expit(x)
        return s * (1.0 - s)
    if n == "hard_sigmoid":
        return np.where((x > -1.0) & (x <= 1.0), 0.5, 0.0)
    if n == "softsign":
        return 1.0 / (1.0 + np.abs(x)) ** 2
    if n == "snake":
        return 1.0 + np.sin(2.0 * k.a * x)
    if n == "lisht":
        t = np.tanh(x)
        return t + x * (1.0 - t * t)
    if n == "relu":
        return (x > 0).astype(np.float64)
    if n == "elu":
        return np.where(x > 0, 1.0, k.alpha * np.exp(np.minimum(x, 0.0)))
    if n == "gelu":
        return 0.5 * (1.0 + erf(x / np.sqrt(2.0))) + x * _norm_pdf(x)
    if n == "selu":
        return k.gamma * np.where(x > 0, 1.0, k.alpha * np.exp(np.minimum(x, 0.0)))
    if n == "swish":
        s = expit(k.beta * x)
        return s + k.beta * x * s * (1.0 - s)
    if n == "mish":
        t = np.tanh(_softplus(x))
        return t + x * (1.0 - t * t) * expit(x)
    return np.ones_like(x)


def activate(k: ActivationKind, x):
    """Forward values; accepts a :class:`~grnppg.autodiff.Tensor` or an array."""
    if isinstance(x, ad.Tensor):
        return apply(k, x)
    return forward(k, x)


def activate_grad(k: ActivationKind, x) -> np.ndarray:
    if isinstance(x, ad.Tensor):
        x = x.data
    return derivative(k, x)


def apply(k: ActivationKind, x: ad.Tensor) -> ad.Tensor:
    if k.name == "linear":
        return x
    return ad.unary(x, lambda v: forward(k, v), lambda v: derivative(k, v), op=k.name)
