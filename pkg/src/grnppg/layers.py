"""Parameter containers shared by the gating, transformer and MINE code."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import autodiff as ad


class Module:
    """Minimal parameter tree.

    Subclasses assign :class:`~grnppg.autodiff.Tensor` leaves, child modules
    or lists of child modules as attributes; ``named_parameters`` walks them
    in attribute-definition order, which gives stable checkpoint names.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, ad.Tensor]]:
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(val, ad.Tensor):
                if val.requires_grad:
                    yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[ad.Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} "
                           f"unexpected={sorted(unexpected)}")
        for k, p in own.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ad.DimensionError(f"{k}: expected {p.shape}, got {arr.shape}")
            p.data[...] = arr


class Linear(Module):
    """``x @ W + b`` with GlorotNormal weights and zero bias."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.W = ad.glorot_normal_init((d_in, d_out), rng)
        self.b = ad.Tensor(np.zeros(d_out), requires_grad=bias)

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        if x.shape[-1] != self.W.shape[0]:
            raise ad.DimensionError(
                f"linear layer expects last dim {self.W.shape[0]}, got {x.shape}")
        y = ad.matmul(x, self.W)
        return ad.add(y, self.b) if self.b.requires_grad else y


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gamma = ad.Tensor(np.ones(d), requires_grad=True)
        self.beta = ad.Tensor(np.zeros(d), requires_grad=True)
        self._eps = eps

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return ad.layer_norm(x, self.gamma, self.beta, self._eps)
