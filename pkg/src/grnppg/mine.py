"""Mutual information neural estimation with the Donsker-Varadhan bound.

A statistics network ``T(x, y)`` is trained by gradient ascent on

    mean T(x, y)  -  log mean exp T(x, ỹ)

where ``ỹ`` is ``y`` shuffled within the minibatch.  The gradient of the log
term divides by a moving average of ``mean exp T`` rather than the noisy
minibatch value, which removes most of the minibatch bias.  All values are in
nats.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import activations as act
from . import autodiff as ad
from .layers import Linear, Module


@dataclass(frozen=True)
class MineConfig:
    batch_size: int = 256
    epochs: int = 100
    learning_rate: float = 1e-3
    ema_rate: float = 0.01
    hidden: int = 64
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("MINE needs a minibatch of at least 2 pairs")
        if not 0.0 < self.ema_rate <= 1.0:
            raise ValueError("ema_rate must lie in (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")


@dataclass
class MiEstimate:
    value: float
    trace: list[float]
    config: MineConfig
    units: str = "nats"


class StatisticsNetwork(Module):
    """``[x, y] -> scalar`` critic: two ELU hidden layers."""

    def __init__(self, d_in: int, rng: np.random.Generator, hidden: int = 64):
        self.l1 = Linear(d_in, hidden, rng)
        self.l2 = Linear(hidden, hidden, rng)
        self.out = Linear(hidden, 1, rng)
        self._elu = act.kind("elu")

    def __call__(self, xy) -> ad.Tensor:
        xy = xy if isinstance(xy, ad.Tensor) else ad.Tensor(xy)
        h = act.apply(self._elu, self.l1(xy))
        h = act.apply(self._elu, self.l2(h))
        return ad.reshape(self.out(h), (xy.shape[0],))


def shuffle_marginal(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniformly permute the rows of ``y`` (fixed points allowed)."""
    y = np.asarray(y)
    return y[rng.permutation(len(y))]


def dv_bound_tensor(net: StatisticsNetwork, joint, marginal) -> ad.Tensor:
    t_joint = net(joint)
    t_marg = net(marginal)
    return ad.sub(ad.mean(t_joint), ad.logmeanexp(t_marg))


def dv_lower_bound(net: StatisticsNetwork, joint, marginal) -> float:
    """Empirical Donsker-Varadhan bound for paired and shuffled batches."""
    joint = np.asarray(joint, dtype=np.float64)
    marginal = np.asarray(marginal, dtype=np.float64)
    if len(joint) == 0 or len(marginal) == 0:
        raise ValueError("DV bound of an empty batch")
    with ad.no_grad():
        return float(dv_bound_tensor(net, joint, marginal).data)


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def _standardize(a: np.ndarray) -> np.ndarray:
    sd = a.std(axis=0)
    sd[sd == 0] = 1.0
    return (a - a.mean(axis=0)) / sd


def mine_train(x, y, cfg: MineConfig = MineConfig()) -> MiEstimate:
    """Estimate ``I(X; Y)`` from paired samples.

    Each epoch records the DV bound over the full sample (with a fresh
    shuffle of ``y``); the returned value is the mean of the last 10% of those
    epoch values.
    """
    x, y = _as_2d(x), _as_2d(y)
    if len(x) != len(y):
        raise ValueError(f"row mismatch: {len(x)} x-rows vs {len(y)} y-rows")
    n = len(x)
    b = cfg.batch_size
    if n < 2 * b:
        raise ValueError(f"MINE needs at least 2 * batch_size = {2 * b} samples, got {n}")
    if cfg.standardize:
        x, y = _standardize(x), _standardize(y)

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.Generator(np.random.PCG64(seeds[0]))
    rng = np.random.Generator(np.random.PCG64(seeds[1]))
    net = StatisticsNetwork(x.shape[1] + y.shape[1], init_rng, cfg.hidden)
    opt = ad.Adam(net.parameters(), lr=cfg.learning_rate)

    ema = None
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n - b + 1, b):
            idx = order[s:s + b]
            xb, yb = x[idx], y[idx]
            joint = np.hstack([xb, yb])
            marginal = np.hstack([xb, shuffle_marginal(yb, rng)])
            t_joint = net(joint)
            exp_marg = ad.mean(ad.exp(net(marginal)))
            batch_mean = float(exp_marg.data)
            ema = batch_mean if ema is None else (1 - cfg.ema_rate) * ema + cfg.ema_rate * batch_mean
            # surrogate whose gradient is the bias-corrected DV gradient
            loss = ad.neg(ad.sub(ad.mean(t_joint), ad.scale(exp_marg, 1.0 / ema)))
            opt.zero_grad()
            ad.backward(loss)
            opt.step()
        marginal = np.hstack([x, shuffle_marginal(y, rng)])
        trace.append(dv_lower_bound(net, np.hstack([x, y]), marginal))

    tail = max(1, int(math.ceil(0.1 * cfg.epochs)))
    return MiEstimate(float(np.mean(trace[-tail:])), trace, cfg)


@dataclass
class GrnMiComparison:
    before: list[MiEstimate] = field(default_factory=list)
    after: list[MiEstimate] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)

    @property
    def mi_before(self) -> float:
        return float(np.median([e.value for e in self.before]))

    @property
    def mi_after(self) -> float:
        return float(np.median([e.value for e in self.after]))


def compare_grn_mi(before, after, y, cfg: MineConfig = MineConfig(),
                   seeds: Sequence[int] | None = None) -> GrnMiComparison:
    """Train separate critics on the pre-GRN and post-GRN features against ``y``.

    With several seeds, ``mi_before``/``mi_after`` report the medians.
    """
    before, after = _as_2d(before), _as_2d(after)
    y = _as_2d(y)
    if not (len(before) == len(after) == len(y)):
        raise ValueError(f"row mismatch: before={len(before)} after={len(after)} y={len(y)}")
    seeds = list(seeds) if seeds is not None else [cfg.seed]
    out = GrnMiComparison(seeds=seeds)
    for s in seeds:
        c = dataclasses.replace(cfg, seed=s)
        out.before.append(mine_train(before, y, c))
        out.after.append(mine_train(after, y, c))
    return out
