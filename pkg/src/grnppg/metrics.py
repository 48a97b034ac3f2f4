"""Binary classification metrics, stratified splitting and ADASYN oversampling.

The artifact class (label 1) is the positive class throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    """Raised when a metric has no meaning for the given labels (e.g. one class)."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def as_matrix(self) -> np.ndarray:
        """Rows are true class (0, 1), columns predicted class (0, 1)."""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]], dtype=np.int64)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: ConfusionCounts
    auc: float | None = None
    undefined: tuple[str, ...] = field(default_factory=tuple)


def confusion(probabilities, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Count outcomes, predicting positive when ``probability >= threshold``."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    pred = p >= threshold
    pos = y == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def metrics(conf: ConfusionCounts, auc: float | None = None) -> MetricsReport:
    """Accuracy, precision, recall and F1 from a confusion table.

    A zero denominator yields 0.0 and the metric's name is listed in
    ``undefined`` rather than raising.
    """
    if conf.total == 0:
        raise ValueError("empty confusion table")
    undefined = []
    acc = (conf.tp + conf.tn) / conf.total
    if conf.tp + conf.fp == 0:
        pre = 0.0
        undefined.append("precision")
    else:
        pre = conf.tp / (conf.tp + conf.fp)
    if conf.tp + conf.fn == 0:
        rec = 0.0
        undefined.append("recall")
    else:
        rec = conf.tp / (conf.tp + conf.fn)
    if pre + rec == 0:
        f1 = 0.0
        undefined.append("f1")
    else:
        f1 = 2 * pre * rec / (pre + rec)
    return MetricsReport(acc, pre, rec, f1, conf, auc, tuple(undefined))


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (midranks for ties)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.size} scores vs {y.size} labels")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(probabilities, labels, threshold: float = 0.5) -> MetricsReport:
    conf = confusion(probabilities, labels, threshold)
    try:
        auc = roc_auc(probabilities, labels)
    except UndefinedMetricError:
        auc = float("nan")
    return metrics(conf, auc)


def stratified_split(labels, train_fraction: float, rng: np.random.Generator
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Indices of a per-class shuffled split; each class keeps ``train_fraction``."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    y = np.asarray(labels)
    train, test = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(train_fraction * idx.size))
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


# ---------------------------------------------------------------- ADASYN


@dataclass(frozen=True)
class AdasynConfig:
    k_neighbors: int = 5
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")


@dataclass
class AdasynResult:
    """Synthetic minority samples with their provenance.

    ``parents[j]`` and ``partners[j]`` index the minority array passed in;
    sample ``j`` equals ``x[parent] + lambdas[j] * (x[partner] - x[parent])``.
    """

    samples: np.ndarray
    parents: np.ndarray
    partners: np.ndarray
    lambdas: np.ndarray
    counts: np.ndarray
    ratios: np.ndarray


def _knn(query: np.ndarray, pool: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    d2 = ((query * query).sum(axis=1)[:, None] + (pool * pool).sum(axis=1)[None, :]
          - 2.0 * query @ pool.T)
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
    # stable sort: ties go to the lower pool index
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def adasyn_oversample(minority, majority, cfg: AdasynConfig = AdasynConfig()) -> AdasynResult:
    """Adaptive synthetic oversampling of the minority class.

    The number of samples generated around each minority point is
    proportional to the share of majority points among its ``k`` nearest
    neighbours (Euclidean, over the union of both classes).  When no
    minority point has a majority neighbour the budget is spread uniformly.
    Counts are ``rint(r̂_i * G)`` with ``G = (n_maj - n_min) * beta``.
    """
    xs = np.asarray(minority, dtype=np.float64)
    xl = np.asarray(majority, dtype=np.float64)
    m_min, m_maj = len(xs), len(xl)
    k = cfg.k_neighbors
    if k >= m_min:
        raise ValueError(f"k_neighbors={k} must be smaller than the minority count {m_min}")
    dim = xs.shape[1]
    G = max(m_maj - m_min, 0) * cfg.beta
    empty = AdasynResult(np.empty((0, dim)), np.empty(0, int), np.empty(0, int),
                         np.empty(0), np.zeros(m_min, int), np.zeros(m_min))
    if G <= 0:
        return empty

    pool = np.vstack([xs, xl])
    nn_all = _knn(xs, pool, k, exclude_self=True)
    delta = (nn_all >= m_min).sum(axis=1)
    r = delta / k
    if r.sum() > 0:
        rhat = r / r.sum()
    else:
        rhat = np.full(m_min, 1.0 / m_min)
    g = np.rint(rhat * G).astype(int)

    nn_min = _knn(xs, xs, k, exclude_self=True)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    parents, partners, lambdas = [], [], []
    for i in range(m_min):
        for _ in range(g[i]):
            z = nn_min[i, rng.integers(k)]
            lam = rng.random()
            parents.append(i)
            partners.append(z)
            lambdas.append(lam)
    if not parents:
        return AdasynResult(empty.samples, empty.parents, empty.partners, empty.lambdas, g, r)
    parents = np.array(parents)
    partners = np.array(partners)
    lambdas = np.array(lambdas)
    samples = xs[parents] + lambdas[:, None] * (xs[partners] - xs[parents])
    return AdasynResult(samples, parents, partners, lambdas, g, r)


def adasyn_resample(X, y, cfg: AdasynConfig = AdasynConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Append ADASYN samples for the minority label to ``(X, y)``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size != 2:
        raise ValueError("ADASYN needs exactly two classes")
    minority = classes[np.argmin(counts)]
    res = adasyn_oversample(X[y == minority], X[y != minority], cfg)
    if res.samples.shape[0] == 0:
        return X, y
    X_new = np.vstack([X, res.samples])
    y_new = np.concatenate([y, np.full(res.samples.shape[0], minority, dtype=y.dtype)])
    return X_new, y_new
