"""Shared oracles for the test suite."""
import mpmath as mp
import numpy as np

from grnppg import autodiff as ad


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` at ``x`` (x is perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise ``|a - b| / max(|a|, |b|)``.

    The denominator is floored at ``1e-4`` so that entries whose true value is
    zero are judged on absolute error instead of on finite-difference noise.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4)
    return float(np.max(np.abs(a - b) / den))


def check_grads(build, leaves: list[ad.Tensor], h: float = 1e-5) -> float:
    """Worst relative error between backward() and finite differences over ``leaves``.

    ``build`` maps nothing to a scalar loss tensor, reading leaf ``.data``.
    """
    for t in leaves:
        t.grad = None
    ad.backward(build())
    analytic = [t.grad.copy() for t in leaves]

    def value():
        with ad.no_grad():
            return float(build().data)

    worst = 0.0
    for t, g in zip(leaves, analytic):
        worst = max(worst, rel_err(g, numeric_grad(value, t.data, h)))
    return worst


def activation_oracle(name: str, x: float) -> float:
    """Direct high-precision evaluation of each formula."""
    with mp.workdps(40):
        return float(_activation_mp(name, mp.mpf(x)))


def _activation_mp(name, x):
    if name == "sigmoid":
        v = 1 / (1 + mp.e ** (-x))
    elif name == "hard_sigmoid":
        v = max(mp.mpf(0), min(mp.mpf(1), (x + 1) / 2))
    elif name == "softsign":
        v = x / (1 + abs(x))
    elif name == "snake":
        v = x + mp.sin(x) ** 2
    elif name == "lisht":
        v = x * mp.tanh(x)
    elif name == "relu":
        v = max(mp.mpf(0), x)
    elif name == "elu":
        v = x if x > 0 else mp.e ** x - 1
    elif name == "gelu":
        v = x * mp.ncdf(x)
    elif name == "selu":
        v = mp.mpf("1.05070098") * (x if x > 0 else mp.mpf("1.67326324") * (mp.e ** x - 1))
    elif name == "swish":
        v = x / (1 + mp.e ** (-x))
    elif name == "mish":
        v = x * mp.tanh(mp.log(1 + mp.e ** x))
    else:
        v = x
    return v


def brute_adasyn(minority, majority, k, beta, seed):
    """Plain-loop reference: exact squared distances, ties broken by pool order."""
    xs = [tuple(map(float, p)) for p in minority]
    xl = [tuple(map(float, p)) for p in majority]
    pool = xs + xl
    m = len(xs)

    def d2(a, b):
        return sum((u - v) ** 2 for u, v in zip(a, b))

    G = max(len(xl) - m, 0) * beta
    if G <= 0:
        return [0] * m, []
    r = []
    for i, x in enumerate(xs):
        order = sorted((d2(x, p), j) for j, p in enumerate(pool) if j != i)[:k]
        r.append(sum(1 for _, j in order if j >= m) / k)
    tot = sum(r)
    rhat = [v / tot for v in r] if tot > 0 else [1 / m] * m
    g = [int(np.rint(v * G)) for v in rhat]
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for i, x in enumerate(xs):
        nbrs = [j for _, j in sorted((d2(x, p), j) for j, p in enumerate(xs) if j != i)[:k]]
        for _ in range(g[i]):
            z = nbrs[int(rng.integers(k))]
            lam = float(rng.random())
            out.append((i, z, lam, tuple(a + lam * (b - a) for a, b in zip(x, xs[z]))))
    return g, out


MAJ12 = [(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1), (3, 1)]
MIN12 = [(10, 10), (11, 10), (10, 11), (1.5, 0.5)]

DATASETS = [
    # 12-point toy: three far minority points see one majority neighbour each, one sits
    # inside the majority cloud; r = [1/3, 1/3, 1/3, 1], so g = rint([2/3, 2/3, 2/3, 2])
    (MIN12, MAJ12, 3, 1.0),
    # integer lattice with many distance ties
    ([(0, 0), (0, 2), (2, 0), (2, 2), (1, 1)],
     [(0, 1), (1, 0), (1, 2), (2, 1), (3, 3), (4, 4), (5, 5), (6, 6), (3, 0), (0, 3)], 2, 1.0),
    # minority far from every majority point: sum r = 0, uniform fallback
    ([(100, 100), (101, 100), (100, 101), (101, 101)],
     [(0, 0), (1, 0), (0, 1), (1, 1), (2, 2), (3, 3), (2, 0), (0, 2), (4, 1), (1, 4)], 2, 1.0),
    # partial balance with beta = 0.5, 3-D
    ([(0, 0, 0), (1, 1, 1), (2, 0, 1), (0, 2, 2)],
     [(1, 0, 0), (0, 1, 0), (0, 0, 1), (2, 2, 2), (1, 2, 0), (3, 1, 1), (2, 3, 1), (1, 1, 3),
      (0, 3, 3), (3, 3, 0), (2, 2, 0), (1, 3, 2)], 3, 0.5),
    # already balanced: nothing to generate
    ([(0, 0), (1, 1), (2, 2)], [(0, 1), (1, 2), (2, 3)], 2, 1.0),
]


# ---------------------------------------------------------------- acceptance reporting

ACCEPTANCE: dict[int, str] = {}


class Criterion:
    """Collects checks for one acceptance criterion and prints a PASS/FAIL line.

    Used as a context manager; an exception inside the block counts as FAIL.
    """

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.ok = True
        self.notes: list[str] = []

    def check(self, cond, note: str) -> None:
        if not cond:
            self.ok = False
            note = f"[x] {note}"
        self.notes.append(note)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.ok = False
            self.notes.append(f"{exc_type.__name__}: {exc}")
        line = (f"criterion {self.number:>2} {'PASS' if self.ok else 'FAIL'}  {self.title}  |  "
                + "; ".join(self.notes))
        print(line)
        ACCEPTANCE[self.number] = line
        if exc_type is None:
            assert self.ok, line
        return False
