"""Single-site Gibbs and Metropolis-Hastings chains with systematic and random scans.

Random streams
--------------
Replica ``r`` of a run seeded with ``seed`` draws from numpy's Philox4x64
generator keyed by ``(seed, r)`` with the counter starting at zero.  The
stream is consumed as uniform doubles in a fixed layout:

* ``n`` doubles to draw the initial state (always consumed, even for a
  point mass);
* per sweep, ``n`` doubles for a systematic scan (one per site, in scan
  order) or ``2n`` doubles for a random scan (``(site, accept)`` pairs, the
  site being ``floor(u * n)``).

So draw ``k`` of step ``t`` of replica ``r`` is a fixed function of
``(seed, r, t, k)``, replicas are independent streams, and results do not
depend on how replicas are batched or scheduled.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import ModelError, PointProcess, Subset, bits_to_masks, masks_to_bits

MASK64 = (1 << 64) - 1
CHUNK = 4096


class Kernel(str, Enum):
    GIBBS = "gibbs"
    MH = "mh"


class Scan(str, Enum):
    SYSTEMATIC = "systematic"
    RANDOM = "random"


@dataclass(frozen=True)
class InitialDistribution:
    """Starting law ``rho``: a point mass, uniform, or a product of Bernoullis."""

    kind: str = "uniform"
    subset: Subset | None = None
    p: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "bernoulli"):
            raise ModelError(f"unknown initial distribution {self.kind!r}")
        if self.kind == "point" and self.subset is None:
            raise ModelError("a point mass needs a subset")
        if self.kind == "bernoulli":
            p = np.asarray(self.p, dtype=float)
            if p.ndim != 1 or np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
                raise ModelError("Bernoulli probabilities must lie in [0, 1]")
            object.__setattr__(self, "p", tuple(float(v) for v in p))

    @classmethod
    def point_mass(cls, S: Subset) -> "InitialDistribution":
        return cls("point", subset=S)

    @classmethod
    def uniform(cls) -> "InitialDistribution":
        return cls("uniform")

    @classmethod
    def product_bernoulli(cls, p: Sequence[float]) -> "InitialDistribution":
        return cls("bernoulli", p=tuple(p))

    def draw(self, u: np.ndarray) -> np.ndarray:
        """Initial states from a ``(N, n)`` block of uniforms."""
        N, n = u.shape
        if self.kind == "point":
            if self.subset.n != n:
                raise ModelError("point-mass subset has the wrong width")
            return np.repeat(self.subset.to_array()[None, :], N, axis=0)
        if self.kind == "uniform":
            return u < 0.5
        p = np.asarray(self.p)
        if p.size != n:
            raise ModelError(f"expected {n} Bernoulli probabilities, got {p.size}")
        return u < p[None, :]

    def probabilities(self, n: int) -> np.ndarray:
        """The law as a vector over the ``2**n`` subset indices."""
        if self.kind == "point":
            rho = np.zeros(1 << n)
            rho[self.subset.bits] = 1.0
            return rho
        if self.kind == "uniform":
            return np.full(1 << n, 2.0 ** -n)
        p = np.asarray(self.p)
        X = masks_to_bits(np.arange(1 << n, dtype=np.uint64), n)
        return np.prod(np.where(X, p[None, :], 1 - p[None, :]), axis=1)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.subset is not None:
            d["subset"] = self.subset.elements()
        if self.p is not None:
            d["p"] = list(self.p)
        return d


@dataclass(frozen=True)
class ChainConfig:
    kernel: Kernel = Kernel.GIBBS
    scan: Scan = Scan.SYSTEMATIC
    sweeps: int = 1
    seed: int = 0
    initial: InitialDistribution = field(default_factory=InitialDistribution.uniform)
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        object.__setattr__(self, "scan", Scan(self.scan))
        if int(self.sweeps) != self.sweeps or self.sweeps < 0:
            raise ModelError(f"sweeps must be a nonnegative integer, got {self.sweeps!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= MASK64:
            raise ModelError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "sweeps", int(self.sweeps))
        object.__setattr__(self, "seed", int(self.seed))
        if self.order is not None:
            object.__setattr__(self, "order", tuple(int(i) for i in self.order))

    def site_order(self, n: int) -> tuple[int, ...]:
        if self.order is None:
            return tuple(range(n))
        if sorted(self.order) != list(range(n)):
            raise ModelError("systematic scan order must be a permutation of the elements")
        return self.order

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.value,
            "scan": self.scan.value,
            "sweeps": self.sweeps,
            "seed": self.seed,
            "initial": self.initial.to_dict(),
        }


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("DPPMIX_THREADS", "1")))
    except ValueError:
        return 1


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & MASK64, replica & MASK64]))


# ---------------------------------------------------------------------------
# kernel probabilities


def include_probability(beta: float, gain):
    """Gibbs probability of ``x_i = 1`` given the off-``i`` gain, in stable logistic form."""
    return expit(beta * np.asarray(gain, dtype=float))


def accept_probability(beta: float, gain, current):
    """MH probability of flipping bit ``i``: ``min(1, exp(-+ beta * gain))``."""
    bg = beta * np.asarray(gain, dtype=float)
    return np.exp(np.minimum(0.0, np.where(current, -bg, bg)))


def _off_site_gain(P: PointProcess, i: int, S: Subset) -> float:
    if S.n != P.n:
        raise ModelError(f"subset width {S.n} does not match n = {P.n}")
    return P.f.gain(i, S.remove(i))


def gibbs_include_prob(P: PointProcess, i: int, S: Subset) -> float:
    return float(include_probability(P.beta, _off_site_gain(P, i, S)))


def mh_accept_prob(P: PointProcess, i: int, x_i: int, S: Subset) -> float:
    return float(accept_probability(P.beta, _off_site_gain(P, i, S), bool(x_i)))


# ---------------------------------------------------------------------------
# batched sweeps


def _update_site(P: PointProcess, kernel: Kernel, i: int, X: np.ndarray, rows, u: np.ndarray) -> None:
    Xr = X[rows]
    gain = P.f.gain_batch(i, Xr)
    if kernel is Kernel.GIBBS:
        new = u < include_probability(P.beta, gain)
    else:
        cur = Xr[:, i]
        new = cur ^ (u < accept_probability(P.beta, gain, cur))
    X[rows, i] = new


def _apply_sweep(P: PointProcess, cfg: ChainConfig, X: np.ndarray, U: np.ndarray) -> None:
    n = P.n
    if cfg.scan is Scan.SYSTEMATIC:
        for k, i in enumerate(cfg.site_order(n)):
            _update_site(P, cfg.kernel, i, X, slice(None), U[:, k])
        return
    U = U.reshape(len(X), n, 2)
    for t in range(n):
        sites = np.minimum((U[:, t, 0] * n).astype(np.int64), n - 1)
        for i in np.unique(sites):
            rows = np.flatnonzero(sites == i)
            _update_site(P, cfg.kernel, int(i), X, rows, U[rows, t, 1])


def _draws_per_sweep(n: int, scan: Scan) -> int:
    return n if scan is Scan.SYSTEMATIC else 2 * n


def sweep_systematic(P: PointProcess, cfg: ChainConfig, state: Subset, rng: np.random.Generator) -> Subset:
    """One application of the systematic-scan kernel: every site once, in scan order."""
    cfg = ChainConfig(cfg.kernel, Scan.SYSTEMATIC, cfg.sweeps, cfg.seed, cfg.initial, cfg.order)
    X = state.to_array()[None, :]
    _apply_sweep(P, cfg, X, rng.random((1, P.n)))
    return Subset(int(bits_to_masks(X)[0]), P.n)


def sweep_random(P: PointProcess, cfg: ChainConfig, state: Subset, rng: np.random.Generator) -> Subset:
    """``n`` single-site updates at sites drawn uniformly with replacement."""
    cfg = ChainConfig(cfg.kernel, Scan.RANDOM, cfg.sweeps, cfg.seed, cfg.initial, cfg.order)
    X = state.to_array()[None, :]
    _apply_sweep(P, cfg, X, rng.random((1, 2 * P.n)))
    return Subset(int(bits_to_masks(X)[0]), P.n)


def _simulate(P: PointProcess, cfg: ChainConfig, replicas: range) -> np.ndarray:
    n, m = P.n, cfg.sweeps
    w = _draws_per_sweep(n, cfg.scan)
    total = n + m * w
    U = np.stack([replica_generator(cfg.seed, r).random(total) for r in replicas])
    X = cfg.initial.draw(U[:, :n])
    for t in range(m):
        _apply_sweep(P, cfg, X, U[:, n + t * w : n + (t + 1) * w])
    return X


def sample_states(P: PointProcess, cfg: ChainConfig, N: int) -> np.ndarray:
    """``N`` independent draws of ``rho T^m`` as an ``(N, n)`` boolean array."""
    if int(N) != N or N < 1:
        raise ModelError(f"replica count must be a positive integer, got {N!r}")
    N = int(N)
    chunks = [range(s, min(s + CHUNK, N)) for s in range(0, N, CHUNK)]
    threads = min(max_threads(), len(chunks))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda rg: _simulate(P, cfg, rg), chunks))
    else:
        parts = [_simulate(P, cfg, rg) for rg in chunks]
    return np.concatenate(parts, axis=0)


def run_replicas(P: PointProcess, cfg: ChainConfig, N: int) -> list[Subset]:
    X = sample_states(P, cfg, N)
    return [Subset(int(m), P.n) for m in bits_to_masks(X)]


def run_chain(P: PointProcess, cfg: ChainConfig) -> Subset:
    """One draw of ``rho T^m`` using the stream of replica 0."""
    return run_replicas(P, cfg, 1)[0]
