"""Brute-force ground truth for small ground sets.

Exact distributions (``n <= 20``) and exact transition matrices
(``n <= 12``).  Kernel probabilities here are computed from the value table
as conditional probabilities, independently of the sampler and
certificate code paths they are used to check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import ENUM_MAX_N, ModelError, PointProcess, Subset, _as_mask, check_enumerable

MATRIX_MAX_N = 12
SLACK = 1e-10


@dataclass(frozen=True)
class ExactDistribution:
    probs: np.ndarray
    log_Z: float

    @property
    def n(self) -> int:
        return int(self.probs.size).bit_length() - 1

    def marginal(self, S) -> float:
        mask = _as_mask(S, self.n)
        if mask == 0:
            return 1.0
        idx = np.arange(self.probs.size)
        return float(self.probs[(idx & mask) == mask].sum())


def exact_distribution(P: PointProcess) -> ExactDistribution:
    check_enumerable(P.n, ENUM_MAX_N, "exact distribution")
    logits = P.beta * P.f.table()
    log_Z = float(logsumexp(logits))
    probs = np.exp(logits - log_Z)
    probs.setflags(write=False)
    return ExactDistribution(probs, log_Z)


def exact_marginal(P: PointProcess, S) -> float:
    """``mu({x : x_i = 1 for all i in S})``."""
    return exact_distribution(P).marginal(S)


def tv_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ModelError("distributions must have equal length")
    return 0.5 * float(np.abs(p - q).sum())


# ---------------------------------------------------------------------------
# single-site kernels from the value table


def _site_kernel(logits: np.ndarray, i: int, kernel: str) -> np.ndarray:
    """Probability that site ``i`` holds 1 after one update, from every state."""
    idx = np.arange(logits.size)
    bi = 1 << i
    on, off = logits[idx | bi], logits[idx & ~bi]
    if kernel == "gibbs":
        return np.exp(on - np.logaddexp(on, off))
    if kernel == "mh":
        cur = (idx & bi) != 0
        # move to the other value with probability min(1, mu(other) / mu(current))
        up = np.exp(np.minimum(0.0, on - off))
        down = np.exp(np.minimum(0.0, off - on))
        return np.where(cur, 1.0 - down, up)
    raise ModelError(f"unknown kernel {kernel!r}")


def _kernel_name(kernel) -> str:
    return str(getattr(kernel, "value", kernel))


@dataclass(frozen=True)
class TransitionMatrix:
    entries: np.ndarray
    kind: str
    site: int | None = None

    def power(self, m: int) -> np.ndarray:
        return np.linalg.matrix_power(self.entries, m)


def _right_apply(A: np.ndarray, q: np.ndarray, i: int) -> np.ndarray:
    """``A @ T_i`` where ``T_i`` sends ``y`` to ``y | bi`` w.p. ``q[y]`` and to ``y & ~bi`` otherwise."""
    idx = np.arange(q.size)
    bi = 1 << i
    has = (idx & bi) != 0
    # z with bit i set collects from y = z and y = z ^ bi, both weighted by q[y]
    w = np.where(has, q, 1.0 - q)
    w_flip = np.where(has, q[idx ^ bi], 1.0 - q[idx ^ bi])
    return A * w[None, :] + A[:, idx ^ bi] * w_flip[None, :]


def build_transition(P: PointProcess, kind: str = "systematic", kernel: str = "gibbs", site: int | None = None, order=None) -> TransitionMatrix:
    """Dense ``2**n x 2**n`` transition matrix of a single-site update, a systematic or a random scan."""
    check_enumerable(P.n, MATRIX_MAX_N, "transition matrix")
    kernel = _kernel_name(kernel)
    n = P.n
    logits = P.beta * P.f.table()
    I = np.eye(1 << n)
    if kind == "single":
        if site is None or not 0 <= site < n:
            raise ModelError("single-site matrix needs a site in range")
        return TransitionMatrix(_right_apply(I, _site_kernel(logits, site, kernel), site), "single", site)
    qs = [_site_kernel(logits, i, kernel) for i in range(n)]
    if kind == "systematic":
        order = range(n) if order is None else order
        A = I
        for i in order:
            A = _right_apply(A, qs[i], i)
        return TransitionMatrix(A, "systematic")
    if kind == "random":
        K = sum(_right_apply(I, qs[i], i) for i in range(n)) / n
        return TransitionMatrix(np.linalg.matrix_power(K, n), "random")
    raise ModelError(f"unknown transition kind {kind!r}")


def dobrushin_from_kernel(P: PointProcess, kernel: str = "gibbs") -> np.ndarray:
    """Influence coefficients straight from the definition.

    ``C_ij = max |K_i(x) - K_i(y)|`` over state pairs differing only at
    ``j``, where ``K_i(x)`` is the law of the new value of site ``i``.
    The diagonal compares states differing at ``i`` itself.
    """
    check_enumerable(P.n, ENUM_MAX_N)
    n = P.n
    logits = P.beta * P.f.table()
    idx = np.arange(logits.size)
    C = np.zeros((n, n))
    for i in range(n):
        q = _site_kernel(logits, i, _kernel_name(kernel))
        for j in range(n):
            lo = idx[(idx >> j & 1) == 0]
            C[i, j] = np.abs(q[lo] - q[lo | (1 << j)]).max()
    return C


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Either the indicator of ``{x : x_i = 1 for all i in S}`` or an explicit table."""

    __test__ = False  # not a pytest class

    kind: str
    subset: Subset | None = None
    values: np.ndarray | None = None

    @classmethod
    def indicator(cls, S, n: int) -> "TestFunction":
        return cls("indicator", subset=Subset(_as_mask(S, n), n))

    @classmethod
    def from_table(cls, values) -> "TestFunction":
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ModelError("test function table must be finite")
        return cls("table", values=v)

    def table(self, n: int) -> np.ndarray:
        if self.kind == "indicator":
            mask = self.subset.bits
            idx = np.arange(1 << n)
            return ((idx & mask) == mask).astype(float)
        if self.values.size != 1 << n:
            raise ModelError(f"table has {self.values.size} entries, expected {1 << n}")
        return self.values

    def describe(self) -> dict:
        if self.kind == "indicator":
            return {"kind": "indicator", "subset": self.subset.elements()}
        return {"kind": "table", "size": int(self.values.size)}


def _table_of(h, n: int | None = None) -> np.ndarray:
    if isinstance(h, TestFunction):
        if n is None:
            if h.kind != "indicator":
                return h.values
            n = h.subset.n
        return h.table(n)
    return np.asarray(h, dtype=float)


def delta_i(h, i: int, n: int | None = None) -> float:
    """Oscillation of ``h`` in coordinate ``i``."""
    v = _table_of(h, n)
    check_enumerable(int(v.size).bit_length() - 1, MATRIX_MAX_N, "oscillation")
    idx = np.arange(v.size)
    lo = idx[(idx >> i & 1) == 0]
    return float(np.abs(v[lo] - v[lo | (1 << i)]).max())


def total_oscillation(h, n: int) -> float:
    return sum(delta_i(h, i, n) for i in range(n))


# ---------------------------------------------------------------------------
# contraction check


@dataclass
class ContractionReport:
    gamma: float
    lam: float
    sum_delta: float
    ms: list[int]
    lhs_s: list[float] = field(default_factory=list)
    rhs_s: list[float] = field(default_factory=list)
    lhs_r: list[float] = field(default_factory=list)
    rhs_r: list[float] = field(default_factory=list)
    tv_s: list[float] = field(default_factory=list)
    tv_bound: list[float] = field(default_factory=list)
    skipped: bool = False
    notice: str = ""

    @property
    def ok_systematic(self) -> bool:
        return all(l <= r + SLACK for l, r in zip(self.lhs_s, self.rhs_s))

    @property
    def ok_random(self) -> bool:
        return all(l <= r + SLACK for l, r in zip(self.lhs_r, self.rhs_r))

    @property
    def ok_tv(self) -> bool:
        return all(t <= b + SLACK for t, b in zip(self.tv_s, self.tv_bound))

    @property
    def passed(self) -> bool:
        return self.skipped or (self.ok_systematic and self.ok_random and self.ok_tv)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(ok_systematic=self.ok_systematic, ok_random=self.ok_random, ok_tv=self.ok_tv, passed=self.passed)
        return d


def _rho_vector(rho, n: int) -> np.ndarray:
    if hasattr(rho, "probabilities"):
        return rho.probabilities(n)
    r = np.asarray(rho, dtype=float)
    if r.size != 1 << n:
        raise ModelError("initial law has the wrong length")
    return r


def contraction_check(P: PointProcess, h, rho, ms, certificate, kernel: str = "gibbs") -> ContractionReport:
    """Exact check of ``|rho T^m h - mu h| <= rate^m sum_i delta_i(h)`` for both scans.

    Also checks ``TV(rho T_s^m, mu) <= n gamma^m``.  Skipped when the
    certificate is not satisfied.
    """
    n = P.n
    ms = sorted(int(m) for m in ms)
    gamma = certificate.gamma
    lam = certificate.lam
    hv = _table_of(h, n)
    rep = ContractionReport(gamma, lam, total_oscillation(hv, n), ms)
    if gamma >= 1:
        rep.skipped = True
        rep.notice = f"certificate unsatisfied (gamma = {gamma:.6g}); check skipped"
        return rep
    mu = exact_distribution(P).probs
    mu_h = float(mu @ hv)
    Ts = build_transition(P, "systematic", kernel).entries
    Tr = build_transition(P, "random", kernel).entries
    vs = vr = _rho_vector(rho, n)
    t = 0
    for m in ms:
        while t < m:
            vs, vr, t = vs @ Ts, vr @ Tr, t + 1
        rep.lhs_s.append(abs(float(vs @ hv) - mu_h))
        rep.rhs_s.append(gamma ** m * rep.sum_delta)
        rep.lhs_r.append(abs(float(vr @ hv) - mu_h))
        rep.rhs_r.append(lam ** m * rep.sum_delta)
        rep.tv_s.append(tv_distance(vs, mu))
        rep.tv_bound.append(n * gamma ** m)
    return rep


def worst_case_tv(P: PointProcess, m: int, kind: str = "systematic", kernel: str = "gibbs") -> float:
    """``max_x TV(delta_x T^m, mu)``, the quantity a mixing time bounds."""
    mu = exact_distribution(P).probs
    Tm = build_transition(P, kind, kernel).power(int(m))
    return 0.5 * float(np.abs(Tm - mu[None, :]).sum(axis=1).max())


def empirical_law(masks: np.ndarray, n: int) -> np.ndarray:
    """Histogram of sampled bitmasks as a probability vector."""
    counts = np.bincount(np.asarray(masks, dtype=np.int64), minlength=1 << n)
    return counts / counts.sum()
