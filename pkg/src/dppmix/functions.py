"""Concrete set-function families with closed-form gains and Hessians.

Every family validates its parameters on construction and overrides the
finite-difference defaults of :class:`~dppmix.core.SetFunction` with the
closed forms.  Arrays are stored read-only so instances can be shared
between threads.
"""
from __future__ import annotations

from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .core import ModelError, SetFunction, _as_mask


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _elements(mask: int, n: int) -> list[int]:
    return [k for k in range(n) if mask >> k & 1]


def _clear(X: np.ndarray, i: int) -> np.ndarray:
    Xo = np.array(X, dtype=bool, copy=True)
    Xo[:, i] = False
    return Xo


def _check_matrix(L, name: str = "L", square: bool = True) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.size == 0:
        raise ModelError(f"{name} must be a non-empty 2-D matrix")
    if square and L.shape[0] != L.shape[1]:
        raise ModelError(f"{name} must be square, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise ModelError(f"{name} has non-finite entries")
    return L


def _check_symmetric(L: np.ndarray, name: str = "L") -> np.ndarray:
    scale = max(1.0, float(np.abs(L).max()))
    if np.max(np.abs(L - L.T)) > 1e-12 * scale:
        raise ModelError(f"{name} must be symmetric")
    return (L + L.T) / 2


# ---------------------------------------------------------------------------
# modular and the pair-tweaked modular function


class ModularFunction(SetFunction):
    """``f(S) = sum_{i in S} w_i``."""

    family = "modular"
    submodular = True
    supermodular = True

    def __init__(self, w: Sequence[float]):
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
            raise ModelError("w must be a non-empty vector of finite reals")
        super().__init__(w.size)
        self.w = _frozen(w)
        self.monotone = bool(np.all(w >= 0))

    def _value(self, mask):
        return float(sum(self.w[k] for k in _elements(mask, self.n)))

    def _gain(self, i, mask):
        return float(self.w[i])

    def _hessian(self, i, j, mask):
        return 0.0

    def values_batch(self, X):
        return np.asarray(X, dtype=float) @ self.w

    def gain_batch(self, i, X):
        return np.full(len(X), self.w[i])


class PairTweakFunction(SetFunction):
    """Modular part plus ``g(S) = 1`` iff ``S`` meets ``{k, k_prime}``.

    The Hessian is ``-1`` on the pair ``{k, k_prime}`` and zero elsewhere.
    """

    family = "pair_tweak"
    submodular = True
    supermodular = False

    def __init__(self, w: Sequence[float], k: int, k_prime: int):
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or w.size < 2 or not np.all(np.isfinite(w)):
            raise ModelError("w must be a vector of at least two finite reals")
        super().__init__(w.size)
        k, k_prime = int(k), int(k_prime)
        if k == k_prime:
            raise ModelError("k and k_prime must be distinct")
        for e in (k, k_prime):
            self._check_element(e)
        self.w = _frozen(w)
        self.k, self.k_prime = k, k_prime
        self.monotone = bool(np.all(w >= 0))

    def _value(self, mask):
        g = 1.0 if mask >> self.k & 1 or mask >> self.k_prime & 1 else 0.0
        return float(sum(self.w[e] for e in _elements(mask, self.n))) + g

    def _other(self, i):
        return {self.k: self.k_prime, self.k_prime: self.k}.get(i)

    def _gain(self, i, mask):
        other = self._other(i)
        bump = 1.0 if other is not None and not mask >> other & 1 else 0.0
        return float(self.w[i]) + bump

    def _hessian(self, i, j, mask):
        return -1.0 if {i, j} == {self.k, self.k_prime} else 0.0

    def values_batch(self, X):
        X = np.asarray(X, dtype=bool)
        return X.astype(float) @ self.w + (X[:, self.k] | X[:, self.k_prime])

    def gain_batch(self, i, X):
        other = self._other(i)
        out = np.full(len(X), self.w[i])
        if other is not None:
            out = out + (~np.asarray(X, dtype=bool)[:, other])
        return out


def pair_tweak_preset(n: int, k: int = 0, k_prime: int = 1) -> PairTweakFunction:
    """Unit weights except ``w_k = w_k' = 0``: curvature one, yet a benign distribution."""
    if n < 2:
        raise ModelError("the pair-tweak preset needs n >= 2")
    w = np.ones(n)
    w[[k, k_prime]] = 0.0
    return PairTweakFunction(w, k, k_prime)


# ---------------------------------------------------------------------------
# facility location


class FacilityLocation(SetFunction):
    """``f(S) = sum_k max_{l in S} L[k, l] - lam |S|`` with the empty max taken as 0.

    ``L`` has one row per customer and one column per facility (element).
    """

    family = "facility_location"
    submodular = True

    def __init__(self, L, lam: float = 0.0):
        L = _check_matrix(L, square=False)
        if np.any(L < 0):
            raise ModelError("facility values L must be nonnegative")
        if not (np.isfinite(lam) and lam >= 0):
            raise ModelError("lambda must be a nonnegative real")
        super().__init__(L.shape[1])
        self.L = _frozen(L)
        self.lam = float(lam)
        self.monotone = self.lam == 0.0

    def _best(self, mask) -> np.ndarray:
        cols = _elements(mask, self.n)
        if not cols:
            return np.zeros(self.L.shape[0])
        return self.L[:, cols].max(axis=1)

    def _value(self, mask):
        return float(self._best(mask).sum()) - self.lam * mask.bit_count()

    def _gain(self, i, mask):
        return float(np.maximum(self.L[:, i] - self._best(mask), 0.0).sum()) - self.lam

    def _hessian(self, i, j, mask):
        cur = self._best(mask)
        Li, Lj = self.L[:, i], self.L[:, j]
        return float((np.minimum(Li, cur) - np.minimum(Li, np.maximum(Lj, cur))).sum())

    def _best_batch(self, X):
        X = np.asarray(X, dtype=bool)
        return (X[:, None, :] * self.L[None, :, :]).max(axis=2)

    def values_batch(self, X):
        X = np.asarray(X, dtype=bool)
        return self._best_batch(X).sum(axis=1) - self.lam * X.sum(axis=1)

    def gain_batch(self, i, X):
        cur = self._best_batch(_clear(X, i))
        return np.maximum(self.L[None, :, i] - cur, 0.0).sum(axis=1) - self.lam


def facility_hessian_floor(F: FacilityLocation, i: int, j: int) -> float:
    """``min_S`` of the Hessian entry ``(i, j)``, attained at the empty set."""
    if i == j:
        raise ModelError("hessian floor needs i != j")
    F._check_element(i)
    F._check_element(j)
    return -float(np.minimum(F.L[:, i], F.L[:, j]).sum())


# ---------------------------------------------------------------------------
# generalized graph cut


class GraphCut(SetFunction):
    """``f(S) = a + b sum_{k in S} sum_l L[k,l] - c sum_{k,l in S} L[k,l]``."""

    family = "graph_cut"
    submodular = True
    supermodular = False
    monotone = None

    def __init__(self, L, a: float = 0.0, b: float = 1.0, c: float = 1.0):
        L = _check_symmetric(_check_matrix(L))
        if np.any(L < 0):
            raise ModelError("edge weights must be nonnegative")
        if np.any(np.diag(L) != 0):
            raise ModelError("L must have a zero diagonal")
        for name, v in (("a", a), ("b", b), ("c", c)):
            if not (np.isfinite(v) and v >= 0):
                raise ModelError(f"{name} must be a nonnegative real")
        super().__init__(L.shape[0])
        self.L = _frozen(L)
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.degree = _frozen(L.sum(axis=1))
        self.supermodular = self.c == 0 or not np.any(L)

    def _value(self, mask):
        idx = _elements(mask, self.n)
        if not idx:
            return self.a
        inner = self.L[np.ix_(idx, idx)].sum()
        return self.a + self.b * float(self.degree[idx].sum()) - self.c * float(inner)

    def _gain(self, i, mask):
        idx = _elements(mask, self.n)
        return self.b * float(self.degree[i]) - 2 * self.c * float(self.L[i, idx].sum())

    def _hessian(self, i, j, mask):
        return -2 * self.c * float(self.L[i, j])

    def values_batch(self, X):
        Xf = np.asarray(X, dtype=float)
        return self.a + self.b * (Xf @ self.degree) - self.c * np.einsum("ni,ij,nj->n", Xf, self.L, Xf)

    def gain_batch(self, i, X):
        Xo = _clear(X, i).astype(float)
        return self.b * self.degree[i] - 2 * self.c * (Xo @ self.L[:, i])


# ---------------------------------------------------------------------------
# log-determinant (determinantal point processes)


def _schur(L: np.ndarray, a: int, b: int, idx: list[int]) -> float:
    """``L[a, b] - L[a, S] L_S^{-1} L[S, b]`` via a Cholesky factor of ``L_S``."""
    if not idx:
        return float(L[a, b])
    try:
        fac = sla.cho_factor(L[np.ix_(idx, idx)], lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ModelError("S-indexed submatrix is not positive definite") from exc
    sol = sla.cho_solve(fac, L[idx, b], check_finite=False)
    return float(L[a, b] - L[a, idx] @ sol)


def _pd_matrix(L) -> np.ndarray:
    L = _check_symmetric(_check_matrix(L))
    try:
        np.linalg.cholesky(L)
    except np.linalg.LinAlgError as exc:
        raise ModelError("L must be positive definite") from exc
    return L


def cond_variance(L, i: int, S) -> float:
    """``Var(X_i | X_S)`` for a Gaussian vector with covariance ``L``."""
    L = np.asarray(L, dtype=float)
    mask = _as_mask(S, L.shape[0])
    if mask >> i & 1:
        raise ModelError(f"element {i} must not be in S")
    return _schur(L, i, i, _elements(mask, L.shape[0]))


def cond_covariance(L, i: int, j: int, S) -> float:
    L = np.asarray(L, dtype=float)
    mask = _as_mask(S, L.shape[0])
    if mask >> i & 1 or mask >> j & 1:
        raise ModelError("i and j must not be in S")
    return _schur(L, i, j, _elements(mask, L.shape[0]))


def cond_correlation(L, i: int, j: int, S) -> float:
    """Partial correlation of ``X_i`` and ``X_j`` given ``X_S``."""
    if i == j:
        raise ModelError("conditional correlation needs i != j")
    cov = cond_covariance(L, i, j, S)
    return cov / np.sqrt(cond_variance(L, i, S) * cond_variance(L, j, S))


def cond_mutual_info(L, i: int, j: int, S) -> float:
    """``I(X_i; X_j | X_S) = -log(1 - rho^2) / 2``."""
    rho = cond_correlation(L, i, j, S)
    return -0.5 * float(np.log1p(-rho * rho))


class LogDetFunction(SetFunction):
    """``f(S) = log det L_S`` with ``f(empty) = 0`` for a positive definite ``L``."""

    family = "log_det"
    submodular = True
    monotone = None

    def __init__(self, L):
        L = _pd_matrix(L)
        super().__init__(L.shape[0])
        self.L = _frozen(L)
        self.chol = _frozen(np.linalg.cholesky(L))

    def _value(self, mask):
        idx = _elements(mask, self.n)
        if not idx:
            return 0.0
        try:
            c = np.linalg.cholesky(self.L[np.ix_(idx, idx)])
        except np.linalg.LinAlgError as exc:
            raise ModelError("principal submatrix is not positive definite") from exc
        return 2.0 * float(np.log(np.diag(c)).sum())

    def _gain(self, i, mask):
        return float(np.log(_schur(self.L, i, i, _elements(mask, self.n))))

    def _hessian(self, i, j, mask):
        rho = cond_correlation(self.L, i, j, mask)
        return float(np.log1p(-rho * rho))

    def full_conditional_variances(self) -> np.ndarray:
        """``Var(X_i | X_{V - i}) = 1 / (L^{-1})_{ii}`` from the cached factor."""
        inv = sla.cho_solve((self.chol, True), np.eye(self.n), check_finite=False)
        return 1.0 / np.diag(inv)


# ---------------------------------------------------------------------------
# decomposable functions: sums of concave functions of modular counts


class Concave:
    """A concave ``phi`` on the counts ``0..n``.

    ``bounds(n)`` returns ``(c, c2)`` with ``phi' >= c`` and ``c2 <= phi'' <= 0``
    on ``[0, n]``; it raises :class:`ModelError` when no such pair exists
    with ``c > 0``.  ``worst_at_zero`` is true when the second differences
    are nondecreasing in the count, so the most negative one is at 0.
    """

    kind = "concave"
    worst_at_zero = True

    def __call__(self, x):
        raise NotImplementedError

    def bounds(self, n: int) -> tuple[float, float]:
        raise NotImplementedError

    def certifiable(self, n: int) -> bool:
        try:
            self.bounds(n)
        except ModelError:
            return False
        return True

    def validate(self, n: int) -> None:
        pass

    def is_concave(self, n: int) -> bool:
        return True

    def is_nondecreasing(self, n: int) -> bool:
        return True

    def to_dict(self) -> dict:
        raise NotImplementedError


class SqrtConcave(Concave):
    """``scale * sqrt(x + eps0)``; the shift keeps the second derivative bounded at 0."""

    kind = "sqrt"

    def __init__(self, scale: float = 1.0, eps0: float = 1e-6):
        if not scale > 0 or not eps0 > 0:
            raise ModelError("sqrt needs scale > 0 and eps0 > 0")
        self.scale, self.eps0 = float(scale), float(eps0)

    def __call__(self, x):
        return self.scale * np.sqrt(np.asarray(x, dtype=float) + self.eps0)

    def bounds(self, n):
        c = self.scale / (2.0 * np.sqrt(n + self.eps0))
        c2 = -self.scale / 4.0 * self.eps0 ** -1.5
        return float(c), float(c2)

    def to_dict(self):
        return {"kind": "sqrt", "scale": self.scale, "eps0": self.eps0}


class Log1pConcave(Concave):
    """``scale * log(1 + x)``."""

    kind = "log1p"

    def __init__(self, scale: float = 1.0):
        if not scale > 0:
            raise ModelError("log1p needs scale > 0")
        self.scale = float(scale)

    def __call__(self, x):
        return self.scale * np.log1p(np.asarray(x, dtype=float))

    def bounds(self, n):
        return self.scale / (1.0 + n), -self.scale

    def to_dict(self):
        return {"kind": "log1p", "scale": self.scale}


class LinearCapped(Concave):
    """``scale * min(x, theta)``.

    Only certifiable when ``theta >= n`` (otherwise the slope vanishes past
    ``theta`` and the kink has no finite curvature bound).
    """

    kind = "linear_capped"
    worst_at_zero = False

    def __init__(self, theta: float, scale: float = 1.0):
        if not theta > 0 or not scale > 0:
            raise ModelError("linear_capped needs theta > 0 and scale > 0")
        self.theta, self.scale = float(theta), float(scale)

    def __call__(self, x):
        return self.scale * np.minimum(np.asarray(x, dtype=float), self.theta)

    def bounds(self, n):
        if self.theta < n:
            raise ModelError(f"linear_capped with theta={self.theta} < n={n} has no positive slope bound")
        return self.scale, 0.0

    def to_dict(self):
        return {"kind": "linear_capped", "theta": self.theta, "scale": self.scale}


class QuadraticConcave(Concave):
    """``p x - q x^2`` with ``q >= 0``; increasing on ``[0, n]`` iff ``p - 2 q n > 0``."""

    kind = "quadratic"

    def __init__(self, p: float, q: float):
        if not (np.isfinite(p) and np.isfinite(q)) or q < 0:
            raise ModelError("quadratic needs finite p and q >= 0")
        self.p, self.q = float(p), float(q)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.p * x - self.q * x * x

    def validate(self, n):
        if not self.p - 2 * self.q * n > 0:
            raise ModelError(f"quadratic needs p - 2 q n > 0 on [0, {n}], got {self.p - 2 * self.q * n}")

    def bounds(self, n):
        self.validate(n)
        return self.p - 2 * self.q * n, -2 * self.q

    def to_dict(self):
        return {"kind": "quadratic", "p": self.p, "q": self.q}


class TableConcave(Concave):
    """``phi(k) = values[k]`` on integer counts; never certifiable."""

    kind = "table"
    worst_at_zero = False

    def __init__(self, values: Sequence[float]):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
            raise ModelError("table phi needs a non-empty vector of finite values")
        self.values = _frozen(values)

    def __call__(self, x):
        return self.values[np.asarray(x, dtype=np.int64)]

    def bounds(self, n):
        raise ModelError("table-valued phi has no analytic derivative bounds")

    def is_concave(self, n):
        v = self.values
        return bool(np.all(v[2:] - 2 * v[1:-1] + v[:-2] <= 0)) if v.size > 2 else True

    def is_nondecreasing(self, n):
        return bool(np.all(np.diff(self.values) >= 0))

    def to_dict(self):
        return {"kind": "table", "values": self.values.tolist()}


def concave_from_dict(d: dict) -> Concave:
    d = dict(d)
    kind = d.pop("kind", None)
    builders = {
        "sqrt": SqrtConcave,
        "log1p": Log1pConcave,
        "linear_capped": LinearCapped,
        "quadratic": QuadraticConcave,
        "table": TableConcave,
    }
    if kind not in builders:
        raise ModelError(f"unknown phi kind {kind!r}; expected one of {sorted(builders)}")
    try:
        return builders[kind](**d)
    except TypeError as exc:
        raise ModelError(f"bad parameters for phi kind {kind!r}: {exc}") from None


class DecomposableFunction(SetFunction):
    """``f(S) = sum_{A in cover} phi_A(|A & S|)``."""

    family = "decomposable"

    def __init__(self, n: int, cover: Sequence[Sequence[int]], phi: Concave | Sequence[Concave]):
        super().__init__(n)
        if not cover:
            raise ModelError("cover must be non-empty")
        sets = []
        for A in cover:
            A = frozenset(int(e) for e in A)
            if not A:
                raise ModelError("cover sets must be non-empty")
            for e in A:
                self._check_element(e)
            sets.append(A)
        if frozenset().union(*sets) != frozenset(range(n)):
            missing = sorted(set(range(n)) - frozenset().union(*sets))
            raise ModelError(f"cover does not cover the ground set; missing {missing}")
        phis = [phi] * len(sets) if isinstance(phi, Concave) else list(phi)
        if len(phis) != len(sets):
            raise ModelError(f"expected {len(sets)} phi functions, got {len(phis)}")
        for A, p in zip(sets, phis):
            if not isinstance(p, Concave):
                raise ModelError("phi entries must be Concave instances")
            p.validate(n)
            if isinstance(p, TableConcave) and p.values.size < len(A) + 1:
                raise ModelError(f"table phi needs {len(A) + 1} values for a cover set of size {len(A)}")
        self.cover = tuple(sets)
        self.phis = tuple(phis)
        inc = np.zeros((len(sets), n))
        for a, A in enumerate(sets):
            inc[a, sorted(A)] = 1.0
        self.incidence = _frozen(inc)
        # group cover sets sharing one phi object so batches call phi once per group
        groups: dict[int, list[int]] = {}
        for a, p in enumerate(phis):
            groups.setdefault(id(p), []).append(a)
        self._groups = [(phis[idx[0]], np.array(idx)) for idx in groups.values()]
        self.submodular = all(p.is_concave(n) for p in phis)
        self.monotone = all(p.is_nondecreasing(n) for p in phis)

    def _counts(self, mask):
        x = np.array([mask >> k & 1 for k in range(self.n)], dtype=float)
        return self.incidence @ x

    def _value(self, mask):
        counts = self._counts(mask)
        return float(sum(float(p(counts[a])) for a, p in enumerate(self.phis)))

    def _gain(self, i, mask):
        counts = self._counts(mask & ~(1 << i))
        total = 0.0
        for a, p in enumerate(self.phis):
            if i in self.cover[a]:
                s = counts[a]
                total += float(p(s + 1) - p(s))
        return total

    def _hessian(self, i, j, mask):
        counts = self._counts(mask)
        total = 0.0
        for a, p in enumerate(self.phis):
            if i in self.cover[a] and j in self.cover[a]:
                s = counts[a]
                total += float(p(s + 2) - 2 * p(s + 1) + p(s))
        return total

    def values_batch(self, X):
        counts = np.asarray(X, dtype=float) @ self.incidence.T
        out = np.zeros(len(counts))
        for p, idx in self._groups:
            out += p(counts[:, idx]).sum(axis=1)
        return out

    def gain_batch(self, i, X):
        counts = _clear(X, i).astype(float) @ self.incidence.T
        out = np.zeros(len(counts))
        for p, idx in self._groups:
            idx = idx[self.incidence[idx, i] > 0]
            if idx.size:
                s = counts[:, idx]
                out += (p(s + 1) - p(s)).sum(axis=1)
        return out

    # quantities used by the closed-form certificate
    def degrees(self) -> np.ndarray:
        """Number of cover sets containing each element."""
        return self.incidence.sum(axis=0)

    def neighborhood_sizes(self) -> np.ndarray:
        """``|union of cover sets containing i|`` for each ``i``."""
        return np.array(
            [len(frozenset().union(*(A for A in self.cover if i in A))) for i in range(self.n)], dtype=float
        )

    def pair_multiplicity(self) -> int:
        """Largest number of cover sets containing one pair ``{i, j}``."""
        inc = self.incidence
        shared = inc.T @ inc
        np.fill_diagonal(shared, 0)
        return int(shared.max()) if self.n > 1 else 0


def mean_field_ising_preset(n: int, J: float = 1.0) -> DecomposableFunction:
    """All pairs with ``phi(0) = phi(2) = -J/n`` and ``phi(1) = J/n``.

    The antiferromagnetic mean-field Ising model at zero field; usable by
    evaluation and sampling but not by the closed-form certificate.
    """
    if n < 2:
        raise ModelError("mean-field Ising preset needs n >= 2")
    if not J > 0:
        raise ModelError("J must be positive")
    phi = TableConcave([-J / n, J / n, -J / n])
    return DecomposableFunction(n, list(combinations(range(n), 2)), phi)


__all__ = [
    "ModularFunction",
    "PairTweakFunction",
    "pair_tweak_preset",
    "FacilityLocation",
    "facility_hessian_floor",
    "GraphCut",
    "LogDetFunction",
    "cond_variance",
    "cond_covariance",
    "cond_correlation",
    "cond_mutual_info",
    "Concave",
    "SqrtConcave",
    "Log1pConcave",
    "LinearCapped",
    "QuadraticConcave",
    "TableConcave",
    "concave_from_dict",
    "DecomposableFunction",
    "mean_field_ising_preset",
]
