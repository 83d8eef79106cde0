"""Dobrushin influence matrices and fast-mixing certificates.

Everything that maximises over subsets does so by full enumeration of a
value table (``n <= 20``) unless the family has a closed form for the
maximiser.  Certificates report the raw ``gamma`` even when it is ``>= 1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ENUM_MAX_N, ModelError, PointProcess, SetFunction, TooLargeError, check_enumerable
from .functions import (
    DecomposableFunction,
    FacilityLocation,
    GraphCut,
    LogDetFunction,
    ModularFunction,
    PairTweakFunction,
)

SUBMODULAR_TOL = 1e-12
LOGDET_MAX_N = 16
CURVATURE_CHECK_MAX_N = 12


class FamilyMismatch(ModelError):
    """The requested certificate does not apply to this function."""


class MatrixKind(str, Enum):
    GIBBS = "gibbs_exact"
    MH = "mh_exact"
    BOUND = "upper_bound"
    HESSIAN = "hessian_bound"


class Provenance(str, Enum):
    ENUMERATED = "enumerated"
    CLOSED_FORM = "closed_form"


class Condition(str, Enum):
    GENERAL = "general"
    SUBMODULAR = "submodular"
    SIMPLIFIED = "simplified"
    CLOSED_FORM = "closed-form"
    DOBRUSHIN = "dobrushin"


@dataclass(frozen=True)
class DobrushinMatrix:
    kind: MatrixKind
    entries: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ModelError("influence matrix must be square")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def norm_inf(self) -> float:
        """Largest row sum."""
        return float(self.entries.sum(axis=1).max())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "provenance": self.provenance.value,
            "entries": self.entries.tolist(),
        }


# ---------------------------------------------------------------------------
# enumeration over a value table


class GainTable:
    """Value table of ``f`` with gains ``g_i[x] = f(x | i) - f(x - i)`` for every mask ``x``."""

    def __init__(self, f: SetFunction, cap: int = ENUM_MAX_N):
        check_enumerable(f.n, cap)
        self.n = f.n
        self.values = f.table()
        self.idx = np.arange(1 << self.n, dtype=np.int64)
        self._cache: dict[int, np.ndarray] = {}

    def gains(self, i: int) -> np.ndarray:
        g = self._cache.get(i)
        if g is None:
            bi = 1 << i
            g = self.values[self.idx | bi] - self.values[self.idx & ~bi]
            if self.n <= 16:
                self._cache[i] = g
        return g

    def off(self, *elements: int) -> np.ndarray:
        """Masks with all of ``elements`` absent."""
        keep = np.ones(self.idx.size, dtype=bool)
        for e in elements:
            keep &= (self.idx >> e & 1) == 0
        return self.idx[keep]

    def pair(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """``(g_i(S), g_i(S + j))`` over all ``S`` avoiding ``i`` and ``j``."""
        g = self.gains(i)
        sel = self.off(i, j)
        return g[sel], g[sel | (1 << j)]

    def hessians(self, i: int, j: int) -> np.ndarray:
        a, b = self.pair(i, j)
        return b - a


def _pairs(n):
    return ((i, j) for i in range(n) for j in range(n) if i != j)


def _lemma2_ratio(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``|e^x - e^y| / ((1 + e^x)(1 + e^y))`` scaled to avoid overflow."""
    px, py = np.maximum(x, 0.0), np.maximum(y, 0.0)
    s = px + py
    num = np.abs(np.exp(x - s) - np.exp(y - s))
    den = (np.exp(-px) + np.exp(x - px)) * (np.exp(-py) + np.exp(y - py))
    return num / den


def dobrushin_gibbs_exact(P: PointProcess) -> DobrushinMatrix:
    """Exact Gibbs-sampler Dobrushin coefficients by enumeration (``n <= 20``)."""
    T = GainTable(P.f)
    C = np.zeros((P.n, P.n))
    for i, j in _pairs(P.n):
        a, b = T.pair(i, j)
        C[i, j] = _lemma2_ratio(P.beta * a, P.beta * b).max()
    return DobrushinMatrix(MatrixKind.GIBBS, C, Provenance.ENUMERATED)


def dobrushin_mh_exact(P: PointProcess) -> DobrushinMatrix:
    """Exact Metropolis-Hastings Dobrushin coefficients; the diagonal is generally positive."""
    T = GainTable(P.f)
    beta = P.beta
    C = np.zeros((P.n, P.n))
    for i in range(P.n):
        g = T.gains(i)[T.off(i)]
        C[i, i] = np.exp(-beta * np.abs(g)).max()
    for i, j in _pairs(P.n):
        a, b = T.pair(i, j)
        x, y = beta * a, beta * b
        up = np.abs(np.exp(np.minimum(0, x)) - np.exp(np.minimum(0, y)))
        down = np.abs(np.exp(np.minimum(0, -x)) - np.exp(np.minimum(0, -y)))
        C[i, j] = np.maximum(up, down).max()
    return DobrushinMatrix(MatrixKind.MH, C, Provenance.ENUMERATED)


# ---------------------------------------------------------------------------
# Hessian bound matrix M


def _closed_form_hessian_bound(f: SetFunction) -> np.ndarray | None:
    n = f.n
    if isinstance(f, ModularFunction):
        return np.zeros((n, n))
    if isinstance(f, PairTweakFunction):
        M = np.zeros((n, n))
        M[f.k, f.k_prime] = M[f.k_prime, f.k] = 1.0
        return M
    if isinstance(f, FacilityLocation):
        L = f.L
        M = np.minimum(L[:, :, None], L[:, None, :]).sum(axis=0)
        np.fill_diagonal(M, 0.0)
        return M
    if isinstance(f, GraphCut):
        return 2 * f.c * np.array(f.L)
    if isinstance(f, DecomposableFunction) and all(p.worst_at_zero for p in f.phis):
        # concave phi with nondecreasing second differences: every term is most negative at S = {}
        d2 = np.array([float(p(2) - 2 * p(1) + p(0)) if len(A) >= 2 else 0.0 for A, p in zip(f.cover, f.phis)])
        inc = np.asarray(f.incidence)
        M = -(inc.T * d2) @ inc
        np.fill_diagonal(M, 0.0)
        return np.abs(M)
    return None


def hessian_bound_matrix(P: PointProcess | SetFunction, closed_form: bool = True) -> DobrushinMatrix:
    """``M_ij = max_{S not containing i, j} |Hessian_ij(S)|`` with zero diagonal."""
    f = P.f if isinstance(P, PointProcess) else P
    if closed_form:
        M = _closed_form_hessian_bound(f)
        if M is not None:
            return DobrushinMatrix(MatrixKind.HESSIAN, M, Provenance.CLOSED_FORM)
    T = GainTable(f)
    M = np.zeros((f.n, f.n))
    for i, j in _pairs(f.n):
        M[i, j] = np.abs(T.hessians(i, j)).max()
    return DobrushinMatrix(MatrixKind.HESSIAN, M, Provenance.ENUMERATED)


# ---------------------------------------------------------------------------
# alpha(beta) and the bound matrix R


def is_submodular(f: SetFunction, tol: float = SUBMODULAR_TOL) -> bool:
    """Structural flag when known, otherwise every Hessian entry checked by enumeration."""
    if f.submodular is not None:
        return bool(f.submodular)
    T = GainTable(f)
    return all(T.hessians(i, j).max() <= tol for i, j in _pairs(f.n) if i < j)


def is_supermodular(f: SetFunction, tol: float = SUBMODULAR_TOL) -> bool:
    if f.supermodular is not None:
        return bool(f.supermodular)
    T = GainTable(f)
    return all(T.hessians(i, j).min() >= -tol for i, j in _pairs(f.n) if i < j)


def _gains_at_complement(f: SetFunction) -> np.ndarray:
    full = (1 << f.n) - 1
    return np.array([f.gain(i, full & ~(1 << i)) for i in range(f.n)])


def alpha_beta(P: PointProcess, form: str = "general") -> float:
    """``max_i max_{S not containing i} exp(-beta * gain_i(S))``.

    ``form="general"`` enumerates all subsets; ``"submodular"`` uses the
    minimiser ``V - {i}`` and ``"supermodular"`` the minimiser ``{}``, both
    exact only under the respective assumption.
    """
    f, beta = P.f, P.beta
    if form == "submodular":
        return float(np.exp(-beta * _gains_at_complement(f)).max())
    if form == "supermodular":
        return float(np.exp(-beta * np.array([f.gain(i, 0) for i in range(f.n)])).max())
    if form != "general":
        raise ModelError(f"unknown alpha form {form!r}")
    T = GainTable(f)
    worst = min(T.gains(i)[T.off(i)].min() for i in range(f.n))
    return float(np.exp(-beta * worst))


def _alpha_for(P: PointProcess, submodular: bool) -> float:
    # both shortcuts coincide with the enumerated maximum under their assumption
    if submodular:
        return alpha_beta(P, "submodular")
    if P.f.supermodular:
        return alpha_beta(P, "supermodular")
    return alpha_beta(P, "general")


def bound_matrix(P: PointProcess, condition: Condition | str) -> tuple[DobrushinMatrix, float, DobrushinMatrix]:
    """Assemble the entry-wise upper bound ``R`` on the Gibbs coefficients.

    Returns ``(R, alpha, M)``.  ``general``: ``alpha * max_S |1 - e^{beta H}|``;
    ``submodular``: ``alpha * max_S (1 - e^{beta H})``; ``simplified``:
    ``alpha * beta * M``.
    """
    condition = Condition(condition)
    f, beta, n = P.f, P.beta, P.n
    sub = is_submodular(f)
    if condition is Condition.SUBMODULAR and not sub:
        raise FamilyMismatch("the submodular condition was requested for a function that is not submodular")
    M = hessian_bound_matrix(f)
    alpha = _alpha_for(P, sub)
    if condition is Condition.SIMPLIFIED:
        R = alpha * beta * M.entries
        prov = M.provenance
    elif sub and M.provenance is Provenance.CLOSED_FORM:
        # H <= 0 everywhere, so both inner maxima equal 1 - exp(-beta * M_ij)
        R = alpha * -np.expm1(-beta * M.entries)
        prov = Provenance.CLOSED_FORM
    else:
        T = GainTable(f)
        R = np.zeros((n, n))
        for i, j in _pairs(n):
            h = T.hessians(i, j)
            if condition is Condition.SUBMODULAR:
                R[i, j] = (-np.expm1(beta * h)).max()
            else:
                R[i, j] = np.abs(np.expm1(beta * h)).max()
        R *= alpha
        prov = Provenance.ENUMERATED
    np.fill_diagonal(R, 0.0)
    return DobrushinMatrix(MatrixKind.BOUND, R, prov), alpha, M


# ---------------------------------------------------------------------------
# certificates


def tau_bound(n: int, epsilon: float, rate: float) -> int | None:
    """``ceil(log(n / epsilon) / (1 - rate))`` sweeps, or ``None`` when ``rate >= 1``."""
    if not epsilon > 0:
        raise ModelError("epsilon must be positive")
    if rate >= 1:
        return None
    return max(0, math.ceil(math.log(n / epsilon) / (1.0 - rate)))


@dataclass
class Certificate:
    gamma: float
    alpha_beta: float | None
    m_inf_norm: float | None
    condition: Condition
    n: int
    beta: float
    epsilon: float = 0.01
    family: str = "generic"
    details: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return math.exp(self.gamma - 1.0) if self.gamma < 700 else math.inf

    @property
    def satisfied(self) -> bool:
        return self.gamma < 1.0

    def rate(self, scan: str = "systematic") -> float:
        """Per-sweep contraction: ``gamma`` for systematic, ``exp(gamma - 1)`` for random scan."""
        return self.gamma if str(getattr(scan, "value", scan)) == "systematic" else self.lam

    def tau_s(self, epsilon: float | None = None) -> int | None:
        return tau_bound(self.n, self.epsilon if epsilon is None else epsilon, self.gamma)

    def tau_r(self, epsilon: float | None = None) -> int | None:
        return tau_bound(self.n, self.epsilon if epsilon is None else epsilon, self.lam)

    def bias_bound(self, m: int, size: int, scan: str = "systematic") -> float:
        return size * self.rate(scan) ** m

    def mse_bound(self, m: int, N: int, size: int, scan: str = "systematic") -> float:
        return self.bias_bound(m, size, scan) ** 2 + 1.0 / N

    def to_dict(self, include_matrices: bool = False) -> dict:
        d = {
            "schema_version": 1,
            "condition": self.condition.value,
            "family": self.family,
            "n": self.n,
            "beta": self.beta,
            "gamma": self.gamma,
            "lambda": self.lam,
            "alpha_beta": self.alpha_beta,
            "m_inf_norm": self.m_inf_norm,
            "satisfied": self.satisfied,
            "epsilon": self.epsilon,
            "tau_s": self.tau_s(),
            "tau_r": self.tau_r(),
            "details": self.details,
        }
        if include_matrices:
            d["matrices"] = {k: v.to_dict() for k, v in self.matrices.items()}
        return d


def certify_general(P: PointProcess, kind: Condition | str = "submodular", epsilon: float = 0.01) -> Certificate:
    """Certificate from the general, submodular or simplified Hessian condition."""
    kind = Condition(kind)
    if kind not in (Condition.GENERAL, Condition.SUBMODULAR, Condition.SIMPLIFIED):
        raise ModelError(f"certify_general handles general/submodular/simplified, not {kind.value}")
    R, alpha, M = bound_matrix(P, kind)
    return Certificate(
        gamma=R.norm_inf(),
        alpha_beta=alpha,
        m_inf_norm=M.norm_inf(),
        condition=kind,
        n=P.n,
        beta=P.beta,
        epsilon=epsilon,
        family=P.f.family,
        matrices={"R": R, "M": M},
    )


def certify_dobrushin(P: PointProcess, kernel: str = "gibbs", epsilon: float = 0.01) -> Certificate:
    """``gamma = ||C||_inf`` from the exact coefficients of the chosen kernel."""
    kernel = str(getattr(kernel, "value", kernel))
    C = dobrushin_gibbs_exact(P) if kernel == "gibbs" else dobrushin_mh_exact(P)
    return Certificate(
        gamma=C.norm_inf(),
        alpha_beta=None,
        m_inf_norm=None,
        condition=Condition.DOBRUSHIN,
        n=P.n,
        beta=P.beta,
        epsilon=epsilon,
        family=P.f.family,
        details={"kernel": kernel},
        matrices={"C": C},
    )


def _m_norm_if_cheap(f: SetFunction) -> float | None:
    try:
        return hessian_bound_matrix(f).norm_inf()
    except TooLargeError:
        return None


def certify_family(P: PointProcess, epsilon: float = 0.01) -> Certificate:
    """Closed-form certificate specialised to the function's family."""
    f, beta, n = P.f, P.beta, P.n
    details: dict = {}
    if isinstance(f, ModularFunction):
        alpha = float(np.exp(-beta * f.w).max())
        gamma = 0.0
    elif isinstance(f, PairTweakFunction):
        alpha = alpha_beta(P, "submodular")
        gamma = alpha * -math.expm1(-beta)
    elif isinstance(f, FacilityLocation):
        overlap = np.minimum(f.L[:, :, None], f.L[:, None, :]).sum(axis=0)
        terms = -np.expm1(-beta * overlap)
        np.fill_diagonal(terms, 0.0)
        alpha = math.exp(f.lam * beta)
        gamma = alpha * float(terms.sum(axis=1).max())
    elif isinstance(f, GraphCut):
        terms = -np.expm1(-2 * f.c * beta * np.asarray(f.L))
        np.fill_diagonal(terms, 0.0)
        # exponent maximised over i; this is the min-degree form whenever b >= 2c
        alpha = float(np.exp(beta * (2 * f.c - f.b) * f.degree).max())
        gamma = alpha * float(terms.sum(axis=1).max())
    elif isinstance(f, LogDetFunction):
        check_enumerable(n, LOGDET_MAX_N, "log-det certificate")
        var = f.full_conditional_variances()
        alpha = float((var ** -beta).max())
        T = GainTable(f, LOGDET_MAX_N)
        # H = log(1 - rho^2) <= 0, so max_S (1 - (1 - rho^2)^beta) = 1 - exp(beta * min_S H);
        # at beta = 1 this is max_S rho^2
        terms = np.zeros((n, n))
        for i, j in _pairs(n):
            terms[i, j] = -math.expm1(beta * float(T.hessians(i, j).min()))
        gamma = alpha * float(terms.sum(axis=1).max())
        details["min_full_conditional_variance"] = float(var.min())
    elif isinstance(f, DecomposableFunction):
        bad = [p.kind for p in f.phis if not p.certifiable(n)]
        if bad:
            raise FamilyMismatch(f"closed-form certificate needs certifiable phi built-ins; got {sorted(set(bad))}")
        bounds = [p.bounds(n) for p in f.phis]
        c = min(b[0] for b in bounds)
        c2 = min(b[1] for b in bounds)
        kappa = f.pair_multiplicity()
        alpha = math.exp(-c * beta * float(f.degrees().min()))
        gamma = -math.expm1(c2 * kappa * beta) * alpha * float(f.neighborhood_sizes().max())
        details.update({"c": c, "c_prime": c2, "pair_multiplicity": kappa})
    else:
        raise FamilyMismatch(f"no closed-form certificate for family {f.family!r}")
    return Certificate(
        gamma=float(gamma),
        alpha_beta=float(alpha),
        m_inf_norm=_m_norm_if_cheap(f),
        condition=Condition.CLOSED_FORM,
        n=n,
        beta=beta,
        epsilon=epsilon,
        family=f.family,
        details=details,
    )


def certify(P: PointProcess, condition: Condition | str = "submodular", epsilon: float = 0.01, kernel: str = "gibbs"):
    condition = Condition(condition)
    if condition is Condition.CLOSED_FORM:
        return certify_family(P, epsilon)
    if condition is Condition.DOBRUSHIN:
        return certify_dobrushin(P, kernel, epsilon)
    return certify_general(P, condition, epsilon)


def best_certificate(P: PointProcess, epsilon: float = 0.01) -> Certificate:
    """Smallest ``gamma`` among the applicable enumerated certificates for the Gibbs chain."""
    kind = Condition.SUBMODULAR if is_submodular(P.f) else Condition.GENERAL
    return certify_general(P, kind, epsilon)


# ---------------------------------------------------------------------------
# curvature


def curvature(f: SetFunction, verify: bool = True, tol: float = 1e-12) -> float:
    """``1 - min_{i: f({i}) != 0} gain_i(V - i) / f({i})`` for monotone submodular ``f``."""
    n = f.n
    if f.value(0) < -tol:
        raise ModelError("curvature needs f(empty) >= 0")
    if verify and n <= CURVATURE_CHECK_MAX_N:
        T = GainTable(f)
        if any(T.gains(i).min() < -tol for i in range(n)):
            raise ModelError("curvature needs a monotone function")
        if any(T.hessians(i, j).max() > tol for i, j in _pairs(n) if i < j):
            raise ModelError("curvature needs a submodular function")
    elif not (f.monotone and f.submodular):
        raise ModelError("curvature needs a function known to be monotone and submodular")
    top = _gains_at_complement(f)
    ratios = [top[i] / f.value(1 << i) for i in range(n) if f.value(1 << i) != 0]
    if not ratios:
        raise ModelError("curvature is undefined: f({i}) = 0 for every i")
    return float(1.0 - min(ratios))


# ---------------------------------------------------------------------------
# decay of correlations


@dataclass
class DecayReport:
    mode: str
    bound_on_norm: float
    m_inf_norm: float
    alpha: float | None = None
    alpha_prime: float | None = None
    c: float | None = None
    r: float | None = None
    N: int | None = None
    range_is_diameter: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def decay_check(M: DobrushinMatrix | np.ndarray, d, mode: str = "exponential", alpha_prime: float = 1.0) -> DecayReport:
    """Fit an exponential-decay or finite-range envelope to ``M`` under the metric ``d``.

    Exponential: the least ``alpha`` with ``M_ij <= alpha exp(-alpha_prime d_ij)``
    and the bound ``max_i sum_{j != i} alpha exp(-alpha_prime d_ij)``.
    Finite range: the least ``r`` with ``M_ij = 0`` whenever ``d_ij > r``,
    ``c = max M_ij``, ``N = max_i |{j: d_ij <= r}|`` and the bound ``c N``.
    """
    entries = np.asarray(M.entries if isinstance(M, DobrushinMatrix) else M, dtype=float)
    d = np.asarray(d, dtype=float)
    n = entries.shape[0]
    if d.shape != (n, n):
        raise ModelError("metric and matrix shapes differ")
    if np.any(d < 0) or np.any(np.diag(d) != 0) or not np.allclose(d, d.T):
        raise ModelError("metric must be symmetric, nonnegative and zero on the diagonal")
    off = ~np.eye(n, dtype=bool)
    norm = float(entries.sum(axis=1).max())
    if mode == "exponential":
        if not alpha_prime > 0:
            raise ModelError("alpha_prime must be positive")
        alpha = float((entries * np.exp(alpha_prime * d))[off].max()) if n > 1 else 0.0
        env = np.where(off, alpha * np.exp(-alpha_prime * d), 0.0)
        return DecayReport("exponential", float(env.sum(axis=1).max()), norm, alpha=alpha, alpha_prime=alpha_prime)
    if mode == "finite_range":
        support = (entries > 0) & off
        diameter = float(d.max())
        r = float(d[support].max()) if support.any() else 0.0
        c = float(entries[off].max()) if n > 1 else 0.0
        N = int((d <= r).sum(axis=1).max())
        return DecayReport(
            "finite_range", c * N, norm, c=c, r=r, N=N, range_is_diameter=bool(support.any() and r >= diameter)
        )
    raise ModelError(f"unknown decay mode {mode!r}")


def warn_if_vacuous(cert: Certificate) -> bool:
    if not cert.satisfied:
        warnings.warn(f"certificate gamma = {cert.gamma:.6g} >= 1: bounds are vacuous", RuntimeWarning, stacklevel=3)
        return True
    return False


def default_certificate(P: PointProcess, kernel: str = "gibbs", epsilon: float = 0.01) -> Certificate:
    """Tightest available certificate for the chosen kernel.

    Gibbs: the smallest ``gamma`` among the closed form and, when ``n <= 20``,
    the enumerated Hessian condition.  Metropolis-Hastings: the exact
    ``||C~||_inf``, which needs ``n <= 20``.
    """
    kernel = str(getattr(kernel, "value", kernel))
    if kernel == "mh":
        return certify_dobrushin(P, "mh", epsilon)
    found = []
    try:
        found.append(certify_family(P, epsilon))
    except (FamilyMismatch, TooLargeError):
        pass
    if P.n <= ENUM_MAX_N:
        found.append(best_certificate(P, epsilon))
    if not found:
        raise TooLargeError(f"no certificate available for family {P.f.family!r} at n = {P.n}")
    return min(found, key=lambda c: c.gamma)
