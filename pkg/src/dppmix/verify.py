"""Oracle cross-checks behind ``dppmix verify``.

Each suite returns a list of :class:`Check` rows.  A suite skips (rather
than fails) a model whose ground set exceeds ``max_n``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .certificates import (
    Condition,
    FamilyMismatch,
    certify_family,
    certify_general,
    default_certificate,
    dobrushin_gibbs_exact,
    dobrushin_mh_exact,
    is_submodular,
)
from .core import PointProcess, SetFunction, TooLargeError
from .functions import LogDetFunction
from .oracle import (
    MATRIX_MAX_N,
    TestFunction,
    build_transition,
    dobrushin_from_kernel,
    exact_distribution,
    contraction_check,
)
from .samplers import InitialDistribution

SUITES = ("kernels", "theorem1", "lemma4", "corollaries")
TOL = 1e-10


@dataclass
class Check:
    suite: str
    name: str
    model: str
    status: str  # pass | fail | skip
    value: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _too_big(suite, model, n, cap) -> list[Check] | None:
    if n > cap:
        return [Check(suite, "size", model, "skip", detail=f"n = {n} exceeds cap {cap}")]
    return None


def suite_kernels(P: PointProcess, model: str, max_n: int = 10) -> list[Check]:
    skip = _too_big("kernels", model, P.n, min(max_n, MATRIX_MAX_N))
    if skip:
        return skip
    mu = exact_distribution(P).probs
    out = []
    for kernel in ("gibbs", "mh"):
        mats = [build_transition(P, "single", kernel, site=i) for i in range(P.n)]
        mats += [build_transition(P, "systematic", kernel), build_transition(P, "random", kernel)]
        err = max(float(np.abs(mu @ T.entries - mu).sum()) for T in mats)
        rows = max(float(np.abs(T.entries.sum(axis=1) - 1).max()) for T in mats)
        out.append(Check("kernels", f"{kernel}: mu T = mu", model, _status(err <= TOL), err))
        out.append(Check("kernels", f"{kernel}: row sums", model, _status(rows <= 1e-12), rows))
    gap = float(np.abs(dobrushin_gibbs_exact(P).entries - dobrushin_from_kernel(P, "gibbs")).max())
    out.append(Check("kernels", "gibbs coefficients vs kernel", model, _status(gap <= 1e-12), gap))
    gap = float(np.abs(dobrushin_mh_exact(P).entries - dobrushin_from_kernel(P, "mh")).max())
    out.append(Check("kernels", "mh coefficients vs kernel", model, _status(gap <= 1e-12), gap))
    return out


def suite_contraction(P: PointProcess, model: str, max_n: int = 8, ms=range(21), seed: int = 0) -> list[Check]:
    skip = _too_big("theorem1", model, P.n, min(max_n, MATRIX_MAX_N))
    if skip:
        return skip
    cert = default_certificate(P)
    if not cert.satisfied:
        return [Check("theorem1", "certificate", model, "skip", cert.gamma, "gamma >= 1; contraction not certified")]
    rng = np.random.default_rng(seed)
    n = P.n
    hs = [(f"1[{i} in X]", TestFunction.indicator([i], n)) for i in range(n)]
    hs.append(("1[V subset X]", TestFunction.indicator(range(n), n)))
    hs.append(("random table", TestFunction.from_table(rng.normal(size=1 << n))))
    rhos = [("uniform", InitialDistribution.uniform()), ("empty", InitialDistribution.point_mass(P.ground.empty))]
    worst = {"s": 0.0, "r": 0.0, "tv": 0.0}
    ok = {"s": True, "r": True, "tv": True}
    for _, h in hs:
        for _, rho in rhos:
            rep = contraction_check(P, h, rho, ms, cert)
            ok["s"] &= rep.ok_systematic
            ok["r"] &= rep.ok_random
            ok["tv"] &= rep.ok_tv
            worst["s"] = max(worst["s"], max(l - r for l, r in zip(rep.lhs_s, rep.rhs_s)))
            worst["r"] = max(worst["r"], max(l - r for l, r in zip(rep.lhs_r, rep.rhs_r)))
            worst["tv"] = max(worst["tv"], max(t - b for t, b in zip(rep.tv_s, rep.tv_bound)))
    g = f"gamma = {cert.gamma:.6g}"
    return [
        Check("theorem1", "systematic scan bound", model, _status(ok["s"]), worst["s"], g),
        Check("theorem1", "random scan bound", model, _status(ok["r"]), worst["r"], g),
        Check("theorem1", "TV <= n gamma^m", model, _status(ok["tv"]), worst["tv"], g),
    ]


def suite_sandwich(P: PointProcess, model: str, max_n: int = 8) -> list[Check]:
    skip = _too_big("lemma4", model, P.n, max_n)
    if skip:
        return skip
    C = dobrushin_gibbs_exact(P).entries
    Ct = dobrushin_mh_exact(P).entries
    off = ~np.eye(P.n, dtype=bool)
    lower = float((Ct / 4 - C)[off].max()) if P.n > 1 else -np.inf
    upper = float((C - Ct)[off].max()) if P.n > 1 else -np.inf
    diag = float(max(np.abs(np.diag(C)).max(), (np.diag(C) - np.diag(Ct)).max()))
    return [
        Check("lemma4", "C~/4 <= C", model, _status(lower <= TOL), lower),
        Check("lemma4", "C <= C~", model, _status(upper <= TOL), upper),
        Check("lemma4", "0 = C_ii <= C~_ii", model, _status(diag <= TOL), diag),
    ]


def closed_form_gaps(f: SetFunction, max_subsets: int = 256, seed: int = 0) -> tuple[float, float]:
    """Largest gap between closed-form and finite-difference gains and Hessians."""
    rng = np.random.default_rng(seed)
    n = f.n
    masks = range(1 << n) if n <= 8 else rng.integers(0, 1 << n, size=max_subsets)
    g_gap = h_gap = 0.0
    for mask in masks:
        mask = int(mask)
        for i in range(n):
            if mask >> i & 1:
                continue
            g_gap = max(g_gap, abs(f.gain(i, mask) - f.gain(i, mask, closed_form=False)))
            for j in range(i + 1, n):
                if mask >> j & 1:
                    continue
                h_gap = max(h_gap, abs(f.hessian(i, j, mask) - f.hessian(i, j, mask, closed_form=False)))
    return g_gap, h_gap


def suite_corollaries(P: PointProcess, model: str, max_n: int = 8, slack: float = 1e-9) -> list[Check]:
    skip = _too_big("corollaries", model, P.n, max_n)
    if skip:
        return skip
    out = []
    tol = 1e-6 if isinstance(P.f, LogDetFunction) else 1e-9
    g_gap, h_gap = closed_form_gaps(P.f)
    out.append(Check("corollaries", "closed-form gains", model, _status(g_gap <= tol), g_gap))
    out.append(Check("corollaries", "closed-form hessians", model, _status(h_gap <= tol), h_gap))
    C_norm = dobrushin_gibbs_exact(P).norm_inf()
    kind = Condition.SUBMODULAR if is_submodular(P.f) else Condition.GENERAL
    lemma = certify_general(P, kind).gamma
    out.append(
        Check("corollaries", f"{kind.value} gamma >= ||C||", model, _status(lemma + slack * max(1.0, C_norm) >= C_norm), lemma - C_norm)
    )
    try:
        closed = certify_family(P).gamma
    except (FamilyMismatch, TooLargeError) as exc:
        out.append(Check("corollaries", "closed form", model, "skip", detail=str(exc)))
        return out
    out.append(
        Check("corollaries", f"closed form >= {kind.value} gamma", model, _status(closed + slack * max(1.0, lemma) >= lemma), closed - lemma)
    )
    return out


def run_suite(P: PointProcess, model: str, suite: str = "all", max_n: int = 8) -> list[Check]:
    names = SUITES if suite == "all" else (suite,)
    table = {
        "kernels": suite_kernels,
        "theorem1": suite_contraction,
        "lemma4": suite_sandwich,
        "corollaries": suite_corollaries,
    }
    out = []
    for s in names:
        if s not in table:
            raise ValueError(f"unknown suite {s!r}")
        out += table[s](P, model, max_n=max_n)
    if suite == "all":
        cert = default_certificate(P) if P.n <= max_n else None
        if cert is not None:
            out.append(Check("all", "certificate", model, "pass", cert.gamma, f"satisfied = {cert.satisfied}"))
    return out
