"""Seeded random instances and presets for every family, used by the tests and ``dppmix verify``."""
from __future__ import annotations

import numpy as np

from .certificates import default_certificate
from .core import ModelError, PointProcess, SetFunction
from .functions import (
    DecomposableFunction,
    FacilityLocation,
    GraphCut,
    Log1pConcave,
    LogDetFunction,
    ModularFunction,
    PairTweakFunction,
    QuadraticConcave,
    SqrtConcave,
    mean_field_ising_preset,
    pair_tweak_preset,
)

FAMILIES = ("modular", "pair_tweak", "facility_location", "graph_cut", "log_det", "decomposable")


def random_pd(n: int, rng: np.random.Generator, jitter: float = 0.5) -> np.ndarray:
    A = rng.normal(size=(n, n)) / np.sqrt(n)
    return A @ A.T + jitter * np.eye(n)


def random_function(family: str, n: int, rng: np.random.Generator) -> SetFunction:
    """A random member of ``family`` on ``n`` elements."""
    if family == "modular":
        return ModularFunction(rng.normal(size=n))
    if family == "pair_tweak":
        k, k2 = rng.choice(n, size=2, replace=False)
        return PairTweakFunction(rng.uniform(0, 1, size=n), int(k), int(k2))
    if family == "facility_location":
        m = int(rng.integers(2, n + 2))
        return FacilityLocation(rng.uniform(0, 1, size=(m, n)), lam=float(rng.uniform(0, 0.3)))
    if family == "graph_cut":
        L = np.triu(rng.uniform(0, 1, size=(n, n)) * (rng.random((n, n)) < 0.6), 1)
        L = L + L.T
        c = float(rng.uniform(0.5, 1.5))
        return GraphCut(L, a=0.0, b=float(rng.uniform(1.0, 2.0)) * c, c=c)
    if family == "log_det":
        return LogDetFunction(random_pd(n, rng))
    if family == "decomposable":
        blocks = int(rng.integers(2, n + 1))
        cover = [sorted(rng.choice(n, size=int(rng.integers(2, min(n, 4) + 1)), replace=False)) for _ in range(blocks)]
        missing = set(range(n)) - set().union(*map(set, cover))
        cover += [[int(e)] for e in sorted(missing)]
        phis = []
        for _ in cover:
            pick = rng.integers(3)
            if pick == 0:
                phis.append(Log1pConcave(float(rng.uniform(0.5, 1.5))))
            elif pick == 1:
                phis.append(SqrtConcave(float(rng.uniform(0.5, 1.5)), eps0=1.0))
            else:
                q = float(rng.uniform(0.01, 0.05))
                phis.append(QuadraticConcave(2 * q * n + float(rng.uniform(0.2, 1.0)), q))
        return DecomposableFunction(n, cover, phis)
    raise ModelError(f"unknown family {family!r}")


def certified_instance(family: str, n: int, seed: int, target: float = 0.9, beta: float = 1.0, kernel: str = "gibbs"):
    """Random instance with ``beta`` halved until its default certificate has ``gamma < target``.

    Returns ``(P, certificate)``.
    """
    rng = np.random.default_rng(seed)
    f = random_function(family, n, rng)
    for _ in range(60):
        P = PointProcess(f, beta)
        cert = default_certificate(P, kernel)
        if cert.gamma < target:
            return P, cert
        beta /= 2
    raise ModelError(f"could not certify a {family} instance")


def presets(n: int = 4) -> dict[str, PointProcess]:
    """One fixed point process per family (plus the mean-field Ising model)."""
    rng = np.random.default_rng(12345)
    out = {
        "modular": PointProcess(ModularFunction(np.linspace(-1, 1, n)), 1.0),
        "pair_tweak": PointProcess(pair_tweak_preset(n), 1.0),
        "facility_location": PointProcess(random_function("facility_location", n, rng), 1.0),
        "graph_cut": PointProcess(random_function("graph_cut", n, rng), 1.0),
        "log_det": PointProcess(random_function("log_det", n, rng), 1.0),
        "decomposable": PointProcess(random_function("decomposable", n, rng), 1.0),
    }
    if n >= 2:
        out["mean_field_ising"] = PointProcess(mean_field_ising_preset(n, 1.0), 1.0)
    return out
