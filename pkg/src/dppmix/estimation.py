"""Monte Carlo marginal estimates with the certified bias and MSE bounds."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .certificates import Certificate, default_certificate
from .core import ModelError, PointProcess, Subset, _as_mask, bits_to_masks
from .samplers import ChainConfig, sample_states


@dataclass
class EstimateReport:
    target: Subset
    estimate: float
    N: int
    m: int
    bias_bound: float
    mse_bound: float
    gamma_used: float
    chain: dict
    vacuous: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "target": self.target.elements(),
            "estimate": self.estimate,
            "N": self.N,
            "m": self.m,
            "bias_bound": self.bias_bound,
            "mse_bound": self.mse_bound,
            "gamma_used": self.gamma_used,
            "vacuous": self.vacuous,
            "chain": self.chain,
        }


def choose_m(gamma: float, size: int, target_bias: float) -> int:
    """Smallest ``m`` with ``size * gamma**m <= target_bias``."""
    if not 0 <= gamma < 1:
        raise ModelError(f"choose_m needs 0 <= gamma < 1, got {gamma}")
    if not target_bias > 0:
        raise ModelError("target bias must be positive")
    if size == 0 or size <= target_bias:
        return 0
    if gamma == 0:
        return 1
    m = max(1, math.ceil(math.log(target_bias / size) / math.log(gamma)))
    # guard the ceiling against rounding in the logs
    while size * gamma ** m > target_bias:
        m += 1
    while m > 1 and size * gamma ** (m - 1) <= target_bias:
        m -= 1
    return m


def estimate_marginal(
    P: PointProcess, S, cfg: ChainConfig, N: int, certificate: Certificate | None = None
) -> EstimateReport:
    """Average of ``1{S subset of X_k}`` over ``N`` independent chains run for ``cfg.sweeps`` sweeps."""
    target = Subset(_as_mask(S, P.n), P.n)
    if certificate is None:
        certificate = default_certificate(P, cfg.kernel)
    rate = certificate.rate(cfg.scan)
    vacuous = not certificate.satisfied
    if vacuous:
        warnings.warn(
            f"certificate gamma = {certificate.gamma:.6g} >= 1: bias and MSE bounds are vacuous",
            RuntimeWarning,
            stacklevel=2,
        )
    if target.bits == 0:
        estimate = 1.0
        N = int(N)
        if N < 1:
            raise ModelError("replica count must be positive")
    else:
        X = sample_states(P, cfg, N)
        mask = np.uint64(target.bits)
        hits = (bits_to_masks(X) & mask) == mask
        estimate = float(np.count_nonzero(hits)) / len(hits)
    size = len(target)
    bias = size * rate ** cfg.sweeps
    return EstimateReport(
        target=target,
        estimate=estimate,
        N=int(N),
        m=cfg.sweeps,
        bias_bound=bias,
        mse_bound=bias * bias + 1.0 / int(N),
        gamma_used=rate,
        chain=cfg.to_dict(),
        vacuous=vacuous,
    )
