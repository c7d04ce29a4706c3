"""Closed-form MSE bounds for the Wyner-Ziv and chained estimators.

``log k`` is always in bits (base 2); ``ln`` is natural.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from dmesi.chains import Chain, DeltaTable, d_value
from dmesi.codec import CodecParams, resolution_bits


def baseline_factor(log_k: int) -> float:
    return 79.0 * log_k + 26.0


def in_regime(d: int, r: int, log_k: int) -> bool:
    """Whether ``d >= r >= 2 log k`` holds."""
    return d >= r >= 2 * log_k


def baseline_bound(delta_s, n: int, d: int, r: int) -> float:
    """Wyner-Ziv MSE bound ``(79 log k + 26) * sum(delta_i^2) d / (n^2 r)``.

    Evaluated even when ``r > d``; use :func:`in_regime` to flag such cases.
    """
    sq = float(np.sum(np.square(np.asarray(delta_s, dtype=float))))
    return baseline_factor(resolution_bits(n)) * sq * d / (n * n * r)


def corollary_alpha_beta(D: float, delta_i: float, params: CodecParams) -> tuple[float, float]:
    """Per-client bounds on the mean squared error and squared bias."""
    n, k, mu = params.n, params.k, params.mu
    ln_sqrt_n = 0.5 * math.log(n)
    alpha = 24.0 * D * ln_sqrt_n / (mu * (k - 2) ** 2) + 154.0 * D / (mu * n) + delta_i**2 / mu
    beta = 154.0 * D / n
    return alpha, beta


def b1_coefficient(params: CodecParams) -> float:
    """Exact coefficient of the chain correction before it is relaxed to B."""
    n, k, mu, r, d = params.n, params.k, params.mu, params.r, params.dim
    return r / (mu * d) * (24.0 * 0.5 * math.log(n) / (k - 2) ** 2 + 154.0 / n + 154.0 * mu)


@dataclass
class BoundReport:
    baseline: float
    proposed: float
    B_used: float
    sum_D: float
    sum_delta_sq: float
    ratio: float
    improvement_region: bool
    in_regime: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def chain_d_values(chains: Sequence[Chain], table: DeltaTable, n: int) -> list[float]:
    return [d_value(ch, table, n) for ch in sorted(chains, key=lambda c: c.client)]


def proposed_bound(chains: Sequence[Chain], table: DeltaTable, params: CodecParams) -> BoundReport:
    n, d, r, log_k = params.n, params.dim, params.r, params.log_k
    D = chain_d_values(chains, table, n)
    sq = [float(v) ** 2 for v in table.delta_s]
    sum_D = float(sum(D))
    sum_sq = float(sum(sq))
    # per-client differences so that unchained clients contribute exact zeros
    excess = float(sum(a - b for a, b in zip(D, sq)))
    scale = d / (n * n * r)
    factor = baseline_factor(log_k)
    B = factor if excess >= 0 else log_k / 8.0
    baseline = factor * sum_sq * scale
    proposed = baseline + B * excess * scale
    if baseline > 0:
        ratio = proposed / baseline
    else:
        ratio = 1.0 if proposed == 0 else math.inf
    return BoundReport(
        baseline=baseline,
        proposed=proposed,
        B_used=B,
        sum_D=sum_D,
        sum_delta_sq=sum_sq,
        ratio=ratio,
        improvement_region=excess < 0,
        in_regime=in_regime(d, r, log_k),
    )


def remark1_ratio(sum_D: float, sum_delta_sq: float, log_k: int) -> float:
    """Bound ratio (chained / Wyner-Ziv) inside the improvement region."""
    return 1.0 - log_k / (8.0 * baseline_factor(log_k)) * (1.0 - sum_D / sum_delta_sq)


def decomposition_bound(chains: Sequence[Chain], table: DeltaTable, params: CodecParams) -> float:
    """``sum(alpha_i)/n^2 + sum(beta_i)/n`` with the per-client corollary bounds."""
    n = params.n
    total = 0.0
    for ch, D in zip(sorted(chains, key=lambda c: c.client), chain_d_values(chains, table, n)):
        a, b = corollary_alpha_beta(D, table.delta_s[ch.client], params)
        total += a / n**2 + b / n
    return total


def pre_relaxation_bound(chains: Sequence[Chain], table: DeltaTable, params: CodecParams) -> float:
    """The same quantity regrouped as ``B1 * sum(D) + r/(mu d) * sum(delta^2)``, scaled."""
    n, d, r, mu = params.n, params.dim, params.r, params.mu
    scale = d / (n * n * r)
    sum_D = sum(chain_d_values(chains, table, n))
    sum_sq = float(np.sum(table.delta_s**2))
    return b1_coefficient(params) * sum_D * scale + r / (mu * d) * sum_sq * scale
