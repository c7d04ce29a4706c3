"""One-dimensional modulo quantizer with a side-information decoder.

The encoder stochastically rounds ``x / eps`` to a neighbouring integer and
transmits only its residue modulo ``k``. The decoder picks the point of the
coset ``{(z*k + m) * eps : z in Z}`` closest to its side information ``h``.

All functions accept scalars or numpy arrays (broadcast elementwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dmesi.errors import ConditionViolated, DegenerateLattice


@dataclass(frozen=True)
class MqParams:
    k: int
    eps: float
    delta_prime: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 4:
            raise ValueError(f"k must be an integer >= 4, got {self.k}")
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if not self.delta_prime >= 0:
            raise ValueError(f"delta_prime must be >= 0, got {self.delta_prime}")

    @classmethod
    def derived(cls, k: int, delta_prime: float) -> "MqParams":
        """Smallest lattice spacing that keeps decoding unambiguous."""
        params = cls(k, 2.0 * delta_prime / (k - 2), delta_prime)
        lhs = params.k * params.eps
        rhs = 2.0 * (params.eps + params.delta_prime)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, lhs)
        return params

    def condition_holds(self, rtol: float = 1e-12) -> bool:
        lhs = self.k * self.eps
        return lhs >= 2.0 * (self.eps + self.delta_prime) - rtol * max(1.0, lhs)


def _as_output(value, like):
    if np.ndim(like) == 0 and np.ndim(value) == 0:
        return value.item() if isinstance(value, np.generic) else value
    return value


def rounding_prob(x, eps):
    """Probability of rounding ``x / eps`` up, clamped into [0, 1]."""
    t = np.asarray(x, dtype=float) / eps
    return np.clip(t - np.floor(t), 0.0, 1.0)


def encode_levels(x, eps, coin):
    """Integer lattice level chosen by stochastic rounding (before the mod)."""
    t = np.asarray(x, dtype=float) / eps
    lo = np.floor(t)
    p_up = np.clip(t - lo, 0.0, 1.0)
    return (lo + (np.asarray(coin) < p_up)).astype(np.int64)


def decode_points(symbol, h, eps, k):
    """Coset point nearest to ``h``; ties go to the smaller point.

    ``eps`` may be an array broadcasting against ``symbol`` and ``h``.
    """
    m = np.asarray(symbol, dtype=float)
    h = np.asarray(h, dtype=float)
    step = k * eps
    z0 = np.floor((h / eps - m) / k)
    p0 = (z0 * k + m) * eps
    # floor() may land one cell off after rounding; pull p0 back below h
    p0 = np.where(p0 > h, p0 - step, p0)
    p1 = p0 + step
    return np.where(p1 - h < h - p0, p1, p0)


def mq_encode(x, params: MqParams, coin):
    """Stochastic-rounding encoder; returns symbols in ``[0, k)``.

    ``coin`` is a uniform draw from [0, 1) per input value.
    """
    if params.eps <= 0:
        raise DegenerateLattice("eps must be positive to encode")
    sym = np.mod(encode_levels(x, params.eps, coin), params.k)
    return _as_output(sym, x)


def mq_decode(symbol, h, params: MqParams):
    if params.eps <= 0:
        raise DegenerateLattice("eps must be positive to decode")
    s = np.asarray(symbol)
    if np.any((s < 0) | (s >= params.k)):
        raise ValueError(f"symbol outside [0, {params.k})")
    return _as_output(decode_points(s, h, params.eps, params.k), h)


def mq_oracle(x: float, h: float, params: MqParams) -> tuple[float, float]:
    """Exact expectation and worst-case error of encode->decode.

    Enumerates both rounding branches instead of sampling.
    """
    # allow for rounding in x - h itself
    if abs(x - h) > params.delta_prime + 1e-12 * max(abs(x), abs(h), params.delta_prime):
        raise ConditionViolated("|x - h| <= delta_prime", f"|{x} - {h}| > {params.delta_prime}")
    if not params.condition_holds():
        raise ConditionViolated(
            "k*eps >= 2*(eps + delta_prime)",
            f"{params.k}*{params.eps} < 2*({params.eps} + {params.delta_prime})",
        )
    if params.eps == 0:
        return float(h), abs(float(h) - x)
    t = x / params.eps
    lo, hi = math.floor(t), math.ceil(t)
    p_hi = min(max(t - lo, 0.0), 1.0)
    d_lo = float(decode_points(lo % params.k, h, params.eps, params.k))
    d_hi = float(decode_points(hi % params.k, h, params.eps, params.k))
    if lo == hi:
        return d_lo, abs(d_lo - x)
    expected = p_hi * d_hi + (1.0 - p_hi) * d_lo
    branches = [d for d, p in ((d_lo, 1.0 - p_hi), (d_hi, p_hi)) if p > 0]
    return expected, max(abs(d - x) for d in branches)
