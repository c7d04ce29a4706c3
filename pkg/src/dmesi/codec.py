"""Vector quantizers built on the modulo quantizer and the random rotation.

A client rotates its vector, stochastically quantizes the coordinates in a
shared-random subset ``S`` and sends the residues. The server decodes each
sampled coordinate against side information ``h`` (its own ``y_i`` for the
plain Wyner-Ziv quantizer, or a previously decoded client for a chain) and
combines the result with the baseline ``y_i``.

Wire format of a :class:`Message`: ``sample_count`` symbols of ``log_k`` bits
each, most significant bit first, concatenated in ascending coordinate order
and zero-padded to a whole number of bytes. The subset and rotation are not
transmitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dmesi.errors import BudgetTooSmall, DimensionError
from dmesi.quantizer import decode_points, encode_levels
from dmesi.rotation import Rotation, next_pow2, pad, rotate, unrotate
from dmesi.seeding import SUBSET, derive_rng

COMBINERS = ("scaled", "plain")


def resolution_bits(n: int) -> int:
    """Bits per symbol, ``ceil(log2(2 + sqrt(12 ln n)))``."""
    return math.ceil(math.log2(2.0 + math.sqrt(12.0 * math.log(n))))


@dataclass(frozen=True)
class CodecParams:
    n: int
    d: int
    dim: int
    r: int
    log_k: int
    sample_count: int

    def __post_init__(self):
        if self.log_k < 2:
            raise ValueError("log_k must be >= 2 (k >= 4)")
        if self.r < 2 * self.log_k:
            raise BudgetTooSmall(f"r={self.r} < 2*log_k={2 * self.log_k}")
        if not 1 <= self.sample_count <= self.dim:
            raise DimensionError(f"sample_count {self.sample_count} not in [1, {self.dim}]")
        if self.sample_count * self.log_k > self.r:
            raise BudgetTooSmall("sampled symbols exceed the bit budget")

    @property
    def k(self) -> int:
        return 1 << self.log_k

    @property
    def mu(self) -> float:
        return self.sample_count / self.dim

    @classmethod
    def with_log_k(cls, n: int, d: int, r: int, log_k: int) -> "CodecParams":
        dim = next_pow2(d)
        if r < 2 * log_k:
            raise BudgetTooSmall(f"r={r} < 2*log_k={2 * log_k}")
        return cls(n=n, d=d, dim=dim, r=r, log_k=log_k, sample_count=min(r // log_k, dim))


def derive_codec_params(n: int, d: int, r: int) -> CodecParams:
    if n < 2:
        raise ValueError("need at least two clients")
    return CodecParams.with_log_k(n, d, r, resolution_bits(n))


@dataclass(frozen=True)
class ChainWeights:
    """Per-hop distance parameters of a chain and the lattice they imply."""

    hops: tuple
    k: int

    def __post_init__(self):
        if any(not h >= 0 for h in self.hops):
            raise ValueError("hop weights must be >= 0")

    @property
    def total_w(self) -> float:
        return float(sum(self.hops))

    @property
    def eps(self) -> float:
        return 2.0 * self.total_w / (self.k - 2)


@dataclass(eq=False)
class Message:
    client_id: int
    symbols: np.ndarray
    log_k: int
    degenerate: bool = False

    @property
    def bit_length(self) -> int:
        return len(self.symbols) * self.log_k

    def to_bytes(self) -> bytes:
        shifts = np.arange(self.log_k - 1, -1, -1)
        bits = (np.asarray(self.symbols, dtype=np.int64)[:, None] >> shifts) & 1
        return np.packbits(bits.astype(np.uint8).ravel()).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, count: int, log_k: int, client_id: int = 0) -> "Message":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: count * log_k]
        weights = 1 << np.arange(log_k - 1, -1, -1)
        symbols = bits.reshape(count, log_k).astype(np.int64) @ weights
        return cls(client_id=client_id, symbols=symbols, log_k=log_k)

    def __eq__(self, other):
        return (
            isinstance(other, Message)
            and self.client_id == other.client_id
            and self.log_k == other.log_k
            and self.degenerate == other.degenerate
            and np.array_equal(self.symbols, other.symbols)
        )


def select_coords(dim: int, sample_count: int, shared_seed: int, label=()) -> np.ndarray:
    """Uniform subset of ``range(dim)`` of the given size, sorted ascending."""
    if sample_count > dim:
        raise DimensionError(f"cannot sample {sample_count} of {dim} coordinates")
    if isinstance(label, int):
        label = (label,)
    if sample_count == dim:
        return np.arange(dim)
    rng = derive_rng(shared_seed, *label, SUBSET)
    return np.sort(rng.choice(dim, size=sample_count, replace=False))


# -- array kernels shared by the per-client API and the batched simulator --


def quantize_rows(rx_sampled, eps, k, coins):
    """Residues of the sampled rotated coordinates; ``eps`` broadcasts per row."""
    return np.mod(encode_levels(rx_sampled, eps, coins), k)


def decode_rows(symbols, rh_sampled, eps, k):
    return decode_points(symbols, rh_sampled, eps, k)


def combine(ry, q, coords, mu, mode):
    """Rotated-space estimate from baseline ``ry`` and decoded samples ``q``.

    ``scaled`` adds the sampled correction divided by ``mu`` (unbiased);
    ``plain`` substitutes the decoded value on the sampled coordinates.
    """
    out = np.array(ry, copy=True)
    base = np.take_along_axis(ry, coords, axis=-1)
    if mode == "scaled":
        vals = base + (q - base) / mu
    elif mode == "plain":
        vals = q
    else:
        raise ValueError(f"unknown combiner {mode!r}")
    np.put_along_axis(out, coords, vals, axis=-1)
    return out


def encode_client(x, weights: ChainWeights, params: CodecParams, R: Rotation, S, rng,
                  client_id: int = 0) -> Message:
    """Quantize ``x`` on the sampled rotated coordinates.

    A zero-weight chain sends the reserved all-zero message flagged degenerate.
    """
    S = np.asarray(S)
    if len(S) != params.sample_count:
        raise DimensionError(f"|S|={len(S)} but sample_count={params.sample_count}")
    coins = rng.random(len(S))
    if weights.total_w == 0:
        return Message(client_id=client_id, symbols=np.zeros(len(S), dtype=np.int64),
                       log_k=params.log_k, degenerate=True)
    rx = rotate(R.signs, pad(x, R.dim))
    sym = quantize_rows(rx[S], weights.eps, params.k, coins)
    return Message(client_id=client_id, symbols=sym, log_k=params.log_k)


def _decoded_samples(msg, h, weights, params, R, S):
    rh = rotate(R.signs, pad(h, R.dim))
    return rh, decode_rows(msg.symbols, rh[np.asarray(S)], weights.eps, params.k)


def decode_client(msg: Message, h, y_i, weights: ChainWeights, params: CodecParams,
                  R: Rotation, S, combiner: str = "scaled") -> np.ndarray:
    """Server-side estimate of a client's vector, length ``d``.

    ``h`` is the decoding side information (``y_i`` itself for the
    Wyner-Ziv quantizer), ``y_i`` the baseline for unsampled coordinates.
    """
    if msg.degenerate:
        return np.asarray(h, dtype=float)[..., : params.d].copy()
    S = np.asarray(S)
    _, q = _decoded_samples(msg, h, weights, params, R, S)
    ry = rotate(R.signs, pad(y_i, R.dim))
    est = combine(ry, q, S, params.mu, combiner)
    return unrotate(R.signs, est)[: params.d]


def chain_side_info(msg: Message, h, weights: ChainWeights, params: CodecParams,
                    R: Rotation, S) -> np.ndarray:
    """Estimate forwarded to the next hop of a chain (length ``d``).

    Sampled coordinates take the decoded values, the rest keep ``h``. Its
    error stays within the accumulated chain weight, unlike the 1/mu-scaled
    output estimate whose sampled coordinates are deliberately amplified.
    """
    if msg.degenerate:
        return np.asarray(h, dtype=float)[..., : params.d].copy()
    S = np.asarray(S)
    rh, q = _decoded_samples(msg, h, weights, params, R, S)
    side = combine(rh, q, S, params.mu, "plain")
    return unrotate(R.signs, side)[: params.d]

