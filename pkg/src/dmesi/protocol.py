"""Simultaneous-message-passing simulation of the estimators.

Every random quantity of a trial is derived from ``(master_seed, trial_id,
client, role)``, so trials can run in any order or in parallel and produce
identical results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from dmesi.bounds import BoundReport, proposed_bound
from dmesi.chains import Chain, DeltaTable, default_order, delta_prime
from dmesi.codec import (
    ChainWeights,
    CodecParams,
    combine,
    decode_client,
    decode_rows,
    encode_client,
    quantize_rows,
    select_coords,
)
from dmesi.errors import ConstraintViolation, OrderViolation
from dmesi.rotation import pad, rotate, sample_rotation, unrotate
from dmesi.seeding import COINS, INSTANCE, derive_rng

THREADS_ENV = "DMESI_THREADS"


@dataclass(eq=False)
class Instance:
    x: np.ndarray
    y: np.ndarray
    table: DeltaTable

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def true_mean(self) -> np.ndarray:
        return self.x.mean(axis=0)

    def with_looseness(self, factor: float) -> "Instance":
        """Copy whose declared distances are inflated by ``factor >= 1``."""
        if factor < 1:
            raise ValueError("looseness factor must be >= 1")
        return replace(self, table=self.table.scaled(factor))


def _unit_rows(rng, n, d):
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _per_client(value, n):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,))
    return np.array(arr)


def derive_instance(n: int, d: int, seed: int, spread: float = 1.0,
                    noise_min: float = 0.1, noise_max: float = 1.0,
                    center_scale: float = 1.0) -> Instance:
    """Clients scattered on a sphere of radius ``spread`` around a random
    centre; side information offset by a per-client distance drawn
    uniformly from ``[noise_min, noise_max]``. The table is the realized
    distances."""
    rng = derive_rng(seed, INSTANCE)
    c = rng.standard_normal(d) * center_scale
    x = c + spread * _unit_rows(rng, n, d)
    noise = rng.uniform(noise_min, noise_max, size=n)
    y = x + noise[:, None] * _unit_rows(rng, n, d)
    return Instance(x, y, DeltaTable.from_vectors(x, y))


def star_instance(n: int, d: int, seed: int, head: int = 0, delta_head: float = 1.0,
                  delta_link=1.0, delta_tail=10.0, center_scale: float = 1.0) -> Instance:
    """Every client sits at distance ``delta_link`` from the head client.

    ``delta_link`` and ``delta_tail`` may be scalars or per-client sequences
    (the head's entries are ignored). Targeted distances hold with equality.
    """
    rng = derive_rng(seed, INSTANCE)
    link = _per_client(delta_link, n)
    tail = _per_client(delta_tail, n)
    tail[head] = delta_head
    link[head] = 0.0
    c = rng.standard_normal(d) * center_scale
    x = c + link[:, None] * _unit_rows(rng, n, d)
    y = x + tail[:, None] * _unit_rows(rng, n, d)
    return Instance(x, y, DeltaTable.from_vectors(x, y))


def verify_instance(x, y, table: DeltaTable, rtol: float = 1e-9) -> Instance:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"x and y must be matching n x d arrays, got {x.shape}, {y.shape}")
    if table.n != x.shape[0]:
        raise ValueError(f"table has {table.n} clients, data has {x.shape[0]}")
    real = DeltaTable.from_vectors(x, y)
    for i in range(table.n):
        slack = real.delta_s[i] - table.delta_s[i]
        if slack > rtol * max(1.0, table.delta_s[i]):
            raise ConstraintViolation(("x", i, "y", i), slack)
        for j in range(i + 1, table.n):
            slack = real.pair(i, j) - table.pair(i, j)
            if slack > rtol * max(1.0, table.pair(i, j)):
                raise ConstraintViolation(("x", i, "x", j), slack)
    return Instance(x, y, table)


def generate_instance(n: int, d: int, mode: str = "derive", master_seed: int = 0,
                      **kwargs) -> Instance:
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    if mode == "derive":
        return derive_instance(n, d, master_seed, **kwargs)
    if mode == "star":
        return star_instance(n, d, master_seed, **kwargs)
    if mode == "verify":
        inst = verify_instance(kwargs["x"], kwargs["y"], kwargs["table"])
        if inst.x.shape != (n, d):
            raise ValueError(f"supplied data is {inst.x.shape}, expected {(n, d)}")
        return inst
    raise ValueError(f"unknown instance mode {mode!r}")


@dataclass(eq=False)
class TrialResult:
    estimate: np.ndarray
    sq_error: float
    per_client_sq_errors: np.ndarray
    bits_sent: int
    symbols: np.ndarray = field(repr=False)


def chain_weights(chain: Chain, table: DeltaTable, params: CodecParams) -> ChainWeights:
    hops = tuple(delta_prime(v, params.dim, params.n) for v in chain.hop_deltas(table))
    return ChainWeights(hops, params.k)


def _depths(chains: Sequence[Chain], decode_order: Sequence[int]) -> np.ndarray:
    depth = {}
    for c in decode_order:
        ch = chains[c]
        if ch.client != c:
            raise OrderViolation(f"chains[{c}] belongs to client {ch.client}")
        missing = [v for v in ch.nodes[:-1] if v not in depth]
        if missing:
            raise OrderViolation(f"chain {ch} needs client {missing[0]} before it is decoded")
        depth[c] = 0 if ch.predecessor is None else depth[ch.predecessor] + 1
    if len(depth) != len(chains):
        raise OrderViolation("decode order does not cover every client")
    return np.array([depth[i] for i in range(len(chains))])


def run_trial(instance: Instance, chains: Sequence[Chain], decode_order: Optional[Sequence[int]],
              params: CodecParams, master_seed: int, trial_id: int,
              combiner: str = "scaled") -> TrialResult:
    """One round of the protocol: every client encodes, the server decodes
    along the chains and averages.

    Clients at the same depth of the chain forest are processed as one
    batch; their results do not depend on each other.
    """
    n, d, dim, count, k = instance.n, instance.d, params.dim, params.sample_count, params.k
    if decode_order is None:
        decode_order = default_order(chains)
    depth = _depths(chains, decode_order)

    signs = np.stack([sample_rotation(d, master_seed, (trial_id, i)).signs for i in range(n)])
    coords = np.stack([select_coords(dim, count, master_seed, (trial_id, i)) for i in range(n)])
    coins = np.stack([derive_rng(master_seed, trial_id, i, COINS).random(count) for i in range(n)])
    eps = np.array([chain_weights(chains[i], instance.table, params).eps for i in range(n)])
    degenerate = eps == 0
    eps_safe = np.where(degenerate, 1.0, eps)[:, None]

    xp = pad(instance.x, dim)
    yp = pad(instance.y, dim)
    rx = rotate(signs, xp)
    symbols = quantize_rows(np.take_along_axis(rx, coords, axis=1), eps_safe, k, coins)
    symbols[degenerate] = 0

    estimates = np.zeros((n, d))
    side = np.zeros((n, dim))
    for level in range(depth.max() + 1):
        idx = np.flatnonzero(depth == level)
        if level == 0:
            h = yp[idx]
        else:
            h = side[[chains[i].predecessor for i in idx]]
        rh = rotate(signs[idx], h)
        ry = rh if level == 0 else rotate(signs[idx], yp[idx])
        q = decode_rows(symbols[idx], np.take_along_axis(rh, coords[idx], axis=1), eps_safe[idx], k)
        est = unrotate(signs[idx], combine(ry, q, coords[idx], params.mu, combiner))[:, :d]
        fwd = unrotate(signs[idx], combine(rh, q, coords[idx], params.mu, "plain"))[:, :d]
        deg = degenerate[idx]
        est[deg] = h[deg, :d]
        fwd[deg] = h[deg, :d]
        estimates[idx] = est
        side[idx, :d] = fwd

    mean = estimates.mean(axis=0)
    return TrialResult(
        estimate=mean,
        sq_error=float(np.sum((mean - instance.true_mean) ** 2)),
        per_client_sq_errors=np.sum((estimates - instance.x) ** 2, axis=1),
        bits_sent=n * count * params.log_k,
        symbols=symbols,
    )


def wz_reference_trial(instance: Instance, params: CodecParams, master_seed: int,
                       trial_id: int, combiner: str = "scaled") -> TrialResult:
    """Plain Wyner-Ziv round written client by client with the codec API."""
    n, d = instance.n, instance.d
    estimates, syms, bits = [], [], 0
    for i in range(n):
        R = sample_rotation(d, master_seed, (trial_id, i))
        S = select_coords(params.dim, params.sample_count, master_seed, (trial_id, i))
        w = ChainWeights((delta_prime(instance.table.delta_s[i], params.dim, n),), params.k)
        msg = encode_client(instance.x[i], w, params, R, S,
                            derive_rng(master_seed, trial_id, i, COINS), client_id=i)
        bits += msg.bit_length
        syms.append(msg.symbols)
        estimates.append(decode_client(msg, instance.y[i], instance.y[i], w, params, R, S, combiner))
    estimates = np.stack(estimates)
    mean = estimates.mean(axis=0)
    return TrialResult(
        estimate=mean,
        sq_error=float(np.sum((mean - instance.true_mean) ** 2)),
        per_client_sq_errors=np.sum((estimates - instance.x) ** 2, axis=1),
        bits_sent=bits,
        symbols=np.stack(syms),
    )


@dataclass(eq=False)
class MseReport:
    mse: float
    stderr: float
    per_client_mse: np.ndarray
    trials: int
    sq_errors: np.ndarray = field(repr=False)
    bounds: Optional[BoundReport] = None
    bits_sent: int = 0


def thread_count() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def monte_carlo(instance: Instance, chains: Sequence[Chain], params: CodecParams, trials: int,
                master_seed: int, combiner: str = "scaled",
                decode_order: Optional[Sequence[int]] = None,
                threads: Optional[int] = None) -> MseReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if decode_order is None:
        decode_order = default_order(chains)
    threads = thread_count() if threads is None else threads

    def one(t):
        return run_trial(instance, chains, decode_order, params, master_seed, t, combiner)

    if threads == 1:
        results = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))

    sq = np.array([r.sq_error for r in results])
    per_client = np.mean(np.stack([r.per_client_sq_errors for r in results]), axis=0)
    stderr = float(np.std(sq, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return MseReport(
        mse=float(np.mean(sq)),
        stderr=stderr,
        per_client_mse=per_client,
        trials=trials,
        sq_errors=sq,
        bounds=proposed_bound(chains, instance.table, params),
        bits_sent=results[0].bits_sent,
    )
