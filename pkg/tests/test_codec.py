import itertools
import math

import numpy as np
import pytest

from dmesi.codec import (
    ChainWeights,
    CodecParams,
    Message,
    chain_side_info,
    decode_client,
    derive_codec_params,
    encode_client,
    resolution_bits,
    select_coords,
)
from dmesi.errors import BudgetTooSmall, DimensionError
from dmesi.rotation import Rotation, apply_rotation, sample_rotation


class FixedCoins:
    """Stand-in generator that hands out preset uniforms."""

    def __init__(self, coins):
        self.coins = np.asarray(coins, dtype=float)

    def random(self, size):
        assert size == len(self.coins)
        return self.coins


def identity_rotation(dim):
    return Rotation(d=dim, dim=dim, signs=np.ones(dim), seed_tag=())


def test_resolution_bits_formula():
    for n in (2, 4, 16, 1000):
        want = math.ceil(math.log2(2 + math.sqrt(12 * math.log(n))))
        assert resolution_bits(n) == want
    assert resolution_bits(16) == 3


def test_derive_params_examples():
    p = derive_codec_params(16, 256, 64)
    assert (p.log_k, p.k, p.sample_count, p.dim) == (3, 8, 21, 256)
    assert p.mu == 21 / 256
    with pytest.raises(BudgetTooSmall):
        derive_codec_params(2, 4, 4)
    p = derive_codec_params(16, 4, 64)
    assert p.sample_count == 4 and p.mu == 1.0
    p = derive_codec_params(16, 300, 64)
    assert p.dim == 512 and p.mu == 21 / 512


def test_params_validation():
    with pytest.raises(DimensionError):
        CodecParams(n=4, d=4, dim=4, r=64, log_k=3, sample_count=5)
    with pytest.raises(BudgetTooSmall):
        CodecParams(n=4, d=8, dim=8, r=6, log_k=3, sample_count=3)


def test_message_packing_layout():
    m = Message(client_id=2, symbols=np.array([5, 3, 7]), log_k=3)
    assert m.bit_length == 9
    # 101 011 111 -> 10101111 1(0000000)
    assert m.to_bytes() == bytes([0xAF, 0x80])
    back = Message.from_bytes(m.to_bytes(), 3, 3, client_id=2)
    assert back == m


def test_message_roundtrip_random():
    rng = np.random.default_rng(4)
    for log_k in (2, 3, 4, 5):
        sym = rng.integers(0, 1 << log_k, size=21)
        m = Message(0, sym, log_k)
        data = m.to_bytes()
        assert len(data) == math.ceil(21 * log_k / 8)
        assert np.array_equal(Message.from_bytes(data, 21, log_k).symbols, sym)


def test_select_coords():
    assert np.array_equal(select_coords(8, 8, 3, (1,)), np.arange(8))
    a = select_coords(256, 21, 5, (2, 3))
    assert np.array_equal(a, select_coords(256, 21, 5, (2, 3)))
    assert len(np.unique(a)) == 21 and np.all(np.diff(a) > 0)
    with pytest.raises(DimensionError):
        select_coords(4, 5, 0)


def test_select_coords_uniform_inclusion():
    counts = np.zeros(8)
    for t in range(100_000):
        counts[select_coords(8, 2, 17, (t,))] += 1
    assert np.all(np.abs(counts / 100_000 - 0.25) <= 0.01)


def test_encode_examples():
    params = CodecParams(n=4, d=2, dim=2, r=6, log_k=2, sample_count=2)
    R = identity_rotation(2)
    msg = encode_client(np.zeros(2), ChainWeights((0.7,), 4), params, R, [0, 1], FixedCoins([0.4, 0.9]))
    assert list(msg.symbols) == [0, 0]
    assert msg.bit_length == 4

    params = CodecParams(n=4, d=2, dim=2, r=6, log_k=2, sample_count=1)
    x = np.array([2.5 * math.sqrt(2), 0.0])
    assert apply_rotation(R, x)[0] == pytest.approx(2.5)
    w = ChainWeights((1.0,), 4)  # eps = 2*1/(4-2) = 1
    assert w.eps == 1.0
    assert encode_client(x, w, params, R, [0], FixedCoins([0.2])).symbols[0] == 3
    assert encode_client(x, w, params, R, [0], FixedCoins([0.8])).symbols[0] == 2


def test_degenerate_message():
    params = derive_codec_params(4, 8, 12)
    R = sample_rotation(8, 0)
    S = select_coords(8, params.sample_count, 0)
    w = ChainWeights((0.0,), params.k)
    msg = encode_client(np.ones(8), w, params, R, S, np.random.default_rng(0))
    assert msg.degenerate and not np.any(msg.symbols)
    h = np.arange(8.0)
    assert np.array_equal(decode_client(msg, h, np.zeros(8), w, params, R, S), h)


def test_full_sampling_scaled_equals_plain():
    params = CodecParams(n=16, d=6, dim=8, r=64, log_k=3, sample_count=8)
    R = sample_rotation(6, 2)
    S = np.arange(8)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(6)
    y = x + 0.1 * rng.standard_normal(6)
    w = ChainWeights((np.linalg.norm(x - y),), params.k)
    msg = encode_client(x, w, params, R, S, np.random.default_rng(1))
    a = decode_client(msg, y, y, w, params, R, S, "scaled")
    b = decode_client(msg, y, y, w, params, R, S, "plain")
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(chain_side_info(msg, y, w, params, R, S), a, atol=1e-12)


def test_lossless_limit():
    params = CodecParams(n=16, d=5, dim=8, r=64, log_k=3, sample_count=8)
    R = sample_rotation(5, 9)
    x = np.array([1.0, -2.0, 0.5, 3.0, 0.25])
    w = ChainWeights((1e-12,), params.k)
    msg = encode_client(x, w, params, R, np.arange(8), np.random.default_rng(2))
    est = decode_client(msg, x, np.full(5, 100.0), w, params, R, np.arange(8))
    assert np.allclose(est, x, atol=1e-9)


def test_bit_budget():
    for n, d, r in [(2, 8, 6), (16, 256, 64), (16, 4, 64), (100, 300, 37)]:
        p = derive_codec_params(n, d, r)
        msg = Message(0, np.zeros(p.sample_count, dtype=int), p.log_k)
        assert msg.bit_length == p.sample_count * p.log_k <= r


def test_unbiased_by_enumeration():
    """Exact expectation over the subset and both rounding branches, d=2, k=4."""
    params = CodecParams(n=4, d=2, dim=2, r=4, log_k=2, sample_count=1)
    rng = np.random.default_rng(8)
    for trial in range(20):
        R = sample_rotation(2, trial)
        x, y = rng.standard_normal((2, 2)) * 3
        dp = float(np.max(np.abs(apply_rotation(R, x) - apply_rotation(R, y))))
        w = ChainWeights((dp * 1.01,), 4)
        t = apply_rotation(R, x) / w.eps
        p_up = t - np.floor(t)
        expected = np.zeros(2)
        for j in (0, 1):
            for up in (False, True):
                prob = 0.5 * (p_up[j] if up else 1 - p_up[j])
                coin = 0.0 if up else 1.0 - 1e-15
                msg = encode_client(x, w, params, R, [j], FixedCoins([coin]))
                expected += prob * decode_client(msg, y, y, w, params, R, [j], "scaled")
        assert np.allclose(expected, x, atol=1e-10)


def test_unbiased_monte_carlo():
    params = derive_codec_params(4, 8, 6)
    assert params.sample_count == 2
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((2, 8))
    w = ChainWeights((float(np.linalg.norm(x - y)),), params.k)  # covers every coordinate
    T = 10_000
    est = np.empty((T, 8))
    for t in range(T):
        R = sample_rotation(8, 21, (t,))
        S = select_coords(8, params.sample_count, 21, (t,))
        msg = encode_client(x, w, params, R, S, np.random.default_rng((21, t)))
        est[t] = decode_client(msg, y, y, w, params, R, S)
    spread = math.sqrt(np.sum(np.var(est, axis=0)))
    assert np.linalg.norm(est.mean(axis=0) - x) <= 4 * spread / math.sqrt(T)


def test_side_info_error_within_weight():
    """Forwarded side information stays within eps of x on every sampled rotated coordinate."""
    params = derive_codec_params(16, 64, 32)
    rng = np.random.default_rng(5)
    x = rng.standard_normal(64)
    h = x + 0.05 * rng.standard_normal(64)
    R = sample_rotation(64, 1)
    S = select_coords(64, params.sample_count, 1)
    dp = float(np.max(np.abs(apply_rotation(R, x) - apply_rotation(R, h))))
    w = ChainWeights((dp,), params.k)
    msg = encode_client(x, w, params, R, S, np.random.default_rng(0))
    side = chain_side_info(msg, h, w, params, R, S)
    err = np.abs(apply_rotation(R, side) - apply_rotation(R, x))
    assert np.all(err[S] < w.eps + 1e-12)
    unsampled = np.setdiff1d(np.arange(64), S)
    assert np.allclose(err[unsampled], np.abs(apply_rotation(R, h) - apply_rotation(R, x))[unsampled])


def test_plain_chain_exhaustive_small():
    """Every subset and coin pattern decodes sampled coordinates to a neighbour of Rx."""
    params = CodecParams(n=4, d=4, dim=4, r=6, log_k=3, sample_count=2)
    R = sample_rotation(4, 6)
    rng = np.random.default_rng(6)
    x = rng.standard_normal(4)
    y = x + 0.3 * rng.standard_normal(4)
    w = ChainWeights((float(np.linalg.norm(x - y)),), params.k)
    rx = apply_rotation(R, x)
    for S in itertools.combinations(range(4), 2):
        for coins in itertools.product([0.0, 0.999999], repeat=2):
            msg = encode_client(x, w, params, R, list(S), FixedCoins(coins))
            est = decode_client(msg, y, y, w, params, R, list(S), "plain")
            assert np.all(np.abs(apply_rotation(R, est)[list(S)] - rx[list(S)]) < w.eps + 1e-12)
