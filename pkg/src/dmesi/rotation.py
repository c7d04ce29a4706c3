"""Randomized Hadamard rotation ``R = W D / sqrt(dim)``.

``W`` is the Sylvester-ordered Walsh-Hadamard matrix and ``D`` a diagonal of
random signs drawn from shared randomness. Inputs whose length is not a power
of two are zero-padded; padding leaves Euclidean distances unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dmesi.errors import DimensionError
from dmesi.seeding import ROTATION, derive_rng


def next_pow2(d: int) -> int:
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    return 1 << (int(d) - 1).bit_length()


def fwht(a) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform over the last axis.

    Works on a copy, butterflies applied in place on that copy;
    O(dim log dim) per row. The last axis must be a power of two.
    """
    out = np.array(a, dtype=float, copy=True)
    n = out.shape[-1]
    if n & (n - 1):
        raise DimensionError(f"length {n} is not a power of two")
    lead = out.shape[:-1]
    h = 1
    while h < n:
        v = out.reshape(*lead, n // (2 * h), 2, h)
        top = v[..., 0, :].copy()
        v[..., 0, :] += v[..., 1, :]
        v[..., 1, :] = top - v[..., 1, :]
        h *= 2
    return out


def pad(v, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == dim:
        return v
    out = np.zeros(v.shape[:-1] + (dim,))
    out[..., : v.shape[-1]] = v
    return out


def rotate(signs: np.ndarray, v_padded: np.ndarray) -> np.ndarray:
    """Forward rotation with (possibly batched) sign rows."""
    return fwht(signs * v_padded) / np.sqrt(signs.shape[-1])


def unrotate(signs: np.ndarray, w: np.ndarray) -> np.ndarray:
    return signs * fwht(w) / np.sqrt(signs.shape[-1])


@dataclass(frozen=True, eq=False)
class Rotation:
    d: int
    dim: int
    signs: np.ndarray
    seed_tag: tuple

    def __eq__(self, other):
        return (
            isinstance(other, Rotation)
            and (self.d, self.dim, self.seed_tag) == (other.d, other.dim, other.seed_tag)
            and np.array_equal(self.signs, other.signs)
        )

    __hash__ = None


def sample_rotation(d: int, shared_seed: int, label=()) -> Rotation:
    """Rotation for dimension ``d`` derived from ``(shared_seed, label)``."""
    if isinstance(label, int):
        label = (label,)
    label = tuple(label)
    dim = next_pow2(d)
    rng = derive_rng(shared_seed, *label, ROTATION)
    signs = rng.integers(0, 2, size=dim) * 2.0 - 1.0
    return Rotation(d=int(d), dim=dim, signs=signs, seed_tag=(int(shared_seed),) + label)


def apply_rotation(R: Rotation, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != R.d:
        raise DimensionError(f"expected length {R.d}, got {v.shape[-1]}")
    return rotate(R.signs, pad(v, R.dim))


def apply_inverse(R: Rotation, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != R.dim:
        raise DimensionError(f"expected length {R.dim}, got {w.shape[-1]}")
    return unrotate(R.signs, w)
