"""Decode chains, their weight parameters and the two chain selection heuristics.

A chain for client ``i`` is written ``y_a -> x_a -> x_b -> ... -> x_i``: the
server decodes ``x_a`` against ``y_a``, then ``x_b`` against that estimate,
and so on. Client indices are 0-based throughout.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

E = math.e


@dataclass(frozen=True)
class Chain:
    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))
        if not self.nodes:
            raise ValueError("a chain needs at least one node")

    @classmethod
    def trivial(cls, client: int) -> "Chain":
        return cls((client,))

    @property
    def client(self) -> int:
        return self.nodes[-1]

    @property
    def root(self) -> int:
        return self.nodes[0]

    @property
    def length(self) -> int:
        return len(self.nodes)

    @property
    def predecessor(self) -> Optional[int]:
        return self.nodes[-2] if len(self.nodes) > 1 else None

    def extend(self, client: int) -> "Chain":
        return Chain(self.nodes + (client,))

    def hop_deltas(self, table: "DeltaTable") -> list[float]:
        """Root side distance followed by the client distances along the chain."""
        out = [float(table.delta_s[self.root])]
        out += [table.pair(a, b) for a, b in zip(self.nodes, self.nodes[1:])]
        return out

    def __str__(self):
        body = " -> ".join([f"y_{self.root}"] + [f"x_{v}" for v in self.nodes])
        return f"{self.client}: {body}"


_CHAIN_RE = re.compile(r"^\s*(\d+)\s*:\s*y_?(\d+)((?:\s*->\s*x_?\d+)+)\s*$")


def parse_chain(text: str) -> Chain:
    m = _CHAIN_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse chain {text!r}")
    client, root = int(m.group(1)), int(m.group(2))
    nodes = tuple(int(v) for v in re.findall(r"x_?(\d+)", m.group(3)))
    if nodes[0] != root:
        raise ValueError(f"chain {text!r}: first x must match the root y")
    if nodes[-1] != client:
        raise ValueError(f"chain {text!r}: last node must be client {client}")
    return Chain(nodes)


def read_chains(path) -> list[Chain]:
    chains = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                chains.append(parse_chain(line))
    return sorted(chains, key=lambda c: c.client)


@dataclass(frozen=True, eq=False)
class DeltaTable:
    """Distance bounds: ``delta_s[i] >= |x_i - y_i|``, ``delta_c[i, j] >= |x_i - x_j|``."""

    delta_s: np.ndarray
    delta_c: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.delta_s, dtype=float)
        c = np.array(self.delta_c, dtype=float)
        n = len(s)
        if c.shape != (n, n):
            raise ValueError(f"delta_c must be {n}x{n}, got {c.shape}")
        # mirror whichever triangle was supplied
        c = np.maximum(np.triu(c, 1), np.tril(c, -1).T)
        c = c + c.T
        if np.any(s < 0) or np.any(c < 0):
            raise ValueError("distances must be >= 0")
        object.__setattr__(self, "delta_s", s)
        object.__setattr__(self, "delta_c", c)

    @property
    def n(self) -> int:
        return len(self.delta_s)

    def pair(self, i: int, j: int) -> float:
        return float(self.delta_c[i, j])

    def scaled(self, factor: float) -> "DeltaTable":
        return DeltaTable(self.delta_s * factor, self.delta_c * factor)

    @classmethod
    def from_vectors(cls, x, y) -> "DeltaTable":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.linalg.norm(x - y, axis=1)
        c = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
        return cls(s, c)

    def to_dict(self) -> dict:
        return {"delta_s": self.delta_s.tolist(), "delta_c": self.delta_c.tolist()}


def delta_prime(delta: float, d: int, n: int) -> float:
    """Per-coordinate radius after rotation: ``sqrt(6 (delta^2/d) ln sqrt(n))``."""
    return math.sqrt(6.0 * (delta * delta / d) * math.log(math.sqrt(n)))


def c_t(t: int, n: int) -> float:
    return max(576.0 * t * t / E, 3.0 * n + 36.0 / E ** (2.0 / 3.0))


def d_prefixes(deltas: Sequence[float], n: int) -> list[float]:
    """Effective squared distance for every prefix of a chain.

    ``deltas`` is the root side distance followed by the hop distances.
    """
    sq = [float(v) ** 2 for v in deltas]
    out = [sq[0]]
    acc = sq[0]
    for l in range(2, len(sq) + 1):
        acc += sq[l - 1]
        prev = out[-1]
        tail = c_t(l, n) / 154.0 * (acc + sq[l - 1]) + 3.0 * n * prev / 154.0
        out.append(max(l * acc, tail) + 3.0 * prev)
    return out


def d_value(chain: Chain, table: DeltaTable, n: Optional[int] = None) -> float:
    return d_prefixes(chain.hop_deltas(table), table.n if n is None else n)[-1]


def greedy_chains(prime_s, prime_c) -> tuple[list[Chain], list[float]]:
    """Greedy minimum-weight chains from per-coordinate radii.

    Client ``i`` either starts its own chain (weight ``prime_s[i]``) or
    extends the chain of an earlier client ``j`` (weight
    ``w_j + prime_c[j, i]``); the cheapest candidate wins, ties go to the
    smallest ``j`` (with ``j = i`` meaning the own chain).
    """
    prime_s = np.asarray(prime_s, dtype=float)
    prime_c = np.asarray(prime_c, dtype=float)
    n = len(prime_s)
    chains = [Chain.trivial(0)]
    weights = [float(prime_s[0])]
    for i in range(1, n):
        cand = [weights[j] + float(prime_c[j, i]) for j in range(i)] + [float(prime_s[i])]
        best = int(np.argmin(cand))  # first minimum
        chains.append(chains[best].extend(i) if best < i else Chain.trivial(i))
        weights.append(cand[best])
    return chains, weights


def algorithm1(table: DeltaTable, d: int, n: Optional[int] = None) -> tuple[list[Chain], list[float]]:
    """Chains in the identity decode order, minimising accumulated weight."""
    n = table.n if n is None else n
    scale = delta_prime(1.0, d, n)
    return greedy_chains(table.delta_s * scale, table.delta_c * scale)


REGION_MODES = ("eq15", "strict-eq17")


def region2_check(delta_t: float, delta_ti: float, delta_i: float, n: int,
                  mode: str = "eq15") -> bool:
    """Whether routing client i through t beats its own side information.

    ``eq15`` compares the length-2 chain's effective squared distance with
    ``delta_i**2``. ``strict-eq17`` uses the more conservative literal
    region, where the c_2(n) term is not divided by 154.
    """
    t2, ti2 = delta_t**2, delta_ti**2
    if mode == "eq15":
        lhs = d_prefixes([delta_t, delta_ti], n)[-1]
    elif mode == "strict-eq17":
        lhs = max(2 * (t2 + ti2) + 3 * t2, c_t(2, n) * (t2 + 2 * ti2) + 3 * n * t2 / 154.0 + 3 * t2)
    else:
        raise ValueError(f"unknown region mode {mode!r}")
    return bool(lhs < delta_i**2)


def algorithm2(table: DeltaTable, n: Optional[int] = None,
               mode: str = "eq15") -> tuple[list[Chain], list[int]]:
    """Chains of length at most two, plus the decode order they induce.

    Each round the remaining client with the smallest side distance becomes
    a head; every other remaining client inside the region relative to that
    head is chained through it.
    """
    n = table.n if n is None else n
    remaining = sorted(range(table.n), key=lambda i: (table.delta_s[i], i))
    chains: dict[int, Chain] = {}
    order: list[int] = []
    while remaining:
        head = remaining[0]
        chains[head] = Chain.trivial(head)
        order.append(head)
        taken = {head}
        for c in remaining[1:]:
            if region2_check(table.delta_s[head], table.pair(head, c), table.delta_s[c], n, mode):
                chains[c] = Chain((head, c))
                order.append(c)
                taken.add(c)
        remaining = [c for c in remaining if c not in taken]
    return [chains[i] for i in range(table.n)], order


def default_order(chains: Sequence[Chain]) -> list[int]:
    """Decode order that respects chain prefixes: shorter chains first."""
    return [c.client for c in sorted(chains, key=lambda c: (c.length, c.client))]


def validate_chains(chains: Sequence[Chain], decode_order: Sequence[int]) -> Optional[str]:
    """Return the first violated chain invariant, or ``None`` if all hold.

    Beyond ordering, every chain must extend its predecessor's own chain, so
    that the estimate the server already holds for the predecessor is the
    one the chain describes.
    """
    if not chains:
        return "empty chain list"
    n = len(chains)
    clients = [c.client for c in chains]
    if sorted(clients) != list(range(n)):
        return f"chains must cover clients 0..{n - 1} exactly once, got {clients}"
    if sorted(decode_order) != list(range(n)):
        return f"decode order {list(decode_order)} is not a permutation of 0..{n - 1}"
    pos = {c: p for p, c in enumerate(decode_order)}
    by_client = {c.client: c for c in chains}
    for ch in chains:
        if len(set(ch.nodes)) != ch.length:
            return f"chain {ch} repeats a node"
        for v in ch.nodes[:-1]:
            if not 0 <= v < n:
                return f"chain {ch} references unknown client {v}"
            if pos[v] >= pos[ch.client]:
                return f"chain {ch}: node {v} decodes after client {ch.client}"
        pred = ch.predecessor
        if pred is not None and by_client[pred].nodes != ch.nodes[:-1]:
            return f"chain {ch} does not extend the chain of node {pred} ({by_client[pred]})"
    return None
