"""Labeled simple graphs with bit-packed upper-triangular adjacency.

Pair ``(i, j)`` with ``i < j`` maps to bit ``pair_index(n, i, j)`` in row-major
upper-triangular order, the same order as ``np.triu_indices(n, 1)``.  Bits are
packed little-endian into 64-bit words, so for ``n <= 11`` a graph is a single
integer bitmask (``Graph.mask``), which the enumeration oracle relies on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "ConstraintSpec",
    "GraphFormatError",
    "num_pairs",
    "pair_index",
    "triu_pairs",
    "degrees",
    "constraint_value",
    "in_gamma",
    "is_graphical",
    "complement",
    "havel_hakimi",
    "read_edge_list",
    "write_edge_list",
    "format_edge_list",
    "parse_edge_list",
]

DEGREE_SEQUENCE = "degree_sequence"
EDGE_COUNT = "edge_count"


class GraphFormatError(ValueError):
    """Malformed edge list or adjacency input."""


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(n: int, i: int, j: int) -> int:
    if i == j:
        raise ValueError("self-loops have no pair index")
    if i > j:
        i, j = j, i
    return i * (2 * n - i - 1) // 2 + (j - i - 1)


@lru_cache(maxsize=16)
def triu_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column arrays of all pairs ``i < j``, in bit order (read-only)."""
    rows, cols = np.triu_indices(n, 1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _n_words(n_bits: int) -> int:
    return max(1, (n_bits + 63) // 64)


class Graph:
    """Immutable simple undirected graph on vertices ``0..n-1``."""

    __slots__ = ("_n", "_words", "_edge_count")

    def __init__(self, n: int, words: np.ndarray, edge_count: int | None = None):
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        words = np.ascontiguousarray(words, dtype="<u8")
        if words.shape != (_n_words(num_pairs(n)),):
            raise ValueError("word array does not match vertex count")
        m = num_pairs(n)
        tail = 64 * len(words) - m
        if tail and m and int(words[-1]) >> (64 - tail):
            raise ValueError("bits set beyond the last pair")
        if m == 0 and int(words[0]):
            raise ValueError("a one-vertex graph has no pairs")
        words.setflags(write=False)
        self._n = n
        self._words = words
        if edge_count is None:
            edge_count = int(np.unpackbits(words.view(np.uint8)).sum())
        self._edge_count = edge_count

    # construction -----------------------------------------------------
    @classmethod
    def from_pair_bits(cls, n: int, bits) -> "Graph":
        bits = np.asarray(bits, dtype=bool)
        m = num_pairs(n)
        if bits.shape != (m,):
            raise ValueError(f"expected {m} pair bits, got shape {bits.shape}")
        packed = np.packbits(bits, bitorder="little")
        buf = np.zeros(8 * _n_words(m), dtype=np.uint8)
        buf[: len(packed)] = packed
        return cls(n, buf.view("<u8"), int(np.count_nonzero(bits)))

    @classmethod
    def from_dense(cls, adj) -> "Graph":
        adj = np.asarray(adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphFormatError("adjacency must be square")
        if np.any(np.diag(adj)):
            raise GraphFormatError("adjacency has self-loops")
        if not np.array_equal(adj, adj.T):
            raise GraphFormatError("adjacency is not symmetric")
        if not np.isin(adj, (0, 1)).all():
            raise GraphFormatError("adjacency entries must be 0/1")
        n = adj.shape[0]
        rows, cols = triu_pairs(n)
        return cls.from_pair_bits(n, adj[rows, cols] != 0)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        bits = np.zeros(num_pairs(n), dtype=bool)
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphFormatError(f"vertex id out of range in edge ({i}, {j})")
            if i == j:
                raise GraphFormatError(f"self-loop at vertex {i}")
            k = pair_index(n, i, j)
            if bits[k]:
                raise GraphFormatError(f"duplicate edge ({min(i, j)}, {max(i, j)})")
            bits[k] = True
        return cls.from_pair_bits(n, bits)

    @classmethod
    def from_mask(cls, n: int, mask: int) -> "Graph":
        m = num_pairs(n)
        if mask < 0 or mask >> m:
            raise ValueError("mask out of range for this vertex count")
        nw = _n_words(m)
        words = np.frombuffer(int(mask).to_bytes(8 * nw, "little"), dtype="<u8").copy()
        return cls(n, words, int(mask).bit_count())

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, np.zeros(_n_words(num_pairs(n)), dtype="<u8"), 0)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls.from_pair_bits(n, np.ones(num_pairs(n), dtype=bool))

    # views -------------------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def edge_count(self) -> int:
        return self._edge_count

    @property
    def words(self) -> np.ndarray:
        return self._words

    @property
    def mask(self) -> int:
        return int.from_bytes(self._words.tobytes(), "little")

    def pair_bits(self) -> np.ndarray:
        m = num_pairs(self._n)
        return np.unpackbits(self._words.view(np.uint8), count=m, bitorder="little").astype(bool)

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        n = self._n
        rows, cols = triu_pairs(n)
        adj = np.zeros((n, n), dtype=dtype)
        bits = self.pair_bits()
        adj[rows[bits], cols[bits]] = 1
        adj[cols[bits], rows[bits]] = 1
        return adj

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = triu_pairs(self._n)
        bits = self.pair_bits()
        return list(zip(rows[bits].tolist(), cols[bits].tolist()))

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        k = pair_index(self._n, i, j)
        return bool((int(self._words[k >> 6]) >> (k & 63)) & 1)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._words, other._words)

    def __hash__(self):
        return hash((self._n, self._words.tobytes()))

    def __repr__(self):
        return f"Graph(n={self._n}, edges={self._edge_count})"


@dataclass(frozen=True)
class ConstraintSpec:
    """Hard constraint: a full degree sequence or a total edge count.

    ``target`` is a tuple of ints for ``kind == "degree_sequence"`` and an int
    for ``kind == "edge_count"``.
    """

    kind: str
    n: int
    target: tuple[int, ...] | int

    def __post_init__(self):
        if self.kind not in (DEGREE_SEQUENCE, EDGE_COUNT):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.kind == DEGREE_SEQUENCE:
            target = tuple(int(k) for k in self.target)
            if len(target) != self.n:
                raise ValueError(f"degree sequence has length {len(target)}, expected {self.n}")
            object.__setattr__(self, "target", target)
        else:
            object.__setattr__(self, "target", int(self.target))

    @classmethod
    def degree_sequence(cls, degrees) -> "ConstraintSpec":
        degrees = tuple(int(k) for k in degrees)
        return cls(DEGREE_SEQUENCE, len(degrees), degrees)

    @classmethod
    def constant_degree(cls, n: int, d: int) -> "ConstraintSpec":
        return cls(DEGREE_SEQUENCE, n, (int(d),) * n)

    @classmethod
    def edge_count(cls, n: int, L: int) -> "ConstraintSpec":
        return cls(EDGE_COUNT, n, int(L))

    @property
    def is_degree(self) -> bool:
        return self.kind == DEGREE_SEQUENCE

    @property
    def constant_target(self) -> int | None:
        """Common degree when every vertex has the same target, else None."""
        if not self.is_degree:
            return None
        first = self.target[0]
        return first if all(k == first for k in self.target) else None

    def in_range(self) -> bool:
        if self.is_degree:
            return all(0 <= k <= self.n - 1 for k in self.target)
        return 0 <= self.target <= num_pairs(self.n)

    def to_dict(self) -> dict:
        target = list(self.target) if self.is_degree else self.target
        return {"n": self.n, "kind": self.kind, "target": target}

    @classmethod
    def from_dict(cls, data: dict) -> "ConstraintSpec":
        try:
            kind, n, target = data["kind"], int(data["n"]), data["target"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"constraint needs 'n', 'kind' and 'target': {exc}") from None
        if kind == DEGREE_SEQUENCE and not isinstance(target, (list, tuple)):
            raise ValueError("degree_sequence target must be a list")
        if kind == EDGE_COUNT and isinstance(target, (list, tuple)):
            raise ValueError("edge_count target must be an integer")
        return cls(kind, n, tuple(target) if kind == DEGREE_SEQUENCE else target)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def digest(self) -> str:
        """Short stable hash of the canonical JSON form, used in file names."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]

    @classmethod
    def load(cls, path) -> "ConstraintSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def degrees(g: Graph) -> np.ndarray:
    rows, cols = triu_pairs(g.n)
    bits = g.pair_bits()
    deg = np.bincount(rows[bits], minlength=g.n) + np.bincount(cols[bits], minlength=g.n)
    return deg.astype(np.int64)


def constraint_value(g: Graph, spec: ConstraintSpec):
    if spec.n != g.n:
        raise ValueError(f"constraint is for n={spec.n}, graph has n={g.n}")
    if spec.is_degree:
        return tuple(degrees(g).tolist())
    return g.edge_count


def in_gamma(g: Graph, spec: ConstraintSpec) -> bool:
    if spec.n != g.n:
        return False
    return constraint_value(g, spec) == spec.target


def is_graphical(spec: ConstraintSpec) -> bool:
    """Whether some simple graph meets the constraint exactly (Erdős–Gallai)."""
    if not spec.in_range():
        return False
    if not spec.is_degree:
        return True
    d = sorted(spec.target, reverse=True)
    if sum(d) % 2:
        return False
    n = len(d)
    prefix = 0
    for k in range(1, n + 1):
        prefix += d[k - 1]
        tail = sum(min(x, k) for x in d[k:])
        if prefix > k * (k - 1) + tail:
            return False
    return True


def havel_hakimi(degrees_target) -> Graph:
    """Deterministic realization of a graphical degree sequence."""
    target = [int(k) for k in degrees_target]
    n = len(target)
    if not is_graphical(ConstraintSpec.degree_sequence(target)):
        raise ValueError(f"degree sequence {tuple(target)} is not graphical")
    remaining = list(target)
    edges = []
    for _ in range(n):
        # ties broken by vertex id so the start state is reproducible
        order = sorted(range(n), key=lambda v: (-remaining[v], v))
        v = order[0]
        k = remaining[v]
        if k == 0:
            break
        remaining[v] = 0
        for u in order[1 : k + 1]:
            remaining[u] -= 1
            edges.append((v, u))
    return Graph.from_edges(n, edges)


def complement(g: Graph) -> Graph:
    m = num_pairs(g.n)
    return Graph.from_pair_bits(g.n, ~g.pair_bits()) if m else Graph.empty(g.n)


# edge-list text format --------------------------------------------------

def format_edge_list(g: Graph) -> str:
    edges = g.edges()
    lines = [f"{g.n} {len(edges)}"] + [f"{i} {j}" for i, j in edges]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Graph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GraphFormatError("empty edge list")
    try:
        n, m = (int(tok) for tok in lines[0].split())
    except ValueError:
        raise GraphFormatError(f"bad header line {lines[0]!r}; expected 'n m'") from None
    if n < 1 or m < 0:
        raise GraphFormatError("header needs n >= 1 and m >= 0")
    body = lines[1:]
    if len(body) != m:
        raise GraphFormatError(f"header announces {m} edges, found {len(body)}")
    edges = []
    for line in body:
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"bad edge line {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"bad edge line {line!r}") from None
        if i == j:
            raise GraphFormatError(f"self-loop at vertex {i}")
        if i > j:
            raise GraphFormatError(f"edge ({i}, {j}) must be written with i < j")
        edges.append((i, j))
    return Graph.from_edges(n, edges)


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g))
