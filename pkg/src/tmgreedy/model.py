"""Problem instances: transaction grids, access sets, conflict graphs, workloads.

A window is an M x N grid of unit-length transactions (M threads, N
transactions per thread) together with a symmetric conflict relation.
Conflicts either come directly as an edge set or are derived from
read/write sets over shared objects. Everything here is immutable after
construction and safe to share across concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

from .seeding import GEN, substream


class GenerationError(RuntimeError):
    """Workload generator could not satisfy its parameters."""


class WindowFormatError(ValueError):
    """Window file violates the on-disk grammar."""


@dataclass(frozen=True, order=True)
class TxId:
    """Identity of one transaction: thread in [1, M], index in [1, N]."""

    thread: int
    index: int

    def __str__(self) -> str:
        return f"T{self.thread}.{self.index}"


@dataclass(frozen=True)
class AccessSet:
    """Objects a transaction reads and writes.

    Reads and writes are disjoint; an object both read and written is
    recorded as written.
    """

    reads: frozenset[int] = frozenset()
    writes: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        reads = frozenset(self.reads)
        writes = frozenset(self.writes)
        object.__setattr__(self, "reads", reads - writes)
        object.__setattr__(self, "writes", writes)

    def conflicts_with(self, other: "AccessSet") -> bool:
        """Write-write or read-write overlap."""
        return bool(
            self.writes & other.writes
            or self.writes & other.reads
            or self.reads & other.writes
        )

    @property
    def touched(self) -> frozenset[int]:
        return self.reads | self.writes


@dataclass(frozen=True)
class ConflictGraph:
    """Symmetric, self-edge-free adjacency over transaction identities."""

    adjacency: dict[TxId, frozenset[TxId]]

    @classmethod
    def from_edges(cls, nodes: Iterable[TxId], edges: Iterable[tuple[TxId, TxId]]) -> "ConflictGraph":
        adj: dict[TxId, set[TxId]] = {tx: set() for tx in nodes}
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-edge on {a}")
            if a not in adj or b not in adj:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
            adj[a].add(b)
            adj[b].add(a)
        return cls({tx: frozenset(nbrs) for tx, nbrs in adj.items()})

    @property
    def nodes(self) -> tuple[TxId, ...]:
        return tuple(sorted(self.adjacency))

    def neighbors(self, tx: TxId) -> frozenset[TxId]:
        return self.adjacency[tx]

    def degree(self, tx: TxId) -> int:
        return len(self.adjacency[tx])

    def has_edge(self, a: TxId, b: TxId) -> bool:
        return b in self.adjacency.get(a, frozenset())

    def edges(self) -> tuple[tuple[TxId, TxId], ...]:
        """Each edge once, endpoints sorted, list sorted."""
        out = []
        for tx, nbrs in self.adjacency.items():
            for other in nbrs:
                if tx < other:
                    out.append((tx, other))
        return tuple(sorted(out))

    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency.values()) // 2


def congestion(graph: ConflictGraph) -> int:
    """Largest degree in the graph; 0 for an edgeless graph."""
    if not graph.adjacency:
        return 0
    return max(len(nbrs) for nbrs in graph.adjacency.values())


def restrict(graph: ConflictGraph, nodes: Iterable[TxId]) -> ConflictGraph:
    """Induced subgraph on `nodes` (must all be present in the graph)."""
    keep = set(nodes)
    unknown = keep - graph.adjacency.keys()
    if unknown:
        raise ValueError(f"unknown nodes in restriction: {sorted(unknown)}")
    return ConflictGraph({tx: graph.adjacency[tx] & keep for tx in keep})


def derive_conflicts(m: int, n: int, accesses: Mapping[TxId, AccessSet]) -> ConflictGraph:
    """Conflict graph induced by shared-object accesses.

    Two distinct transactions conflict iff some object is written by one
    and read or written by the other. Transactions missing from `accesses`
    touch nothing and end up isolated.
    """
    txs = transactions(m, n)
    adj: dict[TxId, set[TxId]] = {tx: set() for tx in txs}
    empty = AccessSet()
    # index object -> (readers, writers) to avoid the all-pairs scan
    readers: dict[int, list[TxId]] = {}
    writers: dict[int, list[TxId]] = {}
    for tx in txs:
        acc = accesses.get(tx, empty)
        for obj in acc.reads:
            readers.setdefault(obj, []).append(tx)
        for obj in acc.writes:
            writers.setdefault(obj, []).append(tx)
    for obj, ws in writers.items():
        for i, a in enumerate(ws):
            for b in ws[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
            for b in readers.get(obj, ()):
                if a != b:
                    adj[a].add(b)
                    adj[b].add(a)
    return ConflictGraph({tx: frozenset(nbrs) for tx, nbrs in adj.items()})


def transactions(m: int, n: int) -> tuple[TxId, ...]:
    """All M*N transaction ids in (thread, index) order; ids are 1-based."""
    return tuple(TxId(i, j) for i in range(1, m + 1) for j in range(1, n + 1))


@dataclass(frozen=True)
class WindowSpec:
    """An M x N window: grid dimensions plus its conflict relation.

    `accesses` is present iff the conflicts were derived from object
    read/write sets, in which case the graph must equal exactly what
    `derive_conflicts` produces.
    """

    m: int
    n: int
    graph: ConflictGraph
    accesses: dict[TxId, AccessSet] | None = None
    n_objects: int | None = None

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("window dimensions must be >= 1")
        expected = set(transactions(self.m, self.n))
        if set(self.graph.adjacency) != expected:
            raise ValueError("graph nodes must be exactly the M*N transactions")
        for tx, nbrs in self.graph.adjacency.items():
            if tx in nbrs:
                raise ValueError(f"self-edge on {tx}")
            for other in nbrs:
                if tx not in self.graph.adjacency[other]:
                    raise ValueError(f"asymmetric edge ({tx}, {other})")
        if self.accesses is not None:
            if self.n_objects is None:
                raise ValueError("access-derived windows must record the object count")
            for tx, acc in self.accesses.items():
                bad = [o for o in acc.touched if not 1 <= o <= self.n_objects]
                if bad:
                    raise ValueError(f"{tx} references objects out of range: {bad}")
            derived = derive_conflicts(self.m, self.n, self.accesses)
            if derived.adjacency != self.graph.adjacency:
                raise ValueError("conflicts disagree with the access-derived graph")

    @classmethod
    def from_edges(cls, m: int, n: int, edges: Iterable[tuple[TxId, TxId]]) -> "WindowSpec":
        return cls(m, n, ConflictGraph.from_edges(transactions(m, n), edges))

    @classmethod
    def from_accesses(
        cls, m: int, n: int, accesses: Mapping[TxId, AccessSet], n_objects: int
    ) -> "WindowSpec":
        graph = derive_conflicts(m, n, accesses)
        return cls(m, n, graph, dict(accesses), n_objects)

    @classmethod
    def conflict_free(cls, m: int, n: int) -> "WindowSpec":
        return cls.from_edges(m, n, ())

    @property
    def transactions(self) -> tuple[TxId, ...]:
        return transactions(self.m, self.n)

    @property
    def congestion(self) -> int:
        return congestion(self.graph)


# --- workload generators ---------------------------------------------------

@dataclass(frozen=True)
class ObjectUniform:
    """Each transaction independently writes (then reads) each of s objects."""

    s: int
    read_prob: float
    write_prob: float


@dataclass(frozen=True)
class DegreeCapped:
    """Bernoulli edges in seeded-random pair order, rejecting edges that
    would push any degree past the cap."""

    c_target: int
    edge_prob: float


@dataclass(frozen=True)
class ColumnClustered:
    """Bernoulli edges with one rate inside a column and another across."""

    intra_prob: float
    inter_prob: float


GeneratorModel = Union[ObjectUniform, DegreeCapped, ColumnClustered]

_CAP_RETRIES = 5


def generate_window(m: int, n: int, model: GeneratorModel, seed: int) -> WindowSpec:
    """Deterministic workload from (m, n, model parameters, seed)."""
    if m < 1 or n < 1:
        raise ValueError("window dimensions must be >= 1")
    if isinstance(model, ObjectUniform):
        return _gen_object_uniform(m, n, model, seed)
    if isinstance(model, DegreeCapped):
        return _gen_degree_capped(m, n, model, seed)
    if isinstance(model, ColumnClustered):
        return _gen_column_clustered(m, n, model, seed)
    raise TypeError(f"unknown generator model: {model!r}")


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {p}")


def _all_pairs(m: int, n: int) -> list[tuple[TxId, TxId]]:
    txs = transactions(m, n)
    return [(txs[i], txs[j]) for i in range(len(txs)) for j in range(i + 1, len(txs))]


def _gen_object_uniform(m: int, n: int, model: ObjectUniform, seed: int) -> WindowSpec:
    _check_prob("read_prob", model.read_prob)
    _check_prob("write_prob", model.write_prob)
    if model.s < 1:
        raise ValueError("object count must be >= 1")
    rng = substream(seed, GEN)
    txs = transactions(m, n)
    write_mask = rng.random((len(txs), model.s)) < model.write_prob
    read_mask = (rng.random((len(txs), model.s)) < model.read_prob) & ~write_mask
    accesses = {}
    for row, tx in enumerate(txs):
        writes = frozenset(int(o) + 1 for o in np.flatnonzero(write_mask[row]))
        reads = frozenset(int(o) + 1 for o in np.flatnonzero(read_mask[row]))
        accesses[tx] = AccessSet(reads, writes)
    return WindowSpec.from_accesses(m, n, accesses, model.s)


def _gen_degree_capped(m: int, n: int, model: DegreeCapped, seed: int) -> WindowSpec:
    _check_prob("edge_prob", model.edge_prob)
    if not 0 <= model.c_target <= m * n - 1:
        raise ValueError("c_target must be in [0, M*N-1]")
    pairs = _all_pairs(m, n)
    for attempt in range(_CAP_RETRIES):
        rng = substream(seed, GEN, attempt)
        order = rng.permutation(len(pairs))
        sampled = rng.random(len(pairs)) < model.edge_prob
        degree: dict[TxId, int] = {}
        edges: list[tuple[TxId, TxId]] = []
        rejected = 0
        for pos in order:
            if not sampled[pos]:
                continue
            a, b = pairs[pos]
            if degree.get(a, 0) >= model.c_target or degree.get(b, 0) >= model.c_target:
                rejected += 1
                continue
            degree[a] = degree.get(a, 0) + 1
            degree[b] = degree.get(b, 0) + 1
            edges.append((a, b))
        # edge_prob == 1 demands every edge; a cap that forces rejections
        # makes the combination unsatisfiable.
        if model.edge_prob >= 1.0 and rejected:
            continue
        return WindowSpec.from_edges(m, n, edges)
    raise GenerationError(
        f"cannot satisfy edge_prob={model.edge_prob} under degree cap "
        f"{model.c_target} on a {m}x{n} window after {_CAP_RETRIES} attempts"
    )


def _gen_column_clustered(m: int, n: int, model: ColumnClustered, seed: int) -> WindowSpec:
    _check_prob("intra_prob", model.intra_prob)
    _check_prob("inter_prob", model.inter_prob)
    rng = substream(seed, GEN)
    pairs = _all_pairs(m, n)
    draws = rng.random(len(pairs))
    edges = []
    for (a, b), u in zip(pairs, draws):
        p = model.intra_prob if a.index == b.index else model.inter_prob
        if u < p:
            edges.append((a, b))
    return WindowSpec.from_edges(m, n, edges)


# --- on-disk format ---------------------------------------------------------
#
# Line-oriented text. Blank lines and `#` comments are ignored.
#
#   window M N
#   objects S                     (required for access files, forbidden otherwise)
#   access i j R:o1,o2 W:o3       (access form: one line per transaction)
#   edge i1 j1 i2 j2              (edge form: one line per conflict edge)
#
# A file is either edge form or access form, never both.

def dump_window(window: WindowSpec) -> str:
    lines = [f"window {window.m} {window.n}"]
    if window.accesses is not None:
        lines.append(f"objects {window.n_objects}")
        for tx in window.transactions:
            acc = window.accesses.get(tx, AccessSet())
            reads = ",".join(str(o) for o in sorted(acc.reads))
            writes = ",".join(str(o) for o in sorted(acc.writes))
            lines.append(f"access {tx.thread} {tx.index} R:{reads} W:{writes}")
    else:
        for a, b in window.graph.edges():
            lines.append(f"edge {a.thread} {a.index} {b.thread} {b.index}")
    return "\n".join(lines) + "\n"


def save_window(window: WindowSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_window(window))


def parse_window(text: str) -> WindowSpec:
    m = n = None
    n_objects: int | None = None
    edges: list[tuple[TxId, TxId]] = []
    accesses: dict[TxId, AccessSet] = {}
    mode: str | None = None  # "edge" | "access"

    def _int(tok: str, what: str, lineno: int) -> int:
        try:
            return int(tok)
        except ValueError:
            raise WindowFormatError(f"line {lineno}: bad {what} {tok!r}") from None

    def _txid(i: int, j: int, lineno: int) -> TxId:
        if not (1 <= i <= m and 1 <= j <= n):
            raise WindowFormatError(f"line {lineno}: transaction ({i},{j}) outside {m}x{n} window")
        return TxId(i, j)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "window":
            if m is not None:
                raise WindowFormatError(f"line {lineno}: duplicate window header")
            if len(tokens) != 3:
                raise WindowFormatError(f"line {lineno}: expected 'window M N'")
            m = _int(tokens[1], "thread count", lineno)
            n = _int(tokens[2], "transactions per thread", lineno)
            if m < 1 or n < 1:
                raise WindowFormatError(f"line {lineno}: window dimensions must be >= 1")
            continue
        if m is None:
            raise WindowFormatError(f"line {lineno}: 'window M N' header must come first")
        if kind == "objects":
            if len(tokens) != 2:
                raise WindowFormatError(f"line {lineno}: expected 'objects S'")
            if n_objects is not None:
                raise WindowFormatError(f"line {lineno}: duplicate objects header")
            n_objects = _int(tokens[1], "object count", lineno)
            if n_objects < 1:
                raise WindowFormatError(f"line {lineno}: object count must be >= 1")
        elif kind == "edge":
            if mode == "access":
                raise WindowFormatError(f"line {lineno}: edge line in an access file")
            mode = "edge"
            if len(tokens) != 5:
                raise WindowFormatError(f"line {lineno}: expected 'edge i1 j1 i2 j2'")
            a = _txid(_int(tokens[1], "thread", lineno), _int(tokens[2], "index", lineno), lineno)
            b = _txid(_int(tokens[3], "thread", lineno), _int(tokens[4], "index", lineno), lineno)
            if a == b:
                raise WindowFormatError(f"line {lineno}: self-edge on {a}")
            edges.append((a, b))
        elif kind == "access":
            if mode == "edge":
                raise WindowFormatError(f"line {lineno}: access line in an edge file")
            mode = "access"
            if len(tokens) != 5 or not tokens[3].startswith("R:") or not tokens[4].startswith("W:"):
                raise WindowFormatError(f"line {lineno}: expected 'access i j R:... W:...'")
            tx = _txid(_int(tokens[1], "thread", lineno), _int(tokens[2], "index", lineno), lineno)
            if tx in accesses:
                raise WindowFormatError(f"line {lineno}: duplicate access line for {tx}")
            reads = _parse_objects(tokens[3][2:], lineno)
            writes = _parse_objects(tokens[4][2:], lineno)
            accesses[tx] = AccessSet(reads, writes)
        else:
            raise WindowFormatError(f"line {lineno}: unknown directive {kind!r}")

    if m is None:
        raise WindowFormatError("missing 'window M N' header")
    if mode == "access":
        if n_objects is None:
            raise WindowFormatError("access files require an 'objects S' header")
        try:
            return WindowSpec.from_accesses(m, n, accesses, n_objects)
        except ValueError as exc:
            raise WindowFormatError(str(exc)) from None
    if n_objects is not None:
        raise WindowFormatError("'objects S' header is only valid in access files")
    try:
        return WindowSpec.from_edges(m, n, edges)
    except ValueError as exc:
        raise WindowFormatError(str(exc)) from None


def _parse_objects(blob: str, lineno: int) -> frozenset[int]:
    if not blob:
        return frozenset()
    out = set()
    for tok in blob.split(","):
        try:
            out.add(int(tok))
        except ValueError:
            raise WindowFormatError(f"line {lineno}: bad object id {tok!r}") from None
    return frozenset(out)


def load_window(path) -> WindowSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_window(fh.read())
