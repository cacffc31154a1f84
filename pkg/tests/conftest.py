"""Shared strategies and helpers for the test suite."""

from __future__ import annotations

import itertools

from hypothesis import strategies as st

from tmgreedy import AccessSet, TxId, WindowSpec
from tmgreedy.adaptive import AdaptiveGreedy
from tmgreedy.model import transactions
from tmgreedy.offline import OfflineGreedy
from tmgreedy.online import OnlineGreedy


def all_pairs(m: int, n: int) -> list[tuple[TxId, TxId]]:
    txs = transactions(m, n)
    return list(itertools.combinations(txs, 2))


@st.composite
def edge_windows(draw, max_m: int = 5, max_n: int = 5) -> WindowSpec:
    """Random window with a direct edge-set conflict relation."""
    m = draw(st.integers(1, max_m))
    n = draw(st.integers(1, max_n))
    pairs = all_pairs(m, n)
    if pairs:
        edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    else:
        edges = []
    return WindowSpec.from_edges(m, n, edges)


@st.composite
def access_maps(draw, max_m: int = 4, max_n: int = 4, max_objects: int = 6):
    """(m, n, accesses, n_objects) with random read/write sets."""
    m = draw(st.integers(1, max_m))
    n = draw(st.integers(1, max_n))
    s = draw(st.integers(1, max_objects))
    objs = st.integers(1, s)
    accesses = {}
    for tx in transactions(m, n):
        reads = draw(st.frozensets(objs, max_size=s))
        writes = draw(st.frozensets(objs, max_size=s))
        accesses[tx] = AccessSet(reads, writes)
    return m, n, accesses, s


def policy_factories(window: WindowSpec, frame_len: int | None = None):
    """One fresh factory per policy, parameterized for `window`."""
    c = window.congestion
    return {
        "offline": lambda: OfflineGreedy(congestion=c, frame_len=frame_len),
        "online": lambda: OnlineGreedy(congestion=c, frame_len=frame_len),
        "adaptive": lambda: AdaptiveGreedy(frame_len=frame_len),
    }
