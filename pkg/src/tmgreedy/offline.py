"""Graph-aware greedy policy.

Knows the conflict graph of the running transactions. Per step it commits
a maximal independent set of high-priority transactions, removes their
low-priority neighbors, and fills in with a maximal independent set of
the remaining low-priority ones. Everything not committed is aborted and
retries next step; low priority never beats high priority.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .engine import AbortDecision, BasePolicy, Decision, RunContext, StepView
from .frames import FrameParams, Priority, make_frame_params, priority_at
from .model import ConflictGraph, TxId, WindowSpec
from .seeding import MIS

MIS_ORDERS = ("lex", "random")


def frame_params(m: int, n: int, congestion: int, seed: int) -> FrameParams:
    """Frame schedule used by this policy (formula-derived frame length)."""
    return make_frame_params(m, n, congestion, seed)


def greedy_mis(graph: ConflictGraph, order: Sequence[TxId]) -> set[TxId]:
    """Scan `order`, taking each node with no already-taken neighbor.

    The result is independent and maximal (not necessarily maximum).
    Nodes in `order` that are not in the graph are skipped.
    """
    chosen: set[TxId] = set()
    blocked: set[TxId] = set()
    for tx in order:
        if tx not in graph.adjacency or tx in blocked:
            continue
        chosen.add(tx)
        blocked.add(tx)
        blocked |= graph.adjacency[tx]
    return chosen


def commit_set(
    graph: ConflictGraph,
    priorities: Mapping[TxId, Priority],
    order: Sequence[TxId],
) -> set[TxId]:
    """One step's commits: high-priority MIS, then a low-priority MIS drawn
    from the low nodes not adjacent to the high winners."""
    high = [tx for tx in order if priorities[tx] is Priority.HIGH]
    low = [tx for tx in order if priorities[tx] is Priority.LOW]
    winners_high = greedy_mis(_induced(graph, high), high)
    shadowed = {
        tx for tx in low if graph.adjacency[tx] & winners_high
    }
    eligible_low = [tx for tx in low if tx not in shadowed]
    winners_low = greedy_mis(_induced(graph, eligible_low), eligible_low)
    return winners_high | winners_low


def _induced(graph: ConflictGraph, nodes: Iterable[TxId]) -> ConflictGraph:
    keep = set(nodes)
    return ConflictGraph({tx: graph.adjacency[tx] & keep for tx in keep})


class OfflineGreedy(BasePolicy):
    """Graph-aware randomized greedy scheduler.

    Requires the window's congestion bound C up front (it sizes the random
    offset range). `mis_order` picks the MIS scan order: "lex" is the
    deterministic (thread, index) order, "random" reshuffles per step from
    a seeded stream. `frame_len` overrides the formula-derived frame
    length; tests use tiny frames to force priority churn.
    """

    name = "offline"
    visibility = "graph"

    def __init__(self, congestion: int, mis_order: str = "lex", frame_len: int | None = None):
        if congestion < 0:
            raise ValueError("congestion bound must be >= 0")
        if mis_order not in MIS_ORDERS:
            raise ValueError(f"mis_order must be one of {MIS_ORDERS}")
        self.congestion = congestion
        self.mis_order = mis_order
        self.frame_len_override = frame_len
        self.params: FrameParams | None = None
        self._mis_rng = None

    def on_run_start(self, window: WindowSpec, ctx: RunContext) -> None:
        self.params = make_frame_params(
            window.m, window.n, self.congestion, ctx.seed, self.frame_len_override
        )
        if self.mis_order == "random":
            self._mis_rng = ctx.substream(MIS)
        for tx in window.transactions:
            ctx.set_frame(tx, self.params.frame_of(tx), self.params.deadline(tx))

    def _scan_order(self, active: tuple[TxId, ...]) -> list[TxId]:
        if self.mis_order == "lex":
            return list(active)
        perm = self._mis_rng.permutation(len(active))
        return [active[int(k)] for k in perm]

    def arbitrate(self, t: int, view: StepView, ctx: RunContext) -> Decision:
        fp = self.params
        graph = view.graph
        priorities = {
            tx: priority_at(t, fp.frame_of(tx), fp.frame_len) for tx in view.active
        }
        order = self._scan_order(view.active)
        commits = commit_set(graph, priorities, order)

        aborts = []
        for victim in view.active:
            if victim in commits:
                continue
            winner = _committing_winner(graph, victim, commits, priorities)
            aborts.append(AbortDecision(victim, winner, hold=False))
        return Decision(frozenset(commits), tuple(aborts))

    def params_snapshot(self) -> dict:
        snap = {
            "policy": self.name,
            "C": self.congestion,
            "mis_order": self.mis_order,
        }
        if self.params is not None:
            snap.update(
                frame_len=self.params.frame_len,
                slots=self.params.slots,
                offsets=list(self.params.offsets),
            )
        return snap


def _committing_winner(
    graph: ConflictGraph,
    victim: TxId,
    commits: set[TxId],
    priorities: Mapping[TxId, Priority],
) -> TxId:
    """The committing neighbor in whose favor the victim is aborted.

    A committing high-priority neighbor is preferred, so a high-priority
    victim is never charged to a low-priority winner. One always exists:
    the two MIS constructions are maximal within their rules.
    """
    candidates = sorted(graph.adjacency[victim] & commits)
    if not candidates:
        raise AssertionError(f"{victim} aborted with no committing neighbor")
    high = [tx for tx in candidates if priorities[tx] is Priority.HIGH]
    return high[0] if high else candidates[0]
