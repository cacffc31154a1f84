"""Graph-blind greedy policy.

Sees only the conflicting pairs among running transactions. Each
transaction carries a two-part priority vector: the low/high phase, then
a lottery number drawn uniformly from [1, M]. Conflicts are swept edge by
edge in a fixed order and resolved pairwise by lexicographic comparison;
smaller vector wins, and the loser holds off until its blocker commits or
aborts. Lottery numbers are redrawn on every (re)start and when a
transaction turns high priority.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .engine import AbortDecision, BasePolicy, Decision, RunContext, StepView
from .frames import FrameParams, Priority, make_frame_params_online, priority_at
from .model import TxId, WindowSpec
from .seeding import LOTTERY

# priority vector: (phase, lottery); lexicographically smaller wins
Vector = tuple[int, int]


def frame_params_online(m: int, n: int, congestion: int, seed: int) -> FrameParams:
    """Frame schedule used by the graph-blind policies (longer frames)."""
    return make_frame_params_online(m, n, congestion, seed)


def draw_lottery(m: int, rng: np.random.Generator) -> int:
    """Uniform integer in [1, M]."""
    return int(rng.integers(1, m + 1))


def resolve_conflict(
    detector: TxId, detector_vec: Vector, other: TxId, other_vec: Vector
) -> tuple[TxId, TxId]:
    """Pairwise outcome (victim, blocker) observed at `detector`.

    Phases differ: the low-priority side loses. Same phase: the detector
    wins only with a strictly smaller lottery number; on a tie the
    detector is the victim.
    """
    if detector_vec[0] != other_vec[0]:
        if detector_vec[0] > other_vec[0]:
            return detector, other
        return other, detector
    if detector_vec[1] < other_vec[1]:
        return other, detector
    return detector, other


def sweep_conflicts(
    vectors: Mapping[TxId, Vector],
    pairs: Sequence[tuple[TxId, TxId]],
) -> tuple[set[TxId], list[tuple[TxId, TxId]]]:
    """Resolve each edge whose endpoints are both still alive, in order.

    The lower endpoint of each (sorted) pair acts as the detector. After
    the sweep no two survivors are adjacent, so all survivors commit.
    Returns (survivors, [(victim, blocker), ...]).
    """
    alive = set(vectors)
    aborts: list[tuple[TxId, TxId]] = []
    for a, b in pairs:
        if a in alive and b in alive:
            victim, blocker = resolve_conflict(a, vectors[a], b, vectors[b])
            alive.discard(victim)
            aborts.append((victim, blocker))
    return alive, aborts


class OnlineGreedy(BasePolicy):
    """Graph-blind randomized greedy scheduler.

    Takes the congestion bound C (for the offset range) and never reads
    the conflict graph; arbitration uses only the conflicting pairs the
    engine reports among running transactions.
    """

    name = "online"
    visibility = "pairs"

    def __init__(self, congestion: int, frame_len: int | None = None):
        if congestion < 0:
            raise ValueError("congestion bound must be >= 0")
        self.congestion = congestion
        self.frame_len_override = frame_len
        self.params: FrameParams | None = None
        self._m = 0
        self._lottery: dict[TxId, int] = {}
        self._drawn_high: dict[TxId, bool] = {}
        self._rngs: dict[int, np.random.Generator] = {}

    def on_run_start(self, window: WindowSpec, ctx: RunContext) -> None:
        self._m = window.m
        self.params = make_frame_params_online(
            window.m, window.n, self.congestion, ctx.seed, self.frame_len_override
        )
        self._lottery = {}
        self._drawn_high = {}
        self._rngs = {i: ctx.substream(LOTTERY, i) for i in range(1, window.m + 1)}
        for tx in window.transactions:
            ctx.set_frame(tx, self.params.frame_of(tx), self.params.deadline(tx))

    def _is_high(self, tx: TxId, t: int) -> bool:
        return priority_at(t, self.params.frame_of(tx), self.params.frame_len) is Priority.HIGH

    def _draw(self, tx: TxId, t: int, ctx: RunContext) -> None:
        value = draw_lottery(self._m, self._rngs[tx.thread])
        self._lottery[tx] = value
        self._drawn_high[tx] = self._is_high(tx, t)
        ctx.log_event("pi1_draw", tx, value=str(value))

    def on_activate(self, tx: TxId, t: int, ctx: RunContext) -> None:
        self._draw(tx, t, ctx)

    def on_restart(self, tx: TxId, t: int, ctx: RunContext) -> None:
        self._draw(tx, t, ctx)

    def on_step_begin(self, t: int, view: StepView, ctx: RunContext) -> None:
        # redraw at the start of a transaction's designated frame
        for tx in view.active:
            if not self._drawn_high[tx] and self._is_high(tx, t):
                self._draw(tx, t, ctx)

    def arbitrate(self, t: int, view: StepView, ctx: RunContext) -> Decision:
        vectors = {
            tx: (int(priority_at(t, self.params.frame_of(tx), self.params.frame_len)), self._lottery[tx])
            for tx in view.active
        }
        survivors, abort_pairs = sweep_conflicts(vectors, view.pairs)
        aborts = tuple(
            AbortDecision(victim, blocker, hold=True) for victim, blocker in abort_pairs
        )
        return Decision(frozenset(survivors), aborts)

    def on_commit(self, tx: TxId, t: int, ctx: RunContext) -> None:
        self._lottery.pop(tx, None)
        self._drawn_high.pop(tx, None)

    def params_snapshot(self) -> dict:
        snap = {"policy": self.name, "C": self.congestion}
        if self.params is not None:
            snap.update(
                frame_len=self.params.frame_len,
                slots=self.params.slots,
                offsets=list(self.params.offsets),
            )
        return snap
