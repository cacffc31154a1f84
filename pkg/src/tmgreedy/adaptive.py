"""Adaptive greedy policy: graph-blind scheduling with the congestion
bound guessed on the fly.

Each thread starts from an estimate of 1 and runs the graph-blind
schedule sized for its own estimate. When one of its transactions fails
to commit inside its designated frame (a bad event) the thread doubles
its estimate, redraws its random offset, and re-bases the frame schedule
of its remaining transactions at the current step. Threads with larger
estimates win conflicts outright: the priority triplet is (estimate rank,
phase, lottery), compared lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engine import AbortDecision, BasePolicy, Decision, RunContext, StepView
from .frames import offset_slots, online_frame_len
from .model import TxId, WindowSpec
from .online import draw_lottery
from .seeding import LOTTERY, OFFSET

# priority triplet: (-estimate, phase, lottery); lexicographically smaller wins
TripletVector = tuple[int, int, int]


def frame_fully_elapsed(t: int, origin: int, frame_index: int, frame_len: int) -> bool:
    """True from the first step after the designated frame ends."""
    return t - origin >= (frame_index + 1) * frame_len


def resolve_conflict_triplet(
    detector: TxId, detector_vec: TripletVector, other: TxId, other_vec: TripletVector
) -> tuple[TxId, TxId]:
    """Pairwise (victim, blocker) under triplet priorities.

    A strictly larger estimate wins regardless of phase or lottery; equal
    estimates fall through to the two-part rule (low loses to high,
    then smaller lottery wins with ties against the detector).
    """
    if detector_vec[0] != other_vec[0]:
        if detector_vec[0] > other_vec[0]:
            return detector, other
        return other, detector
    if detector_vec[1] != other_vec[1]:
        if detector_vec[1] > other_vec[1]:
            return detector, other
        return other, detector
    if detector_vec[2] < other_vec[2]:
        return other, detector
    return detector, other


def sweep_conflicts_triplet(
    vectors: Mapping[TxId, TripletVector],
    pairs: Sequence[tuple[TxId, TxId]],
) -> tuple[set[TxId], list[tuple[TxId, TxId]]]:
    """Edge sweep as in the graph-blind policy, with triplet vectors."""
    alive = set(vectors)
    aborts: list[tuple[TxId, TxId]] = []
    for a, b in pairs:
        if a in alive and b in alive:
            victim, blocker = resolve_conflict_triplet(a, vectors[a], b, vectors[b])
            alive.discard(victim)
            aborts.append((victim, blocker))
    return alive, aborts


@dataclass
class _ThreadState:
    estimate: int = 1
    doublings: int = 0
    origin: int = 0      # step the current schedule is based at
    base_index: int = 1  # first transaction index covered by it
    slots: int = 1
    offset: int = 0
    live: TxId | None = None


class AdaptiveGreedy(BasePolicy):
    """Graph-blind scheduler that discovers the congestion bound.

    Takes no C parameter; that is the point. Estimates double on bad
    events and are capped at M*N - 1 (no transaction can conflict with
    more). Further bad events at the cap re-base the schedule and leave a
    warning in the trace.
    """

    name = "adaptive"
    visibility = "pairs"

    def __init__(self, frame_len: int | None = None):
        self.frame_len_override = frame_len
        self.frame_len = 0
        self._m = 0
        self._n = 0
        self._cap = 1
        self._threads: dict[int, _ThreadState] = {}
        self._offset_rngs: dict[int, np.random.Generator] = {}
        self._lottery_rngs: dict[int, np.random.Generator] = {}
        self._lottery: dict[TxId, int] = {}
        self._drawn_high: dict[TxId, bool] = {}

    def on_run_start(self, window: WindowSpec, ctx: RunContext) -> None:
        m, n = window.m, window.n
        self._m, self._n = m, n
        self._cap = max(1, m * n - 1)
        self.frame_len = (
            self.frame_len_override if self.frame_len_override is not None else online_frame_len(m, n)
        )
        self._offset_rngs = {i: ctx.substream(OFFSET, i) for i in range(1, m + 1)}
        self._lottery_rngs = {i: ctx.substream(LOTTERY, i) for i in range(1, m + 1)}
        self._lottery = {}
        self._drawn_high = {}
        self._threads = {}
        for i in range(1, m + 1):
            st = _ThreadState()
            st.slots = offset_slots(m, n, st.estimate)
            st.offset = int(self._offset_rngs[i].integers(0, st.slots))
            self._threads[i] = st

    def _frame_of(self, tx: TxId) -> int:
        st = self._threads[tx.thread]
        return st.offset + (tx.index - st.base_index)

    def _deadline(self, tx: TxId) -> int:
        st = self._threads[tx.thread]
        return st.origin + (self._frame_of(tx) + 1) * self.frame_len

    def _is_high(self, tx: TxId, t: int) -> bool:
        st = self._threads[tx.thread]
        return t - st.origin >= self._frame_of(tx) * self.frame_len

    def _draw(self, tx: TxId, t: int, ctx: RunContext) -> None:
        value = draw_lottery(self._m, self._lottery_rngs[tx.thread])
        self._lottery[tx] = value
        self._drawn_high[tx] = self._is_high(tx, t)
        ctx.log_event("pi1_draw", tx, value=str(value))

    def on_activate(self, tx: TxId, t: int, ctx: RunContext) -> None:
        self._threads[tx.thread].live = tx
        self._draw(tx, t, ctx)

    def on_restart(self, tx: TxId, t: int, ctx: RunContext) -> None:
        self._draw(tx, t, ctx)

    def on_step_begin(self, t: int, view: StepView, ctx: RunContext) -> None:
        # bad events first: they re-base schedules and so change priorities
        for i in sorted(self._threads):
            st = self._threads[i]
            tx = st.live
            if tx is None:
                continue
            if frame_fully_elapsed(t, st.origin, self._frame_of(tx), self.frame_len):
                self._on_bad_event(i, tx, t, ctx)
        for tx in view.active:
            if not self._drawn_high[tx] and self._is_high(tx, t):
                self._draw(tx, t, ctx)

    def _on_bad_event(self, thread: int, tx: TxId, t: int, ctx: RunContext) -> None:
        st = self._threads[thread]
        old = st.estimate
        st.estimate = min(old * 2, self._cap)
        if st.estimate > old:
            st.doublings += 1
            ctx.log_event("double", tx, value=f"{old}->{st.estimate}")
        else:
            ctx.warn(
                f"thread {thread}: bad event at step {t} with estimate already "
                f"capped at {old}; re-basing schedule only"
            )
        st.slots = offset_slots(self._m, self._n, st.estimate)
        st.offset = int(self._offset_rngs[thread].integers(0, st.slots))
        st.origin = t
        st.base_index = tx.index

    def arbitrate(self, t: int, view: StepView, ctx: RunContext) -> Decision:
        vectors: dict[TxId, TripletVector] = {}
        for tx in view.active:
            st = self._threads[tx.thread]
            phase = 0 if self._is_high(tx, t) else 1
            vectors[tx] = (-st.estimate, phase, self._lottery[tx])
        survivors, abort_pairs = sweep_conflicts_triplet(vectors, view.pairs)
        aborts = tuple(
            AbortDecision(victim, blocker, hold=True) for victim, blocker in abort_pairs
        )
        return Decision(frozenset(survivors), aborts)

    def on_commit(self, tx: TxId, t: int, ctx: RunContext) -> None:
        ctx.set_frame(tx, self._frame_of(tx), self._deadline(tx))
        self._threads[tx.thread].live = None
        self._lottery.pop(tx, None)
        self._drawn_high.pop(tx, None)

    def params_snapshot(self) -> dict:
        snap = {"policy": self.name, "frame_len": self.frame_len}
        if self._threads:
            snap["estimates"] = [self._threads[i].estimate for i in sorted(self._threads)]
            snap["doublings"] = [self._threads[i].doublings for i in sorted(self._threads)]
            snap["slots"] = max(st.slots for st in self._threads.values())
        return snap
