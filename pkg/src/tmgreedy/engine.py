"""Synchronous unit-step execution loop.

One run advances global time in unit steps. Per step: each thread
activates its next transaction as soon as the previous one has committed,
held transactions whose blocker resolved re-enter the running set, the
policy arbitrates the step, winners commit at the end of the step and
victims either retry next step or hold off until their blocker commits or
aborts. A run is a deterministic function of (window, policy parameters,
seed).

The engine verifies the policy contract: the commit set must be a subset
of the running transactions and independent in the window's true conflict
graph. A generous step budget turns any livelocking policy bug into a
diagnosable error carrying the partial trace.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .frames import online_frame_len
from .model import ConflictGraph, TxId, WindowSpec
from .seeding import substream

NOT_STARTED = "not_started"
RUNNING = "running"
HOLD_OFF = "hold_off"
COMMITTED = "committed"

EVENT_KINDS = ("start", "commit", "abort", "restart", "hold", "pi1_draw", "double")


class PolicyContractError(RuntimeError):
    """Policy produced an invalid step outcome (e.g. dependent commit set)."""


class LivelockError(RuntimeError):
    """Step budget exhausted; carries the partial trace for diagnosis."""

    def __init__(self, message: str, trace: "ExecutionTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str
    tx: TxId
    other: TxId | None = None
    value: str | None = None


@dataclass(frozen=True)
class StepRecord:
    step: int
    running: tuple[TxId, ...]
    held: tuple[TxId, ...]
    committed: tuple[TxId, ...]
    aborts: tuple[tuple[TxId, TxId], ...]  # (victim, winner)


@dataclass(frozen=True)
class TxSummary:
    start_step: int | None
    commit_step: int | None
    restarts: int


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    deadline: int  # first step after the designated frame


@dataclass
class ExecutionTrace:
    """Full record of one run; the source of all metrics."""

    m: int
    n: int
    seed: int
    policy_params: dict
    steps: list[StepRecord] = field(default_factory=list)
    events: list[TraceEvent] = field(default_factory=list)
    summaries: dict[TxId, TxSummary] = field(default_factory=dict)
    frames: dict[TxId, FrameRecord] = field(default_factory=dict)
    complete: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def last_commit_step(self) -> int | None:
        commits = [s.commit_step for s in self.summaries.values() if s.commit_step is not None]
        return max(commits) if commits else None


@dataclass(frozen=True)
class AbortDecision:
    victim: TxId
    winner: TxId
    hold: bool


@dataclass(frozen=True)
class Decision:
    commits: frozenset[TxId]
    aborts: tuple[AbortDecision, ...] = ()


@dataclass(frozen=True)
class StepView:
    """What a policy may see at one step.

    Graph-aware policies get the conflict graph induced on the running
    transactions; graph-blind policies get only the conflicting pairs among
    them. Neither exposes edges touching non-running transactions.
    """

    t: int
    active: tuple[TxId, ...]
    graph: ConflictGraph | None = None
    pairs: tuple[tuple[TxId, TxId], ...] | None = None


class RunContext:
    """Engine services handed to the policy for one run."""

    def __init__(self, window: WindowSpec, seed: int, trace: ExecutionTrace):
        self.window = window
        self.seed = seed
        self._trace = trace
        self._step = 0

    def substream(self, *key: int):
        return substream(self.seed, *key)

    def log_event(self, kind: str, tx: TxId, other: TxId | None = None, value: str | None = None) -> None:
        self._trace.events.append(TraceEvent(self._step, kind, tx, other, value))

    def set_frame(self, tx: TxId, frame_index: int, deadline: int) -> None:
        self._trace.frames[tx] = FrameRecord(frame_index, deadline)

    def warn(self, message: str) -> None:
        self._trace.warnings.append(message)


class SchedulerPolicy(Protocol):
    name: str
    visibility: str  # "graph" | "pairs"

    def on_run_start(self, window: WindowSpec, ctx: RunContext) -> None: ...
    def on_activate(self, tx: TxId, t: int, ctx: RunContext) -> None: ...
    def on_restart(self, tx: TxId, t: int, ctx: RunContext) -> None: ...
    def on_step_begin(self, t: int, view: StepView, ctx: RunContext) -> None: ...
    def arbitrate(self, t: int, view: StepView, ctx: RunContext) -> Decision: ...
    def on_commit(self, tx: TxId, t: int, ctx: RunContext) -> None: ...
    def params_snapshot(self) -> dict: ...


class BasePolicy:
    """No-op lifecycle hooks; concrete policies override what they need."""

    name = "base"
    visibility = "pairs"

    def on_run_start(self, window: WindowSpec, ctx: RunContext) -> None:
        pass

    def on_activate(self, tx: TxId, t: int, ctx: RunContext) -> None:
        pass

    def on_restart(self, tx: TxId, t: int, ctx: RunContext) -> None:
        pass

    def on_step_begin(self, t: int, view: StepView, ctx: RunContext) -> None:
        pass

    def on_commit(self, tx: TxId, t: int, ctx: RunContext) -> None:
        pass

    def params_snapshot(self) -> dict:
        return {"policy": self.name}


@dataclass
class _TxState:
    status: str = NOT_STARTED
    start_step: int | None = None
    commit_step: int | None = None
    restarts: int = 0
    blocker: TxId | None = None
    hold_since: int | None = None
    last_abort_step: int | None = None
    pending_restart: bool = False


def run(
    window: WindowSpec,
    policy: SchedulerPolicy,
    seed: int,
    step_budget: int | None = None,
) -> ExecutionTrace:
    """Execute the window to completion under `policy`."""
    m, n = window.m, window.n
    graph = window.graph
    total = m * n
    budget = step_budget if step_budget is not None else 10 * total * online_frame_len(m, n)

    trace = ExecutionTrace(m=m, n=n, seed=seed, policy_params={})
    ctx = RunContext(window, seed, trace)
    policy.on_run_start(window, ctx)

    states = {tx: _TxState() for tx in window.transactions}
    next_index = {i: 1 for i in range(1, m + 1)}
    live: dict[int, TxId | None] = {i: None for i in range(1, m + 1)}
    committed_count = 0
    t = 0

    def _partial(msg: str) -> LivelockError:
        trace.policy_params = dict(policy.params_snapshot())
        _fill_summaries(trace, states)
        return LivelockError(msg, trace)

    while committed_count < total:
        if t >= budget:
            raise _partial(
                f"step budget {budget} exhausted after {committed_count}/{total} commits"
            )
        ctx._step = t

        # Activation: a thread starts its next transaction at the first
        # step after the previous one committed.
        for i in range(1, m + 1):
            if live[i] is None and next_index[i] <= n:
                tx = TxId(i, next_index[i])
                next_index[i] += 1
                live[i] = tx
                st = states[tx]
                st.status = RUNNING
                st.start_step = t
                trace.events.append(TraceEvent(t, "start", tx))
                policy.on_activate(tx, t, ctx)

        # Hold-off release: blocker committed, or aborted at or after the
        # step the hold began.
        for tx in sorted(s_tx for s_tx, st in states.items() if st.status == HOLD_OFF):
            st = states[tx]
            blk = states[st.blocker]
            if blk.status == COMMITTED or (
                blk.last_abort_step is not None and blk.last_abort_step >= st.hold_since
            ):
                st.status = RUNNING
                st.blocker = None
                st.hold_since = None
                st.restarts += 1
                trace.events.append(TraceEvent(t, "restart", tx))
                policy.on_restart(tx, t, ctx)

        # Immediate retries of last step's non-holding victims.
        for tx in sorted(s_tx for s_tx, st in states.items() if st.pending_restart):
            st = states[tx]
            st.pending_restart = False
            st.restarts += 1
            trace.events.append(TraceEvent(t, "restart", tx))
            policy.on_restart(tx, t, ctx)

        active = tuple(sorted(tx for tx, st in states.items() if st.status == RUNNING))
        held = tuple(sorted(tx for tx, st in states.items() if st.status == HOLD_OFF))
        view = _build_view(t, active, graph, policy.visibility)

        policy.on_step_begin(t, view, ctx)
        decision = policy.arbitrate(t, view, ctx)
        _check_decision(policy, t, decision, active, graph)

        abort_pairs = []
        for ab in decision.aborts:
            st = states[ab.victim]
            st.last_abort_step = t
            trace.events.append(TraceEvent(t, "abort", ab.victim, ab.winner))
            abort_pairs.append((ab.victim, ab.winner))
            if ab.hold:
                st.status = HOLD_OFF
                st.blocker = ab.winner
                st.hold_since = t
                trace.events.append(TraceEvent(t, "hold", ab.victim, ab.winner))
            else:
                st.pending_restart = True

        commits = tuple(sorted(decision.commits))
        for tx in commits:
            st = states[tx]
            st.status = COMMITTED
            st.commit_step = t
            live[tx.thread] = None
            committed_count += 1
            trace.events.append(TraceEvent(t, "commit", tx))
            policy.on_commit(tx, t, ctx)

        trace.steps.append(StepRecord(t, active, held, commits, tuple(abort_pairs)))
        t += 1

    trace.complete = True
    trace.policy_params = dict(policy.params_snapshot())
    _fill_summaries(trace, states)
    return trace


def _build_view(t: int, active: tuple[TxId, ...], graph: ConflictGraph, visibility: str) -> StepView:
    if visibility == "graph":
        keep = set(active)
        induced = ConflictGraph({tx: graph.adjacency[tx] & keep for tx in active})
        return StepView(t, active, graph=induced)
    pairs = []
    for i, a in enumerate(active):
        nbrs = graph.adjacency[a]
        for b in active[i + 1:]:
            if b in nbrs:
                pairs.append((a, b))
    return StepView(t, active, pairs=tuple(pairs))


def _check_decision(
    policy: SchedulerPolicy,
    t: int,
    decision: Decision,
    active: tuple[TxId, ...],
    graph: ConflictGraph,
) -> None:
    active_set = set(active)
    commits = decision.commits
    if not commits <= active_set:
        raise PolicyContractError(
            f"{policy.name}: commit set at step {t} is not a subset of the running transactions"
        )
    ordered = sorted(commits)
    for i, a in enumerate(ordered):
        nbrs = graph.adjacency[a]
        for b in ordered[i + 1:]:
            if b in nbrs:
                raise PolicyContractError(
                    f"{policy.name}: commit set at step {t} is not independent ({a} conflicts {b})"
                )
    seen: set[TxId] = set()
    for ab in decision.aborts:
        if ab.victim not in active_set:
            raise PolicyContractError(f"{policy.name}: abort victim {ab.victim} is not running at step {t}")
        if ab.victim in commits:
            raise PolicyContractError(f"{policy.name}: {ab.victim} both commits and aborts at step {t}")
        if ab.victim in seen:
            raise PolicyContractError(f"{policy.name}: duplicate abort for {ab.victim} at step {t}")
        seen.add(ab.victim)


def _fill_summaries(trace: ExecutionTrace, states: dict[TxId, _TxState]) -> None:
    trace.summaries = {
        tx: TxSummary(st.start_step, st.commit_step, st.restarts) for tx, st in sorted(states.items())
    }


# --- trace validation --------------------------------------------------------

def verify_trace(window: WindowSpec, trace: ExecutionTrace) -> list[str]:
    """All trace invariants; an empty list means the trace is valid.

    Violations are data, not exceptions, so that deliberately broken traces
    can be inspected in tests.
    """
    violations: list[str] = []
    graph = window.graph

    commit_steps: dict[TxId, int] = {}
    for rec in trace.steps:
        for tx in rec.committed:
            if tx in commit_steps:
                violations.append(f"{tx} commits more than once (steps {commit_steps[tx]} and {rec.step})")
            else:
                commit_steps[tx] = rec.step

    if trace.complete:
        missing = [tx for tx in window.transactions if tx not in commit_steps]
        if missing:
            violations.append(f"complete trace missing commits for {len(missing)} transactions")
        if trace.steps and len(trace.steps) > window.m * window.n:
            violations.append(
                f"makespan {len(trace.steps)} exceeds the serialization bound {window.m * window.n}"
            )

    # per-thread ordering: commit steps strictly increasing in the index
    for i in range(1, window.m + 1):
        prev_step = -1
        for j in range(1, window.n + 1):
            tx = TxId(i, j)
            if tx not in commit_steps:
                break
            if commit_steps[tx] <= prev_step:
                violations.append(f"{tx} commits at step {commit_steps[tx]}, not after its predecessor")
            prev_step = commit_steps[tx]

    for rec in trace.steps:
        committed = rec.committed
        for a_i, a in enumerate(committed):
            for b in committed[a_i + 1:]:
                if graph.has_edge(a, b):
                    violations.append(f"step {rec.step}: committed set not independent ({a} conflicts {b})")
        if not committed:
            violations.append(f"step {rec.step}: no transaction committed")
        per_thread: dict[int, int] = {}
        for tx in rec.running + rec.held:
            per_thread[tx.thread] = per_thread.get(tx.thread, 0) + 1
        for thread, count in per_thread.items():
            if count > 1:
                violations.append(f"step {rec.step}: thread {thread} has {count} live transactions")

    # availability: a transaction starts exactly one step after its
    # predecessor commits (the first transaction at step 0)
    for tx, summary in trace.summaries.items():
        if summary.start_step is None:
            continue
        if tx.index == 1:
            expected = 0
        else:
            pred = TxId(tx.thread, tx.index - 1)
            pred_commit = commit_steps.get(pred)
            if pred_commit is None:
                violations.append(f"{tx} started but its predecessor never committed")
                continue
            expected = pred_commit + 1
        if summary.start_step != expected:
            violations.append(f"{tx} started at step {summary.start_step}, expected {expected}")

    return violations


# --- exports ------------------------------------------------------------------

EVENT_CSV_FIELDS = ("step", "event", "thread", "index", "winner_thread", "winner_index", "value")
SUMMARY_CSV_FIELDS = ("thread", "index", "start", "commit", "restarts")


def write_events_csv(trace: ExecutionTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_CSV_FIELDS)
        for ev in trace.events:
            writer.writerow(
                (
                    ev.step,
                    ev.kind,
                    ev.tx.thread,
                    ev.tx.index,
                    ev.other.thread if ev.other else "",
                    ev.other.index if ev.other else "",
                    ev.value if ev.value is not None else "",
                )
            )


def write_summary_csv(trace: ExecutionTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_CSV_FIELDS)
        for tx in sorted(trace.summaries):
            s = trace.summaries[tx]
            writer.writerow(
                (
                    tx.thread,
                    tx.index,
                    s.start_step if s.start_step is not None else "",
                    s.commit_step if s.commit_step is not None else "",
                    s.restarts,
                )
            )
