"""Makespan, response times, optimal-schedule oracles, Monte Carlo sweeps.

The optimal makespan for tiny windows is computed two independent ways: a
breadth-first shortest path over per-thread progress states allowing any
nonempty independent commit set, and a memoized depth-first search
restricted to maximal independent commit sets. Their agreement is a
standing cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Union

from .engine import (
    ExecutionTrace,
    LivelockError,
    PolicyContractError,
    SchedulerPolicy,
    run,
)
from .model import TxId, WindowSpec
from .seeding import TRIAL, derive_seed

OPT_MAX_TRANSACTIONS = 12


def makespan(trace: ExecutionTrace) -> int:
    """Steps from start until the last commit; steps are 0-based."""
    if not trace.complete:
        raise ValueError("makespan is undefined for an incomplete trace")
    return trace.last_commit_step + 1


@dataclass(frozen=True)
class RunStats:
    """Per-run figures distilled from a trace."""

    makespan: int
    response_times: dict[TxId, int]  # commit - availability + 1
    abort_count: int
    frame_miss_count: int
    frame_misses_by_column: tuple[int, ...]
    doubling_counts: tuple[int, ...]
    restarts_total: int


def collect_stats(trace: ExecutionTrace) -> RunStats:
    ms = makespan(trace)
    responses = {}
    for tx, summary in trace.summaries.items():
        responses[tx] = summary.commit_step - summary.start_step + 1
    aborts = sum(1 for ev in trace.events if ev.kind == "abort")
    restarts = sum(s.restarts for s in trace.summaries.values())

    misses_by_column = [0] * trace.n
    for tx, frame in trace.frames.items():
        commit = trace.summaries[tx].commit_step
        if commit is not None and commit >= frame.deadline:
            misses_by_column[tx.index - 1] += 1
    doubling = [0] * trace.m
    for ev in trace.events:
        if ev.kind == "double":
            doubling[ev.tx.thread - 1] += 1
            misses_by_column[ev.tx.index - 1] += 1
    return RunStats(
        makespan=ms,
        response_times=responses,
        abort_count=aborts,
        frame_miss_count=sum(misses_by_column),
        frame_misses_by_column=tuple(misses_by_column),
        doubling_counts=tuple(doubling),
        restarts_total=restarts,
    )


# --- optimal schedules for tiny instances -------------------------------------

def _check_opt_size(window: WindowSpec) -> None:
    if window.m * window.n > OPT_MAX_TRANSACTIONS:
        raise ValueError(
            f"optimal schedule search limited to M*N <= {OPT_MAX_TRANSACTIONS}, "
            f"got {window.m * window.n}"
        )


def _available(window: WindowSpec, state: tuple[int, ...]) -> list[TxId]:
    return [
        TxId(i + 1, done + 1)
        for i, done in enumerate(state)
        if done < window.n
    ]


def _neighbor_masks(window: WindowSpec, avail: list[TxId]) -> list[int]:
    graph = window.graph
    k = len(avail)
    nbr = [0] * k
    for a in range(k):
        for b in range(a + 1, k):
            if graph.has_edge(avail[a], avail[b]):
                nbr[a] |= 1 << b
                nbr[b] |= 1 << a
    return nbr


def _independent_masks(nbr: list[int]) -> list[int]:
    """All nonempty independent subsets of the available set, as bitmasks."""
    k = len(nbr)
    out = []
    for mask in range(1, 1 << k):
        rest = mask
        ok = True
        while rest:
            b = (rest & -rest).bit_length() - 1
            if nbr[b] & mask:
                ok = False
                break
            rest &= rest - 1
        if ok:
            out.append(mask)
    return out


def _mask_members(mask: int) -> list[int]:
    members = []
    while mask:
        members.append((mask & -mask).bit_length() - 1)
        mask &= mask - 1
    return members


def optimal_makespan(window: WindowSpec) -> int:
    """Fewest steps to commit everything: per step an independent set of
    available transactions commits, and a transaction becomes available
    the step after its thread predecessor commits. Breadth-first shortest
    path over per-thread progress vectors."""
    _check_opt_size(window)
    target = tuple([window.n] * window.m)
    start = tuple([0] * window.m)
    if start == target:
        return 0
    frontier = {start}
    seen = {start}
    steps = 0
    while frontier:
        steps += 1
        nxt = set()
        for state in frontier:
            avail = _available(window, state)
            nbr = _neighbor_masks(window, avail)
            for mask in _independent_masks(nbr):
                new_state = list(state)
                for idx in _mask_members(mask):
                    new_state[avail[idx].thread - 1] += 1
                new = tuple(new_state)
                if new == target:
                    return steps
                if new not in seen:
                    seen.add(new)
                    nxt.add(new)
        frontier = nxt
    raise AssertionError("search exhausted without completing the window")


def dfs_optimal_makespan(window: WindowSpec) -> int:
    """Independent oracle: depth-first over per-step maximal independent
    commit choices, memoized per progress vector. Committing more never
    hurts, so maximal choices suffice."""
    _check_opt_size(window)
    target = tuple([window.n] * window.m)
    memo: dict[tuple[int, ...], int] = {target: 0}

    def remaining(state: tuple[int, ...]) -> int:
        if state in memo:
            return memo[state]
        avail = _available(window, state)
        nbr = _neighbor_masks(window, avail)
        full = (1 << len(avail)) - 1
        best = None
        for mask in _independent_masks(nbr):
            # maximal: every available node outside the set has a neighbor in it
            outside = full & ~mask
            maximal = all(nbr[idx] & mask for idx in _mask_members(outside))
            if not maximal:
                continue
            new_state = list(state)
            for idx in _mask_members(mask):
                new_state[avail[idx].thread - 1] += 1
            value = 1 + remaining(tuple(new_state))
            if best is None or value < best:
                best = value
        memo[state] = best
        return best

    return remaining(tuple([0] * window.m))


def competitive_ratio(
    trace: ExecutionTrace, window: WindowSpec, lower_bound: bool = False
) -> Fraction:
    """Achieved makespan over the optimum; in lower-bound mode the optimum
    is replaced by N (per-thread serialization), giving an upper estimate."""
    ms = makespan(trace)
    if lower_bound:
        return Fraction(ms, window.n)
    return Fraction(ms, optimal_makespan(window))


# --- Monte Carlo ---------------------------------------------------------------

WindowSource = Union[WindowSpec, Callable[[int], WindowSpec]]

SUMMARY_CSV_FIELDS = (
    "policy",
    "M",
    "N",
    "C",
    "trials",
    "mean_makespan",
    "max_makespan",
    "p95_makespan",
    "envelope",
    "violation_fraction",
    "frame_miss_rate",
    "mean_aborts",
)


@dataclass(frozen=True)
class TrialResult:
    seed: int
    makespan: int
    aborts: int
    frame_misses: int
    congestion: int
    envelope: int | None
    violated: bool | None


@dataclass(frozen=True)
class MonteCarloSummary:
    policy: str
    m: int
    n: int
    congestion: int  # max across trial windows
    trials: int
    seeds: tuple[int, ...]
    mean_makespan: float
    max_makespan: int
    p95_makespan: int
    envelope: int | None  # max per-trial envelope, when enabled
    violation_fraction: float | None
    frame_miss_rate: float
    mean_aborts: float
    mean_response_by_column: tuple[float, ...]
    per_trial: tuple[TrialResult, ...]
    run_errors: tuple[tuple[int, str], ...]

    def csv_row(self) -> tuple:
        return (
            self.policy,
            self.m,
            self.n,
            self.congestion,
            self.trials,
            self.mean_makespan,
            self.max_makespan,
            self.p95_makespan,
            self.envelope if self.envelope is not None else "",
            self.violation_fraction if self.violation_fraction is not None else "",
            self.frame_miss_rate,
            self.mean_aborts,
        )


def trial_seeds(root_seed: int, trials: int) -> list[int]:
    return [derive_seed(root_seed, TRIAL, k) for k in range(trials)]


def frame_envelope(trace: ExecutionTrace) -> int:
    """(slots + N) * frame_len from the parameters the policy actually ran
    with, so the bound is self-consistent with integerization."""
    params = trace.policy_params
    return (params["slots"] + trace.n) * params["frame_len"]


def monte_carlo(
    window_source: WindowSource,
    policy_factory: Callable[[WindowSpec], SchedulerPolicy],
    trials: int,
    root_seed: int,
    envelope: int | str | None = None,
) -> MonteCarloSummary:
    """Aggregate `trials` seeded runs in seed order.

    `window_source` is either a fixed window or a callable producing one
    per trial seed. `envelope` is None, a fixed step bound, or "frames"
    for the per-trial (slots + N) * frame_len bound. Run failures are
    recorded per seed rather than raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(root_seed, trials)
    fixed = isinstance(window_source, WindowSpec)

    results: list[TrialResult] = []
    errors: list[tuple[int, str]] = []
    makespans: list[int] = []
    response_sum = None
    response_cnt = None
    miss_total = 0
    tx_total = 0
    abort_total = 0
    m = n = None
    policy_name = None

    for seed in seeds:
        window = window_source if fixed else window_source(seed)
        m, n = window.m, window.n
        if response_sum is None:
            response_sum = [0.0] * n
            response_cnt = [0] * n
        policy = policy_factory(window)
        policy_name = policy.name
        try:
            trace = run(window, policy, seed)
        except (LivelockError, PolicyContractError) as exc:
            errors.append((seed, f"{type(exc).__name__}: {exc}"))
            continue
        stats = collect_stats(trace)
        env_val: int | None
        if envelope is None:
            env_val = None
        elif envelope == "frames":
            env_val = frame_envelope(trace)
        else:
            env_val = int(envelope)
        violated = None if env_val is None else stats.makespan > env_val
        results.append(
            TrialResult(
                seed=seed,
                makespan=stats.makespan,
                aborts=stats.abort_count,
                frame_misses=stats.frame_miss_count,
                congestion=window.congestion,
                envelope=env_val,
                violated=violated,
            )
        )
        makespans.append(stats.makespan)
        abort_total += stats.abort_count
        miss_total += stats.frame_miss_count
        tx_total += m * n
        for tx, rt in stats.response_times.items():
            response_sum[tx.index - 1] += rt
            response_cnt[tx.index - 1] += 1

    if not results:
        raise RuntimeError(f"all {trials} trials failed: {errors}")

    ordered = sorted(makespans)
    p95 = ordered[max(0, math.ceil(0.95 * len(ordered)) - 1)]
    envelopes = [r.envelope for r in results if r.envelope is not None]
    violation_fraction = (
        sum(1 for r in results if r.violated) / len(results) if envelopes else None
    )
    return MonteCarloSummary(
        policy=policy_name,
        m=m,
        n=n,
        congestion=max(r.congestion for r in results),
        trials=trials,
        seeds=tuple(seeds),
        mean_makespan=sum(makespans) / len(makespans),
        max_makespan=max(makespans),
        p95_makespan=p95,
        envelope=max(envelopes) if envelopes else None,
        violation_fraction=violation_fraction,
        frame_miss_rate=miss_total / tx_total,
        mean_aborts=abort_total / len(results),
        mean_response_by_column=tuple(
            (response_sum[j] / response_cnt[j]) if response_cnt[j] else 0.0 for j in range(n)
        ),
        per_trial=tuple(results),
        run_errors=tuple(errors),
    )
