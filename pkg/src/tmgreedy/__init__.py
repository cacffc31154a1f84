"""Windowed greedy contention management: simulator, policies, analysis."""

from .adaptive import AdaptiveGreedy, frame_fully_elapsed, resolve_conflict_triplet
from .decomposition import (
    Decomposition,
    SubWindow,
    brute_force_decomposition,
    optimal_decomposition,
    subwindow_density,
)
from .engine import (
    Decision,
    ExecutionTrace,
    LivelockError,
    PolicyContractError,
    StepView,
    TraceEvent,
    run,
    verify_trace,
    write_events_csv,
    write_summary_csv,
)
from .frames import (
    FrameParams,
    Priority,
    base_frame_len,
    offset_slots,
    online_frame_len,
    priority_at,
)
from .metrics import (
    MonteCarloSummary,
    RunStats,
    collect_stats,
    competitive_ratio,
    dfs_optimal_makespan,
    makespan,
    monte_carlo,
    optimal_makespan,
)
from .model import (
    AccessSet,
    ColumnClustered,
    ConflictGraph,
    DegreeCapped,
    GenerationError,
    ObjectUniform,
    TxId,
    WindowFormatError,
    WindowSpec,
    congestion,
    derive_conflicts,
    generate_window,
    load_window,
    restrict,
    save_window,
)
from .offline import OfflineGreedy, commit_set, frame_params, greedy_mis
from .online import OnlineGreedy, draw_lottery, frame_params_online, resolve_conflict

__all__ = [
    "AccessSet",
    "AdaptiveGreedy",
    "ColumnClustered",
    "ConflictGraph",
    "Decision",
    "Decomposition",
    "DegreeCapped",
    "ExecutionTrace",
    "FrameParams",
    "GenerationError",
    "LivelockError",
    "MonteCarloSummary",
    "ObjectUniform",
    "OfflineGreedy",
    "OnlineGreedy",
    "PolicyContractError",
    "Priority",
    "RunStats",
    "StepView",
    "SubWindow",
    "TraceEvent",
    "TxId",
    "WindowFormatError",
    "WindowSpec",
    "base_frame_len",
    "brute_force_decomposition",
    "collect_stats",
    "commit_set",
    "competitive_ratio",
    "congestion",
    "derive_conflicts",
    "dfs_optimal_makespan",
    "draw_lottery",
    "frame_fully_elapsed",
    "frame_params",
    "frame_params_online",
    "generate_window",
    "greedy_mis",
    "load_window",
    "makespan",
    "monte_carlo",
    "offset_slots",
    "online_frame_len",
    "optimal_decomposition",
    "optimal_makespan",
    "priority_at",
    "resolve_conflict",
    "resolve_conflict_triplet",
    "restrict",
    "run",
    "save_window",
    "subwindow_density",
    "verify_trace",
    "write_events_csv",
    "write_summary_csv",
]
