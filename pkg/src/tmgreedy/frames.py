"""Frame arithmetic shared by the scheduling policies.

Time is divided into fixed-length frames. Each thread draws a random
offset of whole frames, and its j-th transaction is designated frame
`offset + (j - 1)`: before that frame starts the transaction runs at low
priority, from its first step onward it is high priority for good.

Frame lengths come from closed-form expressions in M, N (and the offset
slot count additionally in the congestion bound C); both are rounded up
to whole steps, which only lengthens frames and so preserves the
guarantees the lengths were chosen for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .model import TxId
from .seeding import OFFSET, substream

_E = math.e


class Priority(IntEnum):
    """Two-phase priority; smaller value wins a conflict."""

    HIGH = 0
    LOW = 1


def base_frame_len(m: int, n: int) -> int:
    """Frame length for the graph-aware policy: ceil(1 + (e^2+2) ln(MN))."""
    mn = m * n
    return max(1, math.ceil(1 + (_E**2 + 2) * math.log(mn)))


def online_frame_len(m: int, n: int) -> int:
    """Frame length for the graph-blind policies: ceil(16 e Phi ln(MN))
    with Phi the un-rounded base frame length; guarded to >= 1 step."""
    mn = m * n
    raw = 16.0 * _E * (1.0 + (_E**2 + 2) * math.log(mn)) * math.log(mn)
    return max(1, math.ceil(raw))


def offset_slots(m: int, n: int, congestion: int) -> int:
    """Number of random offset slots: ceil(C / ln(MN)), floored at 1.

    One slot (no randomization) when the window is degenerate or
    conflict-free; contention below one frame's capacity needs no
    desynchronization.
    """
    mn = m * n
    if mn == 1 or congestion == 0:
        return 1
    return max(1, math.ceil(congestion / math.log(mn)))


def draw_offsets(m: int, slots: int, seed: int) -> tuple[int, ...]:
    """Per-thread uniform offsets in [0, slots-1], one labeled stream each."""
    return tuple(int(substream(seed, OFFSET, i).integers(0, slots)) for i in range(1, m + 1))


@dataclass(frozen=True)
class FrameParams:
    """A window's frame schedule: length, slot count, per-thread offsets."""

    frame_len: int
    slots: int
    offsets: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.frame_len < 1 or self.slots < 1:
            raise ValueError("frame length and slot count must be >= 1")
        for r in self.offsets:
            if not 0 <= r <= self.slots - 1:
                raise ValueError(f"offset {r} outside [0, {self.slots - 1}]")

    def frame_of(self, tx: TxId) -> int:
        return self.offsets[tx.thread - 1] + (tx.index - 1)

    def deadline(self, tx: TxId) -> int:
        """First step after the transaction's designated frame."""
        return (self.frame_of(tx) + 1) * self.frame_len


def make_frame_params(
    m: int, n: int, congestion: int, seed: int, frame_len: int | None = None
) -> FrameParams:
    """Schedule for the graph-aware policy; `frame_len` overrides the formula
    (used to force frame churn in tests)."""
    slots = offset_slots(m, n, congestion)
    return FrameParams(
        frame_len=frame_len if frame_len is not None else base_frame_len(m, n),
        slots=slots,
        offsets=draw_offsets(m, slots, seed),
    )


def make_frame_params_online(
    m: int, n: int, congestion: int, seed: int, frame_len: int | None = None
) -> FrameParams:
    """Same schedule with the longer graph-blind frame length."""
    slots = offset_slots(m, n, congestion)
    return FrameParams(
        frame_len=frame_len if frame_len is not None else online_frame_len(m, n),
        slots=slots,
        offsets=draw_offsets(m, slots, seed),
    )


def priority_at(t: int, frame_index: int, frame_len: int) -> Priority:
    """Low strictly before the designated frame starts, high from then on."""
    return Priority.LOW if t < frame_index * frame_len else Priority.HIGH
