"""Optimal contiguous column decomposition of a window.

A decomposition cuts the N columns into contiguous sub-windows; each
sub-window's density is its own congestion divided by its width, and the
decomposition's cost is the largest such density. The dynamic program
minimizes that cost over all 2^(N-1) compositions in O(N^2) transitions;
an exhaustive enumerator serves as the oracle for small N.

Densities are exact rationals so oracle-equality tests compare without
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import WindowSpec, congestion, restrict

BRUTE_FORCE_MAX_COLUMNS = 16


@dataclass(frozen=True)
class SubWindow:
    """One contiguous column range [start, end] with its own congestion."""

    start: int
    end: int
    congestion: int

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    @property
    def density(self) -> Fraction:
        return Fraction(self.congestion, self.width)


@dataclass(frozen=True)
class Decomposition:
    """Ordered sub-windows covering columns 1..N without overlap."""

    segments: tuple[SubWindow, ...]

    def __post_init__(self) -> None:
        expected = 1
        for seg in self.segments:
            if seg.start != expected or seg.end < seg.start:
                raise ValueError("segments must tile the columns contiguously from 1")
            expected = seg.end + 1

    @property
    def cuts(self) -> tuple[int, ...]:
        """Last column of each sub-window; the final entry is N."""
        return tuple(seg.end for seg in self.segments)

    @property
    def max_density(self) -> Fraction:
        return max(seg.density for seg in self.segments)


def column_range_congestion(window: WindowSpec, j: int, k: int) -> int:
    """Congestion of the graph induced on columns j..k (inclusive)."""
    if not 1 <= j <= k <= window.n:
        raise ValueError(f"column range [{j}, {k}] outside [1, {window.n}]")
    nodes = [tx for tx in window.transactions if j <= tx.index <= k]
    return congestion(restrict(window.graph, nodes))


def subwindow_density(window: WindowSpec, j: int, k: int) -> Fraction:
    """Density of columns j..k: induced congestion over the width."""
    return Fraction(column_range_congestion(window, j, k), k - j + 1)


def _density_table(window: WindowSpec) -> dict[tuple[int, int], Fraction]:
    n = window.n
    return {
        (j, k): subwindow_density(window, j, k)
        for j in range(1, n + 1)
        for k in range(j, n + 1)
    }


def _segments_from_cuts(window: WindowSpec, ends: list[int]) -> Decomposition:
    segments = []
    start = 1
    for end in ends:
        segments.append(SubWindow(start, end, column_range_congestion(window, start, end)))
        start = end + 1
    return Decomposition(tuple(segments))


def optimal_decomposition(window: WindowSpec) -> tuple[Decomposition, Fraction]:
    """Minimum over all decompositions of the maximum sub-window density.

    Prefix dynamic program: best(k) considers the undivided prefix 1..k
    and every split point j, taking max(best(j), density(j+1..k)).
    Backpointers recover one witness decomposition.
    """
    n = window.n
    dens = _density_table(window)
    best: list[Fraction] = [Fraction(0)] * (n + 1)
    back: list[int] = [0] * (n + 1)
    for k in range(1, n + 1):
        best[k] = dens[(1, k)]
        back[k] = 0  # 0 = no cut: prefix kept whole
        for j in range(1, k):
            candidate = max(best[j], dens[(j + 1, k)])
            if candidate < best[k]:
                best[k] = candidate
                back[k] = j
    ends: list[int] = []
    k = n
    while k > 0:
        ends.append(k)
        k = back[k]
    ends.reverse()
    decomposition = _segments_from_cuts(window, ends)
    return decomposition, best[n]


def brute_force_decomposition(window: WindowSpec) -> tuple[Decomposition, Fraction]:
    """Exhaustive oracle over all 2^(N-1) compositions; N <= 16."""
    n = window.n
    if n > BRUTE_FORCE_MAX_COLUMNS:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_COLUMNS}, got {n}")
    dens = _density_table(window)
    best_value: Fraction | None = None
    best_ends: list[int] | None = None
    for mask in range(1 << (n - 1)):
        ends = [k for k in range(1, n) if mask & (1 << (k - 1))] + [n]
        start = 1
        value = Fraction(0)
        for end in ends:
            value = max(value, dens[(start, end)])
            start = end + 1
        if best_value is None or value < best_value:
            best_value = value
            best_ends = ends
    return _segments_from_cuts(window, best_ends), best_value
