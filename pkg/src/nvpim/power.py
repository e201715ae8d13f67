"""Energy-harvesting supply model and instruction-issue throttling.

The supply is a square wave (on for duty x period at the start of each
period) or an explicit list of on-intervals.  The device is oblivious to
upcoming outages: instructions are always issued as if power will last, and
may be cut mid-flight.  Throttling stretches the issue period so that
average on-time power stays within the harvesting budget.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

DEFAULT_BUDGET_W = 200e-6
DEFAULT_FREQ_HZ = 16e3


class PowerError(ValueError):
    pass


@dataclass(frozen=True)
class SquareWave:
    frequency: float = DEFAULT_FREQ_HZ
    duty: float = 1.0

    def __post_init__(self) -> None:
        if self.frequency <= 0:
            raise PowerError("frequency must be positive")
        if not 0 < self.duty <= 1:
            raise PowerError("duty cycle must be in (0, 1]")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    def is_on(self, t: float) -> bool:
        if self.duty >= 1.0:
            return True
        phase = t % self.period
        return phase < self.duty * self.period

    def next_edge(self, t: float) -> float:
        """Next on<->off transition strictly after t."""
        if self.duty >= 1.0:
            return math.inf
        period = self.period
        n = math.floor(t / period)
        for edge in (n * period + self.duty * period, (n + 1) * period,
                     (n + 1) * period + self.duty * period):
            if edge > t:
                return edge
        raise AssertionError("unreachable")

    def next_off(self, t: float) -> float:
        if self.duty >= 1.0:
            return math.inf
        edge = self.next_edge(t)
        return edge if self.is_on(t) else self.next_edge(edge)

    def next_on(self, t: float) -> float:
        if self.is_on(t):
            return t
        return self.next_edge(t)


@dataclass(frozen=True)
class ExplicitTrace:
    """Explicit disjoint, sorted (on_start, on_end) intervals; power is off
    outside them (and after the last interval)."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        prev_end = -math.inf
        for start, end in self.intervals:
            if not start < end:
                raise PowerError(f"empty interval ({start}, {end})")
            if start < prev_end:
                raise PowerError("intervals must be disjoint and sorted")
            prev_end = end

    def is_on(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.intervals)

    def next_edge(self, t: float) -> float:
        for start, end in self.intervals:
            if start > t:
                return start
            if end > t:
                return end
        return math.inf

    def next_off(self, t: float) -> float:
        for start, end in self.intervals:
            if start <= t < end:
                return end
        return t if not self.is_on(t) else math.inf

    def next_on(self, t: float) -> float:
        if self.is_on(t):
            return t
        for start, _ in self.intervals:
            if start >= t:
                return start
        return math.inf


PowerTrace = SquareWave | ExplicitTrace


def load_interval_trace(path: str | Path) -> ExplicitTrace:
    """CSV of on_start,on_end pairs in seconds."""
    intervals = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 2:
                raise PowerError(f"expected on_start,on_end rows, got {row!r}")
            intervals.append((float(row[0]), float(row[1])))
    return ExplicitTrace(tuple(intervals))


def on_time_between(trace: PowerTrace, t0: float, t1: float) -> float:
    """Total powered-on time in [t0, t1)."""
    if t1 <= t0:
        return 0.0
    if isinstance(trace, SquareWave):
        if trace.duty >= 1.0:
            return t1 - t0
        total = 0.0
        t = t0
        while t < t1:
            edge = min(trace.next_edge(t), t1)
            if trace.is_on(t):
                total += edge - t
            t = edge
        return total
    total = 0.0
    for start, end in trace.intervals:
        total += max(0.0, min(end, t1) - max(start, t0))
    return total


class ThrottleMode(enum.Enum):
    STATIC = "static"            # one issue period for the whole program
    PER_INSTRUCTION = "per_instruction"


@dataclass(frozen=True)
class ThrottlePolicy:
    budget: float = DEFAULT_BUDGET_W
    mode: ThrottleMode = ThrottleMode.STATIC

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise PowerError("power budget must be positive")


def issue_period(latency: float, energy: float, policy: ThrottlePolicy) -> float:
    """Issue period for one instruction: at least the instruction latency,
    stretched so the energy fits the power budget."""
    if latency <= 0 or energy < 0:
        raise PowerError("instruction cost must be positive")
    return max(latency, energy / policy.budget)


@dataclass(frozen=True)
class CutSpec:
    """A single injected power cut.

    ``instruction`` is the dynamic instruction index, ``phase`` one of the
    controller micro-step names, and ``fraction`` how much of that phase
    completed before the power died.  Alternatively ``at_time`` cuts at a
    wall-clock instant.  ``off_duration`` is how long the forced outage
    lasts before the supply resumes.
    """

    instruction: int | None = None
    phase: str | None = None
    fraction: float = 1.0
    at_time: float | None = None
    off_duration: float = 1e-6

    def __post_init__(self) -> None:
        if (self.instruction is None) == (self.at_time is None):
            raise PowerError("cut spec needs an instruction index or a time")
        if not 0.0 <= self.fraction <= 1.0:
            raise PowerError("cut fraction must be in [0, 1]")
