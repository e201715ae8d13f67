"""Crash-consistency fault injection: golden-state sweep over cut points.

For every dynamic instruction of a program, power is cut at each micro-step
boundary and at mid-pulse fractions, the machine is restarted, and the run
is driven to completion.  The verdict compares the final data-tile state
against the golden (uninterrupted) run and checks that at most one
instruction was re-executed.

The sweep advances a single prefix machine one instruction at a time and
forks a snapshot per cut point, so cost is O(cuts) instruction steps rather
than O(cuts x program length).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import isa
from .controller import PHASES, Machine
from .tile import CellAddress, PresetError

DEFAULT_FRACTIONS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class CutPoint:
    instruction: int  # dynamic instruction index
    phase: str
    fraction: float  # 1.0 = the boundary at the end of the phase


@dataclass(frozen=True)
class CutOutcome:
    point: CutPoint
    passed: bool
    reexecuted: int
    divergence: CellAddress | None = None
    error: str | None = None


@dataclass
class SweepReport:
    outcomes: list[CutOutcome]
    golden_instructions: int

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def failures(self) -> list[CutOutcome]:
        return [o for o in self.outcomes if not o.passed]

    @property
    def all_passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        n_fail = len(self.failures)
        lines = [f"cut points: {self.total}, passed: {self.total - n_fail}, "
                 f"failed: {n_fail}"]
        for o in self.failures[:20]:
            where = (f"instr {o.point.instruction} {o.point.phase}"
                     f"@{o.point.fraction}")
            if o.divergence is not None:
                d = o.divergence
                lines.append(f"FAIL {where}: first divergent cell "
                             f"tile {d.tile} row {d.row} col {d.col}")
            else:
                lines.append(f"FAIL {where}: {o.error}")
        return "\n".join(lines)


def run_to_halt(machine: Machine, strict_preset: bool = False,
                max_steps: int = 2_000_000) -> None:
    """Step the machine to Halt on uninterrupted power, no throttling."""
    steps = 0
    while not machine.halted:
        machine.step()
        steps += 1
        if steps > max_steps:
            raise RuntimeError("program did not halt within step budget")


def first_divergence(golden: Machine, candidate: Machine,
                     skip_tiles: Iterable[int] = ()) -> CellAddress | None:
    """First (tile, row, col) in scan order where data tiles differ."""
    skip = set(skip_tiles) | set(getattr(golden, "_instr_tiles", (0,)))
    indices = sorted(set(golden.tiles) | set(candidate.tiles))
    for idx in indices:
        if idx in skip:
            continue
        a = golden.tiles[idx].cells if idx in golden.tiles else None
        b = candidate.tiles[idx].cells if idx in candidate.tiles else None
        if a is None or b is None:
            blank = np.zeros_like(b if a is None else a)
            a = blank if a is None else a
            b = blank if b is None else b
        diff = a != b
        if diff.any():
            row, col = np.unravel_index(int(np.argmax(diff)), diff.shape)
            return CellAddress(idx, int(row), int(col))
    return None


def enumerate_cut_points(instr: isa.Instruction, index: int,
                         fractions: tuple[float, ...] = DEFAULT_FRACTIONS,
                         boundaries_only: bool = False) -> list[CutPoint]:
    """All cut points inside one dynamic instruction: the boundary after
    every micro-step, plus mid-pulse fractions when requested."""
    is_act = isinstance(instr, (isa.ActivateColumns, isa.ActivateRange))
    points = []
    for phase in PHASES:
        if phase == "StoreAct" and not is_act:
            # zero-duration step for non-activation instructions; its
            # boundary coincides with the WritePC boundary already emitted
            continue
        if not boundaries_only and phase != "Fetch":
            for f in fractions:
                points.append(CutPoint(index, phase, f))
        points.append(CutPoint(index, phase, 1.0))
    return points


def sweep(make_machine: Callable[[], Machine],
          fractions: tuple[float, ...] = DEFAULT_FRACTIONS,
          boundaries_only: bool = False,
          strict_preset: bool = False) -> SweepReport:
    """Inject one cut per run at every enumerated point of every dynamic
    instruction and compare each final state against the golden run.

    ``make_machine`` must return a freshly loaded and preloaded machine;
    it is called twice (golden and prefix walker), all other state comes
    from snapshots.
    """
    golden = make_machine()
    run_to_halt(golden)
    n_dynamic = golden.steps_started

    outcomes: list[CutOutcome] = []
    prefix = make_machine()
    instr_tiles = set(getattr(prefix, "_instr_tiles", (0,)))
    share_instr = not any(getattr(i, "tile", None) in instr_tiles
                          for i in prefix.program)
    for index in range(n_dynamic):
        instr = prefix.instruction_at(prefix.arch.valid_pc)
        for point in enumerate_cut_points(instr, index, fractions,
                                          boundaries_only):
            m = prefix.copy(share_instr=share_instr)
            try:
                m.step(cut=(point.phase, point.fraction))
                m.restart()
                run_to_halt(m, strict_preset=strict_preset)
            except PresetError as exc:
                outcomes.append(CutOutcome(point, False, m.ledger.reexecuted,
                                           error=str(exc)))
                continue
            div = first_divergence(golden, m)
            reexec = m.ledger.reexecuted
            ok = div is None and reexec <= 1
            err = None if ok else (
                None if div is not None else
                f"{reexec} instructions re-executed (max 1 allowed)")
            outcomes.append(CutOutcome(point, ok, reexec, div, err))
        prefix.step()
    return SweepReport(outcomes, golden_instructions=n_dynamic)


def check_preset_violations(make_machine: Callable[[], Machine]) -> list[str]:
    """Dynamic strict-mode check: run uninterrupted with every tile
    enforcing preset discipline; returns diagnostics (empty = clean).

    This is how a program that reads or writes a temporary without
    presetting it is caught: such a program is deterministic and therefore
    cannot diverge under a single cut, but its gate outputs depend on stale
    cell contents, which strict mode flags at the first offending gate.
    """
    machine = make_machine()
    diagnostics: list[str] = []
    steps = 0
    while not machine.halted and steps < 2_000_000:
        pc = machine.arch.valid_pc
        instr = machine.instruction_at(pc)
        if isinstance(instr, isa.Logic):
            tile = machine.tile(instr.tile)
            try:
                tile.logic_op(instr.kind, instr.rows, strict_preset=True)
            except PresetError as exc:
                diagnostics.append(f"instr {steps} (PC {pc}): {exc}")
            machine.step()  # idempotent re-apply; state already correct
        else:
            machine.step()
        steps += 1
    return diagnostics
