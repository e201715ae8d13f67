"""Memory controller: fetch, broadcast, and crash-consistent state.

The architectural state is tiny and non-volatile: two program-counter
registers with a parity bit selecting the valid one, plus a register
holding the most recent column-activation instruction.  Each instruction
runs as a fixed sequence of micro-steps:

    Fetch -> Broadcast -> WritePC -> StoreAct -> FlipParity

Power can be cut inside any micro-step.  Multi-bit register writes may
tear; the single-bit parity flip is atomic and acts as the commit point,
which is why the PC is written to the *invalid* register first and the
stored-activation register is updated before the flip.  On restart the
controller re-issues the stored activation and resumes at the valid PC; at
worst the last instruction is repeated once, which is safe because every
array operation is idempotent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import isa
from .device import (CostConfig, DeviceParams, GATES, OpClass, future_stt,
                     op_cost)
from .metrics import Category, EnergyLedger
from .power import (CutSpec, PowerTrace, SquareWave, ThrottleMode,
                    ThrottlePolicy, issue_period)
from .tile import TILE_DIM, Tile, empty_buffer

PC_BITS = 24
PHASES = ("Fetch", "Broadcast", "WritePC", "StoreAct", "FlipParity")


class ControllerError(RuntimeError):
    pass


@dataclass
class ArchState:
    """Non-volatile architectural state.  Exactly one PC register is valid
    at any instant, designated by the parity bit."""

    pc_a: int = 0
    pc_b: int = 0
    parity: int = 0
    stored_act: int = isa.HALT_WORD  # Halt encoding means "none"

    @property
    def valid_pc(self) -> int:
        return self.pc_a if self.parity == 0 else self.pc_b

    def write_invalid_pc(self, value: int, fraction: float = 1.0) -> None:
        """Write the invalid PC register; a torn write (fraction < 1) lands
        only the most-significant bits."""
        if fraction >= 1.0:
            torn = value
        else:
            written = int(fraction * PC_BITS)
            if written <= 0:
                return
            keep_mask = (1 << (PC_BITS - written)) - 1
            old = self.pc_b if self.parity == 0 else self.pc_a
            torn = (value & ~keep_mask) | (old & keep_mask)
        if self.parity == 0:
            self.pc_b = torn
        else:
            self.pc_a = torn


@dataclass(frozen=True)
class InstrCost:
    fetch_t: float
    fetch_e: float
    broadcast_t: float
    broadcast_e: float
    write_pc_t: float
    write_pc_e: float
    store_act_t: float
    store_act_e: float
    flip_t: float
    flip_e: float

    @property
    def active_time(self) -> float:
        return (self.fetch_t + self.broadcast_t + self.write_pc_t
                + self.store_act_t + self.flip_t)

    @property
    def total_energy(self) -> float:
        return (self.fetch_e + self.broadcast_e + self.write_pc_e
                + self.store_act_e + self.flip_e)


class Machine:
    """One accelerator instance: tiles, buffer, architectural state, ledger."""

    def __init__(self, params: DeviceParams | None = None,
                 cost: CostConfig | None = None,
                 completion_threshold: float = 1.0):
        self.params = params or future_stt()
        self.cost = cost or CostConfig()
        self.completion_threshold = completion_threshold
        self.tiles: dict[int, Tile] = {}
        self.buffer = empty_buffer()  # non-volatile inter-tile row buffer
        self.arch = ArchState()
        self.ledger = EnergyLedger()
        self.program: list[isa.Instruction] = []
        self.halted = False
        self.clock = 0.0
        self.steps_started = 0
        self._max_started_pc = -1
        self._cost_cache: dict[int, InstrCost] = {}

    # -- setup -------------------------------------------------------------

    def tile(self, index: int) -> Tile:
        if index not in self.tiles:
            self.tiles[index] = Tile(variant=self.params.technology,
                                     completion_threshold=self.completion_threshold)
        return self.tiles[index]

    WORDS_PER_TILE = TILE_DIM * TILE_DIM // 64  # 16 instructions per row

    def load_program(self, program: list[isa.Instruction],
                     instr_tile: int = 0) -> None:
        """Store the program in instruction tiles (16 instructions per
        1024-bit row) and reset the architectural state.  Programs longer
        than one tile spill into extra tiles allocated from the top of the
        tile space, away from the low-numbered data tiles."""
        n_tiles = -(-max(len(program), 1) // self.WORDS_PER_TILE)
        spill = [t for t in range(511, 511 - n_tiles - 1, -1) if t != instr_tile]
        tiles = (instr_tile, *spill[:n_tiles - 1])
        for idx, instr in enumerate(program):
            word = isa.encode(instr)
            chunk, offset = divmod(idx, self.WORDS_PER_TILE)
            row, slot = divmod(offset, 16)
            bits = [(word >> (63 - b)) & 1 for b in range(64)]
            self.tile(tiles[chunk]).cells[row, slot * 64:(slot + 1) * 64] = \
                np.array(bits, dtype=bool)
        self.program = list(program)
        self._instr_tile = instr_tile
        self._instr_tiles = tiles
        self.arch = ArchState()
        self.halted = False

    def fetch_word(self, pc: int) -> int:
        """Read the 64-bit instruction word back out of the instruction tile."""
        if not 0 <= pc < len(self.program):
            raise ControllerError(f"PC {pc} outside the instruction region")
        chunk, offset = divmod(pc, self.WORDS_PER_TILE)
        tile = self.tiles[self._instr_tiles[chunk]]
        row, slot = divmod(offset, 16)
        bits = tile.cells[row, slot * 64:(slot + 1) * 64]
        word = 0
        for b in bits:
            word = (word << 1) | int(b)
        return word

    def instruction_at(self, pc: int) -> isa.Instruction:
        """Decoded instruction at a PC.  The instruction tile is written
        only by load_program (no self-modifying code), so the decoded list
        is authoritative; fetch_word exists to verify the stored bits."""
        if not 0 <= pc < len(self.program):
            raise ControllerError(f"PC {pc} outside the instruction region")
        return self.program[pc]

    def cost_at(self, pc: int) -> "InstrCost":
        cost = self._cost_cache.get(pc)
        if cost is None:
            cost = self.instr_cost(self.instruction_at(pc))
            self._cost_cache[pc] = cost
        return cost

    # -- per-instruction cost ----------------------------------------------

    def instr_cost(self, instr: isa.Instruction) -> InstrCost:
        p, c = self.params, self.cost
        fetch_t, fetch_e = op_cost(OpClass.FETCH, p, c)
        if isinstance(instr, isa.Logic):
            bt, be = op_cost(OpClass.LOGIC, p, c, kind=GATES[instr.kind])
        elif isinstance(instr, isa.WriteBit):
            bt, be = op_cost(OpClass.WRITE_BIT, p, c)
        elif isinstance(instr, isa.ReadRow):
            bt, be = op_cost(OpClass.READ_ROW, p, c, bits=TILE_DIM)
        elif isinstance(instr, isa.WriteRow):
            bt, be = op_cost(OpClass.WRITE_ROW, p, c, bits=TILE_DIM)
        elif isinstance(instr, (isa.ActivateColumns, isa.ActivateRange)):
            bt, be = op_cost(OpClass.ACTIVATE, p, c)
        elif isinstance(instr, isa.Halt):
            bt, be = 0.0, 0.0
        else:
            raise ControllerError(f"unknown instruction {instr!r}")
        wt, we = op_cost(OpClass.BACKUP_WRITE, p, c, bits=PC_BITS)
        is_act = isinstance(instr, (isa.ActivateColumns, isa.ActivateRange))
        st, se = op_cost(OpClass.BACKUP_WRITE, p, c, bits=64) if is_act else (0.0, 0.0)
        ft, fe = op_cost(OpClass.BACKUP_WRITE, p, c, bits=1)
        return InstrCost(fetch_t, fetch_e, bt, be, wt, we, st, se, ft, fe)

    def worst_case_period(self, policy: ThrottlePolicy) -> float:
        """Static issue period: covers the most expensive instruction in the
        program, both in latency and in budgeted energy."""
        period = 0.0
        for instr in self.program:
            cost = self.instr_cost(instr)
            period = max(period, issue_period(cost.active_time,
                                              cost.total_energy, policy))
        return period

    # -- broadcast effects -------------------------------------------------

    def _broadcast(self, instr: isa.Instruction, fraction: float) -> None:
        if isinstance(instr, isa.Logic):
            self.tile(instr.tile).logic_op(instr.kind, instr.rows, fraction)
        elif isinstance(instr, isa.WriteBit):
            self.tile(instr.tile).write_bit(instr.row, instr.value, fraction)
        elif isinstance(instr, isa.ReadRow):
            if fraction >= self.completion_threshold:
                self.buffer[:] = self.tile(instr.tile).read_row(instr.row)
        elif isinstance(instr, isa.WriteRow):
            self.tile(instr.tile).write_row(instr.row, self.buffer, fraction)
        elif isinstance(instr, isa.ActivateColumns):
            self.tile(instr.tile).activate_columns(list(instr.cols), fraction)
        elif isinstance(instr, isa.ActivateRange):
            self.tile(instr.tile).activate_range(instr.start, instr.end, fraction)
        elif isinstance(instr, isa.Halt):
            pass
        else:
            raise ControllerError(f"cannot broadcast {instr!r}")

    # -- one instruction ---------------------------------------------------

    def step(self, cut: tuple[str, float] | None = None) -> bool:
        """Execute one instruction, optionally interrupted at a micro-step.

        ``cut`` is (phase, fraction): every earlier phase completes, the
        named phase receives only ``fraction`` of its pulse/write, and
        later phases do not happen.  Returns True when the instruction
        fully committed (parity flipped).
        """
        if self.halted:
            raise ControllerError("machine is halted")
        cut_phase, cut_fraction = cut if cut is not None else (None, 1.0)
        if cut_phase is not None and cut_phase not in PHASES:
            raise ControllerError(f"unknown micro-step {cut_phase!r}")
        pc = self.arch.valid_pc
        self.steps_started += 1

        instr = self.instruction_at(pc)
        cost = self.cost_at(pc)
        work = Category.DEAD if pc <= self._max_started_pc else Category.PRODUCTIVE

        # Fetch
        if cut_phase == "Fetch":
            self.ledger.charge(work, cost.fetch_e * cut_fraction,
                               cost.fetch_t * cut_fraction)
            return False
        self.ledger.charge(work, cost.fetch_e, cost.fetch_t)

        # Broadcast
        if pc <= self._max_started_pc:
            self.ledger.reexecuted += 1
        self._max_started_pc = max(self._max_started_pc, pc)
        if cut_phase == "Broadcast":
            self._broadcast(instr, cut_fraction)
            self.ledger.charge(work, cost.broadcast_e * cut_fraction,
                               cost.broadcast_t * cut_fraction)
            return False
        self._broadcast(instr, 1.0)
        self.ledger.charge(work, cost.broadcast_e, cost.broadcast_t)

        # WritePC (into the invalid register; may tear)
        if cut_phase == "WritePC":
            self.arch.write_invalid_pc(pc + 1, cut_fraction)
            self.ledger.charge(Category.BACKUP, cost.write_pc_e * cut_fraction,
                               cost.write_pc_t * cut_fraction)
            return False
        self.arch.write_invalid_pc(pc + 1)
        self.ledger.charge(Category.BACKUP, cost.write_pc_e, cost.write_pc_t)

        # StoreAct (activation instructions only; torn write keeps old value)
        if isinstance(instr, (isa.ActivateColumns, isa.ActivateRange)):
            if cut_phase == "StoreAct":
                self.ledger.charge(Category.BACKUP, cost.store_act_e * cut_fraction,
                                   cost.store_act_t * cut_fraction)
                return False
            self.arch.stored_act = isa.encode(instr)
            self.ledger.charge(Category.BACKUP, cost.store_act_e, cost.store_act_t)
        elif cut_phase == "StoreAct":
            return False

        # FlipParity: atomic single-bit commit
        if cut_phase == "FlipParity" and cut_fraction < 1.0:
            self.ledger.charge(Category.BACKUP, cost.flip_e * cut_fraction,
                               cost.flip_t * cut_fraction)
            return False
        self.arch.parity ^= 1
        self.ledger.charge(Category.BACKUP, cost.flip_e, cost.flip_t)

        self.ledger.instructions += 1
        if isinstance(instr, isa.Halt):
            self.halted = True
        return True

    # -- restart -----------------------------------------------------------

    def restart(self, fraction: float = 1.0) -> None:
        """Power-on procedure: re-issue the stored activation instruction,
        then execution resumes at the parity-designated PC."""
        self.ledger.restarts += 1
        if self.arch.stored_act == isa.HALT_WORD:
            return
        instr = isa.decode(self.arch.stored_act)
        lat, en = op_cost(OpClass.ACTIVATE, self.params, self.cost)
        self._broadcast(instr, fraction)
        self.ledger.charge(Category.RESTORE, en * fraction, lat * fraction)

    def restore_cost(self) -> tuple[float, float]:
        if self.arch.stored_act == isa.HALT_WORD:
            return 0.0, 0.0
        return op_cost(OpClass.ACTIVATE, self.params, self.cost)

    # -- snapshots ---------------------------------------------------------

    def copy(self, share_instr: bool = False) -> "Machine":
        """Deep copy; with ``share_instr`` the (read-only) instruction tile
        is shared by reference, which the crash sweep uses when the program
        never targets its own instruction tile."""
        other = Machine(self.params, self.cost, self.completion_threshold)
        instr_tiles = set(getattr(self, "_instr_tiles", (0,)))
        other.tiles = {k: (t if share_instr and k in instr_tiles else t.copy())
                       for k, t in self.tiles.items()}
        other._instr_tiles = getattr(self, "_instr_tiles", (0,))
        other._cost_cache = self._cost_cache
        other.buffer = self.buffer.copy()
        other.arch = replace(self.arch)
        other.ledger = replace(self.ledger)
        other.program = self.program
        other._instr_tile = getattr(self, "_instr_tile", 0)
        other.halted = self.halted
        other.clock = self.clock
        other.steps_started = self.steps_started
        other._max_started_pc = self._max_started_pc
        return other

    def data_state(self, skip_tiles: tuple[int, ...] | None = None) -> bytes:
        """Snapshot of all data-tile contents for golden-state comparison."""
        skip = set(skip_tiles if skip_tiles is not None
                   else getattr(self, "_instr_tiles", (0,)))
        parts = []
        for idx in sorted(self.tiles):
            if idx in skip:
                continue
            parts.append(idx.to_bytes(2, "little"))
            parts.append(self.tiles[idx].to_bytes())
        return b"".join(parts)


def run(machine: Machine, trace: PowerTrace | None = None,
        policy: ThrottlePolicy | None = None, cut: CutSpec | None = None,
        max_time: float = 10.0) -> EnergyLedger:
    """Drive the machine under a power trace until it halts.

    The device never looks ahead to the next off-edge: an instruction whose
    issue period straddles it is cut mid-flight at whatever micro-step the
    edge lands in.  ``cut`` injects one additional unannounced outage.
    Returns the machine's ledger.
    """
    trace = trace if trace is not None else SquareWave(duty=1.0)
    policy = policy or ThrottlePolicy()
    static_period = (machine.worst_case_period(policy)
                     if policy.mode is ThrottleMode.STATIC else None)
    forced_off_until = -math.inf
    cut_time = cut.at_time if cut is not None else None
    pending_restart = False
    ledger = machine.ledger

    def power_on(t: float) -> bool:
        if cut_time is not None and t >= cut_time:
            return False
        return trace.is_on(t) and t >= forced_off_until

    def next_power_on(t: float) -> float:
        return max(trace.next_on(t), forced_off_until)

    def next_power_off(t: float) -> float:
        off = trace.next_off(t)
        if cut_time is not None and t <= cut_time < off:
            return cut_time
        return off

    while not machine.halted:
        t = machine.clock
        if t > max_time:
            raise ControllerError(f"simulation exceeded max_time={max_time}")
        if not power_on(t):
            if cut_time is not None and t >= cut_time:
                forced_off_until = max(forced_off_until,
                                       cut_time + cut.off_duration)
                cut_time = None
            t_on = next_power_on(t)
            if t_on == math.inf:
                raise ControllerError("power never returns")
            ledger.advance(t_on - t)
            machine.clock = t_on
            pending_restart = True
            continue
        if pending_restart:
            lat, _ = machine.restore_cost()
            avail = next_power_off(machine.clock) - machine.clock
            if lat > 0 and avail < lat:
                machine.restart(fraction=avail / lat)
                machine.clock += avail
                continue  # outage during restore; restart again next window
            machine.restart()
            machine.clock += lat
            pending_restart = False
            continue

        pc = machine.arch.valid_pc
        cost = machine.cost_at(pc)
        period = static_period if static_period is not None else issue_period(
            cost.active_time, cost.total_energy, policy)
        period = max(period, cost.active_time)

        injected = (cut is not None and cut.instruction is not None
                    and machine.steps_started == cut.instruction)
        avail = next_power_off(machine.clock) - machine.clock

        if injected:
            phase_cut = (cut.phase, cut.fraction)
            machine.step(cut=phase_cut)
            elapsed = _time_until(cost, cut.phase, cut.fraction)
            machine.clock += elapsed
            forced_off_until = machine.clock + cut.off_duration
            cut = None  # single shot
            continue

        if avail >= period:
            machine.step()
            ledger.advance(period - cost.active_time)
            machine.clock += period
            continue

        # The off-edge lands inside this issue period.
        phase, fraction = _phase_at(cost, avail)
        if phase is None:
            machine.step()  # edge falls in the idle slack: fully committed
            ledger.advance(avail - cost.active_time)
        else:
            machine.step(cut=(phase, fraction))
        machine.clock += avail
    ledger.total_t = max(ledger.total_t, machine.clock)
    return ledger


def _phase_durations(cost: InstrCost) -> list[tuple[str, float]]:
    return [("Fetch", cost.fetch_t), ("Broadcast", cost.broadcast_t),
            ("WritePC", cost.write_pc_t), ("StoreAct", cost.store_act_t),
            ("FlipParity", cost.flip_t)]


def _phase_at(cost: InstrCost, offset: float) -> tuple[str | None, float]:
    """Which micro-step is in flight ``offset`` seconds into an instruction."""
    t = 0.0
    for phase, dur in _phase_durations(cost):
        if dur > 0 and offset < t + dur:
            return phase, (offset - t) / dur
        t += dur
    return None, 1.0


def _time_until(cost: InstrCost, phase: str | None, fraction: float) -> float:
    t = 0.0
    for name, dur in _phase_durations(cost):
        if name == phase:
            return t + dur * fraction
        t += dur
    return t
