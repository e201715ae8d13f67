"""Lowering of fixed-point arithmetic and SVM inference to the gate ISA.

Data is laid out bit-serially: a logical register is a list of rows (LSB
first), all sharing one parity so any two registers can feed a gate.  A
gate's output lands on the opposite parity, so results that must feed
further gates come back via COPY mirrors.  One logical lane occupies one
column; a single instruction stream computes every active lane at once.

The full adder is the spec'd classic 9-NAND decomposition; under the
parity rule it needs two COPY mirrors (of t1 and t5), which reuse the dead
t2/t3 scratch rows so the adder still touches exactly 7 distinct scratch
rows.  STT targets preset every gate output (SET0 before NAND, SET1 before
COPY); SHE targets emit no presets at all.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import isa
from .device import GATES, Technology
from .svm import SvmModel, wrap32
from .tile import TILE_DIM, RowTriple, Tile, empty_buffer


class CompileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layout


@dataclass(frozen=True)
class LayoutPlan:
    """Row/column assignment for one tile.

    Registers (operands and results) sit on rows of ``data_parity``; the
    scratch pool holds consecutive rows, so both parities are available for
    gate outputs and mirrors.  ``columns`` is the inclusive lane range.
    """

    tile: int
    width: int
    operands: dict[str, tuple[int, ...]]
    results: dict[str, tuple[int, ...]]
    scratch_rows: tuple[int, ...]
    data_parity: int = 0
    columns: tuple[int, int] = (0, TILE_DIM - 1)

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for name, rows in {**self.operands, **self.results}.items():
            for r in rows:
                if r % 2 != self.data_parity:
                    raise CompileError(
                        f"register {name!r} row {r} off the data parity")
                if r in seen:
                    raise CompileError(f"register {name!r} reuses row {r}")
                seen.add(r)
        if seen & set(self.scratch_rows):
            raise CompileError("scratch region overlaps a register region")

    def register(self, name: str) -> tuple[int, ...]:
        if name in self.operands:
            return self.operands[name]
        if name in self.results:
            return self.results[name]
        raise CompileError(f"no register named {name!r}")


def plan_layout(width: int, operands: dict[str, int],
                results: dict[str, int], tile: int = 1,
                n_scratch: int | None = None, data_parity: int = 0,
                columns: tuple[int, int] = (0, TILE_DIM - 1)) -> LayoutPlan:
    """Assign register rows on the data parity and a trailing scratch pool."""
    if width < 1:
        raise CompileError("width must be >= 1")
    next_row = data_parity
    regions: dict[str, tuple[int, ...]] = {}
    for name, bits in {**operands, **results}.items():
        rows = tuple(next_row + 2 * i for i in range(bits))
        next_row = rows[-1] + 2
        regions[name] = rows
    if n_scratch is None:
        n_scratch = 6 * width + 32
    base = next_row - data_parity  # first untouched row index, any parity
    scratch = tuple(range(base, base + n_scratch))
    if scratch and scratch[-1] >= TILE_DIM:
        raise CompileError("layout overflow: registers plus scratch exceed the tile")
    return LayoutPlan(tile=tile, width=width,
                      operands={n: regions[n] for n in operands},
                      results={n: regions[n] for n in results},
                      scratch_rows=scratch, data_parity=data_parity,
                      columns=columns)


# ---------------------------------------------------------------------------
# emitter


class Emitter:
    """Instruction builder with scratch-row allocation and automatic
    presets (STT) ahead of every gate output."""

    def __init__(self, layout: LayoutPlan,
                 target: Technology = Technology.FUTURE_STT):
        self.layout = layout
        self.target = target
        self.she = target.is_she
        self.instrs: list[isa.Instruction] = []
        self._free: dict[int, list[int]] = {0: [], 1: []}
        for r in layout.scratch_rows:
            self._free[r % 2].append(r)
        for rows in self._free.values():
            rows.sort(reverse=True)  # pop() hands out the lowest rows first
        p = layout.data_parity
        try:
            # Reserved full-adder scratch: 4 rows opposite parity, 3 on it.
            self._fa_opp = tuple(self.alloc(1 - p) for _ in range(4))
            self._fa_same = tuple(self.alloc(p) for _ in range(3))
        except CompileError as exc:
            raise CompileError("insufficient scratch rows for the full adder") from exc

    # row management

    def alloc(self, parity: int) -> int:
        if not self._free[parity]:
            raise CompileError(f"layout overflow: no free parity-{parity} scratch rows")
        return self._free[parity].pop()

    def free(self, row: int) -> None:
        self._free[row % 2].append(row)

    # raw emission

    def emit(self, instr: isa.Instruction) -> None:
        self.instrs.append(instr)

    def activate_range(self, start: int, end: int) -> None:
        self.emit(isa.ActivateRange(self.layout.tile, start, end))

    def activate_columns(self, cols: list[int]) -> None:
        self.emit(isa.ActivateColumns.of(self.layout.tile, cols))

    def write_const_bit(self, row: int, value: int) -> None:
        """Data write of a constant (emitted for SHE targets too)."""
        self.emit(isa.WriteBit(self.layout.tile, row, value))

    def gate(self, kind: str, in1: int, in2: int | None, out: int) -> None:
        k = GATES[kind]
        if not self.she:
            self.emit(isa.WriteBit(self.layout.tile, out, k.preset))
        self.emit(isa.Logic(kind, self.layout.tile, RowTriple(in1, in2, out)))

    def copy(self, src: int, dst: int) -> None:
        self.gate("COPY", src, None, dst)

    def not_(self, src: int, dst: int) -> None:
        self.gate("NOT", src, None, dst)

    def read_row(self, row: int) -> None:
        self.emit(isa.ReadRow(self.layout.tile, row))

    def halt(self) -> None:
        self.emit(isa.Halt())

    # full adder

    def fulladd(self, a: int, b: int, cin: int, sum_row: int,
                cout_row: int) -> None:
        """sum/cout of a+b+cin: 9 NANDs + 2 COPY mirrors, 7 scratch rows.

        All five caller rows must share one parity.  ``sum_row`` may alias
        ``a``, ``b`` or ``cin`` (its preset is emitted after their last
        read), which is how ripple chains accumulate in place.
        """
        rows = (a, b, cin, sum_row, cout_row)
        p = a % 2
        if any(r % 2 != p for r in rows):
            raise CompileError(f"full-adder rows {rows} must share one parity")
        if p != self.layout.data_parity:
            raise CompileError("full-adder operands must sit on the data parity")
        A, C, D, F = self._fa_opp
        B, E, G = self._fa_same
        if cout_row in (F, A) or sum_row in (D, C):
            raise CompileError("sum/cout rows collide with adder scratch")
        self.gate("NAND", a, b, A)          # t1
        self.copy(A, B)                     # t1 mirrored onto the data parity
        self.gate("NAND", a, B, C)          # t2
        self.gate("NAND", b, B, D)          # t3
        self.gate("NAND", C, D, E)          # t4 = a xor b
        self.gate("NAND", E, cin, F)        # t5
        self.copy(F, G)                     # t5 mirrored
        self.gate("NAND", E, G, D)          # t6 (reuses t3's row)
        self.gate("NAND", cin, G, C)        # t7 (reuses t2's row)
        self.gate("NAND", D, C, sum_row)    # sum
        self.gate("NAND", F, A, cout_row)   # carry

    def ripple(self, a_rows, b_rows, out_rows, cin_row: int) -> None:
        """out = a + b + cin, in place allowed for b (out_rows[i] == b_rows[i]).

        len(out_rows) may exceed len(a_rows) == len(b_rows) by one: the
        final carry lands on the extra top row.
        """
        n = len(a_rows)
        if len(b_rows) != n or len(out_rows) not in (n, n + 1):
            raise CompileError("ripple operand widths disagree")
        c_prev = cin_row
        carries = (self.alloc(self.layout.data_parity),
                   self.alloc(self.layout.data_parity))
        for i in range(n):
            last = i == n - 1
            cout = out_rows[n] if (last and len(out_rows) == n + 1) else carries[i % 2]
            self.fulladd(a_rows[i], b_rows[i], c_prev, out_rows[i], cout)
            c_prev = cout
        for c in carries:
            self.free(c)


# ---------------------------------------------------------------------------
# lowerings (spec'd entry points; each returns a bare instruction list)


def lower_fulladd(layout: LayoutPlan, a_row: int, b_row: int, cin_row: int,
                  sum_row: int, cout_row: int,
                  target: Technology = Technology.FUTURE_STT) -> list[isa.Instruction]:
    emit = Emitter(layout, target)
    emit.fulladd(a_row, b_row, cin_row, sum_row, cout_row)
    return emit.instrs


def lower_add(layout: LayoutPlan, width: int | None = None,
              target: Technology = Technology.FUTURE_STT,
              a: str = "a", b: str = "b", out: str = "sum") -> list[isa.Instruction]:
    """out[0:w+1] = a + b over all active columns (bit-serial ripple)."""
    w = width or layout.width
    emit = Emitter(layout, target)
    ar, br, outr = layout.register(a)[:w], layout.register(b)[:w], layout.register(out)
    if len(outr) < w + 1:
        raise CompileError(f"result register {out!r} needs {w + 1} rows")
    zero = emit.alloc(layout.data_parity)
    emit.write_const_bit(zero, 0)
    emit.ripple(ar, br, outr[:w + 1], zero)
    return emit.instrs


def lower_sub(layout: LayoutPlan, width: int | None = None,
              target: Technology = Technology.FUTURE_STT,
              a: str = "a", b: str = "b", out: str = "diff") -> list[isa.Instruction]:
    """out[0:w] = a - b mod 2^w (two's complement: a + ~b + 1); the extra
    top row, when present, holds the final carry (= NOT borrow)."""
    w = width or layout.width
    emit = Emitter(layout, target)
    ar, br, outr = layout.register(a)[:w], layout.register(b)[:w], layout.register(out)
    p = layout.data_parity
    mirror = emit.alloc(1 - p)
    nb = [emit.alloc(p) for _ in range(w)]
    for i in range(w):
        emit.not_(br[i], mirror)
        emit.copy(mirror, nb[i])
    one = emit.alloc(p)
    emit.write_const_bit(one, 1)
    emit.ripple(ar, nb, outr[:w + 1] if len(outr) > w else outr[:w], one)
    return emit.instrs


def _mult_into(emit: Emitter, mcand: tuple[int, ...], mplier: tuple[int, ...],
               prod: tuple[int, ...]) -> None:
    """prod = mcand x mplier, shift-and-add, prod zeroed first.

    Partial products accumulate in place; after the i-th addition every
    row above i+len(mcand) is still zero, so each step's final carry drops
    straight onto that row and never needs further propagation.
    """
    wc, wp = len(mcand), len(mplier)
    if len(prod) < wc + wp:
        raise CompileError(f"product register needs {wc + wp} rows")
    p = emit.layout.data_parity
    for r in prod[:wc + wp]:
        emit.write_const_bit(r, 0)
    zero = emit.alloc(p)
    emit.write_const_bit(zero, 0)
    mirror = emit.alloc(1 - p)
    pp = [emit.alloc(p) for _ in range(wc)]
    carries = (emit.alloc(p), emit.alloc(p))
    for i in range(wp):
        for j in range(wc):
            emit.gate("AND", mcand[j], mplier[i], mirror)
            emit.copy(mirror, pp[j])
        c_prev = zero
        for j in range(wc):
            cout = prod[i + wc] if j == wc - 1 else carries[j % 2]
            emit.fulladd(pp[j], prod[i + j], c_prev, prod[i + j], cout)
            c_prev = cout
    for r in (zero, mirror, *pp, *carries):
        emit.free(r)


def lower_mult(layout: LayoutPlan, width: int | None = None,
               target: Technology = Technology.FUTURE_STT,
               a: str = "a", b: str = "b", out: str = "prod") -> list[isa.Instruction]:
    """out[0:2w] = a x b (unsigned shift-and-add)."""
    w = width or layout.width
    emit = Emitter(layout, target)
    _mult_into(emit, layout.register(a)[:w], layout.register(b)[:w],
               layout.register(out))
    return emit.instrs


def lower_binary_dot(layout: LayoutPlan, n_features: int,
                     target: Technology = Technology.FUTURE_STT,
                     x: str = "x", y: str = "y",
                     out: str = "count") -> list[isa.Instruction]:
    """Popcount of the per-feature AND of two 1-bit-per-feature vectors."""
    emit = Emitter(layout, target)
    xr, yr = layout.register(x)[:n_features], layout.register(y)[:n_features]
    acc = layout.register(out)
    need = max(1, math.ceil(math.log2(n_features + 1)))
    if len(acc) < need:
        raise CompileError(f"count register needs {need} rows")
    p = layout.data_parity
    for r in acc:
        emit.write_const_bit(r, 0)
    zero = emit.alloc(p)
    emit.write_const_bit(zero, 0)
    mirror = emit.alloc(1 - p)
    bit = emit.alloc(p)
    carries = (emit.alloc(p), emit.alloc(p))
    for f in range(n_features):
        emit.gate("AND", xr[f], yr[f], mirror)
        emit.copy(mirror, bit)
        c_prev = bit  # add a single bit: inject it as the carry-in
        for k in range(len(acc)):
            cout = carries[k % 2]
            emit.fulladd(zero, acc[k], c_prev, acc[k], cout)
            c_prev = cout
    for r in (zero, mirror, bit, *carries):
        emit.free(r)
    return emit.instrs


# ---------------------------------------------------------------------------
# programs


@dataclass
class Program:
    instructions: list[isa.Instruction]
    layout: LayoutPlan
    metadata: dict = field(default_factory=dict)

    def opcode_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for instr in self.instructions:
            name = isa.mnemonic(instr)
            counts[name] = counts.get(name, 0) + 1
        return counts


def build_program(layout: LayoutPlan, body: list[isa.Instruction],
                  target: Technology = Technology.FUTURE_STT,
                  metadata: dict | None = None) -> Program:
    """Wrap a lowered body: lane activation up front, Halt at the end."""
    start, end = layout.columns
    head: list[isa.Instruction] = [isa.ActivateRange(layout.tile, start, end)]
    instrs = head + list(body) + [isa.Halt()]
    meta = {"target": target.value, **(metadata or {})}
    prog = Program(instrs, layout, meta)
    prog.metadata["opcode_counts"] = prog.opcode_counts()
    return prog


def check_preset_discipline(instructions: list[isa.Instruction],
                            target: Technology = Technology.FUTURE_STT) -> list[str]:
    """Static check (STT): every gate's output row carries that gate's
    preset value, written since the row was last consumed as an output."""
    if target.is_she:
        return []
    state: dict[tuple[int, int], int | None] = {}
    violations = []
    for i, instr in enumerate(instructions):
        if isinstance(instr, isa.WriteBit):
            state[(instr.tile, instr.row)] = instr.value
        elif isinstance(instr, isa.WriteRow):
            state[(instr.tile, instr.row)] = None
        elif isinstance(instr, isa.Logic):
            key = (instr.tile, instr.rows.out)
            preset = GATES[instr.kind].preset
            if state.get(key) != preset:
                violations.append(
                    f"instr {i}: {instr.kind} output row {instr.rows.out} "
                    f"not preset to {preset}")
            state[key] = None
    return violations


# ---------------------------------------------------------------------------
# direct tile execution (fast functional harness, no controller timing)


def execute_program(tile: Tile, instructions: list[isa.Instruction],
                    buffer: np.ndarray | None = None) -> np.ndarray:
    """Apply a single-tile instruction stream functionally.  Returns the
    row buffer (holding the last READROW)."""
    buf = buffer if buffer is not None else empty_buffer()
    for instr in instructions:
        if isinstance(instr, isa.Logic):
            tile.logic_op(instr.kind, instr.rows)
        elif isinstance(instr, isa.WriteBit):
            tile.write_bit(instr.row, instr.value)
        elif isinstance(instr, isa.ActivateRange):
            tile.activate_range(instr.start, instr.end)
        elif isinstance(instr, isa.ActivateColumns):
            tile.activate_columns(list(instr.cols))
        elif isinstance(instr, isa.ReadRow):
            buf[:] = tile.read_row(instr.row)
        elif isinstance(instr, isa.WriteRow):
            tile.write_row(instr.row, buf)
        elif isinstance(instr, isa.Halt):
            break
        else:
            raise CompileError(f"cannot execute {instr!r}")
    return buf


def write_values(tile: Tile, rows: tuple[int, ...], values,
                 cols: tuple[int, int] | None = None) -> None:
    """Preload per-column integers bit-serially into register rows."""
    values = np.asarray(values, dtype=np.int64)
    start, end = cols if cols is not None else (0, values.size - 1)
    if end - start + 1 != values.size:
        raise CompileError("value count does not match the column range")
    for k, row in enumerate(rows):
        tile.cells[row, start:end + 1] = ((values >> k) & 1).astype(bool)


def read_values(tile: Tile, rows: tuple[int, ...],
                cols: tuple[int, int] | None = None) -> np.ndarray:
    """Read per-column unsigned integers back out of register rows."""
    start, end = cols if cols is not None else (0, TILE_DIM - 1)
    out = np.zeros(end - start + 1, dtype=np.int64)
    for k, row in enumerate(rows):
        out |= tile.cells[row, start:end + 1].astype(np.int64) << k
    return out


# ---------------------------------------------------------------------------
# SVM code generation


@dataclass(frozen=True)
class CodegenConfig:
    tile: int = 1
    target: Technology = Technology.FUTURE_STT
    max_lanes: int = TILE_DIM


TERM_SHIFT = 11  # (alpha_fp * u^2) >> TERM_SHIFT, per the fixed-point contract
SCORE_BITS = 32


def codegen_svm(model: SvmModel, config: CodegenConfig | None = None) -> Program:
    """One support-vector lane per column.

    Per lane: dot(x, sv) -> u = (dot >> s) + c0_fp -> u^2 ->
    |alpha_fp| * u^2; the readout window term[11:43] is the 32-bit term.
    The cross-column reduction (per-class signed sum minus rho_fp, then
    argmax) is controller-mediated: trailing READROWs model the cost, and
    the host accumulates using the layout report.
    """
    config = config or CodegenConfig()
    if not model.is_quantized:
        raise CompileError("codegen_svm needs a quantized model")
    lanes = [(cls, a_fp, sv_q)
             for cls in range(model.n_classes)
             for a_fp, sv_q in model.quantized_machines[cls]]
    if not lanes:
        raise CompileError("model has no support vectors")
    if len(lanes) > config.max_lanes:
        raise CompileError(
            f"model too large: {len(lanes)} lanes > {config.max_lanes}")
    nf, s = model.n_features, model.shift_s
    operands = {}
    for f in range(nf):
        operands[f"x{f}"] = 8
        operands[f"sv{f}"] = 8
    operands["alpha"] = 16
    results = {"p16": 16, "acc": 32, "c0": 16, "u": 16, "usq": 32, "term": 48}
    layout = plan_layout(8, operands, results, tile=config.tile,
                         n_scratch=96, columns=(0, len(lanes) - 1))
    emit = Emitter(layout, config.target)
    start, end = layout.columns
    emit.activate_range(start, end)

    acc = layout.register("acc")
    for r in acc:
        emit.write_const_bit(r, 0)
    zero = emit.alloc(layout.data_parity)
    emit.write_const_bit(zero, 0)
    for f in range(nf):
        p16 = layout.register("p16")
        _mult_into(emit, layout.register(f"x{f}"), layout.register(f"sv{f}"), p16)
        # acc += p16, carry propagated through the full 32 bits
        c_prev = zero
        carries = (emit.alloc(layout.data_parity), emit.alloc(layout.data_parity))
        for k in range(32):
            addend = p16[k] if k < 16 else zero
            cout = carries[k % 2]
            emit.fulladd(addend, acc[k], c_prev, acc[k], cout)
            c_prev = cout
        for c in carries:
            emit.free(c)

    # u = (acc >> s) + c0_fp, 16 bits (quantization guarantees no overflow)
    c0 = layout.register("c0")
    for k in range(16):
        emit.write_const_bit(c0[k], (model.c0_fp >> k) & 1)
    shifted = tuple(acc[s + k] if s + k < 32 else zero for k in range(16))
    u = layout.register("u")
    emit.ripple(shifted, c0, u, zero)

    _mult_into(emit, u, u, layout.register("usq"))
    _mult_into(emit, layout.register("usq"), layout.register("alpha"),
               layout.register("term"))

    readout = layout.register("term")[TERM_SHIFT:TERM_SHIFT + SCORE_BITS]
    for row in readout:
        emit.read_row(row)
    emit.halt()

    meta = {
        "lanes": [{"column": start + i, "class": cls,
                   "sign": -1 if a_fp < 0 else 1}
                  for i, (cls, a_fp, _) in enumerate(lanes)],
        "rho_fp": list(model.rho_fp),
        "shift_s": s,
        "c0_fp": model.c0_fp,
        "readout_rows": list(readout),
        "n_classes": model.n_classes,
    }
    # the emitter placed the activation and Halt itself, so no build_program
    prog = Program(list(emit.instrs), layout, {"target": config.target.value, **meta})
    prog.metadata["opcode_counts"] = prog.opcode_counts()
    return prog


def preload_svm_model(tile: Tile, program: Program, model: SvmModel) -> None:
    """Write each lane's support vector and |alpha_fp| into its column."""
    layout = program.layout
    lanes = program.metadata["lanes"]
    for lane, spec in enumerate(lanes):
        cls = spec["class"]
        idx = sum(1 for l in lanes[:lane] if l["class"] == cls)
        a_fp, sv_q = model.quantized_machines[cls][idx]
        col = spec["column"]
        for f in range(model.n_features):
            rows = layout.register(f"sv{f}")
            for k, row in enumerate(rows):
                tile.cells[row, col] = bool((int(sv_q[f]) >> k) & 1)
        for k, row in enumerate(layout.register("alpha")):
            tile.cells[row, col] = bool((abs(int(a_fp)) >> k) & 1)


def preload_svm_input(tile: Tile, program: Program, x) -> None:
    """Broadcast one 8-bit input vector to every lane column."""
    layout = program.layout
    start, end = layout.columns
    n = end - start + 1
    for f, xf in enumerate(x):
        if not 0 <= int(xf) <= 255:
            raise CompileError(f"input feature {f} = {xf} outside 8-bit range")
        write_values(tile, layout.register(f"x{f}"),
                     np.full(n, int(xf)), cols=(start, end))


def read_svm_scores(tile: Tile, program: Program) -> tuple[list[int], int]:
    """Host-side reduction: signed per-class sum of lane terms minus
    rho_fp, in wraparound 32-bit arithmetic; argmax with lowest-index
    tie-break."""
    meta = program.metadata
    layout = program.layout
    rows = tuple(meta["readout_rows"])
    start, end = layout.columns
    terms = read_values(tile, rows, cols=(start, end))
    scores = [wrap32(-r) for r in meta["rho_fp"]]
    for lane, spec in enumerate(meta["lanes"]):
        cls, sign = spec["class"], spec["sign"]
        scores[cls] = wrap32(scores[cls] + sign * int(terms[lane]))
    best = max(range(len(scores)), key=lambda c: (scores[c], -c))
    return scores, best


def layout_report(program: Program) -> str:
    """JSON mapping logical operands to (tile, row, column) placements."""
    layout = program.layout
    doc = {
        "tile": layout.tile,
        "width": layout.width,
        "data_parity": layout.data_parity,
        "columns": list(layout.columns),
        "operands": {k: list(v) for k, v in layout.operands.items()},
        "results": {k: list(v) for k, v in layout.results.items()},
        "scratch_rows": list(layout.scratch_rows),
        "metadata": {k: v for k, v in program.metadata.items()},
    }
    return json.dumps(doc, indent=2) + "\n"
