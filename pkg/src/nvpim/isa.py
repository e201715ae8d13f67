"""Instruction set: 64-bit binary encoding and a textual assembly format.

Word layout (bit 63 is the MSB):

    [63:60] opcode          [59:51] tile (9 bits)
    logic:       [50:41] in1, [40:31] in2 (mirrors in1 for unary gates),
                 [30:21] out, [20:0] zero
    read/write row:  [50:41] row, rest zero
    write bit (SET0/SET1): [50:41] row, [40] value, rest zero
    activate columns: five 10-bit column fields at [50:41]..[10:1],
                 padded by repeating the last column, bit [0] zero
    activate range:  [50:41] start, [40:31] end, rest zero

Every 64-bit word either decodes to exactly one instruction or is rejected:
padding bits must be zero, reserved opcodes are errors, logic rows must
satisfy the parity rule, and activate-column fields must be in canonical
(sorted, sentinel-padded) form.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .tile import RowTriple, ArrayError

N_TILES = 512
WORD_BYTES = 8


class IsaError(ValueError):
    pass


class DecodeError(IsaError):
    pass


class AsmError(IsaError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def _check_tile(tile: int) -> int:
    if not 0 <= tile < N_TILES:
        raise IsaError(f"tile {tile} out of range [0, {N_TILES})")
    return tile


def _check10(value: int, what: str) -> int:
    if not 0 <= value < 1024:
        raise IsaError(f"{what} {value} does not fit in 10 bits")
    return value


@dataclass(frozen=True)
class Logic:
    kind: str  # NOT, COPY, AND, NAND, OR, NOR
    tile: int
    rows: RowTriple

    def __post_init__(self) -> None:
        _check_tile(self.tile)
        if self.kind not in LOGIC_OPCODES:
            raise IsaError(f"unknown gate {self.kind!r}")
        unary = self.kind in ("NOT", "COPY")
        if unary != (self.rows.in2 is None):
            raise IsaError(f"{self.kind} row count mismatch")


@dataclass(frozen=True)
class WriteBit:
    tile: int
    row: int
    value: int

    def __post_init__(self) -> None:
        _check_tile(self.tile)
        _check10(self.row, "row")
        if self.value not in (0, 1):
            raise IsaError(f"bit value must be 0 or 1, got {self.value}")


@dataclass(frozen=True)
class ReadRow:
    tile: int
    row: int

    def __post_init__(self) -> None:
        _check_tile(self.tile)
        _check10(self.row, "row")


@dataclass(frozen=True)
class WriteRow:
    tile: int
    row: int

    def __post_init__(self) -> None:
        _check_tile(self.tile)
        _check10(self.row, "row")


@dataclass(frozen=True)
class ActivateColumns:
    tile: int
    cols: tuple[int, ...]  # canonical: sorted, unique, 1..5 entries

    def __post_init__(self) -> None:
        _check_tile(self.tile)
        canon = tuple(sorted(set(self.cols)))
        if canon != self.cols:
            raise IsaError("activate columns must be sorted and unique")
        if not 1 <= len(canon) <= 5:
            raise IsaError("activate takes between 1 and 5 columns")
        for c in canon:
            _check10(c, "column")

    @staticmethod
    def of(tile: int, cols: Iterable[int]) -> "ActivateColumns":
        return ActivateColumns(tile, tuple(sorted(set(cols))))


@dataclass(frozen=True)
class ActivateRange:
    tile: int
    start: int
    end: int

    def __post_init__(self) -> None:
        _check_tile(self.tile)
        _check10(self.start, "start column")
        _check10(self.end, "end column")
        if self.end < self.start:
            raise IsaError(f"bad activation range [{self.start}, {self.end}]")


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Union[Logic, WriteBit, ReadRow, WriteRow,
                    ActivateColumns, ActivateRange, Halt]

OP_READROW = 0x0
OP_WRITEROW = 0x1
OP_SET0 = 0x2
OP_SET1 = 0x3
OP_NOT = 0x4
OP_COPY = 0x5
OP_AND = 0x6
OP_NAND = 0x7
OP_OR = 0x8
OP_NOR = 0x9
OP_ACTCOL = 0xA
OP_ACTRANGE = 0xB
OP_HALT = 0xF
RESERVED_OPCODES = (0xC, 0xD, 0xE)

LOGIC_OPCODES = {"NOT": OP_NOT, "COPY": OP_COPY, "AND": OP_AND,
                 "NAND": OP_NAND, "OR": OP_OR, "NOR": OP_NOR}
OPCODE_GATES = {v: k for k, v in LOGIC_OPCODES.items()}

HALT_WORD = OP_HALT << 60


def encode(instr: Instruction) -> int:
    """Encode to the 64-bit word; inverse of :func:`decode`."""
    if isinstance(instr, Halt):
        return HALT_WORD
    word = instr.tile << 51
    if isinstance(instr, Logic):
        r = instr.rows
        in2 = r.in1 if r.in2 is None else r.in2
        word |= LOGIC_OPCODES[instr.kind] << 60
        word |= (r.in1 << 41) | (in2 << 31) | (r.out << 21)
    elif isinstance(instr, WriteBit):
        word |= (OP_SET0 + instr.value) << 60
        word |= (instr.row << 41) | (instr.value << 40)
    elif isinstance(instr, ReadRow):
        word |= (OP_READROW << 60) | (instr.row << 41)
    elif isinstance(instr, WriteRow):
        word |= (OP_WRITEROW << 60) | (instr.row << 41)
    elif isinstance(instr, ActivateColumns):
        word |= OP_ACTCOL << 60
        padded = list(instr.cols) + [instr.cols[-1]] * (5 - len(instr.cols))
        for slot, col in enumerate(padded):
            word |= col << (41 - 10 * slot)
    elif isinstance(instr, ActivateRange):
        word |= OP_ACTRANGE << 60
        word |= (instr.start << 41) | (instr.end << 31)
    else:
        raise IsaError(f"cannot encode {instr!r}")
    return word


def _require_zero(word: int, mask: int) -> None:
    if word & mask:
        raise DecodeError(f"nonzero padding bits in word {word:#018x}")


def decode(word: int) -> Instruction:
    """Decode a 64-bit word, rejecting anything :func:`encode` cannot emit."""
    if not 0 <= word < 1 << 64:
        raise DecodeError("instruction word must fit in 64 bits")
    opcode = word >> 60
    tile = (word >> 51) & 0x1FF
    f1 = (word >> 41) & 0x3FF
    f2 = (word >> 31) & 0x3FF
    f3 = (word >> 21) & 0x3FF
    if opcode in RESERVED_OPCODES:
        raise DecodeError(f"reserved opcode {opcode:#x}")
    if opcode == OP_HALT:
        _require_zero(word, (1 << 60) - 1)
        return Halt()
    if opcode in OPCODE_GATES:
        _require_zero(word, (1 << 21) - 1)
        kind = OPCODE_GATES[opcode]
        unary = kind in ("NOT", "COPY")
        if unary and f2 != f1:
            raise DecodeError(f"{kind}: mirrored in2 field expected")
        try:
            rows = RowTriple(f1, None if unary else f2, f3)
        except ArrayError as exc:
            raise DecodeError(str(exc)) from None
        return Logic(kind, tile, rows)
    if opcode in (OP_SET0, OP_SET1):
        value = opcode - OP_SET0
        if (word >> 40) & 1 != value:
            raise DecodeError("write-bit value bit disagrees with opcode")
        _require_zero(word, (1 << 40) - 1)
        return WriteBit(tile, f1, value)
    if opcode == OP_READROW:
        _require_zero(word, (1 << 41) - 1)
        return ReadRow(tile, f1)
    if opcode == OP_WRITEROW:
        _require_zero(word, (1 << 41) - 1)
        return WriteRow(tile, f1)
    if opcode == OP_ACTCOL:
        _require_zero(word, 1)
        fields = [(word >> (41 - 10 * slot)) & 0x3FF for slot in range(5)]
        cols = [fields[0]]
        for prev, cur in zip(fields, fields[1:]):
            if cur == prev:
                continue
            if cur < prev or cur in cols:
                raise DecodeError("activate-column fields not in canonical form")
            cols.append(cur)
        # After the first repeat only repeats of the same value may follow.
        seen_pad = False
        for prev, cur in zip(fields, fields[1:]):
            if cur == prev:
                seen_pad = True
            elif seen_pad:
                raise DecodeError("activate-column fields not in canonical form")
        return ActivateColumns(tile, tuple(cols))
    if opcode == OP_ACTRANGE:
        _require_zero(word, (1 << 31) - 1)
        try:
            return ActivateRange(tile, f1, f2)
        except IsaError as exc:
            raise DecodeError(str(exc)) from None
    raise DecodeError(f"unhandled opcode {opcode:#x}")


# -- assembly text ---------------------------------------------------------


def _format_instr(instr: Instruction) -> str:
    if isinstance(instr, Halt):
        return "HALT"
    if isinstance(instr, Logic):
        r = instr.rows
        rows = f"{r.in1} {r.out}" if r.in2 is None else f"{r.in1} {r.in2} {r.out}"
        return f"{instr.kind} {instr.tile} {rows}"
    if isinstance(instr, WriteBit):
        return f"SET{instr.value} {instr.tile} {instr.row}"
    if isinstance(instr, ReadRow):
        return f"READROW {instr.tile} {instr.row}"
    if isinstance(instr, WriteRow):
        return f"WRITEROW {instr.tile} {instr.row}"
    if isinstance(instr, ActivateColumns):
        return f"ACTCOL {instr.tile} " + " ".join(str(c) for c in instr.cols)
    if isinstance(instr, ActivateRange):
        return f"ACTRANGE {instr.tile} {instr.start} {instr.end}"
    raise IsaError(f"cannot format {instr!r}")


def mnemonic(instr: Instruction) -> str:
    """Mnemonic of one instruction (SET0/SET1 for the two WriteBit forms)."""
    return _format_instr(instr).split()[0]


def disassemble(program: Iterable[Instruction]) -> str:
    return "\n".join(_format_instr(i) for i in program) + "\n"


def _parse_line(line: str, lineno: int) -> Instruction | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    parts = text.split()
    mnemonic = parts[0].upper()
    try:
        args = [int(p, 0) for p in parts[1:]]
    except ValueError:
        raise AsmError(f"bad operand in {text!r}", lineno) from None

    def arity(n: int) -> list[int]:
        if len(args) != n:
            raise AsmError(f"{mnemonic} expects {n} operands, got {len(args)}", lineno)
        return args

    try:
        if mnemonic == "HALT":
            arity(0)
            return Halt()
        if mnemonic in ("NOT", "COPY"):
            t, in1, out = arity(3)
            return Logic(mnemonic, t, RowTriple(in1, None, out))
        if mnemonic in ("AND", "NAND", "OR", "NOR"):
            t, in1, in2, out = arity(4)
            return Logic(mnemonic, t, RowTriple(in1, in2, out))
        if mnemonic in ("SET0", "SET1"):
            t, row = arity(2)
            return WriteBit(t, row, int(mnemonic[-1]))
        if mnemonic == "READROW":
            t, row = arity(2)
            return ReadRow(t, row)
        if mnemonic == "WRITEROW":
            t, row = arity(2)
            return WriteRow(t, row)
        if mnemonic == "ACTCOL":
            if not 2 <= len(args) <= 6:
                raise AsmError("ACTCOL expects a tile and 1-5 columns", lineno)
            return ActivateColumns.of(args[0], args[1:])
        if mnemonic == "ACTRANGE":
            t, start, end = arity(3)
            return ActivateRange(t, start, end)
    except (IsaError, ArrayError) as exc:
        raise AsmError(str(exc), lineno) from None
    raise AsmError(f"unknown mnemonic {mnemonic!r}", lineno)


def assemble(text: str) -> list[Instruction]:
    """Parse an assembly listing: one instruction per line, '#' comments."""
    program = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        instr = _parse_line(line, lineno)
        if instr is not None:
            program.append(instr)
    return program


# -- program files ---------------------------------------------------------


def to_words(program: Iterable[Instruction]) -> bytes:
    """Binary program file: little-endian sequence of 64-bit words."""
    return b"".join(struct.pack("<Q", encode(i)) for i in program)


def from_words(raw: bytes) -> list[Instruction]:
    if len(raw) % WORD_BYTES:
        raise DecodeError("program file length is not a multiple of 8 bytes")
    return [decode(w) for (w,) in struct.iter_unpack("<Q", raw)]


def save_program(program: Iterable[Instruction], path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".bin":
        path.write_bytes(to_words(program))
    else:
        path.write_text(disassemble(program))


def load_program(path: str | Path) -> list[Instruction]:
    path = Path(path)
    if path.suffix == ".bin":
        return from_words(path.read_bytes())
    return assemble(path.read_text())
