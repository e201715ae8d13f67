"""A single 1024x1024 cell tile with its column-activation latch.

All compute happens inside the tile: a logic instruction reads two input
rows and drives one output row, independently in every latched-active
column.  The bit-line wiring imposes the row-parity rule: both inputs of a
gate must sit in rows of equal parity and the output in a row of opposite
parity.  A useful consequence is that a gate's output row can never be one
of its own input rows, so re-executing any single operation is idempotent.

Memory reads sense the full row; writes apply only to active columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .device import GATES, Direction, GateKind, Technology

TILE_DIM = 1024


class ArrayError(ValueError):
    pass


class PresetError(ArrayError):
    """Strict-mode diagnostic: a gate output cell was not at its preset."""


def _check_row(row: int) -> int:
    if not 0 <= row < TILE_DIM:
        raise ArrayError(f"row {row} out of range [0, {TILE_DIM})")
    return row


def _check_col(col: int) -> int:
    if not 0 <= col < TILE_DIM:
        raise ArrayError(f"column {col} out of range [0, {TILE_DIM})")
    return col


@dataclass(frozen=True)
class RowTriple:
    """Input/output rows of one logic operation.

    ``in2`` is None for unary gates.  Inputs share parity, the output has
    the opposite parity; this is checked at construction so no runtime path
    can issue a mixed-parity gate.
    """

    in1: int
    in2: int | None
    out: int

    def __post_init__(self) -> None:
        _check_row(self.in1)
        _check_row(self.out)
        if self.in2 is not None:
            _check_row(self.in2)
            if self.in2 % 2 != self.in1 % 2:
                raise ArrayError(
                    f"input rows {self.in1} and {self.in2} differ in parity")
        if self.out % 2 == self.in1 % 2:
            raise ArrayError(
                f"output row {self.out} must have opposite parity from inputs")

    @property
    def input_rows(self) -> tuple[int, ...]:
        return (self.in1,) if self.in2 is None else (self.in1, self.in2)


@dataclass(frozen=True)
class CellAddress:
    tile: int
    row: int
    col: int

    def __post_init__(self) -> None:
        if not 0 <= self.tile < 512:
            raise ArrayError(f"tile {self.tile} out of range [0, 512)")
        _check_row(self.row)
        _check_col(self.col)


def empty_buffer() -> np.ndarray:
    """The 128-byte inter-tile row buffer, viewed as 1024 bits."""
    return np.zeros(TILE_DIM, dtype=bool)


# Vectorised gate truth functions over boolean arrays.
_VEC_TRUTH = {
    "NAND": lambda a, b: ~(a & b),
    "AND": lambda a, b: a & b,
    "NOR": lambda a, b: ~(a | b),
    "OR": lambda a, b: a | b,
    "NOT": lambda a: ~a,
    "COPY": lambda a: a,
}


@dataclass
class Tile:
    """One memory/compute tile: a bit grid plus the active-column latch."""

    variant: Technology = Technology.FUTURE_STT
    completion_threshold: float = 1.0
    cells: np.ndarray = field(default_factory=lambda: np.zeros((TILE_DIM, TILE_DIM), dtype=bool))
    active: np.ndarray = field(default_factory=lambda: np.zeros(TILE_DIM, dtype=bool))

    def copy(self) -> "Tile":
        return Tile(variant=self.variant,
                    completion_threshold=self.completion_threshold,
                    cells=self.cells.copy(), active=self.active.copy())

    @property
    def active_columns(self) -> list[int]:
        return np.flatnonzero(self.active).tolist()

    # -- column activation -------------------------------------------------

    def activate_columns(self, cols: list[int], pulse_fraction: float = 1.0) -> None:
        """Replace the latch with the given set of up to five columns.

        Duplicates collapse, so padding an instruction by repeating the last
        column is harmless, and re-issuing the same instruction (the first
        action after every restart) is idempotent.
        """
        if not 1 <= len(cols) <= 5:
            raise ArrayError("activate takes between 1 and 5 columns")
        for c in cols:
            _check_col(c)
        if pulse_fraction < self.completion_threshold:
            return
        self.active[:] = False
        self.active[list(set(cols))] = True

    def activate_range(self, start: int, end: int, pulse_fraction: float = 1.0) -> None:
        """Bulk variant: replace the latch with the inclusive range [start, end]."""
        _check_col(start)
        _check_col(end)
        if end < start:
            raise ArrayError(f"bad activation range [{start}, {end}]")
        if pulse_fraction < self.completion_threshold:
            return
        self.active[:] = False
        self.active[start:end + 1] = True

    # -- logic -------------------------------------------------------------

    def logic_op(self, kind: GateKind | str, rows: RowTriple,
                 pulse_fraction: float = 1.0, strict_preset: bool = False) -> None:
        """Apply one gate in every active column.

        Each column is independent: its output cell is updated from its own
        input cells.  For STT, a partial pulse below the completion
        threshold leaves every output unchanged, and outputs only ever move
        toward the gate's direction target.
        """
        if isinstance(kind, str):
            kind = GATES[kind]
        if len(rows.input_rows) != kind.arity:
            raise ArrayError(f"{kind.name} needs {kind.arity} input rows")
        mask = self.active
        if not mask.any():
            return
        ins = [self.cells[r][mask] for r in rows.input_rows]
        truth = _VEC_TRUTH[kind.name](*ins)
        out = self.cells[rows.out]
        if self.variant.is_she:
            out[mask] = truth
            return
        if strict_preset and not np.all(out[mask] == bool(kind.preset)):
            raise PresetError(
                f"{kind.name} output row {rows.out} not preset to {kind.preset}")
        if pulse_fraction < self.completion_threshold:
            return
        if kind.direction is Direction.SET_ONLY:
            out[mask] |= truth
        else:
            out[mask] &= truth

    # -- memory ------------------------------------------------------------

    def write_bit(self, row: int, value: int, pulse_fraction: float = 1.0) -> None:
        """Set the cell at (row, col) to ``value`` for every active column."""
        _check_row(row)
        if pulse_fraction < self.completion_threshold:
            return
        self.cells[row][self.active] = bool(value)

    def read_row(self, row: int) -> np.ndarray:
        """Non-destructive read of all 1024 cells of one row."""
        _check_row(row)
        return self.cells[row].copy()

    def write_row(self, row: int, buf: np.ndarray, pulse_fraction: float = 1.0) -> None:
        """Write buffer bits into the row, masked by the active columns."""
        _check_row(row)
        if buf.shape != (TILE_DIM,):
            raise ArrayError(f"row buffer must have {TILE_DIM} bits")
        if pulse_fraction < self.completion_threshold:
            return
        self.cells[row][self.active] = buf[self.active]

    # -- snapshots ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Flat binary snapshot, row-major, 8 cells per byte."""
        return np.packbits(self.cells, axis=None).tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes, variant: Technology = Technology.FUTURE_STT) -> "Tile":
        expected = TILE_DIM * TILE_DIM // 8
        if len(raw) != expected:
            raise ArrayError(f"snapshot must be {expected} bytes, got {len(raw)}")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        cells = bits.reshape(TILE_DIM, TILE_DIM).astype(bool)
        return cls(variant=variant, cells=cells)
