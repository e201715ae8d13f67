"""Tile layer: parity rule, activation latch, idempotent gate application."""

import itertools

import numpy as np
import pytest

from nvpim.device import Technology
from nvpim.tile import (TILE_DIM, ArrayError, CellAddress, PresetError,
                        RowTriple, Tile, empty_buffer)

BOOL_ORACLE = {
    "NAND": lambda a, b: 1 - (a & b),
    "AND": lambda a, b: a & b,
    "NOR": lambda a, b: 1 - (a | b),
    "OR": lambda a, b: a | b,
    "NOT": lambda a, b: 1 - a,
    "COPY": lambda a, b: a,
}
PRESETS = {"NAND": 0, "AND": 1, "NOR": 0, "OR": 1, "NOT": 0, "COPY": 1}
UNARY = ("NOT", "COPY")


def triple(kind):
    return RowTriple(2, None if kind in UNARY else 4, 5)


class TestRowTriple:
    def test_valid_parities(self):
        RowTriple(0, 2, 1)
        RowTriple(1, 3, 2)
        RowTriple(7, None, 4)

    def test_mixed_input_parity_rejected(self):
        with pytest.raises(ArrayError):
            RowTriple(0, 3, 1)

    def test_output_on_input_parity_rejected(self):
        with pytest.raises(ArrayError):
            RowTriple(0, 2, 4)
        with pytest.raises(ArrayError):
            RowTriple(1, None, 3)

    def test_output_can_never_alias_an_input(self):
        # The parity rule structurally forbids out == in1/in2, which is
        # what makes every gate re-execution idempotent.
        for in1, in2 in itertools.product(range(0, 10, 2), repeat=2):
            t = RowTriple(in1, in2, 5)
            assert t.out not in t.input_rows

    def test_out_of_range(self):
        with pytest.raises(ArrayError):
            RowTriple(0, 2, TILE_DIM + 1)


class TestActivation:
    def test_replacement_semantics(self):
        tile = Tile()
        tile.activate_columns([3, 7])
        assert tile.active_columns == [3, 7]
        tile.activate_columns([9])
        assert tile.active_columns == [9]

    def test_duplicates_collapse(self):
        tile = Tile()
        tile.activate_columns([5, 5, 5])
        assert tile.active_columns == [5]

    def test_range(self):
        tile = Tile()
        tile.activate_range(10, 13)
        assert tile.active_columns == [10, 11, 12, 13]

    def test_partial_pulse_keeps_old_latch(self):
        tile = Tile()
        tile.activate_columns([1])
        tile.activate_columns([2], pulse_fraction=0.5)
        assert tile.active_columns == [1]

    def test_bounds(self):
        tile = Tile()
        with pytest.raises(ArrayError):
            tile.activate_columns([])
        with pytest.raises(ArrayError):
            tile.activate_columns([1, 2, 3, 4, 5, 6])
        with pytest.raises(ArrayError):
            tile.activate_range(9, 3)


class TestLogic:
    @pytest.mark.parametrize("kind", sorted(BOOL_ORACLE))
    @pytest.mark.parametrize("variant", [Technology.FUTURE_STT, Technology.FUTURE_SHE])
    def test_truth_tables_per_column(self, kind, variant):
        tile = Tile(variant=variant)
        rows = triple(kind)
        tile.activate_range(0, 3)
        for col, (a, b) in enumerate(itertools.product((0, 1), repeat=2)):
            tile.cells[rows.in1, col] = bool(a)
            if rows.in2 is not None:
                tile.cells[rows.in2, col] = bool(b)
        if not variant.is_she:
            tile.cells[rows.out, :4] = bool(PRESETS[kind])
        tile.logic_op(kind, rows)
        for col, (a, b) in enumerate(itertools.product((0, 1), repeat=2)):
            assert tile.cells[rows.out, col] == BOOL_ORACLE[kind](a, b), (kind, a, b)

    def test_only_active_columns_updated(self):
        tile = Tile()
        rows = RowTriple(0, 2, 1)
        tile.cells[0, :] = False  # NAND(0, 0) -> 1 everywhere if active
        tile.activate_columns([4])
        tile.logic_op("NAND", rows)
        assert tile.cells[1, 4]
        assert not tile.cells[1, 5]

    @pytest.mark.parametrize("kind", sorted(BOOL_ORACLE))
    def test_interrupt_and_rerun_equals_uninterrupted(self, kind):
        # Table-1 property: cut the pulse at any fraction, re-run to
        # completion, compare against the never-interrupted result.
        rows = triple(kind)
        for inputs in itertools.product((0, 1), repeat=2):
            for frac in (0.0, 0.25, 0.5, 0.75):
                plain, cut = Tile(), Tile()
                for t in (plain, cut):
                    t.activate_columns([0])
                    t.cells[rows.in1, 0] = bool(inputs[0])
                    if rows.in2 is not None:
                        t.cells[rows.in2, 0] = bool(inputs[1])
                    t.cells[rows.out, 0] = bool(PRESETS[kind])
                plain.logic_op(kind, rows)
                cut.logic_op(kind, rows, pulse_fraction=frac)
                cut.logic_op(kind, rows)  # re-execution after the cut
                assert np.array_equal(plain.cells, cut.cells), (kind, inputs, frac)

    def test_strict_preset_mode_flags_dirty_output(self):
        tile = Tile()
        tile.activate_columns([0])
        tile.cells[1, 0] = True  # NAND output row must be preset to 0
        with pytest.raises(PresetError):
            tile.logic_op("NAND", RowTriple(0, 2, 1), strict_preset=True)

    def test_arity_mismatch(self):
        tile = Tile()
        tile.activate_columns([0])
        with pytest.raises(ArrayError):
            tile.logic_op("NOT", RowTriple(0, 2, 1))


class TestMemory:
    def test_row_round_trip_through_buffer(self):
        tile = Tile()
        tile.activate_range(0, TILE_DIM - 1)
        buf = empty_buffer()
        buf[::3] = True
        tile.write_row(9, buf)
        assert np.array_equal(tile.read_row(9), buf)

    def test_write_row_masked_by_active(self):
        tile = Tile()
        tile.activate_columns([2])
        buf = np.ones(TILE_DIM, dtype=bool)
        tile.write_row(4, buf)
        assert tile.cells[4, 2]
        assert tile.cells[4].sum() == 1

    def test_read_is_nondestructive(self):
        tile = Tile()
        tile.cells[7, 100] = True
        before = tile.cells.copy()
        tile.read_row(7)
        assert np.array_equal(tile.cells, before)

    def test_write_bit_active_columns(self):
        tile = Tile()
        tile.activate_columns([1, 3])
        tile.write_bit(6, 1)
        assert tile.cells[6, 1] and tile.cells[6, 3] and not tile.cells[6, 2]

    def test_snapshot_round_trip(self):
        tile = Tile()
        tile.cells[:] = np.random.default_rng(3).random((TILE_DIM, TILE_DIM)) < 0.5
        clone = Tile.from_bytes(tile.to_bytes())
        assert np.array_equal(tile.cells, clone.cells)

    def test_snapshot_length_checked(self):
        with pytest.raises(ArrayError):
            Tile.from_bytes(b"\x00" * 17)


class TestCellAddress:
    def test_bounds(self):
        CellAddress(0, 0, 0)
        CellAddress(511, 1023, 1023)
        with pytest.raises(ArrayError):
            CellAddress(512, 0, 0)
        with pytest.raises(ArrayError):
            CellAddress(0, 1024, 0)
