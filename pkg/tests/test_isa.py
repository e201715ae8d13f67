"""ISA: strict encode/decode, assembler round-trips, invalid-word rejection."""

import random

import pytest

from nvpim import isa
from nvpim.tile import RowTriple

UNARY = ("NOT", "COPY")
BINARY = ("AND", "NAND", "OR", "NOR")


def random_instruction(rng: random.Random) -> isa.Instruction:
    tile = rng.randrange(512)
    choice = rng.randrange(8)
    if choice == 0:
        kind = rng.choice(UNARY)
        in1 = rng.randrange(1024)
        out = rng.choice([r for r in range(1024) if r % 2 != in1 % 2])
        return isa.Logic(kind, tile, RowTriple(in1, None, out))
    if choice == 1:
        kind = rng.choice(BINARY)
        in1 = rng.randrange(1024)
        in2 = rng.choice([r for r in range(1024) if r % 2 == in1 % 2])
        out = rng.choice([r for r in range(1024) if r % 2 != in1 % 2])
        return isa.Logic(kind, tile, RowTriple(in1, in2, out))
    if choice == 2:
        return isa.WriteBit(tile, rng.randrange(1024), rng.randrange(2))
    if choice == 3:
        return isa.ReadRow(tile, rng.randrange(1024))
    if choice == 4:
        return isa.WriteRow(tile, rng.randrange(1024))
    if choice == 5:
        cols = rng.sample(range(1024), rng.randrange(1, 6))
        return isa.ActivateColumns.of(tile, cols)
    if choice == 6:
        start = rng.randrange(1024)
        return isa.ActivateRange(tile, start, rng.randrange(start, 1024))
    return isa.Halt()


class TestEncodeDecode:
    def test_halt_word(self):
        assert isa.encode(isa.Halt()) == isa.HALT_WORD
        assert isinstance(isa.decode(isa.HALT_WORD), isa.Halt)

    def test_known_encoding_fields(self):
        word = isa.encode(isa.Logic("NAND", 3, RowTriple(2, 4, 5)))
        assert word >> 60 == isa.OP_NAND
        assert (word >> 51) & 0x1FF == 3

    def test_fuzz_round_trip_10k(self):
        rng = random.Random(20250823)
        for _ in range(10_000):
            instr = random_instruction(rng)
            word = isa.encode(instr)
            assert 0 <= word < 1 << 64
            assert isa.decode(word) == instr

    def test_fuzzed_invalid_words_never_misdecode(self):
        # Random 64-bit words either decode canonically (re-encoding gives
        # the identical word) or raise DecodeError -- nothing in between.
        rng = random.Random(99)
        rejected = 0
        for _ in range(10_000):
            word = rng.getrandbits(64)
            try:
                instr = isa.decode(word)
            except isa.DecodeError:
                rejected += 1
                continue
            assert isa.encode(instr) == word
        assert rejected > 0

    def test_reserved_opcodes_rejected(self):
        for op in isa.RESERVED_OPCODES:
            with pytest.raises(isa.DecodeError):
                isa.decode(op << 60)

    def test_nonzero_padding_rejected(self):
        with pytest.raises(isa.DecodeError):
            isa.decode(isa.HALT_WORD | 1)
        word = isa.encode(isa.ReadRow(0, 5))
        with pytest.raises(isa.DecodeError):
            isa.decode(word | 1)  # low padding bit

    def test_unary_in2_must_mirror_in1(self):
        good = isa.encode(isa.Logic("NOT", 0, RowTriple(2, None, 3)))
        # flip the mirrored in2 field to another value
        bad = good ^ (1 << 31)
        with pytest.raises(isa.DecodeError):
            isa.decode(bad)

    def test_writebit_value_bit_must_match_opcode(self):
        word = isa.encode(isa.WriteBit(0, 7, 1))
        assert (word >> 60) == isa.OP_SET1
        with pytest.raises(isa.DecodeError):
            isa.decode((isa.OP_SET0 << 60) | (word & ~(0xF << 60)))

    def test_actcol_must_be_canonical(self):
        word = isa.encode(isa.ActivateColumns.of(1, [5, 3]))
        assert isa.decode(word) == isa.ActivateColumns(1, (3, 5))
        # unsorted duplicate padding other than the sentinel is rejected
        with pytest.raises(isa.IsaError):
            isa.ActivateColumns(1, (5, 3))

    def test_parity_violating_word_rejected(self):
        word = isa.encode(isa.Logic("NAND", 0, RowTriple(2, 4, 5)))
        # shift in2 from 4 to 3: mixed input parity in the raw word
        bad = (word & ~(0x3FF << 31)) | (3 << 31)
        with pytest.raises(isa.DecodeError):
            isa.decode(bad)


class TestAssembly:
    def test_program_text_round_trip(self):
        rng = random.Random(7)
        program = [random_instruction(rng) for _ in range(200)]
        text = isa.disassemble(program)
        assert isa.assemble(text) == program

    def test_comments_and_blank_lines(self):
        text = """
        # a comment
        ACTCOL 1 3 3 5   # duplicates collapse
        NAND 1 0 2 5
        HALT
        """
        program = isa.assemble(text)
        assert program[0] == isa.ActivateColumns(1, (3, 5))
        assert len(program) == 3

    def test_error_reports_line_number(self):
        with pytest.raises(isa.AsmError) as err:
            isa.assemble("HALT\nNAND 0 1 2 3\n")
        assert "2" in str(err.value)

    def test_unknown_mnemonic(self):
        with pytest.raises(isa.AsmError):
            isa.assemble("XOR 0 1 2 3")


class TestProgramFiles:
    def test_binary_round_trip(self, tmp_path):
        rng = random.Random(11)
        program = [random_instruction(rng) for _ in range(64)]
        path = tmp_path / "prog.bin"
        isa.save_program(program, path)
        assert isa.load_program(path) == program
        assert path.stat().st_size == 64 * isa.WORD_BYTES

    def test_text_round_trip(self, tmp_path):
        program = [isa.ActivateRange(1, 0, 9), isa.Halt()]
        path = tmp_path / "prog.asm"
        isa.save_program(program, path)
        assert isa.load_program(path) == program

    def test_truncated_binary_rejected(self):
        with pytest.raises(isa.DecodeError):
            isa.from_words(b"\x00" * 12)
