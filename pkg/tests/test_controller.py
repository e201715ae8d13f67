"""Controller: micro-step semantics, crash cuts, restart, attribution."""

import numpy as np
import pytest

from nvpim import compiler, isa
from nvpim.controller import (ArchState, ControllerError, Machine, PC_BITS,
                              PHASES, run)
from nvpim.power import CutSpec, SquareWave, ThrottleMode, ThrottlePolicy
from nvpim.tile import RowTriple


def tiny_program():
    """Activate a column, preset, one NAND, halt."""
    return [
        isa.ActivateColumns.of(1, [0]),
        isa.WriteBit(1, 5, 0),
        isa.Logic("NAND", 1, RowTriple(0, 2, 5)),
        isa.Halt(),
    ]


def loaded_machine(program=None) -> Machine:
    machine = Machine()
    machine.load_program(program or tiny_program())
    return machine


class TestArchState:
    def test_parity_selects_valid_pc(self):
        arch = ArchState(pc_a=3, pc_b=9, parity=0)
        assert arch.valid_pc == 3
        arch.parity = 1
        assert arch.valid_pc == 9

    def test_full_write_lands_in_invalid_register(self):
        arch = ArchState(pc_a=3, pc_b=0, parity=0)
        arch.write_invalid_pc(4)
        assert (arch.pc_a, arch.pc_b) == (3, 4)

    def test_torn_write_only_touches_high_bits(self):
        arch = ArchState(pc_a=0, pc_b=0x0000FF, parity=0)
        arch.write_invalid_pc(0xABCDEF, fraction=0.5)
        written = int(0.5 * PC_BITS)
        keep = (1 << (PC_BITS - written)) - 1
        assert arch.pc_b == (0xABCDEF & ~keep) | (0x0000FF & keep)
        assert arch.pc_a == 0  # valid register untouched

    def test_zero_fraction_write_is_noop(self):
        arch = ArchState(pc_b=7, parity=0)
        arch.write_invalid_pc(99, fraction=0.0)
        assert arch.pc_b == 7


class TestInstructionStorage:
    def test_program_bits_in_instruction_tile(self):
        machine = loaded_machine()
        for pc, instr in enumerate(machine.program):
            assert machine.fetch_word(pc) == isa.encode(instr)

    def test_pc_out_of_range(self):
        machine = loaded_machine()
        with pytest.raises(ControllerError):
            machine.fetch_word(99)


class TestStep:
    def test_full_step_commits(self):
        machine = loaded_machine()
        assert machine.step() is True
        assert machine.arch.parity == 1
        assert machine.arch.valid_pc == 1

    def test_phase_order_is_the_crash_safe_one(self):
        assert PHASES == ("Fetch", "Broadcast", "WritePC", "StoreAct", "FlipParity")

    def test_cut_before_commit_keeps_old_pc(self):
        for phase in ("Fetch", "Broadcast", "WritePC", "StoreAct"):
            machine = loaded_machine()
            assert machine.step(cut=(phase, 0.5)) is False
            assert machine.arch.valid_pc == 0, phase
            assert machine.arch.parity == 0

    def test_partial_flip_parity_does_not_commit(self):
        machine = loaded_machine()
        assert machine.step(cut=("FlipParity", 0.5)) is False
        assert machine.arch.parity == 0

    def test_stored_act_updated_only_by_activation(self):
        machine = loaded_machine()
        machine.step()
        assert machine.arch.stored_act == isa.encode(machine.program[0])
        machine.step()  # WriteBit must not touch it
        assert machine.arch.stored_act == isa.encode(machine.program[0])

    def test_torn_stored_act_keeps_previous_value(self):
        machine = loaded_machine()
        machine.step()
        before = machine.arch.stored_act
        # drive to the second activation of a two-activation program
        prog = [isa.ActivateColumns.of(1, [0]), isa.ActivateColumns.of(1, [3]),
                isa.Halt()]
        machine = loaded_machine(prog)
        machine.step()
        before = machine.arch.stored_act
        machine.step(cut=("StoreAct", 0.5))
        assert machine.arch.stored_act == before
        # but the latch itself already moved (broadcast completed)
        assert machine.tile(1).active_columns == [3]

    def test_halt_sets_flag_only_on_commit(self):
        machine = loaded_machine([isa.Halt()])
        machine.step(cut=("Broadcast", 1.0))
        assert not machine.halted
        machine.step()
        assert machine.halted
        with pytest.raises(ControllerError):
            machine.step()


class TestRestart:
    def test_reissues_stored_activation(self):
        machine = loaded_machine()
        machine.step()  # activation committed
        machine.tile(1).activate_columns([9])  # latch clobbered
        machine.restart()
        assert machine.tile(1).active_columns == [0]
        assert machine.ledger.restarts == 1
        assert machine.ledger.restore_e > 0

    def test_no_stored_act_is_free(self):
        machine = loaded_machine()
        machine.restart()
        assert machine.ledger.restore_e == 0


class TestAttribution:
    def test_duty_one_zeros(self):
        machine = loaded_machine()
        led = run(machine, SquareWave(duty=1.0), ThrottlePolicy())
        assert led.dead_e == 0.0
        assert led.restore_e == 0.0
        assert led.restore_t == 0.0
        assert led.reexecuted == 0 and led.restarts == 0
        assert led.instructions == 4

    def test_backup_energy_always_charged(self):
        machine = loaded_machine()
        led = run(machine)
        assert led.backup_e > 0

    def test_additivity_after_run(self):
        machine = loaded_machine()
        led = run(machine, SquareWave(duty=0.5), ThrottlePolicy())
        assert led.total_e == pytest.approx(
            led.productive_e + led.backup_e + led.dead_e + led.restore_e)

    def test_injected_cut_costs_dead_and_restore(self):
        machine = loaded_machine()
        led = run(machine, cut=CutSpec(instruction=2, phase="WritePC",
                                       fraction=0.5))
        assert machine.halted
        assert led.reexecuted == 1
        assert led.dead_e > 0
        assert led.restore_e > 0
        assert led.restarts == 1

    def test_at_most_one_reexecution_per_cut(self):
        for phase in PHASES:
            for frac in (0.25, 1.0):
                machine = loaded_machine()
                led = run(machine, cut=CutSpec(instruction=1, phase=phase,
                                               fraction=frac))
                assert led.reexecuted <= 1, (phase, frac)

    def test_cut_state_equals_golden(self, add8_machine_factory):
        golden = add8_machine_factory()
        run(golden)
        machine = add8_machine_factory()
        run(machine, cut=CutSpec(instruction=40, phase="Broadcast", fraction=0.5))
        assert golden.data_state() == machine.data_state()


class TestThrottle:
    def test_power_budget_respected(self, add8_machine_factory):
        budget = 200e-6
        machine = add8_machine_factory()
        led = run(machine, SquareWave(duty=1.0), ThrottlePolicy(budget=budget))
        worst = max(machine.cost_at(pc).total_energy
                    for pc in range(len(machine.program)))
        assert led.total_e / led.total_t <= budget + worst / led.total_t

    def test_static_period_covers_worst_instruction(self, add8_machine_factory):
        machine = add8_machine_factory()
        policy = ThrottlePolicy(budget=1e-9)  # absurdly tight: energy-bound
        period = machine.worst_case_period(policy)
        worst_e = max(machine.cost_at(pc).total_energy
                      for pc in range(len(machine.program)))
        assert period == pytest.approx(worst_e / 1e-9)

    def test_per_instruction_mode_runs(self):
        machine = loaded_machine()
        led = run(machine, policy=ThrottlePolicy(mode=ThrottleMode.PER_INSTRUCTION))
        assert machine.halted and led.instructions == 4


class TestIntermittentExecution:
    def test_result_independent_of_duty(self, add8_machine_factory,
                                        add8_layout, add8_operands):
        av, bv = add8_operands
        expected = av + bv
        states = []
        for duty in (1.0, 0.25, 0.03):
            machine = add8_machine_factory()
            run(machine, SquareWave(duty=duty), ThrottlePolicy(), max_time=30.0)
            got = compiler.read_values(machine.tile(1),
                                       add8_layout.register("sum"))
            assert np.array_equal(got, expected), f"duty {duty}"
            states.append(machine.data_state())
        assert states[0] == states[1] == states[2]

    def test_total_time_grows_as_duty_falls(self, add8_machine_factory):
        times = []
        for duty in (1.0, 0.25, 0.01):
            machine = add8_machine_factory()
            led = run(machine, SquareWave(duty=duty), ThrottlePolicy(),
                      max_time=60.0)
            times.append(led.total_t)
        assert times[0] <= times[1] <= times[2]
        assert times[2] > times[0]

    def test_wall_clock_includes_off_time(self):
        machine = loaded_machine()
        led = run(machine, SquareWave(frequency=16e3, duty=0.5))
        assert led.total_t >= sum(machine.cost_at(pc).active_time
                                  for pc in range(len(machine.program)))
