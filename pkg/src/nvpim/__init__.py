"""nvpim: simulator and compiler for a non-volatile in-memory logic
accelerator operating under intermittent, energy-harvesting power.

Layers, bottom up:

- ``device``: MTJ cell physics, threshold-logic gate semantics,
  drive-voltage windows, per-operation latency/energy costs.
- ``tile``: the 1024x1024 cell array with column activation, row-parity
  checking, and idempotent gate application.
- ``isa``: 64-bit instruction words, strict encoder/decoder, assembler.
- ``controller``: micro-stepped execution with non-volatile architectural
  state, crash cuts, restarts, and run() under a power trace.
- ``power`` / ``metrics``: supply waveforms, throttling, and the
  Backup/Dead/Restore energy ledger.
- ``crash``: golden-state fault-injection sweep.
- ``compiler`` / ``svm``: bit-serial arithmetic and degree-2 polynomial
  SVM inference lowered to the ISA, plus the fixed-point oracle.
"""

from .device import (DEVICE_PRESETS, CostConfig, DeviceParams, GateKind,
                     GATES, MtjState, OpClass, Technology, VoltageWindow,
                     future_she, future_stt, gate_semantics, modern_stt,
                     op_cost, solve_drive_voltage)
from .tile import TILE_DIM, CellAddress, RowTriple, Tile
from .isa import (Halt, Instruction, Logic, ReadRow, WriteBit, WriteRow,
                  ActivateColumns, ActivateRange, assemble, decode,
                  disassemble, encode, load_program, save_program)
from .metrics import Category, EnergyLedger, report
from .power import (CutSpec, ExplicitTrace, SquareWave, ThrottleMode,
                    ThrottlePolicy)
from .controller import ArchState, Machine, run
from .crash import sweep
from .compiler import (CodegenConfig, Emitter, LayoutPlan, Program,
                       check_preset_discipline, codegen_svm, execute_program,
                       layout_report, lower_add, lower_binary_dot,
                       lower_fulladd, lower_mult, lower_sub, plan_layout)
from .svm import (SvmModel, float_infer, load_dataset, load_model,
                  oracle_infer, quantize, save_model)

__version__ = "0.1.0"
