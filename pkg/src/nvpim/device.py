"""MTJ cell model and threshold-switching gate semantics.

Cells are magnetic tunnel junctions: the parallel (P) state has low
resistance and reads as logic 0, the anti-parallel (AP) state has high
resistance and reads as logic 1.  A two-input gate puts the input cells in
parallel, in series with the output cell; whether the output switches is a
threshold condition on the current through that path.  Because the write
current has a fixed direction per gate type, a gate can only ever move its
output toward one value, which is what makes re-executing an interrupted
gate safe.

Two cell variants are modelled: STT, where the output must be preset and
switching is a threshold event, and SHE, where a separate write channel
decouples the output state from the drive path, so gates behave as plain
functional assignment with no preset.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence


class MtjState(enum.IntEnum):
    """P = parallel, low resistance, logic 0. AP = anti-parallel, logic 1."""

    P = 0
    AP = 1

    @property
    def logic(self) -> int:
        return int(self)


class Technology(enum.Enum):
    MODERN_STT = "modern_stt"
    FUTURE_STT = "future_stt"
    FUTURE_SHE = "future_she"

    @property
    def is_she(self) -> bool:
        return self is Technology.FUTURE_SHE


class DeviceError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    """Electrical and timing parameters of one MTJ cell plus its access path.

    Resistances in ohms, times in seconds, currents in amperes.
    ``r_she_channel`` is only meaningful for the SHE variant.
    """

    r_p: float
    r_ap: float
    t_switch: float
    i_switch: float
    r_transistor: float = 1e3
    r_she_channel: float = 0.0
    technology: Technology = Technology.FUTURE_STT

    def __post_init__(self) -> None:
        # r_ap == r_p is allowed as a degenerate device: every drive-voltage
        # window then collapses to empty, which the margin check reports.
        if not (self.r_ap >= self.r_p > 0):
            raise DeviceError(f"need r_ap >= r_p > 0, got r_p={self.r_p}, r_ap={self.r_ap}")
        if self.t_switch <= 0 or self.i_switch <= 0:
            raise DeviceError("t_switch and i_switch must be positive")
        if self.r_transistor < 0 or self.r_she_channel < 0:
            raise DeviceError("resistances must be non-negative")

    def resistance(self, value: int) -> float:
        return self.r_ap if value else self.r_p


def modern_stt() -> DeviceParams:
    return DeviceParams(r_p=3.15e3, r_ap=7.34e3, t_switch=3e-9, i_switch=40e-6,
                        technology=Technology.MODERN_STT)


def future_stt() -> DeviceParams:
    return DeviceParams(r_p=7.34e3, r_ap=76.39e3, t_switch=1e-9, i_switch=3e-6,
                        technology=Technology.FUTURE_STT)


def future_she() -> DeviceParams:
    # The SHE channel resistance is not published; 500 ohm is a plausible
    # heavy-metal channel value and is configurable.
    return DeviceParams(r_p=7.34e3, r_ap=76.39e3, t_switch=1e-9, i_switch=3e-6,
                        r_she_channel=500.0, technology=Technology.FUTURE_SHE)


DEVICE_PRESETS: dict[str, Callable[[], DeviceParams]] = {
    "modern_stt": modern_stt,
    "future_stt": future_stt,
    "future_she": future_she,
}


class Direction(enum.Enum):
    SET_ONLY = "set"      # output can only move 0 -> 1
    RESET_ONLY = "reset"  # output can only move 1 -> 0


@dataclass(frozen=True)
class GateKind:
    name: str
    arity: int
    preset: int
    direction: Direction
    truth: Callable[..., int]  # boolean function of the inputs

    def __post_init__(self) -> None:
        # A set-only gate starts from preset 0, a reset-only gate from preset 1.
        expected = 0 if self.direction is Direction.SET_ONLY else 1
        if self.preset != expected:
            raise DeviceError(f"{self.name}: preset inconsistent with direction")
        if self.arity not in (1, 2):
            raise DeviceError("gates have at most two inputs")

    @property
    def target(self) -> int:
        return 1 - self.preset

    def predicate(self, inputs: Sequence[int]) -> bool:
        """True when the drive current is sufficient to switch the output."""
        return int(self.truth(*inputs)) == self.target


# NOT is set-only: preset 0, switch iff the input is 0 (low resistance lets
# enough current through).  COPY is the complementary arrangement: preset 1
# and reset-only, switching to 0 exactly when the input is 0, so the output
# reproduces the input.  Both choices give each gate a feasible drive-voltage
# window (the should-switch path always has lower resistance than the
# should-not-switch path).
GATES: dict[str, GateKind] = {
    "NAND": GateKind("NAND", 2, 0, Direction.SET_ONLY, lambda a, b: 1 - (a & b)),
    "AND": GateKind("AND", 2, 1, Direction.RESET_ONLY, lambda a, b: a & b),
    "NOR": GateKind("NOR", 2, 0, Direction.SET_ONLY, lambda a, b: 1 - (a | b)),
    "OR": GateKind("OR", 2, 1, Direction.RESET_ONLY, lambda a, b: a | b),
    "NOT": GateKind("NOT", 1, 0, Direction.SET_ONLY, lambda a: 1 - a),
    "COPY": GateKind("COPY", 1, 1, Direction.RESET_ONLY, lambda a: a),
}


def gate_semantics(name: str) -> GateKind:
    try:
        return GATES[name.upper()]
    except KeyError:
        raise DeviceError(f"unknown gate {name!r}") from None


def apply_gate_stt(inputs: Sequence[int], output: int, kind: GateKind,
                   pulse_fraction: float = 1.0,
                   completion_threshold: float = 1.0) -> int:
    """Threshold semantics of one STT gate pulse.

    The output switches toward the gate's direction target iff the inputs
    put the path resistance below threshold and the delivered pulse fraction
    reaches ``completion_threshold``.  A partial pulse leaves the output
    unchanged; the output never moves against the gate direction, so
    repeating a pulse is equivalent to one longer pulse.
    """
    if len(inputs) != kind.arity:
        raise DeviceError(f"{kind.name} expects {kind.arity} inputs, got {len(inputs)}")
    if kind.predicate(inputs) and pulse_fraction >= completion_threshold:
        return kind.target
    return int(output)


def apply_gate_she(inputs: Sequence[int], output: int, kind: GateKind) -> int:
    """SHE gates need no preset: the output becomes the boolean result."""
    if len(inputs) != kind.arity:
        raise DeviceError(f"{kind.name} expects {kind.arity} inputs, got {len(inputs)}")
    return int(kind.truth(*inputs))


@dataclass(frozen=True)
class VoltageWindow:
    v_min: float
    v_max: float

    @property
    def feasible(self) -> bool:
        return self.v_min < self.v_max

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.v_min + self.v_max)


def _input_combos(arity: int) -> list[tuple[int, ...]]:
    if arity == 1:
        return [(0,), (1,)]
    return [(0, 0), (0, 1), (1, 0), (1, 1)]


def path_resistance(inputs: Sequence[int], kind: GateKind, params: DeviceParams) -> float:
    """Series-parallel resistance of the drive path: the input cells in
    parallel, in series with the output cell at its preset value and one
    access transistor per cell on the path."""
    rs = [params.resistance(v) for v in inputs]
    if any(r <= 0 for r in rs):
        raise DeviceError("non-positive input resistance")
    inv = sum(1.0 / r for r in rs)
    r_par = 1.0 / inv
    n_transistors = len(inputs) + 1
    return r_par + params.resistance(kind.preset) + n_transistors * params.r_transistor


def solve_drive_voltage(kind: GateKind, params: DeviceParams) -> VoltageWindow:
    """Drive-voltage window for an STT gate.

    The voltage must push at least the switching current through every
    should-switch input combination (sets ``v_min``) while staying below the
    switching current for every should-not-switch combination (``v_max``).
    An empty window (v_min >= v_max) means the gate is infeasible for these
    device parameters; that is a valid result, not an error.
    """
    switch_r: list[float] = []
    hold_r: list[float] = []
    for combo in _input_combos(kind.arity):
        r = path_resistance(combo, kind, params)
        (switch_r if kind.predicate(combo) else hold_r).append(r)
    if not switch_r or not hold_r:
        raise DeviceError(f"{kind.name}: degenerate predicate")
    return VoltageWindow(v_min=params.i_switch * max(switch_r),
                         v_max=params.i_switch * min(hold_r))


class OpClass(enum.Enum):
    LOGIC = "logic"
    WRITE_BIT = "write_bit"
    READ_ROW = "read_row"
    WRITE_ROW = "write_row"
    BACKUP_WRITE = "backup_write"
    FETCH = "fetch"
    ACTIVATE = "activate"


@dataclass(frozen=True)
class CostConfig:
    """Knobs for the per-operation latency/energy model.

    The peripheral share scales core energy so the periphery consumes the
    configured fraction of the total; the drive voltage defaults to the
    midpoint of each gate's feasible window.  Backup writes are charged per
    bit.  All values are deterministic configuration, not measurements.
    """

    peripheral_share: float = 0.0
    v_drive: float | None = None
    t_setup: float = 1e-9
    backup_bit_energy: float = 1e-16
    backup_bit_time: float = 1e-10
    activate_energy: float = 5e-15
    read_bit_energy: float = 1e-16
    fetch_amortization: int = 16
    she_switch_energy: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.peripheral_share < 1:
            raise DeviceError("peripheral_share must be in [0, 1)")
        if self.fetch_amortization < 1:
            raise DeviceError("fetch_amortization must be >= 1")

    def with_periphery(self, core: float) -> float:
        return core / (1.0 - self.peripheral_share)


def logic_drive_voltage(kind: GateKind, params: DeviceParams, cfg: CostConfig) -> float:
    if cfg.v_drive is not None:
        return cfg.v_drive
    window = solve_drive_voltage(kind, params)
    if not window.feasible:
        raise DeviceError(f"{kind.name}: no feasible drive-voltage window")
    return window.midpoint


def op_cost(op_class: OpClass, params: DeviceParams, cfg: CostConfig,
            kind: GateKind | None = None, bits: int = 1) -> tuple[float, float]:
    """(latency_s, energy_J) of one array operation.

    Logic energy is rated on the worst should-switch path at the drive
    voltage for the full pulse; writes drive the switching current through
    one cell.  Row-wide operations charge per-bit costs across the full
    1024-bit row.  Deterministic for a fixed configuration.
    """
    if op_class is OpClass.LOGIC:
        if kind is None:
            raise DeviceError("logic cost needs a gate kind")
        latency = params.t_switch + cfg.t_setup
        if params.technology.is_she:
            r_path = params.r_she_channel + (kind.arity + 1) * params.r_transistor
            core = params.i_switch ** 2 * r_path * params.t_switch + cfg.she_switch_energy
        else:
            v = logic_drive_voltage(kind, params, cfg)
            r_worst = max(path_resistance(c, kind, params)
                          for c in _input_combos(kind.arity) if kind.predicate(c))
            core = v * v * params.t_switch / r_worst
        return latency, cfg.with_periphery(core)

    if op_class in (OpClass.WRITE_BIT, OpClass.WRITE_ROW):
        if params.technology.is_she:
            r_cell = params.r_she_channel + 2 * params.r_transistor
        else:
            r_cell = params.r_ap + params.r_transistor
        core = params.i_switch ** 2 * r_cell * params.t_switch * bits
        return params.t_switch + cfg.t_setup, cfg.with_periphery(core)

    if op_class is OpClass.READ_ROW:
        return cfg.t_setup, cfg.with_periphery(cfg.read_bit_energy * bits)

    if op_class is OpClass.FETCH:
        lat, en = op_cost(OpClass.READ_ROW, params, cfg, bits=1024)
        return lat / cfg.fetch_amortization, en / cfg.fetch_amortization

    if op_class is OpClass.BACKUP_WRITE:
        return cfg.backup_bit_time * bits, cfg.backup_bit_energy * bits

    if op_class is OpClass.ACTIVATE:
        return cfg.t_setup, cfg.with_periphery(cfg.activate_energy)

    raise DeviceError(f"unknown op class {op_class!r}")


_CONFIG_KEYS = {"r_p", "r_ap", "t_switch", "i_switch", "r_transistor",
                "r_she_channel", "technology"}
_COST_KEYS = {"peripheral_share", "v_drive", "t_setup", "backup_bit_energy",
              "backup_bit_time", "activate_energy", "read_bit_energy",
              "fetch_amortization", "she_switch_energy"}


def load_device_config(path: str | Path) -> tuple[DeviceParams, CostConfig]:
    """Load device parameters and cost knobs from a JSON config file.

    A ``preset`` key selects a named parameter set; explicit keys override
    preset values.
    """
    raw = json.loads(Path(path).read_text())
    return device_config_from_dict(raw)


def device_config_from_dict(raw: dict) -> tuple[DeviceParams, CostConfig]:
    raw = dict(raw)
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in DEVICE_PRESETS:
            raise DeviceError(f"unknown device preset {preset!r}")
        params = DEVICE_PRESETS[preset]()
    else:
        params = future_stt()
    dev_overrides = {}
    cost_overrides = {}
    for key, value in raw.items():
        if key in _CONFIG_KEYS:
            dev_overrides[key] = Technology(value) if key == "technology" else value
        elif key in _COST_KEYS:
            cost_overrides[key] = value
        else:
            raise DeviceError(f"unknown device config key {key!r}")
    if dev_overrides:
        params = replace(params, **dev_overrides)
    return params, CostConfig(**cost_overrides)
