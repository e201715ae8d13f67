"""Command-line front end.

Subcommands: run, sweep-duty, fuzz-crash, margin, assemble, disassemble,
codegen-svm.  A JSON config file (--config) provides defaults; flags win.
Exit codes: 0 success, 1 usage/config error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import compiler, crash, isa, svm
from .controller import Machine, run
from .device import (DEVICE_PRESETS, GATES, CostConfig, DeviceParams,
                     Technology, device_config_from_dict, future_stt,
                     solve_drive_voltage)
from .metrics import report
from .power import (ExplicitTrace, SquareWave, ThrottleMode, ThrottlePolicy,
                    load_interval_trace)


class CliError(Exception):
    """Usage or configuration error (exit code 1)."""


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise CliError("config file must hold a JSON object")
    return raw


def _setting(args, config: dict, name: str, default=None):
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    return config.get(name, default)


def _device(args, config) -> tuple[DeviceParams, CostConfig]:
    spec = _setting(args, config, "device", "future_stt")
    if isinstance(spec, dict):
        params, cost = device_config_from_dict(spec)
    elif spec in DEVICE_PRESETS:
        params, cost = DEVICE_PRESETS[spec](), CostConfig()
    elif isinstance(spec, str) and Path(spec).exists():
        params, cost = device_config_from_dict(json.loads(Path(spec).read_text()))
    else:
        raise CliError(f"unknown device preset or config file: {spec!r}")
    share = _setting(args, config, "peripheral-share")
    if share is not None:
        from dataclasses import replace
        cost = replace(cost, peripheral_share=float(share))
    return params, cost


def _trace(args, config, duty: float | None = None):
    trace_path = _setting(args, config, "trace")
    if trace_path is not None:
        return load_interval_trace(trace_path)
    duty = duty if duty is not None else float(_setting(args, config, "duty", 1.0))
    freq = float(_setting(args, config, "frequency", 16e3))
    return SquareWave(frequency=freq, duty=duty)


def _policy(args, config) -> ThrottlePolicy:
    budget = float(_setting(args, config, "budget", 200e-6))
    mode = _setting(args, config, "throttle-mode", "static")
    try:
        return ThrottlePolicy(budget=budget, mode=ThrottleMode(mode))
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _load_program(args, config) -> list[isa.Instruction]:
    path = _setting(args, config, "program")
    if path is None:
        raise CliError("no program given (--program or config)")
    try:
        return isa.load_program(path)
    except (OSError, isa.IsaError) as exc:
        raise CliError(f"cannot load program {path}: {exc}") from exc


def _apply_preload(machine: Machine, spec: dict) -> None:
    for tile, row, col, value in spec.get("bits", []):
        machine.tile(int(tile)).cells[int(row), int(col)] = bool(value)
    for reg in spec.get("registers", []):
        tile = machine.tile(int(reg.get("tile", 1)))
        cols = reg.get("columns")
        cols = (int(cols[0]), int(cols[1])) if cols else None
        compiler.write_values(tile, tuple(int(r) for r in reg["rows"]),
                              reg["values"], cols=cols)


def _preload(args, config, machine: Machine) -> None:
    path = _setting(args, config, "preload")
    if path is None:
        return
    try:
        _apply_preload(machine, json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"bad preload spec {path}: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _build_machine(args, config) -> Machine:
    params, cost = _device(args, config)
    machine = Machine(params, cost)
    machine.load_program(_load_program(args, config))
    _preload(args, config, machine)
    return machine


# -- subcommands -----------------------------------------------------------


def cmd_run(args, config) -> int:
    duty = float(_setting(args, config, "duty", 1.0))
    machine = _build_machine(args, config)
    ledger = run(machine, _trace(args, config), _policy(args, config),
                 max_time=float(_setting(args, config, "max-time", 10.0)))
    _emit(report([(duty, ledger)], fmt=_setting(args, config, "format", "csv")),
          args.out)
    return 0


def cmd_sweep_duty(args, config) -> int:
    duties = _setting(args, config, "duties", "1.0,0.25,0.01")
    if isinstance(duties, str):
        duties = [float(d) for d in duties.split(",")]
    rows = []
    for duty in duties:  # merged in duty order, deterministically
        machine = _build_machine(args, config)
        ledger = run(machine, _trace(args, config, duty=duty),
                     _policy(args, config),
                     max_time=float(_setting(args, config, "max-time", 10.0)))
        rows.append((duty, ledger))
    _emit(report(rows, fmt=_setting(args, config, "format", "csv")), args.out)
    return 0


def cmd_fuzz_crash(args, config) -> int:
    fractions = _setting(args, config, "fractions", "0.25,0.5,0.75")
    if isinstance(fractions, str):
        fractions = tuple(float(f) for f in fractions.split(","))

    def make_machine() -> Machine:
        return _build_machine(args, config)

    verdict = crash.sweep(make_machine, fractions=tuple(fractions),
                          boundaries_only=bool(_setting(
                              args, config, "boundaries-only", False)))
    _emit(verdict.summary() + "\n", args.out)
    return 0 if verdict.all_passed else 2


def cmd_margin(args, config) -> int:
    params, cost = _device(args, config)
    lines = ["Gate,Vmin,Vmax,Feasible"]
    any_infeasible = False
    for name, kind in GATES.items():
        window = solve_drive_voltage(kind, params)
        feasible = window.feasible
        any_infeasible |= not feasible
        lines.append(f"{name},{window.v_min!r},{window.v_max!r},"
                     f"{'yes' if feasible else 'no'}")
    _emit("\n".join(lines) + "\n", args.out)
    return 2 if any_infeasible else 0


def cmd_assemble(args, config) -> int:
    try:
        program = isa.assemble(Path(args.input).read_text())
    except (OSError, isa.AsmError) as exc:
        raise CliError(str(exc)) from exc
    if args.out:
        isa.save_program(program, args.out)
    else:
        sys.stdout.buffer.write(isa.to_words(program))
    return 0


def cmd_disassemble(args, config) -> int:
    try:
        program = isa.from_words(Path(args.input).read_bytes())
    except (OSError, isa.DecodeError) as exc:
        raise CliError(str(exc)) from exc
    _emit(isa.disassemble(program), args.out)
    return 0


def cmd_codegen_svm(args, config) -> int:
    try:
        model = svm.load_model(args.model)
        if not model.is_quantized:
            model = svm.quantize(model)
        target = Technology(_setting(args, config, "target", "future_stt"))
        program = compiler.codegen_svm(
            model, compiler.CodegenConfig(target=target))
    except (OSError, svm.SvmError, compiler.CompileError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    out = args.out or "svm_program.bin"
    isa.save_program(program.instructions, out)
    layout_path = args.layout_out or str(Path(out).with_suffix(".layout.json"))
    Path(layout_path).write_text(compiler.layout_report(program))
    sys.stdout.write(f"wrote {len(program.instructions)} instructions to {out}\n"
                     f"wrote layout report to {layout_path}\n")
    return 0


# -- argument parsing ------------------------------------------------------


def _common(sub: argparse.ArgumentParser, program: bool = True) -> None:
    sub.add_argument("--config", help="JSON config file (flags override it)")
    sub.add_argument("--device", help="device preset name or JSON config path")
    sub.add_argument("--peripheral-share", type=float)
    sub.add_argument("--out", help="output path (default stdout)")
    if program:
        sub.add_argument("--program", help="program file (.bin or assembly text)")
        sub.add_argument("--preload", help="JSON data preload spec")
        sub.add_argument("--budget", type=float, help="power budget in watts")
        sub.add_argument("--throttle-mode", choices=["static", "per_instruction"])
        sub.add_argument("--frequency", type=float, help="supply wave Hz")
        sub.add_argument("--trace", help="CSV of explicit on-intervals")
        sub.add_argument("--max-time", type=float)
        sub.add_argument("--format", choices=["csv", "json"])
        sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvpim",
        description="Simulator and compiler for a non-volatile in-memory "
                    "logic accelerator under intermittent power.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("run", help="execute a program and report the ledger")
    _common(p)
    p.add_argument("--duty", type=float)
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("sweep-duty", help="run once per duty cycle")
    _common(p)
    p.add_argument("--duties", help="comma-separated duty cycles")
    p.set_defaults(func=cmd_sweep_duty)

    p = subs.add_parser("fuzz-crash", help="single-cut sweep vs golden state")
    _common(p)
    p.add_argument("--fractions", help="comma-separated mid-pulse fractions")
    p.add_argument("--boundaries-only", action="store_true", default=None)
    p.set_defaults(func=cmd_fuzz_crash)

    p = subs.add_parser("margin", help="per-gate drive-voltage windows")
    _common(p, program=False)
    p.set_defaults(func=cmd_margin)

    p = subs.add_parser("assemble", help="assembly text -> binary program")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_assemble, config=None)

    p = subs.add_parser("disassemble", help="binary program -> assembly text")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_disassemble, config=None)

    p = subs.add_parser("codegen-svm", help="compile an SVM model file")
    _common(p, program=False)
    p.add_argument("--model", required=True)
    p.add_argument("--target", choices=[t.value for t in Technology])
    p.add_argument("--layout-out")
    p.set_defaults(func=cmd_codegen_svm)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _load_config(getattr(args, "config", None))
    try:
        return args.func(args, config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (isa.IsaError, svm.SvmError, compiler.CompileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
