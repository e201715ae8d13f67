"""Drive-voltage margins for threshold logic gates.

Every gate is a single current-threshold operation: the drive voltage must
push the switching current through the worst-case resistive path of the
input cells while staying below the threshold of every path that must not
switch.  This script prints the feasible [Vmin, Vmax] window for each gate
kind on each device preset, then shows how the window collapses when the
tunnel-magnetoresistance ratio degrades (r_ap -> r_p).

Run:  python3 demos/gate_margins.py
"""

from dataclasses import replace

from nvpim.device import DEVICE_PRESETS, GATES, solve_drive_voltage


def print_windows(params, title):
    print(f"\n{title}")
    print(f"  {'gate':<6} {'Vmin (mV)':>10} {'Vmax (mV)':>10} {'margin':>8}")
    for name, kind in GATES.items():
        w = solve_drive_voltage(kind, params)
        if w.feasible:
            margin = (w.v_max - w.v_min) / w.v_min
            print(f"  {name:<6} {w.v_min * 1e3:>10.2f} {w.v_max * 1e3:>10.2f}"
                  f" {margin:>7.1%}")
        else:
            print(f"  {name:<6} {'--- infeasible ---':>29}")


def main():
    for preset in ("modern_stt", "future_stt", "future_she"):
        print_windows(DEVICE_PRESETS[preset](), f"preset: {preset}")

    # Degrade the TMR ratio of the future STT device until the AP and P
    # resistances coincide: the inputs stop carrying information and every
    # window closes.
    base = DEVICE_PRESETS["future_stt"]()
    print("\nTMR degradation (future_stt, NAND window):")
    for ratio in (10.4, 4.0, 2.0, 1.3, 1.0):
        params = replace(base, r_ap=base.r_p * ratio)
        w = solve_drive_voltage(GATES["NAND"], params)
        verdict = (f"[{w.v_min * 1e3:7.2f}, {w.v_max * 1e3:7.2f}] mV"
                   if w.feasible else "window closed")
        print(f"  r_ap/r_p = {ratio:5.2f}:  {verdict}")


if __name__ == "__main__":
    main()
