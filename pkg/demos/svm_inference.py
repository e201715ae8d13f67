"""End-to-end SVM inference: model file -> fixed-point kernel -> array.

Builds a small two-class degree-2 polynomial SVM by hand, quantizes it to
the fixed-point contract, compiles it to the gate-level ISA (one support
vector per column lane), and runs the program on the array.  The array
scores must match the integer reference oracle bit for bit; the float
model is shown alongside for scale.

Run:  python3 demos/svm_inference.py
"""

import numpy as np

from nvpim import compiler, svm
from nvpim.tile import Tile


def build_model() -> svm.SvmModel:
    rng = np.random.default_rng(7)
    machines = []
    for cls in range(2):
        lanes = []
        for i in range(4):
            alpha = (1 if i % 2 == 0 else -1) * rng.uniform(0.2, 1.5)
            sv = tuple(float(v) for v in rng.integers(0, 256, 6))
            lanes.append((alpha, sv))
        machines.append(tuple(lanes))
    return svm.SvmModel(n_classes=2, n_features=6, gamma=2.0 ** -10,
                        coef0=1.0, rho=(0.35, -0.8),
                        machines=tuple(machines))


def main():
    model = svm.quantize(build_model())
    print(f"model: {model.n_classes} classes, {model.n_features} features, "
          f"{model.n_support_vectors} support vectors")
    print(f"quantization: gamma -> >>{model.shift_s}, "
          f"alpha -> {model.alpha_frac_bits} fractional bits, "
          f"max alpha error {model.quant_error['max_alpha_error']:.2e}")

    program = compiler.codegen_svm(model)
    counts = program.metadata["opcode_counts"]
    print(f"compiled kernel: {len(program.instructions)} instructions "
          f"({counts.get('NAND', 0)} NAND, {counts.get('AND', 0)} AND, "
          f"{counts.get('SET0', 0) + counts.get('SET1', 0)} presets)")
    print(f"lanes occupy columns {program.layout.columns[0]}.."
          f"{program.layout.columns[1]} of tile {program.layout.tile}")

    rng = np.random.default_rng(99)
    for trial in range(4):
        x = rng.integers(0, 256, model.n_features)
        tile = Tile()
        compiler.preload_svm_model(tile, program, model)
        compiler.preload_svm_input(tile, program, x)
        compiler.execute_program(tile, program.instructions)
        scores, best = compiler.read_svm_scores(tile, program)
        oracle_scores, oracle_best = svm.oracle_infer(model, x)
        float_scores, _ = svm.float_infer(model, x)
        match = "bit-exact" if scores == oracle_scores else "MISMATCH"
        print(f"\ninput {trial}: x = {[int(v) for v in x]}")
        print(f"  array scores : {scores}  -> class {best}  ({match})")
        print(f"  oracle scores: {oracle_scores}  -> class {oracle_best}")
        print(f"  float scores : [{float_scores[0]:.3f}, {float_scores[1]:.3f}]")
        assert scores == oracle_scores and best == oracle_best


if __name__ == "__main__":
    main()
