"""SVM models: loading, quantization, and the fixed-point reference oracle.

One binary machine per class (one-vs-all), polynomial kernel of degree 2.
The quantized form follows the compiler's fixed-point contract exactly:

    inputs and SV elements: 8-bit unsigned
    dot accumulator:        32-bit
    gamma:                  2^-s (right shift by s)
    u = (dot >> s) + c0_fp  16-bit, non-negative
    u^2:                    32-bit
    alpha_fp = round(alpha * 2^a), 16-bit signed (a = alpha fractional bits)
    term = sign(alpha) * ((|alpha_fp| * u^2) >> 11), 32-bit
    score_c = wrap32(sum(terms) - rho_fp_c),  rho_fp = round(rho * 2^(a-11))

`oracle_infer` computes this bit-exactly in plain integers; the generated
program must agree on every input.  Training is out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

TERM_SHIFT = 11
ALPHA_BITS = 16  # signed
U_BITS = 16


class SvmError(ValueError):
    pass


def wrap32(value: int) -> int:
    """Two's-complement wraparound into signed 32-bit."""
    return ((int(value) + (1 << 31)) % (1 << 32)) - (1 << 31)


@dataclass(frozen=True)
class SvmModel:
    n_classes: int
    n_features: int
    gamma: float
    coef0: float
    rho: tuple[float, ...]  # one bias per class
    machines: tuple[tuple[tuple[float, tuple[float, ...]], ...], ...]
    degree: int = 2
    # quantized mirrors (populated by quantize)
    shift_s: int | None = None
    alpha_frac_bits: int | None = None
    c0_fp: int | None = None
    rho_fp: tuple[int, ...] = ()
    quantized_machines: tuple = ()
    quant_error: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.degree != 2:
            raise SvmError(f"only degree-2 polynomial kernels are supported, "
                           f"got degree {self.degree}")
        if self.n_classes < 2:
            raise SvmError("need at least two classes")
        if len(self.rho) != self.n_classes or len(self.machines) != self.n_classes:
            raise SvmError("per-class blocks do not match the class count")
        for cls, machine in enumerate(self.machines):
            for alpha, sv in machine:
                if len(sv) != self.n_features:
                    raise SvmError(f"class {cls}: support vector has "
                                   f"{len(sv)} features, expected {self.n_features}")

    @property
    def is_quantized(self) -> bool:
        return self.shift_s is not None

    @property
    def n_support_vectors(self) -> int:
        return sum(len(m) for m in self.machines)


# ---------------------------------------------------------------------------
# text format


def save_model(model: SvmModel, path: str | Path) -> None:
    lines = [f"classes {model.n_classes}",
             f"features {model.n_features}",
             f"degree {model.degree}",
             f"gamma {model.gamma!r}",
             f"coef0 {model.coef0!r}"]
    for cls in range(model.n_classes):
        lines.append(f"class {cls}")
        lines.append(f"rho {model.rho[cls]!r}")
        for alpha, sv in model.machines[cls]:
            lines.append(" ".join([f"alpha {alpha!r}"] + [repr(v) for v in sv]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> SvmModel:
    header: dict[str, float] = {}
    blocks: list[tuple[float, list]] = []
    rho: list[float] = []
    machines: list[tuple] = []
    current: list | None = None

    def close_block() -> None:
        nonlocal current
        if current is not None:
            machines.append(tuple(current))
        current = None

    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            if key in ("classes", "features", "degree"):
                header[key] = int(rest[0])
            elif key in ("gamma", "coef0"):
                header[key] = float(rest[0])
            elif key == "class":
                close_block()
                if int(rest[0]) != len(machines):
                    raise SvmError(f"class blocks out of order at line {lineno}")
                current = []
            elif key == "rho":
                if current is None:
                    raise SvmError(f"rho outside a class block at line {lineno}")
                rho.append(float(rest[0]))
            elif key == "alpha":
                if current is None:
                    raise SvmError(f"alpha outside a class block at line {lineno}")
                current.append((float(rest[0]), tuple(float(v) for v in rest[1:])))
            else:
                raise SvmError(f"unknown directive {key!r} at line {lineno}")
        except (IndexError, ValueError) as exc:
            raise SvmError(f"malformed model file at line {lineno}: {raw!r}") from exc
    close_block()
    for k in ("classes", "features", "degree", "gamma", "coef0"):
        if k not in header:
            raise SvmError(f"model file missing header line {k!r}")
    return SvmModel(n_classes=int(header["classes"]),
                    n_features=int(header["features"]),
                    degree=int(header["degree"]),
                    gamma=header["gamma"], coef0=header["coef0"],
                    rho=tuple(rho), machines=tuple(machines))


# ---------------------------------------------------------------------------
# quantization


def quantize(model: SvmModel, shift_s: int | None = None,
             alpha_frac_bits: int | None = None) -> SvmModel:
    """Deterministic quantization per the fixed-point contract.

    gamma maps to the nearest power-of-two shift (or an explicit one);
    alpha fractional bits default to the widest that fits 16-bit signed,
    at least TERM_SHIFT.  Raises on widths that cannot hold the model.
    """
    if model.gamma <= 0:
        raise SvmError("gamma must be positive")
    s = shift_s if shift_s is not None else round(-math.log2(model.gamma))
    if not 0 <= s <= 24:
        raise SvmError(f"gamma {model.gamma} maps to shift {s}, outside [0, 24]")
    c0_fp = round(model.coef0)
    if c0_fp < 0:
        raise SvmError("coef0 must quantize to a non-negative integer "
                       "(u is computed unsigned)")
    max_alpha = max((abs(a) for m in model.machines for a, _ in m), default=0.0)
    if alpha_frac_bits is None:
        a_bits = ALPHA_BITS - 1 - max(0, math.ceil(math.log2(max_alpha + 1e-12))
                                      if max_alpha > 0 else 0)
        a_bits = min(ALPHA_BITS - 1, a_bits)
    else:
        a_bits = alpha_frac_bits
    if a_bits < TERM_SHIFT:
        raise SvmError(f"alpha magnitude {max_alpha:.3g} needs fewer than "
                       f"{TERM_SHIFT} fractional bits; widths overflow")

    u_max = ((model.n_features * 255 * 255) >> s) + c0_fp
    if u_max >= 1 << (U_BITS - 1):
        raise SvmError(f"u bound {u_max} overflows {U_BITS}-bit; "
                       f"increase the gamma shift")

    max_sv_err = 0.0
    max_alpha_err = 0.0
    q_machines = []
    for machine in model.machines:
        lanes = []
        for alpha, sv in machine:
            a_fp = round(alpha * (1 << a_bits))
            if not -(1 << 15) <= a_fp < 1 << 15:
                raise SvmError(f"alpha {alpha} overflows 16-bit at "
                               f"{a_bits} fractional bits")
            sv_arr = np.asarray(sv, dtype=float)
            sv_q = np.clip(np.rint(sv_arr), 0, 255).astype(np.uint8)
            max_sv_err = max(max_sv_err, float(np.max(np.abs(sv_arr - sv_q)))
                             if sv_arr.size else 0.0)
            max_alpha_err = max(max_alpha_err, abs(alpha - a_fp / (1 << a_bits)))
            lanes.append((int(a_fp), sv_q))
        q_machines.append(tuple(lanes))
    rho_fp = tuple(round(r * (1 << (a_bits - TERM_SHIFT))) for r in model.rho)
    report = {
        "shift_s": s,
        "alpha_frac_bits": a_bits,
        "max_alpha_error": max_alpha_err,
        "max_sv_error": max_sv_err,
        "gamma_error": abs(model.gamma - 2.0 ** -s),
        "coef0_error": abs(model.coef0 - c0_fp),
    }
    return replace(model, shift_s=s, alpha_frac_bits=a_bits, c0_fp=c0_fp,
                   rho_fp=rho_fp, quantized_machines=tuple(q_machines),
                   quant_error=report)


# ---------------------------------------------------------------------------
# inference


def _check_input(model: SvmModel, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.int64)
    if arr.shape != (model.n_features,):
        raise SvmError(f"input has shape {arr.shape}, expected "
                       f"({model.n_features},)")
    if arr.min() < 0 or arr.max() > 255:
        raise SvmError("input features must be 8-bit unsigned")
    return arr


def oracle_infer(model: SvmModel, x) -> tuple[list[int], int]:
    """Bit-exact fixed-point scores and the argmax class (lowest-index
    tie-break).  This is the contract the generated program must match."""
    if not model.is_quantized:
        raise SvmError("oracle_infer needs a quantized model")
    arr = _check_input(model, x)
    s = model.shift_s
    scores: list[int] = []
    for cls in range(model.n_classes):
        score = wrap32(-model.rho_fp[cls])
        for a_fp, sv_q in model.quantized_machines[cls]:
            dot = int(np.dot(arr, sv_q.astype(np.int64)))
            u = (dot >> s) + model.c0_fp
            usq = (u * u) % (1 << 32)
            term = ((abs(a_fp) * usq) >> TERM_SHIFT) % (1 << 32)
            score = wrap32(score + (term if a_fp >= 0 else -term))
        scores.append(score)
    best = max(range(model.n_classes), key=lambda c: (scores[c], -c))
    return scores, best


def float_infer(model: SvmModel, x) -> tuple[list[float], int]:
    """Reference float inference (for accuracy-loss comparisons)."""
    arr = _check_input(model, x).astype(float)
    scores = []
    for cls in range(model.n_classes):
        total = -model.rho[cls]
        for alpha, sv in model.machines[cls]:
            k = (model.gamma * float(np.dot(arr, np.asarray(sv)))
                 + model.coef0) ** 2
            total += alpha * k
        scores.append(total)
    best = max(range(model.n_classes), key=lambda c: (scores[c], -c))
    return scores, best


# ---------------------------------------------------------------------------
# datasets


def load_dataset(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """CSV rows of label,f1,...,fF with 8-bit integer features."""
    labels, rows = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            labels.append(int(parts[0]))
            rows.append([int(v) for v in parts[1:]])
        except ValueError as exc:
            raise SvmError(f"malformed dataset row at line {lineno}") from exc
    X = np.asarray(rows, dtype=np.int64)
    if X.size and (X.min() < 0 or X.max() > 255):
        raise SvmError("dataset features must be 8-bit unsigned")
    return X.astype(np.uint8), np.asarray(labels, dtype=np.int64)


def save_dataset(X, y, path: str | Path) -> None:
    lines = [",".join([str(int(label))] + [str(int(v)) for v in row])
             for label, row in zip(y, X)]
    Path(path).write_text("\n".join(lines) + "\n")
