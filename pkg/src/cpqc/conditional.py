"""Conditional parameterized quantum circuits.

A trained circuit evaluates one feature vector at a time.  Its conditional
form replaces every data-encoding rotation with a ladder of controlled
rotations off a control register, so that loading a probability vector onto
the register and reading the same observable off the target register yields
the distribution-weighted expectation of the model in a single evaluation:

    sum_i p_i f(x_i, theta)  ==  conditional expectation under P

Layout: one control register per feature, listed most significant first,
followed by the target register (a copy of the source circuit's qubits).
Register k holds n_k qubits and represents the uniform grid
x = step_k * index.  Because rotations about a fixed axis add angles, the
encoding R_a(x) equals the product of per-bit rotations R_a(step_k * 2^j)
controlled on the bit of value 2^j; register qubit j (0 = register MSB)
therefore controls the angle step_k * 2**(n_k - 1 - j).

``trivial_conditional`` is the brute-force alternative: one rotation per
data point, controlled on the register matching that point's full bit
pattern.  Its controlled-gate count is the data-set size per encoding block,
so it doubles with every added register qubit while the ladder construction
grows linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import (
    FIXED_GATES,
    Block,
    CircuitParseError,
    Circuit,
    _expect,
    _format_angle,
    _parse_float,
    _parse_gate,
    _parse_int,
)
from .sim import Observable, Program, ProgramGate, SRC_LIT, SRC_PARAM


@dataclass(frozen=True)
class ControlLayout:
    """Control-register shapes and grid steps for a conditional circuit."""

    register_sizes: tuple[int, ...]
    steps: tuple[float, ...]
    target_size: int

    @classmethod
    def dyadic(cls, register_sizes, target_size: int) -> "ControlLayout":
        """Default grids: 2**n_k points at multiples of 2*pi / 2**n_k."""
        sizes = tuple(int(n) for n in register_sizes)
        return cls(sizes, tuple(2.0 * math.pi / 2**n for n in sizes), target_size)

    def __post_init__(self):
        object.__setattr__(self, "register_sizes", tuple(self.register_sizes))
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        if not self.register_sizes:
            raise ValueError("need at least one control register")
        if len(self.steps) != len(self.register_sizes):
            raise ValueError("one grid step per register required")
        for n, s in zip(self.register_sizes, self.steps):
            if n < 1:
                raise ValueError("register size must be positive")
            if s <= 0 or s * (2**n - 1) >= 2 * math.pi:
                raise ValueError("grid must be strictly increasing within [0, 2*pi)")
        if self.target_size < 1:
            raise ValueError("target register must be non-empty")

    @property
    def num_registers(self) -> int:
        return len(self.register_sizes)

    @property
    def num_controls(self) -> int:
        return sum(self.register_sizes)

    @property
    def num_qubits(self) -> int:
        return self.num_controls + self.target_size

    def offset(self, register: int) -> int:
        return sum(self.register_sizes[:register])

    def grid(self, register: int) -> np.ndarray:
        n = self.register_sizes[register]
        return self.steps[register] * np.arange(2**n)


@dataclass(frozen=True)
class CtrlRot:
    """Singly-controlled rotation with a literal angle (ladder element)."""

    axis: str
    control: int
    target: int
    angle: float


@dataclass(frozen=True)
class PatternRot:
    """Rotation fired only when the control register matches a bit pattern."""

    axis: str
    controls: tuple[int, ...]
    pattern: tuple[int, ...]
    target: int
    angle: float


@dataclass(frozen=True)
class ConditionalCircuit:
    layout: ControlLayout
    entries: tuple
    num_params: int
    measured: tuple[int, ...]

    @property
    def num_qubits(self) -> int:
        return self.layout.num_qubits

    def observable(self) -> Observable:
        base = Observable(((1.0, tuple((q, "z") for q in self.measured)),))
        return base.shifted(self.layout.num_controls)

    def controlled_gate_count(self) -> int:
        return sum(1 for e in self.entries if isinstance(e, (CtrlRot, PatternRot)))

    def program(self) -> Program:
        pgates = []
        for e in self.entries:
            if isinstance(e, CtrlRot):
                pgates.append(
                    ProgramGate("r" + e.axis, e.target, (e.control,), SRC_LIT, value=e.angle)
                )
            elif isinstance(e, PatternRot):
                flips = [c for c, b in zip(e.controls, e.pattern) if b == 0]
                for c in flips:
                    pgates.append(ProgramGate("x", c))
                pgates.append(
                    ProgramGate("r" + e.axis, e.target, e.controls, SRC_LIT, value=e.angle)
                )
                for c in flips:
                    pgates.append(ProgramGate("x", c))
            elif e.gate == "cnot":
                pgates.append(ProgramGate("cnot", e.qubit, (e.control,)))
            elif e.gate in FIXED_GATES:
                pgates.append(ProgramGate(e.gate, e.qubit))
            elif e.slot is not None:
                pgates.append(ProgramGate(e.gate, e.qubit, source=SRC_PARAM, ref=e.slot))
            else:
                pgates.append(ProgramGate(e.gate, e.qubit, source=SRC_LIT, value=e.angle))
        return Program(self.num_qubits, pgates)

    def to_gate_sequence(self, theta: np.ndarray) -> list:
        """Concrete gates (stage-tagged) for resource accounting."""
        from .sim import GateOp

        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape[0] != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters")
        gates = []
        for e in self.entries:
            if isinstance(e, CtrlRot):
                gates.append(
                    GateOp("r" + e.axis, e.target, (e.control,), e.angle, stage="encoding")
                )
            elif isinstance(e, PatternRot):
                flips = [c for c, b in zip(e.controls, e.pattern) if b == 0]
                for c in flips:
                    gates.append(GateOp("x", c, stage="encoding"))
                gates.append(
                    GateOp("r" + e.axis, e.target, e.controls, e.angle, stage="encoding")
                )
                for c in flips:
                    gates.append(GateOp("x", c, stage="encoding"))
            elif e.gate == "cnot":
                gates.append(GateOp("cnot", e.qubit, (e.control,), stage="variational"))
            elif e.gate in FIXED_GATES:
                gates.append(GateOp(e.gate, e.qubit, stage="variational"))
            elif e.slot is not None:
                gates.append(
                    GateOp(e.gate, e.qubit, angle=float(theta[e.slot]), stage="variational")
                )
            else:
                gates.append(GateOp(e.gate, e.qubit, angle=e.angle, stage="variational"))
        return gates


@dataclass(frozen=True)
class ProductDistribution:
    """Independent per-register probability vectors."""

    vectors: tuple

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=np.float64) for v in self.vectors)
        for v in vecs:
            if np.any(v < 0):
                raise ValueError("probabilities must be nonnegative")
            if abs(float(v.sum()) - 1.0) > 1e-9:
                raise ValueError("each register distribution must sum to 1")
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def uniform(cls, sizes) -> "ProductDistribution":
        return cls(tuple(np.full(2**n, 1.0 / 2**n) for n in sizes))

    def joint(self) -> np.ndarray:
        out = np.array([1.0])
        for v in self.vectors:
            out = np.kron(out, v)
        return out

    def matches(self, layout: ControlLayout) -> bool:
        return tuple(len(v) for v in self.vectors) == tuple(
            2**n for n in layout.register_sizes
        )


def make_conditional(circuit: Circuit, layout: ControlLayout) -> ConditionalCircuit:
    """Replace each encoding rotation with its controlled-rotation ladder.

    Every other block is copied verbatim onto the target register (qubit
    indices shifted past the controls); parameter slots are shared with the
    source circuit.
    """
    if layout.num_registers != circuit.num_features:
        raise ValueError(
            f"layout has {layout.num_registers} registers for "
            f"{circuit.num_features} features"
        )
    if layout.target_size != circuit.num_qubits:
        raise ValueError("target register must match the source circuit size")
    shift = layout.num_controls
    entries: list = []
    for b in circuit.blocks:
        if b.is_encoding:
            k = b.feature
            n_k = layout.register_sizes[k]
            base = layout.offset(k)
            for j in range(n_k):
                angle = layout.steps[k] * 2 ** (n_k - 1 - j)
                entries.append(CtrlRot(b.axis, base + j, shift + b.qubit, angle))
        elif b.gate == "cnot":
            entries.append(Block.cnot(b.control + shift, b.qubit + shift))
        elif b.gate in FIXED_GATES:
            entries.append(Block.fixed(b.gate, b.qubit + shift))
        elif b.slot is not None:
            entries.append(Block.rot(b.axis, b.qubit + shift, b.slot))
        else:
            entries.append(Block.lit(b.axis, b.qubit + shift, b.angle))
    return ConditionalCircuit(layout, tuple(entries), circuit.num_params, circuit.measured)


def trivial_conditional(circuit: Circuit, xs, layout: ControlLayout) -> ConditionalCircuit:
    """Brute-force conditional form: one pattern-controlled rotation per point.

    Data point i is assigned the register pattern of index i; its rotations
    fire only on an exact pattern match, so arbitrary (not just uniform-grid)
    values are allowed.  Single-feature circuits only.
    """
    if circuit.num_features != 1 or layout.num_registers != 1:
        raise ValueError("the brute-force construction covers one feature only")
    if layout.target_size != circuit.num_qubits:
        raise ValueError("target register must match the source circuit size")
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    n = layout.register_sizes[0]
    if xs.shape[0] > 2**n:
        raise ValueError(f"at most {2**n} data points fit a {n}-qubit register")
    shift = layout.num_controls
    controls = tuple(range(n))
    entries: list = []
    for b in circuit.blocks:
        if b.is_encoding:
            for i, x in enumerate(xs):
                pattern = tuple((i >> (n - 1 - j)) & 1 for j in range(n))
                entries.append(PatternRot(b.axis, controls, pattern, shift + b.qubit, float(x)))
        elif b.gate == "cnot":
            entries.append(Block.cnot(b.control + shift, b.qubit + shift))
        elif b.gate in FIXED_GATES:
            entries.append(Block.fixed(b.gate, b.qubit + shift))
        elif b.slot is not None:
            entries.append(Block.rot(b.axis, b.qubit + shift, b.slot))
        else:
            entries.append(Block.lit(b.axis, b.qubit + shift, b.angle))
    return ConditionalCircuit(layout, tuple(entries), circuit.num_params, circuit.measured)


def basis_encode(x: float, register: int, layout: ControlLayout) -> str:
    """Bit pattern (register MSB first) of a grid value, e.g. 0.4 -> '100'."""
    step = layout.steps[register]
    n = layout.register_sizes[register]
    index = x / step
    rounded = int(round(index))
    if abs(index - rounded) > 1e-9 or not 0 <= rounded < 2**n:
        raise ValueError(f"{x!r} is not on the {n}-qubit grid with step {step!r}")
    return format(rounded, f"0{n}b")


def conditional_expectation(
    ccircuit: ConditionalCircuit,
    distribution: ProductDistribution,
    theta: np.ndarray,
    observable: Observable | None = None,
) -> float:
    """Expectation of the target-register observable with P loaded.

    ``observable`` is target-register-local (defaults to the source
    measurement); it is shifted past the control registers here.
    """
    if not distribution.matches(ccircuit.layout):
        raise ValueError("distribution shape does not match the control registers")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if theta.shape[0] != ccircuit.num_params:
        raise ValueError(f"expected {ccircuit.num_params} parameters")
    if observable is None:
        obs = ccircuit.observable()
    else:
        obs = observable.shifted(ccircuit.layout.num_controls)
    m = ccircuit.layout.target_size
    amps_controls = np.sqrt(distribution.joint())
    init = np.zeros(1 << ccircuit.num_qubits, dtype=np.complex128)
    init[np.arange(amps_controls.shape[0]) << m] = amps_controls
    prog = ccircuit.program()
    vals = prog.expectations(obs, None, theta, batch=1, init=init)
    return float(vals[0])


def grid_features(layout: ControlLayout) -> np.ndarray:
    """All grid combinations as feature rows, register order, first register
    most significant (matches the joint distribution's index order)."""
    grids = [layout.grid(k) for k in range(layout.num_registers)]
    mesh = np.meshgrid(*grids, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _walsh(values: np.ndarray) -> np.ndarray:
    """In-place-style fast Walsh transform: out[q] = sum_p (-1)^{p.q} in[p]."""
    out = values.copy()
    h = 1
    while h < out.shape[0]:
        for start in range(0, out.shape[0], 2 * h):
            x = out[start : start + h].copy()
            y = out[start + h : start + 2 * h].copy()
            out[start : start + h] = x + y
            out[start + h : start + 2 * h] = x - y
        h *= 2
    return out


def loader_gates(distribution: ProductDistribution, layout: ControlLayout) -> list:
    """Gate-level preparation of P on the control registers (stage "loader").

    Simulation injects sqrt(p) amplitudes directly; these gates exist so a
    complete circuit is expressible, and resource reports exclude them by
    default.  A uniform vector loads as a Hadamard layer; anything else
    splits the mass level by level, with each level's prefix-conditioned
    rotations emitted in the gray-code uniformly-controlled form (2^j
    plain rotations interleaved with 2^j CNOTs instead of explicit
    multi-controlled gates).
    """
    from .sim import GateOp

    if not distribution.matches(layout):
        raise ValueError("distribution shape does not match the control registers")
    gates = []
    for k, p in enumerate(distribution.vectors):
        base = layout.offset(k)
        n = layout.register_sizes[k]
        if np.max(np.abs(p - 1.0 / p.shape[0])) < 1e-12:
            gates.extend(GateOp("h", base + j, stage="loader") for j in range(n))
            continue
        for j in range(n):
            split = np.asarray(p, dtype=np.float64).reshape((1 << j, 2, -1)).sum(axis=2)
            mass = split.sum(axis=1)
            # massless prefixes never occur; any angle works, zero keeps it clean
            angles = np.where(
                mass > 1e-15,
                2.0 * np.arctan2(np.sqrt(split[:, 1]), np.sqrt(np.clip(split[:, 0], 0, None))),
                0.0,
            )
            target = base + j
            if j == 0:
                if abs(angles[0]) > 1e-15:
                    gates.append(GateOp("ry", target, (), float(angles[0]), stage="loader"))
                continue
            idx = np.arange(1 << j)
            rotations = _walsh(angles)[idx ^ (idx >> 1)] / (1 << j)
            if np.max(np.abs(rotations)) < 1e-15:
                continue
            if np.max(np.abs(rotations[1:])) < 1e-15:
                # every prefix shares one angle, no conditioning needed
                gates.append(GateOp("ry", target, (), float(rotations[0]), stage="loader"))
                continue
            for i in range(1 << j):
                if abs(rotations[i]) > 1e-15:
                    gates.append(
                        GateOp("ry", target, (), float(rotations[i]), stage="loader")
                    )
                changed = _lowest_set_bit(i + 1) if i + 1 < (1 << j) else j - 1
                control = base + (j - 1 - changed)
                gates.append(GateOp("cnot", target, (control,), stage="loader"))
    return gates


def _lowest_set_bit(value: int) -> int:
    return (value & -value).bit_length() - 1


@dataclass(frozen=True)
class PropositionReport:
    lhs: float
    rhs: float
    delta: float
    tolerance: float
    passed: bool


def verify_proposition(
    circuit: Circuit,
    ccircuit: ConditionalCircuit,
    distribution: ProductDistribution,
    theta: np.ndarray,
    tolerance: float = 1e-10,
) -> PropositionReport:
    """Check sum_i p_i f(x_i, theta) against the conditional expectation."""
    feats = grid_features(ccircuit.layout)
    weights = distribution.joint()
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    vals = circuit.program().expectations(circuit.observable(), feats, theta)
    lhs = float(np.dot(weights, vals))
    rhs = conditional_expectation(ccircuit, distribution, theta)
    delta = abs(lhs - rhs)
    return PropositionReport(lhs, rhs, delta, tolerance, delta <= tolerance)


# --- text format ---------------------------------------------------------


def serialize_conditional(cc: ConditionalCircuit, theta: np.ndarray | None = None) -> str:
    lines = [
        "cpqc-ir v1",
        "conditional",
        "registers " + " ".join(str(n) for n in cc.layout.register_sizes),
        "steps " + " ".join(_format_angle(s) for s in cc.layout.steps),
        f"target-qubits {cc.layout.target_size}",
        f"params {cc.num_params}",
        "measured " + " ".join(str(q) for q in cc.measured),
    ]
    for e in cc.entries:
        if isinstance(e, CtrlRot):
            lines.append(f"gate cr{e.axis} {e.control} {e.target} {_format_angle(e.angle)}")
        elif isinstance(e, PatternRot):
            bits = "".join(str(b) for b in e.pattern)
            lines.append(f"gate pr{e.axis} {e.target} {bits} {_format_angle(e.angle)}")
        elif e.gate == "cnot":
            lines.append(f"gate cnot {e.control} {e.qubit}")
        elif e.gate in FIXED_GATES:
            lines.append(f"gate {e.gate} {e.qubit}")
        elif e.slot is not None:
            lines.append(f"gate {e.gate} {e.qubit} p{e.slot}")
        else:
            lines.append(f"gate {e.gate} {e.qubit} {_format_angle(e.angle)}")
    if theta is not None:
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape[0] != cc.num_params:
            raise ValueError("theta length does not match circuit parameters")
        lines.append("theta " + " ".join(_format_angle(v) for v in theta))
    return "\n".join(lines) + "\n"


def _deserialize_conditional(reader):
    _expect(reader, "conditional")
    lineno, rt = _expect(reader, "registers")
    sizes = tuple(_parse_int(t, lineno, c, "register size") for t, c in rt[1:])
    lineno, st = _expect(reader, "steps")
    steps = tuple(_parse_float(t, lineno, c, "grid step") for t, c in st[1:])
    lineno, tt = _expect(reader, "target-qubits")
    target_size = _parse_int(tt[1][0], lineno, tt[1][1], "target size")
    lineno, pt = _expect(reader, "params")
    num_params = _parse_int(pt[1][0], lineno, pt[1][1], "parameter count")
    lineno, mt = _expect(reader, "measured")
    measured = tuple(_parse_int(t, lineno, c, "measured qubit") for t, c in mt[1:])
    try:
        layout = ControlLayout(sizes, steps, target_size)
    except ValueError as exc:
        raise CircuitParseError(str(exc), lineno)

    n = layout.num_controls
    entries: list = []
    theta = None
    while True:
        row = reader.next_row()
        if row is None:
            break
        lineno, tokens = row
        key, col = tokens[0]
        if key == "theta":
            theta = np.array(
                [_parse_float(t, lineno, c, "theta value") for t, c in tokens[1:]]
            )
            continue
        if key != "gate":
            raise CircuitParseError(f"unexpected directive {key!r}", lineno, col)
        kind, kcol = tokens[1]
        args = tokens[2:]
        if len(kind) == 3 and kind.startswith("cr") and kind[2] in "xyz":
            control = _parse_int(args[0][0], lineno, args[0][1], "control")
            target = _parse_int(args[1][0], lineno, args[1][1], "target")
            angle = _parse_float(args[2][0], lineno, args[2][1], "angle")
            entries.append(CtrlRot(kind[2], control, target, angle))
        elif len(kind) == 3 and kind.startswith("pr") and kind[2] in "xyz":
            target = _parse_int(args[0][0], lineno, args[0][1], "target")
            bits, bcol = args[1]
            if len(bits) != n or set(bits) - {"0", "1"}:
                raise CircuitParseError("pattern must be one bit per control qubit", lineno, bcol)
            angle = _parse_float(args[2][0], lineno, args[2][1], "angle")
            entries.append(
                PatternRot(kind[2], tuple(range(n)), tuple(int(b) for b in bits), target, angle)
            )
        else:
            try:
                entries.append(_parse_gate(tokens, lineno))
            except CircuitParseError:
                raise
            except ValueError as exc:
                raise CircuitParseError(str(exc), lineno, kcol)
    cc = ConditionalCircuit(layout, tuple(entries), num_params, measured)
    if theta is not None and theta.shape[0] != num_params:
        raise CircuitParseError("theta length does not match params", lineno)
    return cc, theta
