"""Circuit intermediate representation.

A circuit is an ordered list of blocks, one gate per block, applied first to
last.  Rotation blocks source their angle from one of three places:

* a feature slot (``feature``) -- data-encoding rotation, angle = x[k]
* a parameter slot (``slot``)  -- trainable rotation, angle = theta[q]
* a literal (``angle``)        -- fixed rotation baked into the circuit

Fixed blocks are sx, x, h, and cnot.  Parameter slots 0..Q-1 are each used
exactly once; features may repeat (re-uploading).  The measured qubits
define the readout observable, a Z product.

Text format (one construct per line, ``#`` comments allowed)::

    cpqc-ir v1
    qubits 3
    features 1
    params 8
    measured 0
    gate sx 1
    gate rz 1 f0        # encoding rotation, feature 0
    gate rz 1 p0        # trainable rotation, parameter slot 0
    gate ry 2 0.25      # literal rotation
    gate cnot 2 1       # control first, then target
    theta 0.93963 2.51976 ...   (optional trained parameters)

``deserialize`` dispatches to the conditional-circuit reader when the file
carries a ``conditional`` marker line (see ``conditional``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .sim import GateOp, Observable, Program, ProgramGate, SRC_FEATURE, SRC_LIT, SRC_PARAM

ROT_GATES = ("rx", "ry", "rz")
FIXED_GATES = ("sx", "x", "h")


class CircuitParseError(ValueError):
    """Parse failure with 1-based line and column of the offending token."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Block:
    gate: str
    qubit: int
    control: int | None = None
    feature: int | None = None
    slot: int | None = None
    angle: float | None = None

    @classmethod
    def enc(cls, axis: str, qubit: int, feature: int) -> "Block":
        return cls("r" + axis, qubit, feature=feature)

    @classmethod
    def rot(cls, axis: str, qubit: int, slot: int) -> "Block":
        return cls("r" + axis, qubit, slot=slot)

    @classmethod
    def lit(cls, axis: str, qubit: int, angle: float) -> "Block":
        return cls("r" + axis, qubit, angle=float(angle))

    @classmethod
    def fixed(cls, gate: str, qubit: int) -> "Block":
        return cls(gate, qubit)

    @classmethod
    def cnot(cls, control: int, target: int) -> "Block":
        return cls("cnot", target, control=control)

    @property
    def is_rotation(self) -> bool:
        return self.gate in ROT_GATES

    @property
    def is_encoding(self) -> bool:
        return self.feature is not None

    @property
    def is_trainable(self) -> bool:
        return self.slot is not None

    @property
    def is_entangling(self) -> bool:
        return self.gate == "cnot"

    @property
    def axis(self) -> str:
        return self.gate[1]

    def qubits(self) -> tuple[int, ...]:
        if self.control is not None:
            return (self.control, self.qubit)
        return (self.qubit,)

    def validate(self) -> None:
        if self.gate == "cnot":
            if self.control is None:
                raise ValueError("cnot block needs a control qubit")
            if self.control == self.qubit:
                raise ValueError("cnot control equals target")
            return
        if self.control is not None:
            raise ValueError(f"{self.gate} block does not take a control")
        refs = (self.feature is not None) + (self.slot is not None) + (self.angle is not None)
        if self.gate in ROT_GATES:
            if refs != 1:
                raise ValueError("rotation block needs exactly one of feature/slot/angle")
        elif self.gate in FIXED_GATES:
            if refs:
                raise ValueError(f"{self.gate} block takes no angle source")
        else:
            raise ValueError(f"unknown block gate {self.gate!r}")


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    num_features: int
    num_params: int
    blocks: tuple[Block, ...]
    measured: tuple[int, ...] = (0,)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "measured", tuple(self.measured))
        seen_slots = set()
        for b in self.blocks:
            b.validate()
            for q in b.qubits():
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"block qubit {q} out of range")
            if b.feature is not None and not 0 <= b.feature < self.num_features:
                raise ValueError(f"feature {b.feature} out of range")
            if b.slot is not None:
                if not 0 <= b.slot < self.num_params:
                    raise ValueError(f"parameter slot {b.slot} out of range")
                if b.slot in seen_slots:
                    raise ValueError(f"parameter slot {b.slot} used twice")
                seen_slots.add(b.slot)
        if len(seen_slots) != self.num_params:
            raise ValueError("every parameter slot must be used exactly once")
        if not self.measured:
            raise ValueError("need at least one measured qubit")
        for q in self.measured:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"measured qubit {q} out of range")

    def observable(self) -> Observable:
        return Observable(((1.0, tuple((q, "z") for q in self.measured)),))

    def to_gate_sequence(self, x: np.ndarray, theta: np.ndarray) -> list[GateOp]:
        """Bind features and parameters, producing concrete gates in order."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if x.shape[0] != self.num_features:
            raise ValueError(f"expected {self.num_features} features, got {x.shape[0]}")
        if theta.shape[0] != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters, got {theta.shape[0]}")
        gates = []
        for b in self.blocks:
            if b.gate == "cnot":
                gates.append(GateOp("cnot", b.qubit, (b.control,)))
            elif b.gate in FIXED_GATES:
                gates.append(GateOp(b.gate, b.qubit))
            elif b.feature is not None:
                gates.append(GateOp(b.gate, b.qubit, angle=float(x[b.feature])))
            elif b.slot is not None:
                gates.append(GateOp(b.gate, b.qubit, angle=float(theta[b.slot])))
            else:
                gates.append(GateOp(b.gate, b.qubit, angle=b.angle))
        return gates

    def program(self) -> Program:
        """Compile to the batched runner."""
        pgates = []
        for b in self.blocks:
            if b.gate == "cnot":
                pgates.append(ProgramGate("cnot", b.qubit, (b.control,)))
            elif b.gate in FIXED_GATES:
                pgates.append(ProgramGate(b.gate, b.qubit))
            elif b.feature is not None:
                pgates.append(ProgramGate(b.gate, b.qubit, source=SRC_FEATURE, ref=b.feature))
            elif b.slot is not None:
                pgates.append(ProgramGate(b.gate, b.qubit, source=SRC_PARAM, ref=b.slot))
            else:
                pgates.append(ProgramGate(b.gate, b.qubit, source=SRC_LIT, value=b.angle))
        return Program(self.num_qubits, pgates)

    def encoding_count(self) -> int:
        return sum(1 for b in self.blocks if b.is_encoding)


def renumber_slots(blocks: list[Block], theta: np.ndarray | None = None):
    """Renumber parameter slots in block order; remap theta to match.

    Returns (blocks, theta, num_params).  Slot values in the input only need
    to be distinct.
    """
    mapping: dict[int, int] = {}
    out = []
    for b in blocks:
        if b.slot is not None:
            mapping[b.slot] = len(mapping)
            out.append(replace(b, slot=mapping[b.slot]))
        else:
            out.append(b)
    new_theta = None
    if theta is not None:
        new_theta = np.zeros(len(mapping))
        for old, new in mapping.items():
            new_theta[new] = theta[old]
    return out, new_theta, len(mapping)


# --- text format ---------------------------------------------------------


def _format_angle(value: float) -> str:
    return repr(float(value))


def _gate_line(b: Block) -> str:
    if b.gate == "cnot":
        return f"gate cnot {b.control} {b.qubit}"
    if b.gate in FIXED_GATES:
        return f"gate {b.gate} {b.qubit}"
    if b.feature is not None:
        return f"gate {b.gate} {b.qubit} f{b.feature}"
    if b.slot is not None:
        return f"gate {b.gate} {b.qubit} p{b.slot}"
    return f"gate {b.gate} {b.qubit} {_format_angle(b.angle)}"


def serialize(circuit: Circuit, theta: np.ndarray | None = None) -> str:
    lines = [
        "cpqc-ir v1",
        f"qubits {circuit.num_qubits}",
        f"features {circuit.num_features}",
        f"params {circuit.num_params}",
        "measured " + " ".join(str(q) for q in circuit.measured),
    ]
    lines.extend(_gate_line(b) for b in circuit.blocks)
    if theta is not None:
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape[0] != circuit.num_params:
            raise ValueError("theta length does not match circuit parameters")
        lines.append("theta " + " ".join(_format_angle(v) for v in theta))
    return "\n".join(lines) + "\n"


class _Reader:
    """Tokenized line reader tracking positions for parse errors."""

    def __init__(self, text: str):
        self.rows = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0]
            if not body.strip():
                continue
            tokens = []
            col = 1
            for tok in body.split():
                col = body.index(tok, col - 1) + 1
                tokens.append((tok, col))
                col += len(tok)
            self.rows.append((lineno, tokens))
        self.pos = 0

    def next_row(self):
        if self.pos >= len(self.rows):
            return None
        row = self.rows[self.pos]
        self.pos += 1
        return row

    def peek_key(self):
        if self.pos >= len(self.rows):
            return None
        return self.rows[self.pos][1][0][0]


def _parse_int(tok: str, lineno: int, col: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CircuitParseError(f"expected integer {what}, got {tok!r}", lineno, col)


def _parse_float(tok: str, lineno: int, col: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise CircuitParseError(f"expected number {what}, got {tok!r}", lineno, col)


def _expect(reader: _Reader, key: str):
    row = reader.next_row()
    if row is None:
        raise CircuitParseError(f"missing {key!r} line", reader.rows[-1][0] + 1 if reader.rows else 1)
    lineno, tokens = row
    if tokens[0][0] != key:
        raise CircuitParseError(f"expected {key!r}, got {tokens[0][0]!r}", lineno, tokens[0][1])
    return lineno, tokens


def _parse_gate(tokens, lineno) -> Block:
    kind, kcol = tokens[1]
    args = tokens[2:]
    if kind == "cnot":
        if len(args) != 2:
            raise CircuitParseError("cnot takes control and target", lineno, kcol)
        control = _parse_int(args[0][0], lineno, args[0][1], "control")
        target = _parse_int(args[1][0], lineno, args[1][1], "target")
        return Block.cnot(control, target)
    if kind in FIXED_GATES:
        if len(args) != 1:
            raise CircuitParseError(f"{kind} takes one qubit", lineno, kcol)
        return Block.fixed(kind, _parse_int(args[0][0], lineno, args[0][1], "qubit"))
    if kind in ROT_GATES:
        if len(args) != 2:
            raise CircuitParseError(f"{kind} takes qubit and angle source", lineno, kcol)
        qubit = _parse_int(args[0][0], lineno, args[0][1], "qubit")
        src, scol = args[1]
        if src.startswith("f"):
            return Block.enc(kind[1], qubit, _parse_int(src[1:], lineno, scol, "feature"))
        if src.startswith("p"):
            return Block.rot(kind[1], qubit, _parse_int(src[1:], lineno, scol, "slot"))
        return Block.lit(kind[1], qubit, _parse_float(src, lineno, scol, "angle"))
    raise CircuitParseError(f"unknown gate kind {kind!r}", lineno, kcol)


def deserialize(text: str):
    """Parse a .cpqc document.

    Returns (Circuit, theta | None) for plain circuits and
    (ConditionalCircuit, theta | None) for conditional ones.
    """
    reader = _Reader(text)
    lineno, tokens = _expect(reader, "cpqc-ir")
    if len(tokens) < 2 or tokens[1][0] != "v1":
        raise CircuitParseError("unsupported format version", lineno, tokens[-1][1])
    if reader.peek_key() == "conditional":
        from .conditional import _deserialize_conditional

        return _deserialize_conditional(reader)

    lineno, qt = _expect(reader, "qubits")
    num_qubits = _parse_int(qt[1][0], lineno, qt[1][1], "qubit count")
    lineno, ft = _expect(reader, "features")
    num_features = _parse_int(ft[1][0], lineno, ft[1][1], "feature count")
    lineno, pt = _expect(reader, "params")
    num_params = _parse_int(pt[1][0], lineno, pt[1][1], "parameter count")
    lineno, mt = _expect(reader, "measured")
    measured = tuple(_parse_int(t, lineno, c, "measured qubit") for t, c in mt[1:])

    blocks: list[Block] = []
    theta = None
    while True:
        row = reader.next_row()
        if row is None:
            break
        lineno, tokens = row
        key, col = tokens[0]
        if key == "gate":
            try:
                blocks.append(_parse_gate(tokens, lineno))
            except CircuitParseError:
                raise
            except ValueError as exc:
                raise CircuitParseError(str(exc), lineno, col)
        elif key == "theta":
            theta = np.array(
                [_parse_float(t, lineno, c, "theta value") for t, c in tokens[1:]]
            )
        else:
            raise CircuitParseError(f"unexpected directive {key!r}", lineno, col)
    try:
        circuit = Circuit(num_qubits, num_features, num_params, tuple(blocks), measured)
    except ValueError as exc:
        raise CircuitParseError(str(exc), lineno if reader.rows else 1)
    if theta is not None and theta.shape[0] != num_params:
        raise CircuitParseError("theta length does not match params", lineno)
    return circuit, theta
