"""Dense statevector simulator.

States are vectors of 2**n complex amplitudes.  Qubit 0 is the most
significant bit of the basis index: for n = 2 the basis order is
|00>, |01>, |10>, |11> with qubit 0 the left bit.

Gate kinds: rx, ry, rz (rotations, half-angle convention
R_a(t) = exp(-i t sigma_a / 2)), sx (square root of X), x, h, u3 (generic
single-qubit gate U(theta, phi, lam)), and cnot.  Any gate may carry extra
control qubits; a controlled gate acts on the target only where every
control bit is 1.  cnot is stored with its control in ``controls``.

Two kernel lanes execute the amplitude updates (see ``backend``).  The
public functions here are single-state and copy-on-write; the ``Program``
path at the bottom runs batches of states with per-row angles and is the
hot path for training and grid evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import get_kernels

ROTATION_KINDS = {"rx": 0, "ry": 1, "rz": 2}
FIXED_KINDS = ("sx", "x", "h", "cnot", "u3")
NORM_TOL = 1e-12

_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED_MATS = {
    "x": (0j, 1 + 0j, 1 + 0j, 0j),
    "h": (_SQ2 + 0j, _SQ2 + 0j, _SQ2 + 0j, -_SQ2 + 0j),
    "sx": (0.5 + 0.5j, 0.5 - 0.5j, 0.5 - 0.5j, 0.5 + 0.5j),
    "cnot": (0j, 1 + 0j, 1 + 0j, 0j),
}


@dataclass(frozen=True)
class GateOp:
    """One concrete gate application."""

    kind: str
    target: int
    controls: tuple[int, ...] = ()
    angle: float = 0.0
    params: tuple[float, ...] = ()
    stage: str = ""

    def qubits(self) -> tuple[int, ...]:
        return self.controls + (self.target,)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c = math.cos(0.5 * theta)
    s = math.sin(0.5 * theta)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ]
    )


def gate_matrix(gate: GateOp) -> np.ndarray:
    """2x2 matrix of the gate's action on its target qubit."""
    if gate.kind in ROTATION_KINDS:
        half = 0.5 * gate.angle
        c, s = math.cos(half), math.sin(half)
        if gate.kind == "rx":
            return np.array([[c, -1j * s], [-1j * s, c]])
        if gate.kind == "ry":
            return np.array([[c, -s], [s, c]])
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    if gate.kind == "u3":
        return u3_matrix(*gate.params)
    if gate.kind in _FIXED_MATS:
        m = _FIXED_MATS[gate.kind]
        return np.array([[m[0], m[1]], [m[2], m[3]]])
    raise ValueError(f"unknown gate kind {gate.kind!r}")


@dataclass
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, num_qubits: int) -> "Statevector":
        if num_qubits < 1:
            raise ValueError("need at least one qubit")
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class Observable:
    """Weighted sum of Pauli products: terms of (coeff, ((qubit, axis), ...))."""

    terms: tuple[tuple[float, tuple[tuple[int, str], ...]], ...]

    @classmethod
    def z(cls, qubit: int = 0) -> "Observable":
        return cls(((1.0, ((qubit, "z"),)),))

    def shifted(self, offset: int) -> "Observable":
        """Same observable with every qubit index moved up by ``offset``."""
        return Observable(
            tuple(
                (coeff, tuple((q + offset, ax) for q, ax in factors))
                for coeff, factors in self.terms
            )
        )

    def qubits(self) -> tuple[int, ...]:
        seen: list[int] = []
        for _, factors in self.terms:
            for q, _ in factors:
                if q not in seen:
                    seen.append(q)
        return tuple(seen)


def _bit(num_qubits: int, qubit: int) -> int:
    if not 0 <= qubit < num_qubits:
        raise ValueError(f"qubit {qubit} out of range for {num_qubits} qubits")
    return 1 << (num_qubits - 1 - qubit)


def _control_mask(num_qubits: int, target: int, controls: tuple[int, ...]) -> int:
    mask = 0
    for c in controls:
        if c == target:
            raise ValueError("control and target qubits must be distinct")
        bit = _bit(num_qubits, c)
        if mask & bit:
            raise ValueError("duplicate control qubit")
        mask |= bit
    return mask


def _apply_inplace(buf: np.ndarray, num_qubits: int, gate: GateOp) -> None:
    kern = get_kernels()
    dim = buf.shape[1]
    tbit = _bit(num_qubits, gate.target)
    cmask = _control_mask(num_qubits, gate.target, gate.controls)
    if gate.kind in ROTATION_KINDS:
        angles = np.full(buf.shape[0], gate.angle, dtype=np.float64)
        kern.apply_rot(buf, dim, tbit, cmask, ROTATION_KINDS[gate.kind], angles)
    elif gate.kind == "u3":
        m = u3_matrix(*gate.params)
        kern.apply_fixed(buf, dim, tbit, cmask, m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    elif gate.kind in _FIXED_MATS:
        if gate.kind == "cnot" and not gate.controls:
            raise ValueError("cnot requires at least one control qubit")
        m = _FIXED_MATS[gate.kind]
        kern.apply_fixed(buf, dim, tbit, cmask, m[0], m[1], m[2], m[3])
    else:
        raise ValueError(f"unknown gate kind {gate.kind!r}")


def apply_gate(state: Statevector, gate: GateOp, check_norm: bool = True) -> Statevector:
    """Apply one gate, returning a new state.

    ``check_norm=False`` skips the unit-norm postcondition; useful when
    applying gates to deliberately unnormalized vectors (the kernels are
    linear maps either way).
    """
    buf = state.amplitudes.copy().reshape(1, -1)
    _apply_inplace(buf, state.num_qubits, gate)
    out = Statevector(state.num_qubits, buf.reshape(-1))
    if check_norm and abs(out.norm() - 1.0) > NORM_TOL:
        raise ValueError(f"state norm drifted to {out.norm()!r}")
    return out


def apply_controlled(
    state: Statevector, controls: tuple[int, ...], gate: GateOp, check_norm: bool = True
) -> Statevector:
    """Apply ``gate`` with additional control qubits prepended."""
    combined = tuple(controls) + gate.controls
    return apply_gate(
        state,
        GateOp(gate.kind, gate.target, combined, gate.angle, gate.params, gate.stage),
        check_norm=check_norm,
    )


def inject_amplitudes(probs: np.ndarray) -> Statevector:
    """State with amplitudes sqrt(p_i); loads a probability vector.

    ``probs`` must be nonnegative, sum to 1 within 1e-9, and have power-of-two
    length.
    """
    probs = np.asarray(probs, dtype=np.float64)
    dim = probs.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise ValueError("probability vector length must be a power of two >= 2")
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    amps = np.sqrt(probs / total).astype(np.complex128)
    return Statevector(int(dim).bit_length() - 1, amps)


# basis changes mapping X/Y measurement onto Z: X -> H, Y -> H after S^dag
_SDG = (1 + 0j, 0j, 0j, -1j)
_H = _FIXED_MATS["h"]


def _expect_terms(buf: np.ndarray, num_qubits: int, observable: Observable) -> np.ndarray:
    kern = get_kernels()
    dim = buf.shape[1]
    total = np.zeros(buf.shape[0], dtype=np.float64)
    for coeff, factors in observable.terms:
        zmask = 0
        rotated = buf
        for qubit, axis in factors:
            tbit = _bit(num_qubits, qubit)
            if zmask & tbit:
                raise ValueError("observable term repeats a qubit")
            zmask |= tbit
            if axis == "x":
                if rotated is buf:
                    rotated = buf.copy()
                kern.apply_fixed(rotated, dim, tbit, 0, *_H)
            elif axis == "y":
                if rotated is buf:
                    rotated = buf.copy()
                kern.apply_fixed(rotated, dim, tbit, 0, *_SDG)
                kern.apply_fixed(rotated, dim, tbit, 0, *_H)
            elif axis != "z":
                raise ValueError(f"unknown Pauli axis {axis!r}")
        if zmask == 0:
            total += coeff * np.einsum("bi,bi->b", rotated.conj(), rotated).real
        else:
            total += coeff * kern.expect_z(rotated, dim, zmask)
    return total


def expectation(state: Statevector, observable: Observable) -> float:
    """Real expectation value of a Pauli-sum observable."""
    buf = state.amplitudes.reshape(1, -1)
    return float(_expect_terms(buf, state.num_qubits, observable)[0])


# ---------------------------------------------------------------------------
# Batched program execution.
#
# A Program is a compiled gate list where each rotation angle is sourced from
# a literal, a feature column, or a parameter slot at run time.  Running a
# program evaluates the whole batch in one pass; this is what makes
# parameter-shift training and full-grid evaluation cheap.

SRC_LIT = 0
SRC_FEATURE = 1
SRC_PARAM = 2


@dataclass(frozen=True)
class ProgramGate:
    kind: str
    target: int
    controls: tuple[int, ...] = ()
    source: int = SRC_LIT
    ref: int = 0
    value: float = 0.0
    params: tuple[float, ...] = ()


@dataclass
class Program:
    num_qubits: int
    gates: list
    _compiled: list = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            tbit = _bit(self.num_qubits, g.target)
            cmask = _control_mask(self.num_qubits, g.target, g.controls)
            if g.kind in ROTATION_KINDS:
                self._compiled.append(("rot", tbit, cmask, ROTATION_KINDS[g.kind], g))
            elif g.kind == "u3":
                m = u3_matrix(*g.params)
                self._compiled.append(
                    ("fix", tbit, cmask, (m[0, 0], m[0, 1], m[1, 0], m[1, 1]), g)
                )
            elif g.kind in _FIXED_MATS:
                self._compiled.append(("fix", tbit, cmask, _FIXED_MATS[g.kind], g))
            else:
                raise ValueError(f"unknown gate kind {g.kind!r}")

    def run(
        self,
        features: np.ndarray | None,
        thetas: np.ndarray | None,
        batch: int | None = None,
        init: np.ndarray | None = None,
    ) -> np.ndarray:
        """Execute on a batch of |0...0> states (or ``init`` rows).

        features: (batch, K) float64 or None; thetas: (batch, Q) or (Q,) or
        None.  Returns the (batch, 2**n) final amplitudes.
        """
        kern = get_kernels()
        if batch is None:
            if features is not None:
                batch = features.shape[0]
            elif thetas is not None and thetas.ndim == 2:
                batch = thetas.shape[0]
            else:
                batch = 1
        dim = 1 << self.num_qubits
        if init is None:
            buf = np.zeros((batch, dim), dtype=np.complex128)
            buf[:, 0] = 1.0
        else:
            buf = np.array(init, dtype=np.complex128).reshape(1, -1).repeat(batch, axis=0) \
                if init.ndim == 1 else np.array(init, dtype=np.complex128)
        if thetas is not None and thetas.ndim == 1:
            thetas = np.broadcast_to(thetas, (batch, thetas.shape[0]))
        for op, tbit, cmask, extra, g in self._compiled:
            if op == "rot":
                if g.source == SRC_LIT:
                    angles = np.full(batch, g.value, dtype=np.float64)
                elif g.source == SRC_FEATURE:
                    angles = np.ascontiguousarray(features[:, g.ref])
                else:
                    angles = np.ascontiguousarray(thetas[:, g.ref])
                kern.apply_rot(buf, dim, tbit, cmask, extra, angles)
            else:
                kern.apply_fixed(buf, dim, tbit, cmask, *extra)
        return buf

    def expectations(
        self,
        observable: Observable,
        features: np.ndarray | None,
        thetas: np.ndarray | None,
        batch: int | None = None,
        init: np.ndarray | None = None,
    ) -> np.ndarray:
        buf = self.run(features, thetas, batch=batch, init=init)
        return _expect_terms(buf, self.num_qubits, observable)
