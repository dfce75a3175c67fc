"""Decomposition to the CNOT + U(theta, phi, lambda) basis and cost metrics.

Every supported gate is rewritten into ``cnot`` and ``u3`` operations:
singly-controlled rotations through the two-CNOT identity, Toffolis
through the six-CNOT textbook circuit, higher control counts through the
square-root recursion.  Runs of single-qubit gates merge into one ``u3``
per qubit (disable with ``merge_singles=False``); a run that multiplies
out to the identity is dropped.  Depth is the greedy qubit-timeline
schedule with every basis gate taking one tick.

Stage tags survive decomposition, so reports can split counts by circuit
section and drop the distribution loader or the uncompute pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sim import GateOp

_ROT_AXES = ("rx", "ry", "rz")

# exact u3 translations (global phase free for sx and rz)
_FIXED_U3 = {
    "x": (math.pi, 0.0, math.pi),
    "h": (math.pi / 2, 0.0, math.pi),
    "sx": (math.pi / 2, -math.pi / 2, math.pi / 2),
}


def _rot_params(axis: str, angle: float) -> tuple:
    if axis == "rx":
        return (angle, -math.pi / 2, math.pi / 2)
    if axis == "ry":
        return (angle, 0.0, 0.0)
    return (0.0, 0.0, angle)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def _u3(qubit: int, params: tuple, stage: str) -> GateOp:
    return GateOp("u3", qubit, params=tuple(float(p) for p in params), stage=stage)


def _cx(control: int, target: int, stage: str) -> GateOp:
    return GateOp("cnot", target, (control,), stage=stage)


def _phase(qubit: int, lam: float, stage: str) -> GateOp:
    return _u3(qubit, (0.0, 0.0, lam), stage)


def _ctrl_rot(axis: str, control: int, target: int, angle: float, stage: str) -> list:
    """CR(angle) as two CNOTs and two rotations; X-axis conjugates with H."""
    if axis == "rx":
        h = _u3(target, _FIXED_U3["h"], stage)
        return [h] + _ctrl_rot("rz", control, target, angle, stage) + [h]
    half = _rot_params(axis, -angle / 2)
    full = _rot_params(axis, angle / 2)
    return [
        _cx(control, target, stage),
        _u3(target, half, stage),
        _cx(control, target, stage),
        _u3(target, full, stage),
    ]


def _toffoli(c1: int, c2: int, target: int, stage: str) -> list:
    t = math.pi / 4
    return [
        _u3(target, _FIXED_U3["h"], stage),
        _cx(c2, target, stage),
        _phase(target, -t, stage),
        _cx(c1, target, stage),
        _phase(target, t, stage),
        _cx(c2, target, stage),
        _phase(target, -t, stage),
        _cx(c1, target, stage),
        _phase(c2, t, stage),
        _phase(target, t, stage),
        _u3(target, _FIXED_U3["h"], stage),
        _cx(c1, c2, stage),
        _phase(c1, t, stage),
        _phase(c2, -t, stage),
        _cx(c1, c2, stage),
    ]


def _ctrl_phase(control: int, target: int, lam: float, stage: str) -> list:
    return [
        _phase(control, lam / 2, stage),
        _phase(target, lam / 2, stage),
        _cx(control, target, stage),
        _phase(target, -lam / 2, stage),
        _cx(control, target, stage),
    ]


def _multi_phase(controls: tuple, target: int, lam: float, stage: str) -> list:
    if not controls:
        return [_phase(target, lam, stage)]
    if len(controls) == 1:
        return _ctrl_phase(controls[0], target, lam, stage)
    *rest, last = controls
    rest = tuple(rest)
    return (
        _ctrl_phase(last, target, lam / 2, stage)
        + _mcx(rest, last, stage)
        + _ctrl_phase(last, target, -lam / 2, stage)
        + _mcx(rest, last, stage)
        + _multi_phase(rest, target, lam / 2, stage)
    )


def _mcx(controls: tuple, target: int, stage: str) -> list:
    if not controls:
        return [_u3(target, _FIXED_U3["x"], stage)]
    if len(controls) == 1:
        return [_cx(controls[0], target, stage)]
    if len(controls) == 2:
        return _toffoli(controls[0], controls[1], target, stage)
    h = _u3(target, _FIXED_U3["h"], stage)
    return [h] + _multi_phase(controls, target, math.pi, stage) + [h]


def _multi_rot(axis: str, controls: tuple, target: int, angle: float, stage: str) -> list:
    if len(controls) == 1:
        return _ctrl_rot(axis, controls[0], target, angle, stage)
    *rest, last = controls
    rest = tuple(rest)
    return (
        _ctrl_rot(axis, last, target, angle / 2, stage)
        + _mcx(rest, last, stage)
        + _ctrl_rot(axis, last, target, -angle / 2, stage)
        + _mcx(rest, last, stage)
        + _multi_rot(axis, rest, target, angle / 2, stage)
    )


def _expand(g: GateOp) -> list:
    nc = len(g.controls)
    if g.kind == "u3":
        if nc:
            raise ValueError("controlled u3 is not a supported input")
        return [g]
    if g.kind == "cnot":
        if nc != 1:
            raise ValueError("cnot takes exactly one control")
        return [g]
    if g.kind == "x":
        return _mcx(g.controls, g.target, g.stage)
    if g.kind in _FIXED_U3:
        if nc:
            raise ValueError(f"controlled {g.kind} is not supported")
        return [_u3(g.target, _FIXED_U3[g.kind], g.stage)]
    if g.kind in _ROT_AXES:
        if nc == 0:
            return [_u3(g.target, _rot_params(g.kind, g.angle), g.stage)]
        return _multi_rot(g.kind, g.controls, g.target, g.angle, g.stage)
    raise ValueError(f"cannot decompose gate kind {g.kind!r}")


def _zyz(m: np.ndarray) -> tuple:
    """u3 angles reproducing the 2x2 unitary up to global phase."""
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    m = m / np.sqrt(det)
    if abs(m[1, 0]) < 1e-12:
        return (0.0, 0.0, float(2.0 * np.angle(m[1, 1])))
    if abs(m[0, 0]) < 1e-12:
        return (math.pi, float(2.0 * np.angle(m[1, 0])), 0.0)
    theta = 2.0 * math.atan2(abs(m[1, 0]), abs(m[0, 0]))
    a11 = float(np.angle(m[1, 1]))
    a10 = float(np.angle(m[1, 0]))
    return (theta, a11 + a10, a11 - a10)


def _merge_singles(gates: list) -> list:
    pending: dict = {}  # qubit -> (accumulated 2x2, stage of first gate)
    out = []

    def flush(q):
        if q not in pending:
            return
        m, stage = pending.pop(q)
        if (
            abs(m[0, 1]) < 1e-12
            and abs(m[1, 0]) < 1e-12
            and abs(m[0, 0] - m[1, 1]) < 1e-12
        ):
            return  # identity up to global phase
        out.append(_u3(q, _zyz(m), stage))

    for g in gates:
        if g.kind == "u3":
            mat, stage = pending.get(g.target, (np.eye(2, dtype=np.complex128), g.stage))
            pending[g.target] = (u3_matrix(*g.params) @ mat, stage)
        else:
            flush(g.controls[0])
            flush(g.target)
            out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def decompose(gates, merge_singles: bool = True) -> list:
    """Rewrite a gate sequence into cnot + u3, preserving stages."""
    basis = []
    for g in gates:
        basis.extend(_expand(g))
    if merge_singles:
        basis = _merge_singles(basis)
    return basis


def depth_of(gates) -> int:
    clock: dict = {}
    depth = 0
    for g in gates:
        t = 1 + max((clock.get(q, 0) for q in g.qubits()), default=0)
        for q in g.qubits():
            clock[q] = t
        depth = max(depth, t)
    return depth


@dataclass(frozen=True)
class ResourceReport:
    cnot_count: int
    single_qubit_count: int
    depth: int
    stages: dict  # stage -> {"cnot": n, "single_qubit": n}

    @property
    def total(self) -> int:
        return self.cnot_count + self.single_qubit_count


def report(
    gates,
    merge_singles: bool = True,
    include_loader: bool = False,
    include_uncompute: bool = True,
) -> ResourceReport:
    """Counts and depth over the decomposed sequence.

    The distribution loader is excluded by default (resource comparisons
    concern the payoff circuit; the loader is shared by every method).
    """
    kept = []
    for g in gates:
        if g.stage == "loader" and not include_loader:
            continue
        if g.stage == "uncompute" and not include_uncompute:
            continue
        kept.append(g)
    basis = decompose(kept, merge_singles=merge_singles)
    cnot = 0
    single = 0
    stages: dict = {}
    for g in basis:
        bucket = stages.setdefault(g.stage, {"cnot": 0, "single_qubit": 0})
        if g.kind == "cnot":
            cnot += 1
            bucket["cnot"] += 1
        else:
            single += 1
            bucket["single_qubit"] += 1
    return ResourceReport(cnot, single, depth_of(basis), stages)


def scaling_sweep(builders: dict, n_values, merge_singles: bool = True) -> str:
    """CSV of decomposed costs per size: ``n,backend,cnot,depth,single_qubit``.

    ``builders`` maps a backend label to a callable n -> gate sequence.
    """
    lines = ["n,backend,cnot,depth,single_qubit"]
    for n in n_values:
        for name, build in builders.items():
            rep = report(build(int(n)), merge_singles=merge_singles)
            lines.append(
                f"{n},{name},{rep.cnot_count},{rep.depth},{rep.single_qubit_count}"
            )
    return "\n".join(lines) + "\n"
