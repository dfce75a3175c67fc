"""Shared test helpers.

``dense_unitary``/``apply_dense`` build full 2**n x 2**n matrices by explicit
column construction and apply them with plain matmul.  That path shares no
index arithmetic with the kernel lanes, so it serves as the independent
oracle for simulator behavior.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest


def mat_for(kind: str, angle: float = 0.0, params=()) -> np.ndarray:
    """2x2 matrix built from the textbook formulas."""
    if kind == "rx":
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "ry":
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -s], [s, c]])
    if kind == "rz":
        return np.array(
            [[cmath.exp(-0.5j * angle), 0], [0, cmath.exp(0.5j * angle)]]
        )
    if kind in ("x", "cnot"):
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "h":
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    if kind == "sx":
        return 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
    if kind == "u3":
        theta, phi, lam = params
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return np.array(
            [
                [c, -cmath.exp(1j * lam) * s],
                [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
            ]
        )
    raise ValueError(kind)


def dense_unitary(n: int, mat2: np.ndarray, target: int, controls=()) -> np.ndarray:
    """Full-dimension matrix for a (multi-)controlled single-qubit gate.

    Built column by column from the gate semantics; qubit 0 owns the most
    significant bit of the basis index.
    """
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    tbit = 1 << (n - 1 - target)
    for col in range(dim):
        fires = all((col >> (n - 1 - c)) & 1 for c in controls)
        if not fires:
            out[col, col] = 1.0
            continue
        if col & tbit:
            out[col & ~tbit, col] = mat2[0, 1]
            out[col, col] = mat2[1, 1]
        else:
            out[col, col] = mat2[0, 0]
            out[col | tbit, col] = mat2[1, 0]
    return out


def apply_dense(vec: np.ndarray, n: int, gates) -> np.ndarray:
    """Apply a GateOp sequence via dense matrices (oracle path)."""
    for g in gates:
        mat2 = mat_for(g.kind, g.angle, g.params)
        vec = dense_unitary(n, mat2, g.target, g.controls) @ vec
    return vec


def dense_pauli(n: int, factors) -> np.ndarray:
    """Dense matrix of a Pauli product given ((qubit, axis), ...)."""
    paulis = {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]]),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    per_qubit = [np.eye(2, dtype=complex) for _ in range(n)]
    for q, axis in factors:
        per_qubit[q] = paulis[axis]
    full = np.array([[1.0 + 0j]])
    for m in per_qubit:
        full = np.kron(full, m)
    return full


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    vec = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return vec / np.linalg.norm(vec)


def random_gates(rng: np.random.Generator, n: int, count: int):
    """Random mix of plain, controlled, and fixed gates."""
    from cpqc.sim import GateOp

    kinds = ["rx", "ry", "rz", "sx", "x", "h", "cnot", "u3"]
    gates = []
    for _ in range(count):
        kind = kinds[rng.integers(len(kinds))]
        qubits = list(rng.permutation(n))
        target = int(qubits[0])
        controls = ()
        if kind == "cnot":
            controls = (int(qubits[1]),) if n > 1 else ()
            if not controls:
                kind = "x"
        elif n > 1 and rng.random() < 0.3:
            take = int(rng.integers(1, min(n - 1, 2) + 1))
            controls = tuple(int(q) for q in qubits[1 : 1 + take])
        angle = float(rng.uniform(-2 * math.pi, 2 * math.pi))
        params = ()
        if kind == "u3":
            params = tuple(rng.uniform(-math.pi, math.pi, size=3))
        gates.append(GateOp(kind, target, controls, angle, params))
    return gates


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
