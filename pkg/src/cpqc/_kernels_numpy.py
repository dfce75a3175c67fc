"""Pure-numpy statevector kernels.

Reference lane for the simulator.  Each kernel operates on a batch of
statevectors laid out as a (batch, 2**n) complex128 array and mutates it in
place.  Qubit 0 is the most significant bit of the basis index, so the qubit
at position ``q`` owns bit value ``1 << (n - 1 - q)``.

Kernel arguments:
    tbit   -- bit value of the target qubit inside the basis index
    cmask  -- OR of the control qubits' bit values (0 for no controls);
              must not include tbit
    angles -- per-row rotation angles, shape (batch,)

The same three entry points exist in ``_kernels_numba``; ``backend`` picks
the lane.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=4096)
def _pair_indices(dim: int, tbit: int, cmask: int):
    """Indices i0 with target bit 0 and all control bits 1, plus i1 = i0|tbit."""
    idx = np.arange(dim)
    i0 = idx[((idx & tbit) == 0) & ((idx & cmask) == cmask)]
    i1 = i0 | tbit
    i0.setflags(write=False)
    i1.setflags(write=False)
    return i0, i1


@lru_cache(maxsize=4096)
def _z_signs(dim: int, zmask: int):
    """Parity signs (-1)**popcount(i & zmask) for the Z-product observable."""
    idx = np.arange(dim)
    par = np.zeros(dim, dtype=np.int64)
    rest = zmask
    while rest:
        bit = rest & -rest
        par ^= (idx & bit) != 0
        rest ^= bit
    signs = 1.0 - 2.0 * par
    signs.setflags(write=False)
    return signs


def apply_fixed(state, dim, tbit, cmask, m00, m01, m10, m11) -> None:
    """Apply a fixed 2x2 matrix to the target qubit wherever controls fire."""
    i0, i1 = _pair_indices(dim, tbit, cmask)
    a0 = state[:, i0]
    a1 = state[:, i1]
    state[:, i0] = m00 * a0 + m01 * a1
    state[:, i1] = m10 * a0 + m11 * a1


def apply_rot(state, dim, tbit, cmask, axis, angles) -> None:
    """Apply R_axis(angle) per row; axis: 0 = X, 1 = Y, 2 = Z."""
    i0, i1 = _pair_indices(dim, tbit, cmask)
    half = 0.5 * angles
    c = np.cos(half)[:, None]
    s = np.sin(half)[:, None]
    a0 = state[:, i0]
    a1 = state[:, i1]
    if axis == 0:
        state[:, i0] = c * a0 - 1j * s * a1
        state[:, i1] = -1j * s * a0 + c * a1
    elif axis == 1:
        state[:, i0] = c * a0 - s * a1
        state[:, i1] = s * a0 + c * a1
    else:
        phase0 = (c - 1j * s)
        phase1 = (c + 1j * s)
        state[:, i0] = phase0 * a0
        state[:, i1] = phase1 * a1


def expect_z(state, dim, zmask):
    """Per-row expectation of the Z product over the qubits in zmask."""
    signs = _z_signs(dim, zmask)
    return np.einsum("bi,i,bi->b", state.conj(), signs, state).real


def prewarm() -> None:
    """No-op; mirrors the numba lane's JIT prewarm hook."""
