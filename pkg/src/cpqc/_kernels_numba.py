"""Numba statevector kernels.

Hot lane for the simulator: same entry points and semantics as
``_kernels_numpy`` but compiled with ``@njit``.  The loops enumerate the
half-space of basis indices with target bit 0 via the insert-a-zero-bit
trick, then gate on the control mask, so each kernel touches every amplitude
at most once.

Importing this module requires numba; ``backend`` falls back to the numpy
lane when the import fails.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = {"cache": True, "nogil": True, "fastmath": False}


@njit(**_JIT)
def apply_fixed(state, dim, tbit, cmask, m00, m01, m10, m11):
    batch = state.shape[0]
    half = dim >> 1
    low = tbit - 1
    for b in range(batch):
        row = state[b]
        for g in range(half):
            i0 = ((g & ~low) << 1) | (g & low)
            if (i0 & cmask) == cmask:
                i1 = i0 | tbit
                a0 = row[i0]
                a1 = row[i1]
                row[i0] = m00 * a0 + m01 * a1
                row[i1] = m10 * a0 + m11 * a1


@njit(**_JIT)
def apply_rot(state, dim, tbit, cmask, axis, angles):
    batch = state.shape[0]
    half = dim >> 1
    low = tbit - 1
    for b in range(batch):
        row = state[b]
        c = np.cos(0.5 * angles[b])
        s = np.sin(0.5 * angles[b])
        for g in range(half):
            i0 = ((g & ~low) << 1) | (g & low)
            if (i0 & cmask) == cmask:
                i1 = i0 | tbit
                a0 = row[i0]
                a1 = row[i1]
                if axis == 0:
                    row[i0] = c * a0 - 1j * s * a1
                    row[i1] = -1j * s * a0 + c * a1
                elif axis == 1:
                    row[i0] = c * a0 - s * a1
                    row[i1] = s * a0 + c * a1
                else:
                    row[i0] = (c - 1j * s) * a0
                    row[i1] = (c + 1j * s) * a1


@njit(**_JIT)
def expect_z(state, dim, zmask):
    batch = state.shape[0]
    out = np.empty(batch, dtype=np.float64)
    for b in range(batch):
        row = state[b]
        acc = 0.0
        for i in range(dim):
            p = row[i].real * row[i].real + row[i].imag * row[i].imag
            bits = i & zmask
            # popcount parity
            par = 0
            while bits:
                par ^= 1
                bits &= bits - 1
            acc += -p if par else p
        out[b] = acc
    return out


def prewarm() -> None:
    """Trigger JIT compilation of every kernel on a tiny state."""
    state = np.zeros((1, 2), dtype=np.complex128)
    state[0, 0] = 1.0
    apply_fixed(state, 2, 1, 0, 0.0 + 0j, 1.0 + 0j, 1.0 + 0j, 0.0 + 0j)
    apply_rot(state, 2, 1, 0, 0, np.array([0.3]))
    apply_rot(state, 2, 1, 0, 1, np.array([0.3]))
    apply_rot(state, 2, 1, 0, 2, np.array([0.3]))
    expect_z(state, 2, 1)
