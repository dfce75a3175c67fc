"""Bundled reference circuits with published parameter vectors.

Three trained circuits ship with the package, named by the task they price:

* ``call_fig3``    -- 3-qubit single-asset call model, 1 feature, 8 parameters
* ``basket_figA2`` -- 4-qubit fixed-weight basket model, 2 features, 9 parameters
* ``basket_var_weight_figA4`` -- 2-qubit variable-weight basket model, 3 features
                      (x0, x1, w1), 16 parameters

Gates are listed in application order, reading the source diagrams column by
column; gates in the same column act on disjoint qubits and are emitted top
wire first.  The readout shown on the top wire is treated as a terminal
Z-expectation measurement of qubit 0 (the diagrams place the meter at the
end of the wire; no mid-circuit feed-forward is modeled).

The companion grids for these circuits place 2**n points at multiples of
pi / (2**n - 1), so the conditional form of ``call_fig3`` on a 3-qubit
register carries controlled-rotation angles 4pi/7, 2pi/7, pi/7.
"""

from __future__ import annotations

import math

import numpy as np

from .circuit import Block, Circuit

_B = Block

CALL_FIG3_THETA = np.array(
    [0.93963, 2.51976, -0.30702, -0.22985, -0.302, -0.09293, 0.15291, 0.05979]
)

_CALL_FIG3 = Circuit(
    num_qubits=3,
    num_features=1,
    num_params=8,
    blocks=(
        _B.fixed("sx", 1),
        _B.rot("y", 2, 3),
        _B.enc("z", 1, 0),
        _B.enc("z", 1, 0),
        _B.fixed("sx", 1),
        _B.enc("z", 1, 0),
        _B.fixed("sx", 1),
        _B.cnot(2, 1),
        _B.fixed("sx", 1),
        _B.rot("z", 1, 0),
        _B.fixed("sx", 1),
        _B.fixed("x", 1),
        _B.cnot(2, 1),
        _B.enc("z", 1, 0),
        _B.enc("z", 2, 0),
        _B.fixed("sx", 1),
        _B.rot("x", 2, 4),
        _B.cnot(1, 0),
        _B.enc("z", 0, 0),
        _B.cnot(1, 2),
        _B.enc("z", 1, 0),
        _B.rot("y", 2, 5),
        _B.cnot(1, 0),
        _B.rot("x", 1, 1),
        _B.rot("y", 1, 2),
        _B.cnot(1, 0),
        _B.cnot(1, 2),
        _B.rot("z", 2, 6),
        _B.enc("x", 2, 0),
        _B.rot("y", 2, 7),
        _B.cnot(2, 1),
        _B.cnot(1, 0),
    ),
    measured=(0,),
)

BASKET_FIGA2_THETA = np.array(
    [1.70789, -1.71191, -1.11194, -0.72190, -0.74404, 1.40678, 0.67897, 0.17417, -0.16803]
)

_BASKET_FIGA2 = Circuit(
    num_qubits=4,
    num_features=2,
    num_params=9,
    blocks=(
        _B.rot("y", 2, 0),
        _B.enc("x", 2, 0),
        _B.rot("z", 2, 1),
        _B.cnot(2, 3),
        _B.rot("y", 2, 2),
        _B.enc("z", 2, 0),
        _B.enc("z", 2, 1),
        _B.cnot(2, 1),
        _B.cnot(1, 3),
        _B.rot("z", 1, 8),
        _B.enc("y", 2, 1),
        _B.cnot(1, 3),
        _B.cnot(2, 1),
        _B.rot("y", 3, 5),
        _B.rot("z", 2, 3),
        _B.enc("z", 3, 0),
        _B.rot("y", 2, 4),
        _B.rot("y", 3, 6),
        _B.enc("z", 3, 1),
        _B.rot("y", 3, 7),
        _B.cnot(3, 2),
        _B.cnot(2, 1),
        _B.cnot(1, 0),
    ),
    measured=(0,),
)

BASKET_FIGA4_THETA = np.array(
    [
        1.34793, 1.39065, 0.56594, 0.40454, -2.45389, 1.54508, 2.17214, -0.50158,
        -0.63069, -1.14638, -0.44283, 0.44037, -0.42722, -0.20744, -0.23896, 0.10707,
    ]
)

# feature order: 0 = x0, 1 = x1, 2 = w1
_BASKET_FIGA4 = Circuit(
    num_qubits=2,
    num_features=3,
    num_params=16,
    blocks=(
        _B.enc("x", 0, 2),
        _B.rot("y", 1, 6),
        _B.cnot(0, 1),
        _B.enc("z", 1, 0),
        _B.fixed("sx", 1),
        _B.rot("z", 1, 7),
        _B.fixed("sx", 1),
        _B.fixed("x", 1),
        _B.cnot(0, 1),
        _B.rot("y", 0, 0),
        _B.rot("y", 1, 8),
        _B.enc("z", 0, 1),
        _B.rot("y", 0, 1),
        _B.cnot(0, 1),
        _B.rot("x", 0, 2),
        _B.rot("z", 1, 9),
        _B.cnot(0, 1),
        _B.rot("x", 0, 3),
        _B.rot("z", 1, 10),
        _B.enc("z", 1, 0),
        _B.rot("y", 1, 11),
        _B.cnot(1, 0),
        _B.rot("y", 0, 4),
        _B.cnot(1, 0),
        _B.enc("z", 1, 1),
        _B.rot("y", 1, 12),
        _B.enc("z", 1, 1),
        _B.cnot(0, 1),
        _B.rot("z", 1, 13),
        _B.cnot(0, 1),
        _B.rot("x", 0, 5),
        _B.rot("z", 1, 14),
        _B.cnot(0, 1),
        _B.rot("x", 1, 15),
        _B.cnot(0, 1),
        _B.cnot(1, 0),
    ),
    measured=(0,),
)

_FIXTURES = {
    "call_fig3": (_CALL_FIG3, CALL_FIG3_THETA),
    "basket_figA2": (_BASKET_FIGA2, BASKET_FIGA2_THETA),
    "basket_var_weight_figA4": (_BASKET_FIGA4, BASKET_FIGA4_THETA),
}


def fixture_names() -> tuple[str, ...]:
    return tuple(_FIXTURES)


def load_fixture(name: str) -> tuple[Circuit, np.ndarray]:
    """Return (circuit, trained theta) for a bundled reference circuit."""
    try:
        circuit, theta = _FIXTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown fixture {name!r}; available: {', '.join(_FIXTURES)}"
        ) from None
    return circuit, theta.copy()


def fixture_grid_step(num_qubits: int) -> float:
    """Grid step used by the bundled circuits: 2**n points spanning [0, pi]."""
    return math.pi / (2**num_qubits - 1)
