"""Parameter training for a fixed circuit structure.

The model value is the readout expectation f(x, theta); the cost is the mean
squared error against targets already scaled into the readout range [-1, 1].
Gradients come from the parameter-shift rule,

    df/dtheta_q = (f(theta + pi/2 e_q) - f(theta - pi/2 e_q)) / 2,

exact for our rotation generators, with a central-difference fallback for
cross-checking.  All (2Q+1) shifted evaluations over the whole data set run
as one batch, which is what keeps structure search affordable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit


@dataclass(frozen=True)
class Problem:
    """A regression data set: feature rows and readout-scaled targets."""

    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        t = np.atleast_1d(np.asarray(self.targets, dtype=np.float64))
        if f.shape[0] != t.shape[0]:
            raise ValueError("features and targets disagree on row count")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "targets", t)

    @property
    def size(self) -> int:
        return self.targets.shape[0]


def _as_batch(circuit: Circuit, X, theta):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if X.shape[1] != circuit.num_features:
        raise ValueError(f"expected {circuit.num_features} feature columns")
    if theta.shape[0] != circuit.num_params:
        raise ValueError(f"expected {circuit.num_params} parameters")
    return X, theta


def quantum_model(circuit: Circuit, theta, X) -> np.ndarray:
    """Model outputs f(x_j, theta) for every row of X."""
    X, theta = _as_batch(circuit, X, theta)
    return circuit.program().expectations(circuit.observable(), X, theta)


def cost(circuit: Circuit, theta, X, y) -> float:
    y = np.asarray(y, dtype=np.float64)
    vals = quantum_model(circuit, theta, X)
    return float(np.mean((vals - y) ** 2))


def make_shift_evaluator(circuit: Circuit, X, y):
    """Closure computing (cost, grad) with the program compiled once.

    The J data rows are evaluated at theta and at both shifts of every
    parameter in a single (2Q+1)*J-row batch.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    prog = circuit.program()
    obs = circuit.observable()
    J = X.shape[0]
    Q = circuit.num_params
    if Q == 0:
        def evaluate0(theta):
            vals = prog.expectations(obs, X, None)
            return float(np.mean((vals - y) ** 2)), np.zeros(0)

        return evaluate0
    offsets = np.zeros((2 * Q + 1, Q))
    for q in range(Q):
        offsets[1 + 2 * q, q] = np.pi / 2
        offsets[2 + 2 * q, q] = -np.pi / 2
    feats = np.tile(X, (2 * Q + 1, 1))

    def evaluate(theta):
        big_thetas = np.repeat(theta[None, :] + offsets, J, axis=0)
        vals = prog.expectations(obs, feats, big_thetas).reshape(2 * Q + 1, J)
        resid = vals[0] - y
        c = float(np.mean(resid**2))
        df = (vals[1::2] - vals[2::2]) / 2.0  # (Q, J)
        return c, (2.0 / J) * (df @ resid)

    return evaluate


def gradient(circuit: Circuit, theta, X, y) -> tuple[float, np.ndarray]:
    """(cost, dcost/dtheta) via one batched parameter-shift pass."""
    X, theta = _as_batch(circuit, X, theta)
    return make_shift_evaluator(circuit, X, y)(theta)


def finite_difference_gradient(
    circuit: Circuit, theta, X, y, eps: float = 1e-5
) -> tuple[float, np.ndarray]:
    """Central differences on the cost; slower and approximate."""
    X, theta = _as_batch(circuit, X, theta)
    y = np.asarray(y, dtype=np.float64)
    c = cost(circuit, theta, X, y)
    grad = np.zeros(circuit.num_params)
    for q in range(circuit.num_params):
        up = theta.copy()
        up[q] += eps
        down = theta.copy()
        down[q] -= eps
        grad[q] = (cost(circuit, up, X, y) - cost(circuit, down, X, y)) / (2 * eps)
    return c, grad


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    decay: float = 0.9
    epsilon: float = 1e-8
    max_steps: int = 200
    gradient: str = "shift"  # or "fd"

    def __post_init__(self):
        if self.gradient not in ("shift", "fd"):
            raise ValueError("gradient must be 'shift' or 'fd'")
        if self.learning_rate <= 0 or not 0 <= self.decay < 1 or self.max_steps < 0:
            raise ValueError("invalid optimizer settings")


@dataclass
class TrainResult:
    theta: np.ndarray
    cost: float
    trace: np.ndarray = field(repr=False)

    @property
    def steps(self) -> int:
        return len(self.trace) - 1


def optimize(
    circuit: Circuit, theta0, X, y, config: TrainConfig = TrainConfig()
) -> TrainResult:
    """RMSProp descent from theta0; returns the best parameters seen.

    The trace holds the cost before each update plus the final cost, so
    ``trace[0]`` is the starting cost and ``len(trace) == max_steps + 1``.
    """
    X, theta = _as_batch(circuit, X, theta0)
    y = np.asarray(y, dtype=np.float64)
    if config.gradient == "shift":
        grad_fn = make_shift_evaluator(circuit, X, y)
    else:
        def grad_fn(t):
            return finite_difference_gradient(circuit, t, X, y)
    theta = theta.copy()
    acc = np.zeros_like(theta)
    trace = np.zeros(config.max_steps + 1)
    best_theta = theta.copy()
    best_cost = np.inf
    for step in range(config.max_steps):
        c, g = grad_fn(theta)
        trace[step] = c
        if c < best_cost:
            best_cost = c
            best_theta = theta.copy()
        acc = config.decay * acc + (1 - config.decay) * g**2
        theta = theta - config.learning_rate * g / (np.sqrt(acc) + config.epsilon)
    final, _ = grad_fn(theta)
    trace[config.max_steps] = final
    if final < best_cost:
        best_cost = final
        best_theta = theta
    return TrainResult(best_theta, float(best_cost), trace)
