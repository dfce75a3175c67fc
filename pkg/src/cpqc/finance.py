"""Option payoffs, discretized market models, and the pricing pipeline.

A payoff spec plus a price grid defines a regression task (payoff sampled
on the grid, scaled into the readout range) and, independently, a pricing
task: the discounted expectation of the payoff under a distribution binned
to the same grid.  Three interchangeable backends estimate that
expectation: a classical weighted sum, the conditional-circuit readout of
a trained model, and the comparator-based arithmetic baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar

import numpy as np

from .arithmetic import (
    ArithmeticCircuit,
    build_basket,
    build_vanilla,
    invert_probability,
)
from .circuit import Circuit
from .conditional import (
    ControlLayout,
    ProductDistribution,
    conditional_expectation,
    make_conditional,
)
from .training import Problem, quantum_model

PAYOFF_KINDS = ("call", "put", "basket_fixed", "basket_variable")
DISTRIBUTION_FAMILIES = ("lognormal", "uniform", "custom")


@dataclass(frozen=True)
class PayoffSpec:
    """Contract type, strike in currency units, basket weights."""

    kind: str
    strike: float
    weights: tuple | None = None

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        w = self.weights
        if self.kind in ("call", "put"):
            if w is not None:
                raise ValueError("single-underlying options take no weights")
            return
        if w is None:
            if self.kind == "basket_fixed":
                raise ValueError("fixed-weight basket requires weights")
            return  # variable weight may be supplied at pricing time
        w = tuple(float(x) for x in w)
        object.__setattr__(self, "weights", w)
        if len(w) < 2:
            raise ValueError("baskets need at least two underlyings")
        if self.kind == "basket_variable" and len(w) != 2:
            raise ValueError("variable-weight baskets take two underlyings")
        if min(w) < 0:
            raise ValueError("weights must be nonnegative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @property
    def num_underlyings(self) -> int:
        if self.kind in ("call", "put"):
            return 1
        if self.kind == "basket_variable":
            return 2
        return len(self.weights)


def payoff(spec: PayoffSpec, prices, weights=None):
    """Payoff in currency units for one sample or a batch of price rows.

    ``weights`` overrides the spec weights; a 2-D array gives one weight
    row per price row (variable-weight training sets need that).
    """
    k = spec.num_underlyings
    arr = np.asarray(prices, dtype=np.float64)
    if k == 1:
        scalar = arr.ndim == 0
        if arr.ndim == 2 and arr.shape[1] != 1 or arr.ndim > 2:
            raise ValueError("expected scalar prices for a single underlying")
        rows = arr.reshape(-1, 1)
    else:
        scalar = arr.ndim == 1
        if arr.ndim not in (1, 2) or arr.shape[-1] != k:
            raise ValueError(f"expected price rows of length {k}")
        rows = arr.reshape(-1, k)
    if spec.kind == "call":
        vals = np.maximum(rows[:, 0] - spec.strike, 0.0)
    elif spec.kind == "put":
        vals = np.maximum(spec.strike - rows[:, 0], 0.0)
    else:
        w = weights if weights is not None else spec.weights
        if w is None:
            raise ValueError("basket weights missing")
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 1:
            if w.shape[0] != k:
                raise ValueError("one weight per underlying required")
            if np.min(w) < 0 or abs(float(w.sum()) - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            combined = rows @ w
        else:
            if w.shape != rows.shape:
                raise ValueError("per-row weights must match the price rows")
            if np.min(w) < 0 or np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            combined = (rows * w).sum(axis=1)
        vals = np.maximum(combined - spec.strike, 0.0)
    return float(vals[0]) if scalar else vals


@dataclass(frozen=True)
class PriceGrid:
    """Per-underlying price ranges and register sizes.

    Grid point i of register k sits at price linspace(lo, hi, 2^n_k)[i]
    and enters the circuit as the angle 2*pi*i/2^n_k.  A nonzero
    ``weight_qubits`` appends a register for the variable basket weight
    w = j/2^n_w, encoded as the angle 2*pi*w.
    """

    ranges: tuple
    qubits: tuple
    weight_qubits: int = 0

    def __post_init__(self):
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        qubits = tuple(int(n) for n in self.qubits)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "qubits", qubits)
        if len(ranges) != len(qubits) or not qubits:
            raise ValueError("one range and register size per underlying")
        if min(qubits) < 1 or self.weight_qubits < 0:
            raise ValueError("register sizes must be positive")
        if any(hi <= lo for lo, hi in ranges):
            raise ValueError("degenerate price range")

    @property
    def num_underlyings(self) -> int:
        return len(self.qubits)

    def prices(self, k: int) -> np.ndarray:
        lo, hi = self.ranges[k]
        return np.linspace(lo, hi, 1 << self.qubits[k])

    def angles(self, k: int) -> np.ndarray:
        n = self.qubits[k]
        return 2.0 * np.pi * np.arange(1 << n) / (1 << n)

    def weight_values(self) -> np.ndarray:
        if not self.weight_qubits:
            raise ValueError("grid has no weight register")
        return np.arange(1 << self.weight_qubits) / (1 << self.weight_qubits)

    def register_sizes(self) -> tuple:
        extra = (self.weight_qubits,) if self.weight_qubits else ()
        return self.qubits + extra

    def layout(self, target_size: int) -> ControlLayout:
        return ControlLayout.dyadic(self.register_sizes(), target_size)

    @classmethod
    def for_model(cls, model: "MarketModel", qubits, weight_qubits: int = 0):
        """Standard range [0, 2*S0*e^{rT}] per underlying."""
        if np.ndim(qubits) == 0:
            qubits = (int(qubits),) * len(model.spot)
        top = [2.0 * s * math.exp(model.rate * model.maturity) for s in model.spot]
        return cls(tuple((0.0, t) for t in top), tuple(qubits), weight_qubits)


@dataclass(frozen=True)
class MarketModel:
    """Risk-neutral model per underlying with a shared rate and maturity."""

    spot: tuple = (100.0,)
    volatility: tuple = (0.2,)
    rate: float = 0.05
    maturity: float = 1.0
    family: str = "lognormal"
    vectors: tuple | None = None  # custom family only

    def __post_init__(self):
        spot = tuple(float(s) for s in np.atleast_1d(self.spot))
        vol = tuple(float(v) for v in np.atleast_1d(self.volatility))
        if len(vol) == 1 and len(spot) > 1:
            vol = vol * len(spot)
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "volatility", vol)
        if len(vol) != len(spot):
            raise ValueError("one volatility per underlying required")
        if min(spot) <= 0 or min(vol) <= 0 or self.maturity <= 0:
            raise ValueError("spot, volatility and maturity must be positive")
        if self.family not in DISTRIBUTION_FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        if self.family == "custom" and self.vectors is None:
            raise ValueError("custom family requires probability vectors")


def _lognormal_cdf(x: float, s0: float, sigma: float, rate: float, t: float) -> float:
    if x <= 0.0:
        return 0.0
    mu = math.log(s0) + (rate - 0.5 * sigma * sigma) * t
    z = (math.log(x) - mu) / (sigma * math.sqrt(2.0 * t))
    return 0.5 * (1.0 + math.erf(z))


def discretize(model: MarketModel, grid: PriceGrid) -> ProductDistribution:
    """Bin each underlying's distribution to its price grid.

    Lognormal mass uses the midpoint rule; the two outer bins absorb the
    tails so every vector sums to one before renormalization.
    """
    if len(model.spot) != grid.num_underlyings:
        raise ValueError("model and grid disagree on the number of underlyings")
    vectors = []
    for k in range(grid.num_underlyings):
        S = grid.prices(k)
        n = S.shape[0]
        if model.family == "uniform":
            p = np.full(n, 1.0 / n)
        elif model.family == "custom":
            p = np.asarray(model.vectors[k], dtype=np.float64)
            if p.shape != (n,):
                raise ValueError("custom vector length must match the grid")
            if np.min(p) < 0 or p.sum() <= 0:
                raise ValueError("custom vector must be a nonnegative mass")
            p = p / p.sum()
        else:
            half = 0.5 * (S[1] - S[0])
            inner = [
                _lognormal_cdf(x + half, model.spot[k], model.volatility[k],
                               model.rate, model.maturity)
                for x in S[:-1]
            ]
            p = np.diff(np.concatenate(([0.0], inner, [1.0])))
            p = np.clip(p, 0.0, None)
            p = p / p.sum()
        vectors.append(p)
    return ProductDistribution(tuple(vectors))


@dataclass(frozen=True)
class LabelScale:
    """Affine map between currency payoffs and the [-1, 1] readout range."""

    slope: float
    offset: float

    def scale(self, values):
        return self.slope * np.asarray(values, dtype=np.float64) + self.offset

    def invert(self, values):
        return (np.asarray(values, dtype=np.float64) - self.offset) / self.slope

    @classmethod
    def from_values(cls, values) -> "LabelScale":
        lo = float(np.min(values))
        hi = float(np.max(values))
        if hi - lo < 1e-12:
            return cls(1.0, -lo)  # constant payoff pins to readout 0
        return cls(2.0 / (hi - lo), -(hi + lo) / (hi - lo))


@dataclass(frozen=True)
class TrainingSetup:
    problem: Problem
    scale: LabelScale


def _check_grid(spec: PayoffSpec, grid: PriceGrid):
    if grid.num_underlyings != spec.num_underlyings:
        raise ValueError("grid does not match the number of underlyings")
    if spec.kind == "basket_variable":
        if grid.weight_qubits < 1:
            raise ValueError("variable-weight basket needs a weight register")
    elif grid.weight_qubits:
        raise ValueError("weight register only applies to variable-weight baskets")


def _strike_bounds(spec: PayoffSpec, grid: PriceGrid) -> tuple:
    los = [lo for lo, _ in grid.ranges]
    his = [hi for _, hi in grid.ranges]
    if spec.kind in ("call", "put"):
        return los[0], his[0]
    if spec.kind == "basket_variable":
        return min(los), max(his)  # weight simplex extremes
    w = spec.weights
    return (
        sum(x * lo for x, lo in zip(w, los)),
        sum(x * hi for x, hi in zip(w, his)),
    )


def _feature_table(spec: PayoffSpec, grid: PriceGrid):
    """Angle rows, matching price rows, and per-row weights (or None).

    Row order follows the joint-distribution index: first register most
    significant, the weight register (if any) last.
    """
    index_grids = [np.arange(1 << n) for n in grid.qubits]
    if spec.kind == "basket_variable":
        index_grids.append(np.arange(1 << grid.weight_qubits))
    mesh = np.meshgrid(*index_grids, indexing="ij")
    cols = [m.reshape(-1) for m in mesh]
    feats = [
        2.0 * np.pi * cols[k] / (1 << n) for k, n in enumerate(grid.qubits)
    ]
    S = np.stack(
        [grid.prices(k)[cols[k]] for k in range(grid.num_underlyings)], axis=1
    )
    weights = None
    if spec.kind == "basket_variable":
        feats.append(2.0 * np.pi * cols[-1] / (1 << grid.weight_qubits))
        wvar = cols[-1] / (1 << grid.weight_qubits)  # first asset's weight
        weights = np.stack([wvar, 1.0 - wvar], axis=1)
    return np.stack(feats, axis=1), S, weights


def build_training_problem(
    spec: PayoffSpec, grid: PriceGrid, samples: int | None = None
) -> TrainingSetup:
    """Regression set over the full grid, payoffs scaled to the readout range.

    ``samples``, when given, must equal the full grid size; training always
    covers every grid point so the conditional expectation sees no
    off-sample inputs.
    """
    _check_grid(spec, grid)
    lo, hi = _strike_bounds(spec, grid)
    if not lo <= spec.strike <= hi:
        raise ValueError("strike outside the reachable price range")
    X, S, W = _feature_table(spec, grid)
    f = payoff(spec, S, weights=W)
    if samples is not None and int(samples) != X.shape[0]:
        raise ValueError(f"full-grid training uses {X.shape[0]} samples")
    sc = LabelScale.from_values(f)
    return TrainingSetup(Problem(X, sc.scale(f)), sc)


def integer_weights(weights, max_denominator: int = 64) -> tuple:
    """Smallest integer scaling of basket weights, e.g. (2/3, 1/3) -> (2, 1)."""
    fracs = [Fraction(float(w)).limit_denominator(max_denominator) for w in weights]
    den = math.lcm(*(f.denominator for f in fracs))
    ints = [int(f * den) for f in fracs]
    g = math.gcd(*ints)
    if g > 1:
        ints = [i // g for i in ints]
    total = sum(ints)
    if total == 0:
        raise ValueError("weights vanish")
    for w, i in zip(weights, ints):
        if abs(i / total - float(w)) > 1e-9:
            raise ValueError("basket weights are not integer-scalable")
    return tuple(ints)


def build_arithmetic_circuit(
    spec: PayoffSpec, grid: PriceGrid, c_tilde: float = 0.05
) -> ArithmeticCircuit:
    """Comparator-based baseline circuit; calls and fixed baskets only."""
    _check_grid(spec, grid)
    if spec.kind == "call":
        return build_vanilla(grid.prices(0), spec.strike, c_tilde)
    if spec.kind == "basket_fixed":
        W = integer_weights(spec.weights)
        grids = [grid.prices(k) for k in range(grid.num_underlyings)]
        return build_basket(grids, W, spec.weights, spec.strike, c_tilde)
    raise ValueError(f"no arithmetic baseline for {spec.kind!r} options")


@dataclass(frozen=True)
class ExactBackend:
    """Classical weighted sum over the discretized joint distribution."""

    name: ClassVar[str] = "exact"


@dataclass(frozen=True, eq=False)
class CpqcBackend:
    """Prices through the conditional expectation of a trained model."""

    circuit: Circuit
    theta: np.ndarray
    scale: LabelScale
    name: ClassVar[str] = "cpqc"

    def __post_init__(self):
        if not isinstance(self.circuit, Circuit):
            raise ValueError("cpqc backend needs a trained circuit")
        th = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        if th.shape[0] != self.circuit.num_params:
            raise ValueError(
                f"expected {self.circuit.num_params} parameters, got {th.shape[0]}"
            )
        object.__setattr__(self, "theta", th)


@dataclass(frozen=True)
class ArithmeticBackend:
    c_tilde: float = 0.05
    name: ClassVar[str] = "arithmetic"

    def __post_init__(self):
        if not 0 < self.c_tilde < 0.5:
            raise ValueError("c_tilde must be in (0, 0.5)")


@dataclass(frozen=True)
class PriceResult:
    price: float
    expectation: float
    backend: str
    trace: dict


def price(spec: PayoffSpec, grid: PriceGrid, model: MarketModel, backend) -> PriceResult:
    """Discounted expected payoff under the discretized market model.

    The returned trace holds the backend's un-scaling record: raw readout
    and label scale for the conditional circuit, ancilla probability and
    inversion band for the arithmetic baseline.
    """
    _check_grid(spec, grid)
    dist = discretize(model, grid)
    discount = math.exp(-model.rate * model.maturity)
    X, S, W = _feature_table(spec, grid)
    f = payoff(spec, S, weights=W)

    vectors = list(dist.vectors)
    if spec.kind == "basket_variable":
        if spec.weights is None:
            raise ValueError("pricing a variable-weight basket requires weights")
        nw = grid.weight_qubits
        w1 = spec.weights[0]
        j = round(w1 * (1 << nw))
        if not 0 <= j < (1 << nw) or abs(j / (1 << nw) - w1) > 1e-9:
            raise ValueError("weight does not sit on the weight grid")
        delta = np.zeros(1 << nw)
        delta[j] = 1.0  # the weight register conditions, it is not random
        vectors.append(delta)
    joint_dist = ProductDistribution(tuple(vectors))
    reference = float(joint_dist.joint() @ f)

    if isinstance(backend, ExactBackend):
        expectation = reference
        trace = {"grid_points": int(X.shape[0])}
    elif isinstance(backend, CpqcBackend):
        if backend.circuit.num_features != len(grid.register_sizes()):
            raise ValueError("circuit features do not match the grid registers")
        layout = grid.layout(backend.circuit.num_qubits)
        cc = make_conditional(backend.circuit, layout)
        raw = conditional_expectation(cc, joint_dist, backend.theta)
        expectation = float(backend.scale.invert(raw))
        fhat = backend.scale.invert(quantum_model(backend.circuit, backend.theta, X))
        bound = float(np.max(np.abs(fhat - f)))
        if abs(expectation - reference) > bound + 1e-8:
            raise RuntimeError("conditional expectation violated the model error bound")
        trace = {
            "raw_expectation": float(raw),
            "scale_slope": float(backend.scale.slope),
            "scale_offset": float(backend.scale.offset),
            "model_error_bound": bound,
            "reference_expectation": reference,
        }
    elif isinstance(backend, ArithmeticBackend):
        circ = build_arithmetic_circuit(spec, grid, backend.c_tilde)
        p1 = circ.ancilla_probability(list(dist.vectors))
        top = float(np.max(circ.index_values))
        raw = invert_probability(p1, top, spec.strike, backend.c_tilde)
        expectation = max(raw, 0.0)
        band = backend.c_tilde**2 * max(top - spec.strike, 0.0) / 2.0
        trace = {
            "c_tilde": float(backend.c_tilde),
            "ancilla_probability": float(p1),
            "raw_expectation": float(raw),
            "threshold_index": int(circ.threshold),
            "residual_band": float(band),
            "reference_expectation": reference,
        }
    else:
        raise TypeError(f"unknown backend {backend!r}")
    trace["discount"] = float(discount)
    return PriceResult(
        price=float(discount * expectation),
        expectation=float(expectation),
        backend=type(backend).name,
        trace=trace,
    )
