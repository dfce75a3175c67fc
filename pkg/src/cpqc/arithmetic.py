"""Quantum-arithmetic pricing baseline.

The comparison circuit the conditional approach is benchmarked against:

1. (baskets) accumulate the integer-weighted sum of the price registers
   into an extra register via controlled ripple-carry adders,
2. flip a flag ancilla iff the (summed) grid index exceeds the strike
   threshold, using a two's-complement carry chain,
3. rotate a payoff ancilla by an angle affine in the in-the-money index so
   that P(ancilla = 1) tracks the discounted-payoff sum.

With zeta = arcsin(2 c_tilde) the ancilla probability is exactly
1/2 - c_tilde when no grid point is in the money, and otherwise

    P(1) = 1/2 - c_tilde + (2 c_tilde / (B_max - K)) sum_ITM p_i (B_i - K)

up to the sin^2 linearization residual, which stays below c_tilde^3.

Everything here is emitted as plain gate operations (multi-controlled X and
RY included); the transpiler owns their decomposition to CNOT + U3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sim import GateOp, Program, ProgramGate, SRC_LIT


@dataclass
class ArithmeticCircuit:
    """Gate list plus the register map and calibration of the baseline."""

    num_qubits: int
    gates: list
    source_registers: tuple  # tuples of qubit indices, one per underlying
    sum_register: tuple  # empty for vanilla options
    carry_qubits: tuple
    temp_register: tuple  # adder scratch, empty for vanilla
    flag_qubit: int
    payoff_qubit: int
    threshold: int  # first in-the-money integer index
    c_tilde: float
    zeta: float
    index_values: np.ndarray = field(repr=False)  # B_i per integer index
    strike: float = 0.0

    def ancilla_budget(self) -> dict:
        return {
            "sum": len(self.sum_register),
            "carry": len(self.carry_qubits),
            "temp": len(self.temp_register),
            "flag": 1,
            "payoff": 1,
            "total": len(self.sum_register)
            + len(self.carry_qubits)
            + len(self.temp_register)
            + 2,
        }

    def program(self) -> Program:
        pgates = [
            ProgramGate(g.kind, g.target, g.controls, SRC_LIT, value=g.angle)
            for g in self.gates
        ]
        return Program(self.num_qubits, pgates)

    def ancilla_probability(self, probabilities) -> float:
        """P(payoff ancilla = 1) with the source registers loaded.

        ``probabilities`` is one vector per source register (product form).
        """
        vecs = [np.asarray(p, dtype=np.float64) for p in probabilities]
        if len(vecs) != len(self.source_registers):
            raise ValueError("one probability vector per source register")
        joint = np.array([1.0])
        for reg, p in zip(self.source_registers, vecs):
            if p.shape[0] != 1 << len(reg):
                raise ValueError("probability vector length mismatch")
            joint = np.kron(joint, p)
        amps = np.sqrt(joint)
        tail = self.num_qubits - sum(len(r) for r in self.source_registers)
        init = np.zeros(1 << self.num_qubits, dtype=np.complex128)
        init[np.arange(amps.shape[0]) << tail] = amps
        buf = self.program().run(None, None, batch=1, init=init)
        probs = np.abs(buf[0]) ** 2
        pay_bit = 1 << (self.num_qubits - 1 - self.payoff_qubit)
        idx = np.arange(probs.shape[0])
        return float(probs[(idx & pay_bit) != 0].sum())


def closed_form_probability(
    probabilities, index_values: np.ndarray, strike: float, c_tilde: float
) -> float:
    """The target expression P(1) = 1/2 - c + (2c/(B_max-K)) sum p_i (B_i-K)."""
    joint = np.array([1.0])
    for p in probabilities:
        joint = np.kron(joint, np.asarray(p, dtype=np.float64))
    values = np.asarray(index_values, dtype=np.float64)
    itm = values > strike
    if not np.any(itm):
        return 0.5 - c_tilde
    top = values.max()
    contrib = float(np.dot(joint[itm], values[itm] - strike))
    return 0.5 - c_tilde + (2 * c_tilde / (top - strike)) * contrib


def invert_probability(
    p_one: float, top_value: float, strike: float, c_tilde: float
) -> float:
    """Recover sum_ITM p_i (B_i - K) from the measured ancilla probability."""
    return (p_one - 0.5 + c_tilde) * (top_value - strike) / (2 * c_tilde)


# --- comparator -----------------------------------------------------------


def _or_into(gates, a, b, out, stage):
    """out ^= a | b, as an X-conjugated doubly-controlled X."""
    gates.append(GateOp("x", a, stage=stage))
    gates.append(GateOp("x", b, stage=stage))
    gates.append(GateOp("x", out, (a, b), stage=stage))
    gates.append(GateOp("x", a, stage=stage))
    gates.append(GateOp("x", b, stage=stage))
    gates.append(GateOp("x", out, stage=stage))


def comparator_gates(
    index_qubits, carry_qubits, flag: int, threshold: int, stage: str = "comparator"
) -> list:
    """Flip ``flag`` iff the register's integer value >= threshold.

    Two's-complement carry chain: adding A = 2^n - threshold to the value
    overflows exactly when value >= threshold.  Carries are computed LSB
    first into fresh ancillas, the final carry lands on the flag, and the
    chain is uncomputed.  Needs n - 1 carry ancillas.

    ``index_qubits`` are ordered most significant first; threshold must be
    in 1..2^n (0 means always-true, handled by the caller).
    """
    n = len(index_qubits)
    if not 1 <= threshold <= (1 << n):
        raise ValueError("threshold out of the comparable range")
    if threshold == 1 << n:
        # value >= 2^n never holds; emit nothing
        return []
    if len(carry_qubits) < n - 1:
        raise ValueError("need n - 1 carry ancillas")
    A = (1 << n) - threshold
    bit = lambda j: index_qubits[n - 1 - j]  # LSB-first view
    forward: list[GateOp] = []
    carry = None
    for j in range(n):
        out = flag if j == n - 1 else carry_qubits[j]
        a_j = (A >> j) & 1
        if carry is None:
            if a_j:
                forward.append(GateOp("cnot", out, (bit(j),), stage=stage))
            # a_j = 0: carry stays clear, nothing to record
            carry = out if a_j else "zero"
        elif carry == "zero":
            if a_j:
                forward.append(GateOp("cnot", out, (bit(j),), stage=stage))
                carry = out
            # else: still no possible carry
        else:
            if a_j:
                _or_into(forward, bit(j), carry, out, stage)
            else:
                forward.append(GateOp("x", out, (bit(j), carry), stage=stage))
            carry = out
    if carry == "zero":
        # threshold == 2^n was rejected above, so a real chain always forms
        raise AssertionError("carry chain collapsed")
    # uncompute everything except the flag write itself
    undo = [g for g in reversed(forward) if g.target != flag and flag not in g.controls]
    undo = [GateOp(g.kind, g.target, g.controls, g.angle, stage=stage) for g in undo]
    return forward + undo


# --- adders ---------------------------------------------------------------


def cuccaro_add_gates(a_qubits, b_qubits, carry: int, stage: str = "sum") -> list:
    """Ripple-carry b += a (mod 2^m), registers MSB first, one ancilla.

    The classic MAJ/UMA ladder; both registers must have equal length.
    """
    m = len(a_qubits)
    if len(b_qubits) != m:
        raise ValueError("register sizes differ")
    a = list(reversed(a_qubits))  # LSB first
    b = list(reversed(b_qubits))
    gates: list[GateOp] = []

    def maj(c, bq, aq):
        gates.append(GateOp("cnot", bq, (aq,), stage=stage))
        gates.append(GateOp("cnot", c, (aq,), stage=stage))
        gates.append(GateOp("x", aq, (c, bq), stage=stage))

    def uma(c, bq, aq):
        gates.append(GateOp("x", aq, (c, bq), stage=stage))
        gates.append(GateOp("cnot", c, (aq,), stage=stage))
        gates.append(GateOp("cnot", bq, (c,), stage=stage))

    chain = [carry] + a[:-1]
    for j in range(m):
        maj(chain[j], b[j], a[j])
    # modular add: the top carry-out is dropped rather than stored
    for j in reversed(range(m)):
        uma(chain[j], b[j], a[j])
    return gates


def controlled_constant_add(
    control: int, constant: int, temp_qubits, sum_qubits, carry: int,
    stage: str = "sum",
) -> list:
    """sum += constant if control, via load / add / unload.

    The constant is written into the temp register by CNOTs from the
    control, added with the ripple adder, and the temp register is restored.
    When the control is clear the adder sees zero and does nothing, so no
    doubly-controlled arithmetic is needed.
    """
    m = len(sum_qubits)
    if len(temp_qubits) != m:
        raise ValueError("temp register must match the sum register")
    if not 0 <= constant < (1 << m):
        raise ValueError("constant exceeds the sum register")
    load = [
        GateOp("cnot", temp_qubits[m - 1 - j], (control,), stage=stage)
        for j in range(m)
        if (constant >> j) & 1
    ]
    add = cuccaro_add_gates(temp_qubits, sum_qubits, carry, stage)
    return load + add + list(reversed(load))


# --- payoff rotation ------------------------------------------------------


def payoff_rotation_gates(
    index_qubits, flag: int, payoff: int, alpha: float, beta: float, zeta: float,
    stage: str = "payoff",
) -> list:
    """Rotate the payoff ancilla to angle pi/4 - zeta/2 + zeta (alpha+beta i)
    for flagged states (and pi/4 - zeta/2 otherwise)."""
    n = len(index_qubits)
    gates = [GateOp("ry", payoff, (), math.pi / 2 - zeta, stage=stage)]
    if alpha != 0.0:
        gates.append(GateOp("ry", payoff, (flag,), 2 * zeta * alpha, stage=stage))
    if beta != 0.0:
        for j in range(n):
            weight = float(1 << j)
            gates.append(
                GateOp(
                    "ry",
                    payoff,
                    (flag, index_qubits[n - 1 - j]),
                    2 * zeta * beta * weight,
                    stage=stage,
                )
            )
    return gates


# --- builders -------------------------------------------------------------


def _first_itm(values: np.ndarray, strike: float) -> int:
    """Smallest integer index whose value exceeds the strike (strict)."""
    itm = np.nonzero(values > strike)[0]
    return int(itm[0]) if itm.size else len(values)


def build_vanilla(
    prices: np.ndarray, strike: float, c_tilde: float = 0.05
) -> ArithmeticCircuit:
    """Baseline circuit for a single-underlying call on a monotone grid."""
    prices = np.asarray(prices, dtype=np.float64)
    if prices.shape[0] < 2:
        raise ValueError("need at least a 1-qubit price grid")
    n = int(np.log2(prices.shape[0]))
    if 1 << n != prices.shape[0]:
        raise ValueError("grid length must be a power of two")
    if not 0 < c_tilde < 0.5:
        raise ValueError("c_tilde must be in (0, 0.5)")
    zeta = math.asin(2 * c_tilde)
    L = _first_itm(prices, strike)
    index = tuple(range(n))
    carries = tuple(range(n, n + max(n - 1, 0)))
    flag = n + len(carries)
    payoff = flag + 1
    gates: list[GateOp] = []
    if L == 0:
        gates.append(GateOp("x", flag, stage="comparator"))
    elif L < prices.shape[0]:
        gates.extend(comparator_gates(index, carries, flag, L))
    alpha = beta = 0.0
    if L < prices.shape[0]:
        span = float(prices[-1] - strike)
        step = float(prices[1] - prices[0]) if n else 0.0
        alpha = float(prices[0] - strike) / span
        beta = step / span
    gates.extend(payoff_rotation_gates(index, flag, payoff, alpha, beta, zeta))
    # run the comparator backwards so the flag and carries return to |0>
    undo = [g for g in reversed(gates) if g.stage == "comparator"]
    gates = gates + [
        GateOp(g.kind, g.target, g.controls, g.angle, stage="uncompute") for g in undo
    ]
    return ArithmeticCircuit(
        num_qubits=payoff + 1,
        gates=gates,
        source_registers=(index,),
        sum_register=(),
        carry_qubits=carries,
        temp_register=(),
        flag_qubit=flag,
        payoff_qubit=payoff,
        threshold=L,
        c_tilde=c_tilde,
        zeta=zeta,
        index_values=prices.copy(),
        strike=float(strike),
    )


def build_basket(
    price_grids, int_weights, real_weights, strike: float, c_tilde: float = 0.05
) -> ArithmeticCircuit:
    """Baseline circuit for a fixed-weight basket call.

    ``int_weights`` are the scaled-up integer weights (e.g. (2, 1) for
    w = (2/3, 1/3)); the weighted index sum s = sum W_k i_k is accumulated
    into a fresh register, compared against the strike threshold, and the
    payoff rotations read the sum bits.

    The basket value must be affine in s, which holds when every underlying
    shares one grid spacing ratio: B(s) = base + slope * s.
    """
    grids = [np.asarray(g, dtype=np.float64) for g in price_grids]
    if len(grids) != len(int_weights) or len(grids) != len(real_weights):
        raise ValueError("one weight per underlying required")
    if any(int(w) != w or w < 1 for w in int_weights):
        raise ValueError("basket weights must scale to positive integers")
    if not 0 < c_tilde < 0.5:
        raise ValueError("c_tilde must be in (0, 0.5)")
    sizes = [int(np.log2(len(g))) for g in grids]
    for sz, g in zip(sizes, grids):
        if 1 << sz != len(g):
            raise ValueError("grid length must be a power of two")
    int_weights = [int(w) for w in int_weights]
    scale = None
    for W, w_real, g, sz in zip(int_weights, real_weights, grids, sizes):
        step = (g[-1] - g[0]) / ((1 << sz) - 1)
        ratio = w_real * step / W
        if scale is None:
            scale = ratio
        elif abs(ratio - scale) > 1e-9 * max(abs(scale), 1.0):
            raise ValueError("underlying grids are not commensurable")
    base = sum(w * g[0] for w, g in zip(real_weights, grids))
    smax = sum(W * ((1 << sz) - 1) for W, sz in zip(int_weights, sizes))
    m = max(1, math.ceil(math.log2(max(smax, 1)))) + 1
    sum_values = base + scale * np.arange(smax + 1)

    pos = 0
    source = []
    for sz in sizes:
        source.append(tuple(range(pos, pos + sz)))
        pos += sz
    sum_reg = tuple(range(pos, pos + m))
    pos += m
    temp = tuple(range(pos, pos + m))
    pos += m
    n_carry = max(m - 1, 1)  # adder ancilla shares the comparator pool
    carries = tuple(range(pos, pos + n_carry))
    pos += n_carry
    flag = pos
    payoff = pos + 1

    gates: list[GateOp] = []
    for reg, W, sz in zip(source, int_weights, sizes):
        for j, q in enumerate(reg):
            constant = W << (sz - 1 - j)
            gates.extend(
                controlled_constant_add(q, constant, temp, sum_reg, carries[0])
            )

    zeta = math.asin(2 * c_tilde)
    L = _first_itm(sum_values, strike)
    if L == 0:
        gates.append(GateOp("x", flag, stage="comparator"))
    elif L <= smax:
        gates.extend(comparator_gates(sum_reg, carries, flag, L))
    alpha = beta = 0.0
    if L <= smax:
        span = float(sum_values[-1] - strike)
        alpha = float(sum_values[0] - strike) / span
        beta = float(scale) / span
    gates.extend(payoff_rotation_gates(sum_reg, flag, payoff, alpha, beta, zeta))

    # return the sum register (and flag) to |0> so the ancillas factor out
    undo = [
        g
        for g in reversed(gates)
        if g.stage in ("sum", "comparator") and g.kind != "ry"
    ]
    gates = gates + [
        GateOp(g.kind, g.target, g.controls, g.angle, stage="uncompute") for g in undo
    ]

    # per-joint-source-state basket value, first register most significant
    # (the shape the closed-form oracle and price inversion consume)
    mesh = np.meshgrid(
        *[np.arange(1 << sz) for sz in sizes], indexing="ij"
    )
    s_joint = sum(W * idx for W, idx in zip(int_weights, mesh)).reshape(-1)
    joint_values = base + scale * s_joint

    return ArithmeticCircuit(
        num_qubits=payoff + 1,
        gates=gates,
        source_registers=tuple(source),
        sum_register=sum_reg,
        carry_qubits=carries,
        temp_register=temp,
        flag_qubit=flag,
        payoff_qubit=payoff,
        threshold=L,
        c_tilde=c_tilde,
        zeta=zeta,
        index_values=joint_values,
        strike=float(strike),
    )
