"""Comparator, adders, and the payoff-rotation calibration."""

import math

import numpy as np
import pytest

from cpqc.arithmetic import (
    ArithmeticCircuit,
    build_basket,
    build_vanilla,
    closed_form_probability,
    comparator_gates,
    controlled_constant_add,
    cuccaro_add_gates,
    invert_probability,
)
from cpqc.sim import Program, ProgramGate, SRC_LIT


def run_basis_states(num_qubits: int, gates, packed_inputs):
    """Run plain gates on a batch of computational basis states."""
    prog = Program(
        num_qubits,
        [ProgramGate(g.kind, g.target, g.controls, SRC_LIT, value=g.angle) for g in gates],
    )
    dim = 1 << num_qubits
    init = np.zeros((len(packed_inputs), dim), dtype=np.complex128)
    for row, idx in enumerate(packed_inputs):
        init[row, idx] = 1.0
    return prog.run(None, None, batch=len(packed_inputs), init=init)


def sole_basis_index(row) -> int:
    hits = np.nonzero(np.abs(row) > 1e-9)[0]
    assert hits.shape == (1,), "state left the computational basis"
    assert abs(abs(row[hits[0]]) - 1.0) < 1e-12
    return int(hits[0])


class TestComparator:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_exhaustive_flip_rule(self, n):
        carries = tuple(range(n, 2 * n - 1))
        flag = 2 * n - 1
        total = 2 * n  # index + carries + flag
        anc_mask = (1 << total) - 1 ^ (((1 << n) - 1) << n)
        for threshold in sorted({1, (1 << n) // 2, (1 << n) - 1, 1 << n}):
            gates = comparator_gates(tuple(range(n)), carries, flag, threshold)
            inputs = [i << n for i in range(1 << n)]
            out = run_basis_states(total, gates, inputs)
            for i, row in enumerate(out):
                final = sole_basis_index(row)
                assert final >> n == i, "index register changed"
                flag_bit = final & 1
                assert flag_bit == (1 if i >= threshold else 0), (n, threshold, i)
                assert (final & anc_mask) >> 1 == 0, "carries not cleaned"

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            comparator_gates((0, 1), (2,), 3, 0)
        with pytest.raises(ValueError):
            comparator_gates((0, 1), (2,), 3, 5)
        with pytest.raises(ValueError):
            comparator_gates((0, 1, 2), (3,), 5, 3)  # too few carries

    def test_impossible_threshold_is_empty(self):
        assert comparator_gates((0, 1), (2,), 3, 4) == []


class TestAdders:
    def test_cuccaro_exhaustive(self):
        m = 3
        a_reg, b_reg, carry = (0, 1, 2), (3, 4, 5), 6
        gates = cuccaro_add_gates(a_reg, b_reg, carry)
        inputs = [(a << 4) | (b << 1) for a in range(8) for b in range(8)]
        out = run_basis_states(7, gates, inputs)
        for (a, b), row in zip(
            [(a, b) for a in range(8) for b in range(8)], out
        ):
            final = sole_basis_index(row)
            assert final & 1 == 0, "carry ancilla dirty"
            assert final >> 4 == a, "addend register changed"
            assert (final >> 1) & 7 == (a + b) % 8

    def test_controlled_constant_add(self):
        m = 3
        ctrl, temp, acc, carry = 0, (1, 2, 3), (4, 5, 6), 7
        for constant in (0, 1, 5, 7):
            gates = controlled_constant_add(ctrl, constant, temp, acc, carry)
            inputs = [(c << 7) | (b << 1) for c in range(2) for b in range(8)]
            out = run_basis_states(8, gates, inputs)
            for (c, b), row in zip(
                [(c, b) for c in range(2) for b in range(8)], out
            ):
                final = sole_basis_index(row)
                assert final >> 7 == c
                assert (final >> 4) & 7 == 0, "temp register dirty"
                assert final & 1 == 0
                assert (final >> 1) & 7 == (b + c * constant) % 8

    def test_size_validation(self):
        with pytest.raises(ValueError):
            cuccaro_add_gates((0, 1), (2,), 3)
        with pytest.raises(ValueError):
            controlled_constant_add(0, 9, (1, 2, 3), (4, 5, 6), 7)


def lump_distribution(rng, size):
    p = rng.random(size) + 0.05
    return p / p.sum()


class TestVanillaCircuit:
    def test_no_itm_probability_exact(self):
        prices = np.linspace(0, 200, 8)
        circ = build_vanilla(prices, strike=250.0, c_tilde=0.05)
        p = np.full(8, 1 / 8)
        assert circ.ancilla_probability([p]) == pytest.approx(0.45, abs=1e-12)
        assert circ.threshold == 8

    def test_per_state_angle_exact(self):
        # point masses recover sin^2(pi/4 - zeta/2 + zeta g_i) state by state
        prices = np.linspace(0, 200, 16)
        K, c = 90.0, 0.1
        circ = build_vanilla(prices, K, c)
        zeta = math.asin(2 * c)
        for i in range(16):
            p = np.zeros(16)
            p[i] = 1.0
            got = circ.ancilla_probability([p])
            g = (prices[i] - K) / (prices[-1] - K) if prices[i] > K else 0.0
            want = math.sin(math.pi / 4 - zeta / 2 + zeta * g) ** 2
            assert got == pytest.approx(want, abs=1e-12), i

    def test_top_state_probability(self):
        prices = np.linspace(0, 200, 8)
        circ = build_vanilla(prices, 100.0, 0.05)
        p = np.zeros(8)
        p[-1] = 1.0
        assert circ.ancilla_probability([p]) == pytest.approx(0.55, abs=1e-12)

    @pytest.mark.parametrize("c_tilde", [0.05, 0.1])
    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_matches_closed_form_within_cube(self, rng, n, c_tilde):
        prices = np.linspace(0, 200, 1 << n)
        for strike in (-10.0, 60.0, 120.0, 170.0):
            circ = build_vanilla(prices, strike, c_tilde)
            p = lump_distribution(rng, 1 << n)
            sim = circ.ancilla_probability([p])
            ref = closed_form_probability([p], prices, strike, c_tilde)
            assert abs(sim - ref) < c_tilde**3, (n, strike)

    def test_all_itm_uses_plain_flip(self):
        prices = np.linspace(100, 200, 8)
        circ = build_vanilla(prices, strike=50.0)
        assert circ.threshold == 0
        comp = [g for g in circ.gates if g.stage == "comparator"]
        assert len(comp) == 1 and comp[0].kind == "x"

    def test_inversion_recovers_expectation(self, rng):
        prices = np.linspace(0, 200, 32)
        K, c = 100.0, 0.05
        circ = build_vanilla(prices, K, c)
        p = lump_distribution(rng, 32)
        est = invert_probability(circ.ancilla_probability([p]), prices[-1], K, c)
        exact = float(np.dot(p, np.maximum(prices - K, 0.0)))
        band = c**3 * (prices[-1] - K) / (2 * c)
        assert abs(est - exact) < band

    def test_validation(self):
        with pytest.raises(ValueError):
            build_vanilla(np.linspace(0, 1, 6), 0.5)  # not a power of two
        with pytest.raises(ValueError):
            build_vanilla(np.linspace(0, 1, 8), 0.5, c_tilde=0.6)


class TestBasketCircuit:
    def make(self, n_each=2, strike=95.0, c_tilde=0.05):
        grids = [np.linspace(0, 200, 1 << n_each)] * 2
        return build_basket(grids, (2, 1), (2 / 3, 1 / 3), strike, c_tilde)

    def test_joint_values_match_direct_enumeration(self):
        circ = self.make(n_each=2)
        grids = np.linspace(0, 200, 4)
        direct = np.array(
            [(2 / 3) * si + (1 / 3) * sj for si in grids for sj in grids]
        )
        assert np.allclose(circ.index_values, direct, atol=1e-9)

    def test_matches_closed_form_within_cube(self, rng):
        for strike in (40.0, 95.0, 150.0):
            circ = self.make(n_each=2, strike=strike, c_tilde=0.1)
            p0 = lump_distribution(rng, 4)
            p1 = lump_distribution(rng, 4)
            sim = circ.ancilla_probability([p0, p1])
            ref = closed_form_probability(
                [p0, p1], circ.index_values, strike, 0.1
            )
            assert abs(sim - ref) < 0.1**3, strike

    def test_no_itm_exact(self):
        circ = self.make(strike=500.0)
        p = np.full(4, 0.25)
        assert circ.ancilla_probability([p, p]) == pytest.approx(0.45, abs=1e-12)

    def test_ancillas_disentangle(self, rng):
        # after the uncompute pass, only source + payoff qubits carry weight
        circ = self.make(n_each=2)
        p0, p1 = lump_distribution(rng, 4), lump_distribution(rng, 4)
        joint = np.kron(p0, p1)
        amps = np.sqrt(joint)
        tail = circ.num_qubits - 4
        init = np.zeros(1 << circ.num_qubits, dtype=np.complex128)
        init[np.arange(16) << tail] = amps
        final = circ.program().run(None, None, batch=1, init=init)[0]
        probs = np.abs(final) ** 2
        idx = np.arange(probs.shape[0])
        anc_mask = ((1 << tail) - 1) & ~1  # everything between sources and payoff
        leaked = probs[(idx & anc_mask) != 0].sum()
        assert leaked < 1e-20

    def test_ancilla_budget(self):
        circ = self.make(n_each=2)
        budget = circ.ancilla_budget()
        m = len(circ.sum_register)
        assert budget["sum"] == m
        assert budget["temp"] == m
        assert budget["carry"] == max(m - 1, 1)
        assert budget["total"] == circ.num_qubits - 4 == 2 * m + max(m - 1, 1) + 2

    def test_weight_validation(self):
        grids = [np.linspace(0, 200, 4)] * 2
        with pytest.raises(ValueError):
            build_basket(grids, (1.5, 1), (0.6, 0.4), 100.0)
        with pytest.raises(ValueError):
            build_basket(
                [np.linspace(0, 200, 4), np.linspace(0, 300, 4)],
                (2, 1),
                (2 / 3, 1 / 3),
                100.0,
            )  # incommensurable spacing

    def test_probability_shape_validation(self):
        circ = self.make()
        with pytest.raises(ValueError):
            circ.ancilla_probability([np.full(4, 0.25)])
        with pytest.raises(ValueError):
            circ.ancilla_probability([np.full(4, 0.25), np.full(8, 0.125)])
