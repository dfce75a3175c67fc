"""Circuit IR, serialization, and bundled-fixture tests."""

import math

import numpy as np
import pytest
from conftest import apply_dense

from cpqc.circuit import Block, Circuit, CircuitParseError, deserialize, renumber_slots, serialize
from cpqc.fixtures import fixture_grid_step, fixture_names, load_fixture
from cpqc.sim import Statevector, expectation


def small_circuit():
    return Circuit(
        num_qubits=2,
        num_features=1,
        num_params=2,
        blocks=(
            Block.rot("y", 0, 0),
            Block.enc("z", 1, 0),
            Block.cnot(0, 1),
            Block.lit("x", 1, 0.25),
            Block.fixed("sx", 0),
            Block.rot("z", 1, 1),
        ),
    )


class TestCircuitValidation:
    def test_slot_used_twice_rejected(self):
        with pytest.raises(ValueError, match="used twice"):
            Circuit(1, 0, 1, (Block.rot("y", 0, 0), Block.rot("z", 0, 0)))

    def test_unused_slot_rejected(self):
        with pytest.raises(ValueError, match="exactly once"):
            Circuit(1, 0, 2, (Block.rot("y", 0, 0),))

    def test_feature_out_of_range(self):
        with pytest.raises(ValueError, match="feature"):
            Circuit(1, 1, 0, (Block.enc("y", 0, 1),))

    def test_qubit_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            Circuit(2, 0, 0, (Block.cnot(0, 2),))

    def test_cnot_self_loop(self):
        with pytest.raises(ValueError, match="control equals target"):
            Circuit(2, 0, 0, (Block.cnot(1, 1),))


class TestBinding:
    def test_to_gate_sequence_binds_sources(self):
        c = small_circuit()
        gates = c.to_gate_sequence(np.array([0.6]), np.array([0.1, 0.2]))
        assert [g.kind for g in gates] == ["ry", "rz", "cnot", "rx", "sx", "rz"]
        assert gates[0].angle == pytest.approx(0.1)  # slot 0
        assert gates[1].angle == pytest.approx(0.6)  # feature 0
        assert gates[2].controls == (0,)
        assert gates[3].angle == pytest.approx(0.25)  # literal
        assert gates[5].angle == pytest.approx(0.2)  # slot 1

    def test_wrong_lengths_raise(self):
        c = small_circuit()
        with pytest.raises(ValueError):
            c.to_gate_sequence(np.array([0.6, 0.7]), np.array([0.1, 0.2]))
        with pytest.raises(ValueError):
            c.to_gate_sequence(np.array([0.6]), np.array([0.1]))

    def test_program_matches_gate_sequence(self, rng):
        c = small_circuit()
        xs = rng.uniform(0, 2 * math.pi, size=(6, 1))
        theta = rng.normal(size=2)
        buf = c.program().run(xs, theta)
        for i, x in enumerate(xs):
            vec = np.zeros(4, dtype=complex)
            vec[0] = 1.0
            want = apply_dense(vec, 2, c.to_gate_sequence(x, theta))
            np.testing.assert_allclose(buf[i], want, atol=1e-12)

    def test_per_gate_layering_equals_whole_run(self, rng):
        # applying the bound gates one at a time matches the compiled run
        c = small_circuit()
        x = np.array([1.1])
        theta = np.array([0.3, -0.4])
        s = Statevector.zero(2)
        from cpqc.sim import apply_gate

        for g in c.to_gate_sequence(x, theta):
            s = apply_gate(s, g)
        buf = c.program().run(x.reshape(1, 1), theta)
        np.testing.assert_allclose(s.amplitudes, buf[0], atol=1e-13)


class TestSerialization:
    def test_round_trip(self):
        c = small_circuit()
        theta = np.array([0.125, -1.5])
        text = serialize(c, theta)
        c2, theta2 = deserialize(text)
        assert c2 == c
        np.testing.assert_array_equal(theta2, theta)

    def test_round_trip_without_theta(self):
        c = small_circuit()
        c2, theta2 = deserialize(serialize(c))
        assert c2 == c
        assert theta2 is None

    def test_header_checked(self):
        with pytest.raises(CircuitParseError):
            deserialize("cpqc-ir v2\nqubits 1\n")

    def test_parse_error_carries_position(self):
        text = "cpqc-ir v1\nqubits 2\nfeatures 0\nparams 0\nmeasured 0\ngate ry one 0.5\n"
        with pytest.raises(CircuitParseError) as err:
            deserialize(text)
        assert err.value.line == 6
        assert "one" in str(err.value)

    def test_unknown_directive_rejected(self):
        text = "cpqc-ir v1\nqubits 1\nfeatures 0\nparams 0\nmeasured 0\nbogus 1\n"
        with pytest.raises(CircuitParseError, match="bogus"):
            deserialize(text)

    def test_comments_and_blank_lines_ok(self):
        text = (
            "cpqc-ir v1\n# a comment\nqubits 1\nfeatures 0\nparams 1\n\n"
            "measured 0\ngate ry 0 p0  # trailing\n"
        )
        c, _ = deserialize(text)
        assert c.num_qubits == 1
        assert c.blocks[0].slot == 0


class TestRenumber:
    def test_renumbers_in_block_order(self):
        blocks = [Block.rot("y", 0, 5), Block.fixed("x", 0), Block.rot("z", 0, 2)]
        theta = np.zeros(7)
        theta[5], theta[2] = 0.5, 0.2
        out, new_theta, count = renumber_slots(blocks, theta)
        assert count == 2
        assert out[0].slot == 0 and out[2].slot == 1
        np.testing.assert_allclose(new_theta, [0.5, 0.2])


class TestFixtures:
    def test_names(self):
        assert set(fixture_names()) == {"call_fig3", "basket_figA2", "basket_var_weight_figA4"}
        with pytest.raises(ValueError, match="unknown fixture"):
            load_fixture("nope")

    def test_call_shape(self):
        c, theta = load_fixture("call_fig3")
        assert (c.num_qubits, c.num_features, c.num_params) == (3, 1, 8)
        assert c.measured == (0,)
        assert theta.shape == (8,)
        assert theta[0] == pytest.approx(0.93963)
        assert sum(1 for b in c.blocks if b.gate == "cnot") == 9
        assert c.encoding_count() == 8
        assert sum(1 for b in c.blocks if b.gate == "sx") == 6

    def test_basket_fixed_shape(self):
        c, theta = load_fixture("basket_figA2")
        assert (c.num_qubits, c.num_features, c.num_params) == (4, 2, 9)
        assert theta.shape == (9,)
        assert sum(1 for b in c.blocks if b.gate == "cnot") == 8
        assert c.encoding_count() == 6
        # three encodings per underlying
        per_feature = [0, 0]
        for b in c.blocks:
            if b.is_encoding:
                per_feature[b.feature] += 1
        assert per_feature == [3, 3]

    def test_basket_variable_shape(self):
        c, theta = load_fixture("basket_var_weight_figA4")
        assert (c.num_qubits, c.num_features, c.num_params) == (2, 3, 16)
        assert theta.shape == (16,)
        assert sum(1 for b in c.blocks if b.gate == "cnot") == 11
        # the weight feature is encoded exactly once
        assert sum(1 for b in c.blocks if b.is_encoding and b.feature == 2) == 1

    def test_outputs_bounded_on_grid(self):
        for name in fixture_names():
            c, theta = load_fixture(name)
            step = fixture_grid_step(3)
            grid = np.arange(8) * step
            cols = [grid[np.arange(8) % 8] for _ in range(c.num_features)]
            feats = np.stack(cols, axis=1)
            vals = c.program().expectations(c.observable(), feats, theta)
            assert np.all(np.abs(vals) <= 1.0 + 1e-12)

    def test_fixture_round_trips_through_text(self):
        for name in fixture_names():
            c, theta = load_fixture(name)
            c2, theta2 = deserialize(serialize(c, theta))
            assert c2 == c
            np.testing.assert_array_equal(theta2, theta)

    def test_grid_step(self):
        assert fixture_grid_step(3) == pytest.approx(math.pi / 7)
        with np.errstate(all="raise"):
            grid = np.arange(8) * fixture_grid_step(3)
        assert grid[-1] == pytest.approx(math.pi)

    def test_call_model_values_are_reproducible(self):
        # frozen regression values: model outputs at the first three grid angles
        c, theta = load_fixture("call_fig3")
        step = fixture_grid_step(3)
        xs = (np.arange(8) * step).reshape(-1, 1)
        vals = c.program().expectations(c.observable(), xs, theta)
        s = Statevector.zero(3)
        from cpqc.sim import apply_gate

        for g in c.to_gate_sequence(xs[5], theta):
            s = apply_gate(s, g)
        assert vals[5] == pytest.approx(expectation(s, c.observable()), abs=1e-12)
