"""Mutation, removal, acceptance, and the population loop."""

import math

import numpy as np
import pytest

from cpqc.circuit import Block, Circuit, serialize
from cpqc.search import (
    BlockPool,
    GeneticConfig,
    SearchConfig,
    accept_probability,
    block_depth,
    default_pool,
    genetic_learn,
    initial_circuit,
    layered_circuit,
    lineage_csv,
    reduce,
    sample_mutation,
    selection_weights,
    structure_learn,
)
from cpqc.training import Problem, TrainConfig, cost, optimize, quantum_model

GRID8 = (2 * math.pi / 8) * np.arange(8)


def sine_problem():
    return Problem(GRID8.reshape(-1, 1), 0.8 * np.sin(GRID8))


def fast_config(**kw):
    kw.setdefault("optimizer", TrainConfig(max_steps=60))
    return SearchConfig(**kw)


class TestAcceptProbability:
    def test_improvement_always_accepted(self):
        assert accept_probability(1.0, 0.5) == 1.0
        assert accept_probability(1.0, 1.0) == 1.0

    def test_worsening_penalized(self):
        assert accept_probability(1.0, 1.2, beta=5.0) == pytest.approx(
            math.exp(-1.0), abs=1e-12
        )

    def test_zero_old_cost_convention(self):
        assert accept_probability(0.0, 0.1) == 0.0
        assert accept_probability(0.0, 0.0) == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            accept_probability(-1.0, 0.5)


class TestSelectionWeights:
    def test_symmetry(self):
        assert np.allclose(selection_weights([1.0, 1.0]), [0.5, 0.5])

    def test_inverse_square(self):
        assert np.allclose(selection_weights([1.0, 2.0]), [0.8, 0.2], atol=1e-12)
        assert np.allclose(
            selection_weights([1.0, 2.0, 4.0]), [16 / 21, 4 / 21, 1 / 21], atol=1e-12
        )

    def test_normalized_and_equivariant(self, rng):
        c = rng.uniform(0.1, 5.0, 7)
        w = selection_weights(c)
        assert abs(w.sum() - 1.0) < 1e-12
        perm = rng.permutation(7)
        assert np.allclose(selection_weights(c[perm]), w[perm], atol=1e-14)

    def test_zero_cost_members_split_all_weight(self):
        assert np.allclose(selection_weights([0.0, 1.0, 0.0]), [0.5, 0.0, 0.5])


class TestPool:
    def test_default_pool_contents(self):
        pool = default_pool(2)
        kinds = [t[0] for t in pool.candidates]
        assert kinds.count("rot") == 3
        assert kinds.count("cnot") == 1
        assert kinds.count("pair") == 1
        assert kinds.count("enc") == 6  # 2 features x 3 axes

    def test_rejects_bad_template(self):
        with pytest.raises(ValueError):
            BlockPool((("spin", "x"),))
        with pytest.raises(ValueError):
            BlockPool(())

    def test_connectivity_restricts_pairs(self, rng):
        pool = default_pool(1, connectivity={(0, 1)})
        circ = initial_circuit(3, 1)
        for _ in range(40):
            mut, _ = sample_mutation(circ, np.zeros(0), pool, rng)
            for b in mut.blocks:
                if b.is_entangling:
                    assert {b.control, b.qubit} == {0, 1}

    def test_no_placement_raises(self, rng):
        pool = BlockPool((("cnot",),), connectivity=frozenset())
        with pytest.raises(ValueError, match="connectivity"):
            sample_mutation(initial_circuit(2, 1), np.zeros(0), pool, rng)


class TestSampleMutation:
    def test_identity_insertion_keeps_cost(self, rng):
        # rotation and pair templates at theta* = 0 leave the model alone
        pool = BlockPool((("rot", "x"), ("rot", "y"), ("rot", "z"), ("pair",)))
        circ, theta = initial_circuit(2, 1), np.zeros(0)
        prob = sine_problem()
        base = cost(circ, theta, prob.features, prob.targets)
        for _ in range(20):
            circ, theta = sample_mutation(circ, theta, pool, rng)
            now = cost(circ, theta, prob.features, prob.targets)
            assert abs(now - base) < 1e-12

    def test_inserted_block_count_and_position(self, rng):
        pool = BlockPool((("rot", "y"),))
        circ = initial_circuit(1, 1)
        mut, theta = sample_mutation(circ, np.zeros(0), pool, rng)
        assert len(mut.blocks) == 2
        assert mut.num_params == 1
        assert np.array_equal(theta, [0.0])

    def test_pair_template_is_contiguous(self, rng):
        pool = BlockPool((("pair",),))
        circ = initial_circuit(2, 1)
        mut, theta = sample_mutation(circ, np.zeros(0), pool, rng)
        assert len(mut.blocks) == 5
        assert np.array_equal(theta, [0.0, 0.0])
        pos = [i for i, b in enumerate(mut.blocks) if b.is_entangling]
        assert pos[1] - pos[0] == 3  # cnot, rot, rot, cnot back to back
        inner = mut.blocks[pos[0] + 1 : pos[1]]
        assert all(b.is_trainable for b in inner)

    def test_encoding_pool_references_feature(self, rng):
        pool = BlockPool((("enc", "y", 0),))
        mut, _ = sample_mutation(initial_circuit(2, 1), np.zeros(0), pool, rng)
        assert sum(1 for b in mut.blocks if b.is_encoding) == 2
        assert all(b.feature == 0 for b in mut.blocks if b.is_encoding)

    def test_seeded_determinism(self):
        pool = default_pool(1)
        circ = initial_circuit(2, 1)
        a, ta = sample_mutation(circ, np.zeros(0), pool, np.random.default_rng(7))
        b, tb = sample_mutation(circ, np.zeros(0), pool, np.random.default_rng(7))
        assert a == b
        assert np.array_equal(ta, tb)

    def test_slots_stay_in_block_order(self, rng):
        circ, theta = initial_circuit(2, 1), np.zeros(0)
        pool = default_pool(1)
        for _ in range(30):
            circ, theta = sample_mutation(circ, theta, pool, rng)
        slots = [b.slot for b in circ.blocks if b.slot is not None]
        assert slots == list(range(len(slots)))


class TestReduce:
    def test_detached_qubit_gate_removed(self):
        # qubit 1 never entangles with the measured qubit, so its rotation
        # is fair game even under protection
        circ = Circuit(
            2, 1, 2,
            (Block.enc("y", 0, 0), Block.rot("y", 0, 0), Block.rot("y", 1, 1)),
            (0,),
        )
        prob = sine_problem()
        theta = np.array([0.3, 1.2])
        out, out_theta = reduce(circ, theta, prob, fast_config())
        assert len(out.blocks) == 2
        assert all(b.qubit == 0 for b in out.blocks)
        assert np.array_equal(out_theta, [0.3])
        base = cost(circ, theta, prob.features, prob.targets)
        assert cost(out, out_theta, prob.features, prob.targets) == pytest.approx(base)

    def test_zero_threshold_keeps_contributing_gates(self):
        # cos(x - 0.9) tracks 0.8 sin(x) far better than either gate alone,
        # so both removals raise the cost and nothing goes
        circ = Circuit(1, 1, 1, (Block.enc("y", 0, 0), Block.rot("y", 0, 0)), (0,))
        prob = sine_problem()
        cfg = fast_config(removal_threshold=0.0, protect=False)
        out, out_theta = reduce(circ, np.array([-0.9]), prob, cfg)
        assert out.blocks == circ.blocks
        assert np.array_equal(out_theta, [-0.9])

    def test_phase_before_z_readout_removed(self):
        # an RZ straight before a Z measurement cannot change the readout
        circ = Circuit(
            1, 1, 2,
            (Block.enc("y", 0, 0), Block.rot("y", 0, 0), Block.rot("z", 0, 1)),
            (0,),
        )
        prob = sine_problem()
        out, out_theta = reduce(circ, np.array([0.7, 1.3]), prob, fast_config())
        assert all(b.gate != "rz" for b in out.blocks)
        assert np.array_equal(out_theta, [0.7])

    def test_last_entangler_protected(self):
        # the lone CNOT ties qubit 1 to the measured qubit; a cost-neutral
        # removal must still be refused while protection is on
        blocks = (
            Block.enc("y", 0, 0),
            Block.rot("y", 1, 0),
            Block.cnot(1, 0),
            Block.cnot(1, 0),
        )
        circ = Circuit(2, 1, 1, blocks, (0,))
        prob = sine_problem()
        out, _ = reduce(circ, np.array([0.0]), prob, fast_config(removal_threshold=0.5))
        assert sum(1 for b in out.blocks if b.is_entangling) >= 1
        off, _ = reduce(
            circ, np.array([0.0]), prob,
            fast_config(removal_threshold=0.5, protect=False),
        )
        assert sum(1 for b in off.blocks if b.is_entangling) == 0

    def test_last_trainable_protected(self):
        circ = Circuit(1, 1, 1, (Block.enc("y", 0, 0), Block.rot("z", 0, 0)), (0,))
        prob = sine_problem()
        out, theta = reduce(circ, np.array([0.4]), prob, fast_config())
        # RZ before readout is useless here, but it is the only trainable
        # gate on the measured qubit
        assert any(b.is_trainable for b in out.blocks)
        assert np.array_equal(theta, [0.4])


class TestStructureLearn:
    def test_zero_iterations_returns_optimized_start(self):
        circ = Circuit(1, 1, 1, (Block.enc("y", 0, 0), Block.rot("y", 0, 0)), (0,))
        prob = sine_problem()
        cfg = fast_config(n_iterations=0, seed=3)
        res = structure_learn(circ, prob, default_pool(1), cfg)
        assert res.circuit == circ
        assert len(res.trace) == 1
        assert res.cost == pytest.approx(
            cost(circ, res.theta, prob.features, prob.targets)
        )

    def test_greedy_mode_trace_non_increasing(self):
        # identity-insertable pool and a huge beta: only non-worsening moves
        # land, so the carried cost never rises
        pool = BlockPool((("rot", "x"), ("rot", "y"), ("rot", "z"), ("pair",)))
        cfg = fast_config(
            n_iterations=8, beta=1e12, removal_threshold=0.0, seed=11
        )
        res = structure_learn(initial_circuit(2, 1), sine_problem(), pool, cfg)
        costs = [e.cost for e in res.trace]
        assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))

    def test_learns_sine_target(self):
        prob = sine_problem()
        wins = 0
        for seed in range(10):
            cfg = fast_config(n_iterations=20, seed=seed)
            res = structure_learn(initial_circuit(2, 1), prob, default_pool(1), cfg)
            initial = res.trace[0].cost
            if res.cost < initial:
                wins += 1
            assert res.cost <= initial + 1e-12
        assert wins >= 9

    def test_deterministic_given_seed(self):
        prob = sine_problem()
        cfg = fast_config(n_iterations=6, seed=42)
        a = structure_learn(initial_circuit(2, 1), prob, default_pool(1), cfg)
        b = structure_learn(initial_circuit(2, 1), prob, default_pool(1), cfg)
        assert serialize(a.circuit, a.theta) == serialize(b.circuit, b.theta)
        assert a.cost == b.cost
        assert a.trace == b.trace

    def test_trace_records_iterations(self):
        cfg = fast_config(n_iterations=5, seed=0)
        res = structure_learn(initial_circuit(1, 1), sine_problem(), default_pool(1), cfg)
        assert [e.iteration for e in res.trace] == [0, 1, 2, 3, 4, 5]
        assert res.accepted_mutations <= 5


class TestGeneticLearn:
    def test_population_of_one_matches_manual_chain(self):
        prob = sine_problem()
        scfg = fast_config(n_iterations=3)
        gcfg = GeneticConfig(n_generations=2, population_size=1, search=scfg, seed=5)
        res = genetic_learn([initial_circuit(2, 1)], prob, default_pool(1), gcfg)

        circ, theta = initial_circuit(2, 1), np.zeros(0)
        last = None
        for gen in (1, 2):
            rng = np.random.default_rng(np.random.SeedSequence(5, spawn_key=(gen, 0)))
            last = structure_learn(circ, prob, default_pool(1), scfg, theta0=theta, rng=rng)
            circ, theta = last.circuit, last.theta
        assert serialize(res.circuit, res.theta) == serialize(last.circuit, last.theta)
        assert res.cost == last.cost

    def test_lineage_shape_and_improvement(self):
        prob = sine_problem()
        gcfg = GeneticConfig(
            n_generations=2, population_size=3,
            search=fast_config(n_iterations=3), seed=9,
        )
        res = genetic_learn([initial_circuit(2, 1)], prob, default_pool(1), gcfg)
        assert len(res.lineage) == 6
        gen1 = [e for e in res.lineage if e.generation == 1]
        assert [e.member for e in gen1] == [0, 1, 2]
        assert all(e.parent == e.member for e in gen1)
        gen2 = [e for e in res.lineage if e.generation == 2]
        assert all(0 <= e.parent < 3 for e in gen2)
        assert res.cost <= max(e.cost for e in gen1) + 1e-12
        csv = lineage_csv(res)
        assert csv.splitlines()[0] == "generation,member,cost,parent,accepted_mutations"
        assert len(csv.splitlines()) == 7

    def test_parallel_matches_serial(self, monkeypatch):
        prob = sine_problem()
        gcfg = GeneticConfig(
            n_generations=2, population_size=3,
            search=fast_config(n_iterations=2), seed=17,
        )
        serial = genetic_learn([initial_circuit(2, 1)], prob, default_pool(1), gcfg)
        monkeypatch.setenv("CPQC_THREADS", "3")
        parallel = genetic_learn([initial_circuit(2, 1)], prob, default_pool(1), gcfg)
        assert serialize(serial.circuit, serial.theta) == serialize(
            parallel.circuit, parallel.theta
        )
        assert serial.lineage == parallel.lineage

    def test_population_size_validation(self):
        with pytest.raises(ValueError):
            genetic_learn([], sine_problem(), default_pool(1), GeneticConfig())
        with pytest.raises(ValueError):
            genetic_learn(
                [initial_circuit(1, 1)] * 3,
                sine_problem(),
                default_pool(1),
                GeneticConfig(population_size=2),
            )


class TestHelpers:
    def test_block_depth(self):
        blocks = (
            Block.enc("y", 0, 0),
            Block.rot("y", 1, 0),
            Block.cnot(0, 1),
            Block.rot("z", 0, 1),
        )
        assert block_depth(blocks) == 3
        assert block_depth(()) == 0

    def test_depth_penalty_shifts_cost(self):
        circ = Circuit(1, 1, 1, (Block.enc("y", 0, 0), Block.rot("y", 0, 0)), (0,))
        prob = sine_problem()
        plain = structure_learn(
            circ, prob, default_pool(1), fast_config(n_iterations=0, seed=1)
        )
        taxed = structure_learn(
            circ, prob, default_pool(1),
            fast_config(n_iterations=0, seed=1, depth_penalty=0.5),
        )
        assert taxed.cost == pytest.approx(plain.cost + 0.5 * 2, abs=1e-9)

    def test_initial_circuit(self):
        circ = initial_circuit(2, 3)
        assert circ.num_qubits == 2
        assert [b.qubit for b in circ.blocks] == [0, 1, 0]
        assert [b.feature for b in circ.blocks] == [0, 1, 2]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(beta=0)
        with pytest.raises(ValueError):
            SearchConfig(removal_threshold=-0.1)
        with pytest.raises(ValueError):
            GeneticConfig(n_generations=0)

    def test_model_output_still_valid_after_search(self):
        # end-to-end sanity: the returned circuit and theta evaluate cleanly
        prob = sine_problem()
        res = structure_learn(
            initial_circuit(2, 1), prob, default_pool(1),
            fast_config(n_iterations=4, seed=2),
        )
        vals = quantum_model(res.circuit, res.theta, prob.features)
        assert vals.shape == (8,)
        assert np.all(np.abs(vals) <= 1.0 + 1e-12)


class TestLayeredCircuit:
    def test_structure(self):
        circ = layered_circuit(3, 2, layers=2)
        assert circ.num_params == 3 * 3  # two layer walls plus the closing wall
        assert circ.encoding_count() == 2 * 2
        assert sum(1 for b in circ.blocks if b.is_entangling) == 2 * 2
        feats = {b.feature for b in circ.blocks if b.is_encoding}
        assert feats == {0, 1}

    def test_reuploads_move_across_wires(self):
        circ = layered_circuit(3, 1, layers=3)
        wires = [b.qubit for b in circ.blocks if b.is_encoding]
        assert wires == [0, 1, 2]

    def test_layer_validation(self):
        with pytest.raises(ValueError):
            layered_circuit(2, 1, layers=0)

    def test_trains_below_minimal_seed(self):
        prob = sine_problem()
        cfg = TrainConfig(max_steps=120)
        rich = layered_circuit(2, 1, layers=2)
        res = optimize(rich, np.zeros(rich.num_params), prob.features, prob.targets, cfg)
        assert res.cost < 0.05
