"""Cost, gradients, and the RMSProp loop."""

import math

import numpy as np
import pytest

from cpqc.circuit import Block, Circuit
from cpqc.fixtures import fixture_grid_step, load_fixture
from cpqc.training import (
    TrainConfig,
    cost,
    finite_difference_gradient,
    gradient,
    optimize,
    quantum_model,
)


def theta_only():
    """f(theta) = cos(theta): one trainable RY, no data."""
    return Circuit(1, 0, 1, (Block.rot("y", 0, 0),), (0,))


NO_X = np.zeros((1, 0))


class TestModelAndCost:
    def test_cosine_model(self):
        vals = quantum_model(theta_only(), [0.7], NO_X)
        assert vals[0] == pytest.approx(math.cos(0.7), abs=1e-12)

    def test_cost_is_mse(self):
        c = cost(theta_only(), [0.7], NO_X, [0.0])
        assert c == pytest.approx(math.cos(0.7) ** 2, abs=1e-12)

    def test_batch_over_grid(self):
        circ = Circuit(1, 1, 0, (Block.enc("y", 0, 0),), (0,))
        xs = fixture_grid_step(3) * np.arange(8)
        vals = quantum_model(circ, np.zeros(0), xs.reshape(-1, 1))
        assert np.allclose(vals, np.cos(xs), atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            quantum_model(theta_only(), [0.1, 0.2], NO_X)
        circ = Circuit(1, 1, 0, (Block.enc("y", 0, 0),), (0,))
        with pytest.raises(ValueError):
            quantum_model(circ, np.zeros(0), np.zeros((3, 2)))


class TestGradient:
    def test_closed_form(self):
        # cost = cos^2(theta)  =>  dcost/dtheta = -sin(2 theta)
        for t in (0.0, 0.3, 1.2, -2.5):
            c, g = gradient(theta_only(), [t], NO_X, [0.0])
            assert c == pytest.approx(math.cos(t) ** 2, abs=1e-12)
            assert g[0] == pytest.approx(-math.sin(2 * t), abs=1e-12)

    def test_no_parameters(self):
        circ = Circuit(1, 1, 0, (Block.enc("y", 0, 0),), (0,))
        c, g = gradient(circ, np.zeros(0), [[0.4]], [1.0])
        assert g.shape == (0,)
        assert c == pytest.approx((math.cos(0.4) - 1.0) ** 2, abs=1e-12)

    def test_matches_finite_differences_on_fixture(self, rng):
        circ, theta = load_fixture("basket_figA2")
        X = rng.uniform(0, math.pi, (6, circ.num_features))
        y = rng.uniform(-1, 1, 6)
        c1, g1 = gradient(circ, theta, X, y)
        c2, g2 = finite_difference_gradient(circ, theta, X, y)
        assert c1 == pytest.approx(c2, abs=1e-14)
        assert np.max(np.abs(g1 - g2)) < 1e-8

    def test_matches_finite_differences_random(self, rng):
        for _ in range(5):
            nq = int(rng.integers(1, 4))
            blocks = [Block.rot(str(rng.choice(["x", "y", "z"])), int(rng.integers(nq)), s)
                      for s in range(4)]
            blocks.insert(2, Block.enc("y", 0, 0))
            if nq > 1:
                blocks.append(Block.cnot(0, 1))
            circ = Circuit(nq, 1, 4, tuple(blocks), (0,))
            theta = rng.uniform(-math.pi, math.pi, 4)
            X = rng.uniform(0, 2 * math.pi, (5, 1))
            y = rng.uniform(-1, 1, 5)
            _, g1 = gradient(circ, theta, X, y)
            _, g2 = finite_difference_gradient(circ, theta, X, y)
            assert np.max(np.abs(g1 - g2)) < 1e-8


class TestOptimize:
    def test_drives_cosine_to_target(self):
        # minimize (cos(theta) + 1)^2: optimum at theta = pi.  RMSProp moves
        # roughly lr per step, so start within reach of the default budget.
        res = optimize(theta_only(), [2.0], NO_X, [-1.0])
        assert res.cost < 1e-3
        assert res.steps == 200
        assert len(res.trace) == 201
        assert res.trace[0] == pytest.approx(cost(theta_only(), [2.0], NO_X, [-1.0]))

    def test_best_theta_not_last(self):
        # a huge learning rate overshoots; the best-seen cost must still win
        cfg = TrainConfig(learning_rate=2.0, max_steps=30)
        res = optimize(theta_only(), [0.3], NO_X, [-1.0], cfg)
        assert res.cost == pytest.approx(min(res.trace), abs=1e-15)
        assert cost(theta_only(), res.theta, NO_X, [-1.0]) == pytest.approx(res.cost)

    def test_fd_variant_agrees(self):
        cfg_shift = TrainConfig(max_steps=25)
        cfg_fd = TrainConfig(max_steps=25, gradient="fd")
        a = optimize(theta_only(), [0.3], NO_X, [-1.0], cfg_shift)
        b = optimize(theta_only(), [0.3], NO_X, [-1.0], cfg_fd)
        assert a.cost == pytest.approx(b.cost, abs=1e-6)

    def test_recovers_generated_labels(self, rng):
        circ, theta_star = load_fixture("call_fig3")
        xs = (fixture_grid_step(3) * np.arange(8)).reshape(-1, 1)
        y = quantum_model(circ, theta_star, xs)
        theta0 = theta_star + rng.normal(0, 0.1, theta_star.shape)
        res = optimize(circ, theta0, xs, y, TrainConfig(max_steps=60))
        assert res.cost < 1e-4
        assert res.cost <= cost(circ, theta0, xs, y)

    def test_zero_steps(self):
        res = optimize(theta_only(), [0.3], NO_X, [0.0], TrainConfig(max_steps=0))
        assert res.steps == 0
        assert res.cost == pytest.approx(math.cos(0.3) ** 2)
        assert np.array_equal(res.theta, [0.3])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(gradient="adam")
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(decay=1.0)
