"""Ask/tell optimizers against analytic cost oracles."""

import math

import numpy as np
import pytest

from blindcal.optimizer import (
    OPTIMIZER_KINDS,
    AskTellOptimizer,
    OptimizerConfig,
    spsa_gains,
)
from blindcal.seeds import make_rng


def run_on(cost_fn, optimizer: AskTellOptimizer, evaluations: int):
    for _ in range(evaluations):
        x = optimizer.ask()
        optimizer.tell(float(cost_fn(x)))


class TestOptimizerConfig:
    def test_defaults(self):
        config = OptimizerConfig()
        assert config.kind == "spsa"
        assert (config.a, config.c, config.big_a) == (0.3, 0.15, 10.0)
        assert (config.alpha_exp, config.gamma_exp) == (0.602, 0.101)
        assert config.step_size == 0.5

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            OptimizerConfig(kind="adam")

    def test_nonpositive_gains_rejected(self):
        with pytest.raises(ValueError):
            OptimizerConfig(a=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(c=-0.1)

    def test_exponent_range(self):
        with pytest.raises(ValueError):
            OptimizerConfig(alpha_exp=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(gamma_exp=1.5)
        OptimizerConfig(alpha_exp=1.0, gamma_exp=1.0)  # boundary allowed


class TestSpsaGains:
    def test_k_zero_values(self):
        config = OptimizerConfig(a=0.3, c=0.15, big_a=10.0)
        a_0, c_0 = spsa_gains(config, 0)
        assert abs(a_0 - 0.3 / 11.0**0.602) < 1e-12
        assert abs(c_0 - 0.15) < 1e-12

    def test_decay_formulas(self):
        config = OptimizerConfig(a=1.0, c=1.0, big_a=0.0, alpha_exp=1.0, gamma_exp=0.5)
        a_k, c_k = spsa_gains(config, 3)
        assert abs(a_k - 1.0 / 4.0) < 1e-12
        assert abs(c_k - 1.0 / 2.0) < 1e-12

    def test_gains_decrease(self):
        config = OptimizerConfig()
        pairs = [spsa_gains(config, k) for k in range(20)]
        for (a1, c1), (a2, c2) in zip(pairs, pairs[1:]):
            assert a2 < a1
            assert c2 < c1


class TestQuadraticConvergence:
    TARGET = np.array([0.4, -0.2])

    def quadratic(self, x):
        return float(np.sum((x - self.TARGET) ** 2))

    def test_spsa_seed_averaged_inf_norm(self):
        errors = []
        for seed in range(20):
            optimizer = AskTellOptimizer(
                OptimizerConfig(kind="spsa"), np.zeros(2), make_rng(100 + seed)
            )
            run_on(self.quadratic, optimizer, 200)
            errors.append(np.max(np.abs(optimizer.best_params - self.TARGET)))
        assert float(np.mean(errors)) < 0.05

    def test_exact_gradient_descent_converges(self):
        optimizer = AskTellOptimizer(
            OptimizerConfig(kind="exact_gradient_descent"), np.zeros(2), make_rng(0)
        )
        run_on(self.quadratic, optimizer, 200)
        assert np.max(np.abs(optimizer.center - self.TARGET)) < 1e-3

    def test_nelder_mead_converges(self):
        optimizer = AskTellOptimizer(
            OptimizerConfig(kind="nelder_mead"), np.zeros(2), make_rng(0)
        )
        run_on(self.quadratic, optimizer, 200)
        assert np.max(np.abs(optimizer.best_params - self.TARGET)) < 1e-3


class TestPlateau:
    @pytest.mark.parametrize("kind", OPTIMIZER_KINDS)
    def test_constant_cost_never_moves_center(self, kind):
        x0 = np.array([0.3, -0.7, 1.1])
        optimizer = AskTellOptimizer(OptimizerConfig(kind=kind), x0.copy(), make_rng(7))
        centers = []
        for _ in range(60):
            optimizer.ask()
            optimizer.tell(0.42)
            centers.append(optimizer.center)
        if kind == "nelder_mead":
            # The simplex may relabel vertices but can never leave the hull
            # of the initial simplex (spanned by x0 and x0 + c*e_j).
            c = optimizer.config.c
            for center in centers:
                assert np.all(center >= x0 - 1e-12)
                assert np.all(center <= x0 + c + 1e-12)
        else:
            for center in centers:
                np.testing.assert_allclose(center, x0, atol=1e-12)


class TestBestTracking:
    def test_best_cost_non_increasing_and_consistent(self):
        rng = make_rng(11)
        optimizer = AskTellOptimizer(OptimizerConfig(kind="spsa"), np.zeros(3), make_rng(12))
        best_seen = math.inf
        for _ in range(150):
            x = optimizer.ask()
            cost = float(np.sum(x**2) + rng.normal() * 0.01)
            optimizer.tell(cost)
            best_seen = min(best_seen, cost)
            assert optimizer.best_cost <= best_seen + 1e-15
        assert optimizer.best_cost == best_seen

    def test_best_params_match_best_query(self):
        optimizer = AskTellOptimizer(OptimizerConfig(kind="spsa"), np.ones(2), make_rng(13))
        queries, costs = [], []
        for _ in range(50):
            x = optimizer.ask()
            cost = float(np.sum((x - 0.5) ** 2))
            optimizer.tell(cost)
            queries.append(x)
            costs.append(cost)
        np.testing.assert_array_equal(optimizer.best_params, queries[int(np.argmin(costs))])


class TestAskTellProtocol:
    def test_tell_before_ask_rejected(self):
        optimizer = AskTellOptimizer(OptimizerConfig(), np.zeros(2), make_rng(0))
        with pytest.raises(RuntimeError):
            optimizer.tell(0.5)

    def test_non_finite_cost_rejected(self):
        optimizer = AskTellOptimizer(OptimizerConfig(), np.zeros(2), make_rng(0))
        optimizer.ask()
        with pytest.raises(ValueError):
            optimizer.tell(float("nan"))

    def test_bad_initial_params_rejected(self):
        with pytest.raises(ValueError):
            AskTellOptimizer(OptimizerConfig(), np.zeros((2, 2)), make_rng(0))
        with pytest.raises(ValueError):
            AskTellOptimizer(OptimizerConfig(), np.array([]), make_rng(0))
        with pytest.raises(ValueError):
            AskTellOptimizer(OptimizerConfig(), np.array([np.nan, 0.0]), make_rng(0))

    def test_evaluation_counter(self):
        optimizer = AskTellOptimizer(OptimizerConfig(), np.zeros(2), make_rng(0))
        for i in range(10):
            optimizer.ask()
            optimizer.tell(float(i))
        assert optimizer.evaluations == 10

    def test_first_query_is_initial_point(self):
        # The first evaluation is the unmodified starting point for every
        # kind, so iteration-0 cost measures the uncalibrated system.
        for kind in OPTIMIZER_KINDS:
            x0 = np.array([0.2, -0.4])
            optimizer = AskTellOptimizer(OptimizerConfig(kind=kind), x0.copy(), make_rng(5))
            np.testing.assert_array_equal(optimizer.ask(), x0)

    def test_deterministic_given_seed(self):
        def run(seed):
            optimizer = AskTellOptimizer(OptimizerConfig(kind="spsa"), np.zeros(2), make_rng(seed))
            trace = []
            for _ in range(40):
                x = optimizer.ask()
                optimizer.tell(float(np.sum((x - 1.0) ** 2)))
                trace.append(x)
            return np.array(trace)

        np.testing.assert_array_equal(run(21), run(21))
        assert not np.array_equal(run(21), run(22))


class TestSpsaStructure:
    def test_probe_pairs_are_symmetric_about_center(self):
        # After the baseline query, queries come in (center+d, center-d) pairs.
        optimizer = AskTellOptimizer(OptimizerConfig(kind="spsa"), np.zeros(3), make_rng(31))
        x = optimizer.ask()
        optimizer.tell(1.0)  # baseline at x0
        for k in range(10):
            center = optimizer.center
            plus = optimizer.ask()
            optimizer.tell(1.0 + 0.1 * np.sum(plus))
            minus = optimizer.ask()
            optimizer.tell(1.0 + 0.1 * np.sum(minus))
            np.testing.assert_allclose(plus + minus, 2.0 * center, atol=1e-12)
            offset = (plus - minus) / 2.0
            _, c_k = spsa_gains(optimizer.config, k)
            np.testing.assert_allclose(np.abs(offset), c_k, atol=1e-12)

    def test_gradient_step_direction_on_linear_cost(self):
        # f(x) = g.x has constant gradient g; a full probe pair must move the
        # center by -a_k * ghat with ghat = (f+ - f-)/(2 c_k) * delta.
        g = np.array([1.0, -2.0])
        optimizer = AskTellOptimizer(
            OptimizerConfig(kind="spsa", a=0.5, c=0.2), np.zeros(2), make_rng(33)
        )
        x = optimizer.ask()
        optimizer.tell(float(g @ x))
        plus = optimizer.ask()
        optimizer.tell(float(g @ plus))
        center_before = optimizer.center
        minus = optimizer.ask()
        optimizer.tell(float(g @ minus))
        a_0, c_0 = spsa_gains(optimizer.config, 0)
        delta = (plus - minus) / (2.0 * c_0)
        ghat = (g @ plus - g @ minus) / (2.0 * c_0) * delta
        np.testing.assert_allclose(optimizer.center, center_before - a_0 * ghat, atol=1e-12)


class TestFiniteDifferenceStructure:
    def test_probe_cycle_layout(self):
        # Baseline, then +/- h along each coordinate, then one descent step.
        config = OptimizerConfig(kind="exact_gradient_descent", c=0.1, step_size=0.5)
        optimizer = AskTellOptimizer(config, np.zeros(2), make_rng(34))
        queries = []
        cost = lambda x: float(np.sum((x - 1.0) ** 2))  # noqa: E731
        for _ in range(1 + 2 * 2):
            x = optimizer.ask()
            queries.append(x.copy())
            optimizer.tell(cost(x))
        np.testing.assert_allclose(queries[0], [0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(queries[1], [0.1, 0.0], atol=1e-12)
        np.testing.assert_allclose(queries[2], [-0.1, 0.0], atol=1e-12)
        np.testing.assert_allclose(queries[3], [0.0, 0.1], atol=1e-12)
        np.testing.assert_allclose(queries[4], [0.0, -0.1], atol=1e-12)
        # Gradient of the quadratic at 0 is (-2, -2); step = 0.5 * 2 = 1.0.
        np.testing.assert_allclose(optimizer.center, [1.0, 1.0], atol=1e-9)
