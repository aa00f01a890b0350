import math

import numpy as np
import pytest

from qtune import mdp
from qtune.bench import MetaFeatures, QuadraticSurface, TabularSurface
from qtune.mdp import EpisodeBudget, HypRLState, QiState
from qtune.space import Configuration, Dimension, SearchSpace, cnn_grid, lstm_grid

META = MetaFeatures((2, 1, 10, 0, 2, 0.5, 1.0, 0.1))


class TestHypRL:
    def test_initial_state(self):
        s = HypRLState.initial(META, lstm_grid())
        assert s.cumulative_reward == 0.0
        assert not s.encoded_config.any()
        assert s.vector().shape == (8 + 13 + 1,)

    def test_reward_at_optimum(self):
        opt = Configuration((0, 1, 2, 0, 1, 2, 0, 1))
        assert mdp.hyprl_reward(QuadraticSurface(lstm_grid(), opt), opt) == 1.0

    def test_reward_flips_minimize(self):
        space = SearchSpace([Dimension("a", (1, 2))])
        s = TabularSurface(space, [0.3, 0.5], direction="minimize")
        assert mdp.hyprl_reward(s, Configuration((0,))) == pytest.approx(0.7)
        assert mdp.hyprl_reward(s, Configuration((0,))) == mdp.hyprl_reward(s, Configuration((0,)))

    def test_transition(self):
        space = lstm_grid()
        s0 = HypRLState.initial(META, space)
        a = Configuration((1, 0, 2, 1, 1, 0, 1, 2))
        s1 = mdp.hyprl_transition(s0, a, 0.5, space)
        assert s1.cumulative_reward == 0.5
        assert s1.metafeatures == s0.metafeatures
        np.testing.assert_array_equal(s1.encoded_config, space.encode(a))
        s2 = mdp.hyprl_transition(mdp.hyprl_transition(s0, a, 0.3, space), a, 0.4, space)
        assert s2.cumulative_reward == pytest.approx(0.7)

    def test_transition_deterministic(self):
        space = cnn_grid()
        s0 = HypRLState.initial(META, space)
        a = Configuration((1, 1, 1, 1, 1, 1))
        assert mdp.hyprl_transition(s0, a, 0.2, space) == mdp.hyprl_transition(s0, a, 0.2, space)

    def test_cumulative_is_running_sum(self):
        space = cnn_grid()
        rng = np.random.default_rng(0)
        s = HypRLState.initial(META, space)
        rewards = rng.uniform(size=50)
        total = 0.0
        for r in rewards:
            s = mdp.hyprl_transition(s, space.sample(rng), r, space)
            total += r
        assert s.cumulative_reward == total

    def test_terminal(self):
        assert mdp.hyprl_terminal(["a", "a"], EpisodeBudget(10, 2))
        assert not mdp.hyprl_terminal(["a", "b", "a"], EpisodeBudget(10, 3))
        assert mdp.hyprl_terminal(list(range(10)), EpisodeBudget(10, 10))
        assert not mdp.hyprl_terminal([], EpisodeBudget(10, 0))

    def test_budget(self):
        b = EpisodeBudget(2)
        b.spend()
        b.spend()
        assert b.exhausted
        with pytest.raises(RuntimeError):
            b.spend()
        with pytest.raises(ValueError):
            EpisodeBudget(0)


class TestQi:
    def state(self, m):
        return QiState(Configuration((0,)), m)

    def test_reward(self):
        assert mdp.qi_reward(self.state(0.80), self.state(0.85)) == pytest.approx(0.05)
        assert mdp.qi_reward(self.state(0.5), self.state(0.5)) == 0.0
        assert mdp.qi_reward(self.state(0.9), self.state(0.7)) == pytest.approx(-0.2)

    def test_change(self):
        assert mdp.qi_change(self.state(0.80), self.state(0.82)) == pytest.approx(0.02 / 0.80)
        assert mdp.qi_change(self.state(0.4), self.state(0.4)) == 0.0
        assert mdp.qi_change(self.state(0.5), self.state(0.0)) == 1.0

    def test_change_zero_incumbent(self, caplog):
        assert mdp.qi_change(self.state(0.0), self.state(0.3)) == math.inf
        assert "infinite" in caplog.text

    def test_apply(self):
        space = cnn_grid()
        opt = Configuration((1, 2, 0, 3, 4, 1))
        surface = QuadraticSurface(space, opt)
        start = QiState.of(surface, Configuration((1, 2, 0, 3, 0, 1)))
        assert mdp.qi_apply(start, (4, 0), surface) == start
        moved = mdp.qi_apply(start, (4, 4), surface)
        assert moved.config == opt and moved.metric == 1.0
        assert moved.metric == surface.evaluate(moved.config)

    def test_apply_changes_one_dim(self):
        space = cnn_grid()
        surface = QuadraticSurface(space, space.zero_config())
        rng = np.random.default_rng(2)
        s = QiState.of(surface, space.sample(rng))
        for action in space.single_dim_actions():
            n = mdp.qi_apply(s, action, surface)
            assert sum(a != b for a, b in zip(s.config, n.config)) <= 1
