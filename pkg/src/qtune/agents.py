"""Optimizers: Hyp-RL (DQN over whole-grid actions), Qi tabular Q-learning,
grid search and random search.

All agents maximize :meth:`Surface.score` and report metrics in that form.
Every agent returns a :class:`Trace` with one record per surface evaluation.
"""

from __future__ import annotations

import csv
import io
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from . import mdp
from .bench import DESK_LIMIT, MetaFeatures, Surface
from .mdp import EpisodeBudget, HypRLState, QiState
from .policy import EpsilonGreedy, Policy, greedy
from .qfunc import QNetwork, QTable, tabular_update
from .space import Configuration, SearchSpace

TRACE_COLUMNS = ("episode", "step", "action", "reward", "cum_reward", "best_metric", "elapsed_ms")


def split_seed(seed: int, n: int = 3) -> list[np.random.Generator]:
    """Independent generators derived from one run seed.

    Stream order is fixed: agent, policy, surface. Each is
    ``default_rng(SeedSequence(seed).spawn(n)[i])``. Network initialization
    draws its seed from the agent stream.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]


# -- traces -----------------------------------------------------------------


class TraceRecord(NamedTuple):
    episode: int
    step: int
    action: int
    reward: float
    cum_reward: float
    best_metric: float
    elapsed_ms: float


class Trace:
    """Per-evaluation log. ``action`` is the flat index of the evaluated configuration."""

    def __init__(self) -> None:
        self.records: list[TraceRecord] = []
        self._t0 = time.perf_counter()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def add(self, episode: int, step: int, action: int, reward: float, cum_reward: float,
            best_metric: float) -> None:
        elapsed = (time.perf_counter() - self._t0) * 1000.0
        self.records.append(
            TraceRecord(episode, step, int(action), float(reward), float(cum_reward),
                        float(best_metric), elapsed)
        )

    @property
    def best_metrics(self) -> np.ndarray:
        return np.array([r.best_metric for r in self.records])

    def best_at(self, budget: int) -> float:
        """Best-so-far after ``budget`` evaluations (clipped to the trace length)."""
        if not self.records:
            raise ValueError("empty trace")
        return self.records[min(budget, len(self.records)) - 1].best_metric

    def to_csv(self, timing: bool = False) -> str:
        """CSV text. Without ``timing`` the elapsed column is written as 0 so
        that reruns are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow([r.episode, r.step, r.action, repr(r.reward), repr(r.cum_reward),
                        repr(r.best_metric), f"{r.elapsed_ms:.3f}" if timing else "0"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> Trace:
        trace = cls()
        rows = csv.reader(io.StringIO(text))
        header = next(rows)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        for row in rows:
            trace.records.append(
                TraceRecord(int(row[0]), int(row[1]), int(row[2]), float(row[3]),
                            float(row[4]), float(row[5]), float(row[6]))
            )
        return trace


@dataclass
class Result:
    best_config: Configuration
    best_metric: float
    trace: Trace
    evaluations: int
    extra: dict[str, Any] = field(default_factory=dict)

    def __iter__(self):
        # allows ``config, metric, trace = agent(...)``
        return iter((self.best_config, self.best_metric, self.trace))


# -- replay buffer ------------------------------------------------------------


class Experience(NamedTuple):
    state: np.ndarray
    next_state: np.ndarray
    action: int
    reward: float
    terminal: bool


class ReplayBuffer:
    """Bounded FIFO of experiences; the oldest entry is evicted on overflow."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = int(capacity)
        self._items: deque = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i: int):
        return self._items[i]

    def push(self, item) -> None:
        self._items.append(item)

    def sample(self, n: int, rng: np.random.Generator) -> list:
        """``n`` uniform draws with replacement."""
        if not self._items:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(len(self._items), size=n)
        return [self._items[i] for i in idx]


def replay_push(buffer: ReplayBuffer, item) -> None:
    buffer.push(item)


def replay_sample(buffer: ReplayBuffer, n: int, rng: np.random.Generator) -> list:
    return buffer.sample(n, rng)


# -- Hyp-RL -----------------------------------------------------------------


@dataclass
class HypRLConfig:
    """Training settings.

    ``epsilon`` decays linearly per episode to ``epsilon_final`` (constant when
    ``epsilon_final`` is None). ``policy`` overrides epsilon-greedy entirely,
    e.g. with :class:`~qtune.policy.Softmax`.
    """

    gamma: float = 0.5
    target_update_every: int = 10
    buffer_capacity: int = 1000
    episodes_per_dataset: int = 100
    actions_per_episode: int = 10
    epsilon: float = 1.0
    epsilon_final: float | None = 0.05
    minibatch_size: int = 32
    learning_rate: float = 1e-2
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "relu"
    seed: int = 0
    policy: Policy | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        for name in ("target_update_every", "buffer_capacity", "episodes_per_dataset",
                     "actions_per_episode", "minibatch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative (0 freezes the network)")
        EpsilonGreedy(self.epsilon)
        if self.epsilon_final is not None:
            EpsilonGreedy(self.epsilon_final)
        self.hidden = tuple(int(h) for h in self.hidden)

    def policy_for(self, episode: int, total: int) -> Policy:
        if self.policy is not None:
            return self.policy
        if self.epsilon_final is None or total <= 1:
            return EpsilonGreedy(self.epsilon)
        frac = episode / (total - 1)
        return EpsilonGreedy(self.epsilon + frac * (self.epsilon_final - self.epsilon))


def _shared_space(surfaces: Sequence[tuple[Surface, MetaFeatures]]) -> SearchSpace:
    if not surfaces:
        raise ValueError("hyprl_train needs at least one surface")
    space = surfaces[0][0].space
    for s, _ in surfaces[1:]:
        if s.space != space:
            raise ValueError("all training surfaces must share one search space")
    return space


def make_qnetwork(space: SearchSpace, cfg: HypRLConfig, rng: np.random.Generator,
                  n_metafeatures: int = 8) -> QNetwork:
    state_size = n_metafeatures + space.encoded_length + 1
    seed = int(rng.integers(2**63))
    return QNetwork(state_size, space.encoded_length, cfg.hidden, cfg.activation, seed)


def _batch_targets(net: QNetwork, batch: Sequence[Experience], gamma: float,
                   actions: np.ndarray) -> np.ndarray:
    """Fresh targets from the target network (no stored stale targets)."""
    targets = np.array([e.reward for e in batch], dtype=float)
    live = [i for i, e in enumerate(batch) if not e.terminal]
    if live and gamma > 0.0:
        n_act = actions.shape[0]
        states = np.repeat(np.stack([batch[i].next_state for i in live]), n_act, axis=0)
        X = np.hstack([states, np.tile(actions, (len(live), 1))])
        q = net.predict_target(X).reshape(len(live), n_act)
        targets[live] += gamma * q.max(axis=1)
    return targets


def hyprl_train(surfaces: Sequence[tuple[Surface, MetaFeatures]], cfg: HypRLConfig,
                net: QNetwork | None = None) -> tuple[QNetwork, Trace]:
    """Train a Q-network across surfaces with replay and a periodically synced target.

    Runs ``episodes_per_dataset * len(surfaces)`` episodes. Each picks a surface
    uniformly, starts from the all-zero state and acts until the episode budget
    is spent or an action repeats. After every step one minibatch is fitted.
    """
    space = _shared_space(surfaces)
    agent_rng, policy_rng, _ = split_seed(cfg.seed)
    if net is None:
        net = make_qnetwork(space, cfg, agent_rng, len(surfaces[0][1]))
    actions = space.encode_all()
    buffer = ReplayBuffer(cfg.buffer_capacity)
    trace = Trace()
    total = cfg.episodes_per_dataset * len(surfaces)
    best = -math.inf
    t = 0
    for episode in range(total):
        surface, meta = surfaces[int(agent_rng.integers(len(surfaces)))]
        policy = cfg.policy_for(episode, total)
        state = HypRLState.initial(meta, space)
        budget = EpisodeBudget(cfg.actions_per_episode)
        history: list[int] = []
        while True:
            sv = state.vector()
            a = policy.select(net.predict(net.rows(sv, actions)), policy_rng)
            config = space.config_from_flat_index(a)
            r = mdp.hyprl_reward(surface, config)
            nxt = mdp.hyprl_transition(state, config, r, space)
            budget.spend()
            history.append(a)
            done = mdp.hyprl_terminal(history, budget)
            buffer.push(Experience(sv, nxt.vector(), a, r, done))

            batch = buffer.sample(cfg.minibatch_size, agent_rng)
            X = np.hstack([np.stack([e.state for e in batch]), actions[[e.action for e in batch]]])
            net.train_minibatch(X, _batch_targets(net, batch, cfg.gamma, actions),
                                cfg.learning_rate)
            t += 1
            if t % cfg.target_update_every == 0:
                net.sync_target()

            best = max(best, r)
            trace.add(episode, budget.actions_taken - 1, a, r, nxt.cumulative_reward, best)
            state = nxt
            if done:
                break
    return net, trace


def hyprl_find_optimal(net: QNetwork, metafeatures: MetaFeatures, space: SearchSpace,
                       max_iters: int, surface: Surface | None = None) -> Configuration:
    """Greedy rollout of a trained network.

    The best (action, Q) pair is tracked across all steps; when a step fails
    to produce a new best action the state would repeat and the rollout stops.
    Rewards for the transitions come from ``surface`` when given, else 0.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if net.action_size != space.encoded_length or \
            net.state_size != len(metafeatures) + space.encoded_length + 1:
        raise ValueError("network layout does not match the space/metafeature sizes")
    actions = space.encode_all()
    state = HypRLState.initial(metafeatures, space)
    best_action: int | None = None
    best_q = -math.inf
    for _ in range(max_iters):
        previous = best_action
        q = net.predict(net.rows(state.vector(), actions))
        k = greedy(q)
        if q[k] > best_q:
            best_action, best_q = k, float(q[k])
        if best_action == previous:
            break
        config = space.config_from_flat_index(best_action)
        r = mdp.hyprl_reward(surface, config) if surface is not None else 0.0
        state = mdp.hyprl_transition(state, config, r, space)
    return space.config_from_flat_index(best_action)


# -- Qi tabular Q-learning ----------------------------------------------------


@dataclass
class QiConfig:
    """Settings for :func:`qi_optimize`.

    ``n_trials`` counts evaluations after the random seed configuration.
    With ``invert_break`` an episode ends when the change is *at most* the
    threshold instead of above it.
    """

    n_trials: int = 200
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    seed: int = 0
    threshold: float = mdp.CHANGE_THRESHOLD
    invert_break: bool = False
    q_init: float = 1.0
    policy: Policy | None = None

    def __post_init__(self) -> None:
        if int(self.n_trials) < 1:
            raise ValueError("n_trials must be at least 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        EpsilonGreedy(self.epsilon)


def qi_optimize(surface: Surface, space: SearchSpace | None = None,
                cfg: QiConfig | None = None) -> Result:
    """Tabular Q-learning over single-hyperparameter moves, restarting each
    episode from the incumbent best configuration."""
    cfg = cfg or QiConfig()
    space = space or surface.space
    if space != surface.space:
        raise ValueError("space does not match the surface")
    agent_rng, policy_rng, _ = split_seed(cfg.seed)
    policy = cfg.policy or EpsilonGreedy(cfg.epsilon)
    actions = space.single_dim_actions()
    action_ids = range(len(actions))
    table = QTable(cfg.q_init)
    trace = Trace()

    best = QiState.of(surface, space.sample(agent_rng))
    n = 0
    episode = 0
    while n < cfg.n_trials:
        state = best
        cum = 0.0
        step = 0
        while True:
            k = policy.select(table.values(state.key, action_ids), policy_rng)
            nxt = mdp.qi_apply(state, actions[k], surface)
            r = mdp.qi_reward(state, nxt)
            tabular_update(table, state.key, k, r, nxt.key, action_ids, cfg.alpha, cfg.gamma)
            c = mdp.qi_change(state, nxt)
            n += 1
            cum += r
            if nxt.metric > best.metric:
                best = nxt
            trace.add(episode, step, space.flat_index(nxt.config), r, cum, best.metric)
            state = nxt
            step += 1
            moved = c > cfg.threshold
            if (not moved if cfg.invert_break else moved) or n >= cfg.n_trials:
                break
        episode += 1
    return Result(best.config, best.metric, trace, n + 1, {"q_entries": len(table)})


# -- baselines ----------------------------------------------------------------


def random_search(surface: Surface, space: SearchSpace | None = None, budget: int = 100,
                  seed: int = 0) -> Result:
    """Uniform draws over flat indices, with replacement."""
    space = space or surface.space
    if budget < 1:
        raise ValueError("budget must be at least 1")
    agent_rng = split_seed(seed)[0]
    trace = Trace()
    best_k, best = -1, -math.inf
    for step, k in enumerate(agent_rng.integers(space.cardinality, size=budget)):
        m = surface.score(space.config_from_flat_index(int(k)))
        if m > best:
            best_k, best = int(k), m
        trace.add(0, step, int(k), m, m if step == 0 else trace.records[-1].cum_reward + m, best)
    return Result(space.config_from_flat_index(best_k), best, trace, budget)


def grid_search(surface: Surface, space: SearchSpace | None = None,
                limit: int = DESK_LIMIT) -> Result:
    """Exhaustive scan in flat-index order; the first strictly better raw metric wins."""
    space = space or surface.space
    if space.cardinality > limit:
        raise ValueError(f"grid of {space.cardinality} configurations exceeds limit {limit}")
    maximize = surface.direction.value == "maximize"
    trace = Trace()
    best_k, best_raw = -1, None
    best_score, cum = -math.inf, 0.0
    for k in range(space.cardinality):
        config = space.config_from_flat_index(k)
        raw = surface.evaluate(config)
        if best_raw is None or (raw > best_raw if maximize else raw < best_raw):
            best_k, best_raw = k, raw
            best_score = raw if maximize else 1.0 - raw
        m = raw if maximize else 1.0 - raw
        cum += m
        trace.add(0, k, k, m, cum, best_score)
    return Result(space.config_from_flat_index(best_k), best_score, trace, space.cardinality)
