"""The two HPO decision processes.

Hyp-RL formulation: a state is ``metafeatures ⊕ encode(config) ⊕ cumulative
reward``, an action is a whole grid cell, and an episode ends on budget or on
choosing the same action twice in a row.

Qi formulation: a state is a configuration together with its cached metric,
actions change a single hyperparameter, the reward is the metric delta and an
episode ends when the metric moves by more than a relative threshold.

Transitions in both are deterministic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .bench import MetaFeatures, Surface
from .space import Action, Configuration, SearchSpace

log = logging.getLogger(__name__)

#: Relative metric change beyond which a Qi episode ends.
CHANGE_THRESHOLD = 0.01


@dataclass(frozen=True, eq=False)
class HypRLState:
    metafeatures: MetaFeatures
    encoded_config: np.ndarray
    cumulative_reward: float = 0.0

    def __post_init__(self) -> None:
        enc = np.array(self.encoded_config, dtype=float)
        enc.setflags(write=False)
        object.__setattr__(self, "encoded_config", enc)
        object.__setattr__(self, "cumulative_reward", float(self.cumulative_reward))

    @classmethod
    def initial(cls, metafeatures: MetaFeatures, space: SearchSpace) -> HypRLState:
        return cls(metafeatures, np.zeros(space.encoded_length), 0.0)

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [self.metafeatures.as_array(), self.encoded_config, [self.cumulative_reward]]
        )

    def __len__(self) -> int:
        return len(self.metafeatures) + self.encoded_config.size + 1

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, HypRLState)
            and self.metafeatures == other.metafeatures
            and np.array_equal(self.encoded_config, other.encoded_config)
            and self.cumulative_reward == other.cumulative_reward
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class QiState:
    config: Configuration
    metric: float

    @classmethod
    def of(cls, surface: Surface, config: Configuration) -> QiState:
        return cls(config, surface.score(config))

    @property
    def key(self) -> Hashable:
        return self.config.indices


@dataclass
class EpisodeBudget:
    max_actions: int
    actions_taken: int = 0

    def __post_init__(self) -> None:
        if self.max_actions < 1:
            raise ValueError("budget must allow at least one action")

    @property
    def exhausted(self) -> bool:
        return self.actions_taken >= self.max_actions

    def spend(self) -> None:
        if self.exhausted:
            raise RuntimeError(f"budget of {self.max_actions} actions already spent")
        self.actions_taken += 1


# -- Hyp-RL -----------------------------------------------------------------


def hyprl_reward(surface: Surface, action_config: Configuration) -> float:
    return surface.score(action_config)


def hyprl_transition(state: HypRLState, action_config: Configuration, reward: float,
                     space: SearchSpace) -> HypRLState:
    return HypRLState(
        state.metafeatures,
        space.encode(action_config),
        state.cumulative_reward + reward,
    )


def hyprl_terminal(history: Sequence[Hashable], budget: EpisodeBudget) -> bool:
    """End of episode: budget spent or the last two actions are identical."""
    if budget.actions_taken >= budget.max_actions:
        return True
    return len(history) >= 2 and history[-1] == history[-2]


# -- Qi ---------------------------------------------------------------------


def qi_reward(prev: QiState, next: QiState) -> float:
    return next.metric - prev.metric


def qi_change(prev: QiState, next: QiState) -> float:
    """Relative metric change ``|prev - next| / prev``; infinite when prev is 0."""
    if prev.metric == 0.0:
        log.warning("qi_change: incumbent metric is 0, treating change as infinite")
        return math.inf
    return abs(prev.metric - next.metric) / prev.metric


def qi_apply(state: QiState, action: Action, surface: Surface) -> QiState:
    config = surface.space.apply(state.config, action)
    return QiState.of(surface, config)
