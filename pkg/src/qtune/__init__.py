"""Hyperparameter optimization as a Markov decision process.

Two Q-learning optimizers over discrete grids -- a transferable DQN agent
(:func:`hyprl_train` / :func:`hyprl_find_optimal`) and tabular Q-learning over
single-hyperparameter moves (:func:`qi_optimize`) -- with grid and random
search baselines and deterministic benchmark surfaces to run them on.
"""

from .agents import (
    HypRLConfig,
    QiConfig,
    ReplayBuffer,
    Result,
    Trace,
    grid_search,
    hyprl_find_optimal,
    hyprl_train,
    qi_optimize,
    random_search,
)
from .bench import (
    Direction,
    MetaFeatures,
    QuadraticSurface,
    RandomSmoothSurface,
    TabularSurface,
    best_of,
    load_tabular,
    metafeatures,
    save_tabular,
)
from .policy import EpsilonGreedy, Softmax
from .qfunc import QNetwork, QTable
from .space import Configuration, Dimension, Encoding, SearchSpace, cnn_grid, lstm_grid

__version__ = "0.1.0"

__all__ = [
    "Configuration", "Dimension", "Direction", "Encoding", "EpsilonGreedy", "HypRLConfig",
    "MetaFeatures", "QNetwork", "QTable", "QiConfig", "QuadraticSurface",
    "RandomSmoothSurface", "ReplayBuffer", "Result", "SearchSpace", "Softmax",
    "TabularSurface", "Trace", "best_of", "cnn_grid", "grid_search", "hyprl_find_optimal",
    "hyprl_train", "load_tabular", "lstm_grid", "metafeatures", "qi_optimize",
    "random_search", "save_tabular",
]
