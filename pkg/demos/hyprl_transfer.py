"""Train one Q-network over several surfaces, then query it per dataset.

Each training surface is paired with a metafeature vector describing its
(synthetic) dataset. After training, the greedy rollout picks a configuration
for each dataset without further learning.
"""

import numpy as np

from qtune import HypRLConfig, RandomSmoothSurface, best_of, hyprl_find_optimal, hyprl_train
from qtune.bench import metafeatures, summarize_dataset
from qtune.space import Dimension, SearchSpace

space = SearchSpace([
    Dimension("optimizer", ("sgd", "adam", "rmsprop"), "one-hot"),
    Dimension("layers", (1, 2, 3, 4), "one-hot"),
])

rng = np.random.default_rng(0)
datasets = []
for i in range(3):
    X = rng.normal(loc=i, scale=1 + i, size=(200 + 100 * i, 4))
    y = (X[:, 0] > i).astype(int)
    meta = metafeatures(summarize_dataset(X, y))
    datasets.append((RandomSmoothSurface(space, seed=10 + i), meta))

cfg = HypRLConfig(episodes_per_dataset=150, actions_per_episode=5, learning_rate=3e-2, seed=1)
net, trace = hyprl_train(datasets, cfg)
print(f"trained on {len(datasets)} surfaces, {len(trace)} evaluations")

for surface, meta in datasets:
    chosen = hyprl_find_optimal(net, meta, space, 5)
    best, _ = best_of(surface)
    print(f"{surface.provenance}: chosen {space.values_of(chosen)} "
          f"score {surface.score(chosen):.3f}, optimum {space.values_of(best)}")
