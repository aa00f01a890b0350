"""Epsilon-greedy versus softmax exploration inside the Q-learning searcher."""

import numpy as np

from qtune import EpsilonGreedy, QiConfig, RandomSmoothSurface, Softmax, cnn_grid, qi_optimize

space = cnn_grid()
policies = {
    "eps 0.1": EpsilonGreedy(0.1),
    "eps 0.3": EpsilonGreedy(0.3),
    "softmax 0.05": Softmax(0.05),
    "softmax 0.2": Softmax(0.2),
}
for name, policy in policies.items():
    best = [
        qi_optimize(RandomSmoothSurface(space, seed=s), space,
                    QiConfig(n_trials=200, seed=s, policy=policy)).best_metric
        for s in range(10)
    ]
    print(f"{name:<13} median {np.median(best):.4f}  min {np.min(best):.4f}")
