"""Tabular Q-learning against random search on smooth synthetic surfaces.

Each seed builds a fresh surface over the six-dimension CNN grid (3840 cells),
runs both searchers with 200 evaluations and compares their best metrics to
the exhaustive optimum.
"""

import numpy as np

from qtune import QiConfig, RandomSmoothSurface, best_of, cnn_grid, qi_optimize, random_search

space = cnn_grid()
rows = []
for seed in range(10):
    surface = RandomSmoothSurface(space, seed=seed)
    optimum = surface.score(best_of(surface)[0])
    qi = qi_optimize(surface, space, QiConfig(n_trials=200, seed=seed))
    rnd = random_search(surface, space, 200, seed)
    rows.append((seed, optimum, qi.best_metric, rnd.best_metric))
    print(f"seed {seed}: optimum {optimum:.4f}  qi {qi.best_metric:.4f}  random {rnd.best_metric:.4f}")

qi_best = np.array([r[2] for r in rows])
rnd_best = np.array([r[3] for r in rows])
print(f"median best  qi {np.median(qi_best):.4f}  random {np.median(rnd_best):.4f}")
