"""Materialize a synthetic surface to a lookup file and read it back.

The file pins every metric, so other tools (or other implementations) can
replay exactly the same benchmark.
"""

import tempfile
from pathlib import Path

from qtune import RandomSmoothSurface, best_of, cnn_grid, load_tabular, save_tabular

surface = RandomSmoothSurface(cnn_grid(), seed=7)
path = Path(tempfile.mkdtemp()) / "cnn_seed7.csv"
save_tabular(surface, path)

head = path.read_text().splitlines()[:3]
print("\n".join(line[:90] for line in head))

table = load_tabular(path)
config, metric = best_of(table)
print(f"{table.space.cardinality} rows; optimum at {table.space.values_of(config)} = {metric:.4f}")
assert table == surface.to_tabular()
