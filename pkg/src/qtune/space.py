"""Discrete hyperparameter search spaces.

A :class:`SearchSpace` is an ordered product of finite :class:`Dimension`
value lists. Points of the space are :class:`Configuration` objects holding
one value index per dimension. Configurations can be flattened to a single
row-major index (last dimension varies fastest) and encoded as real vectors
for use as network inputs.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

import numpy as np


class Encoding(str, enum.Enum):
    ONE_HOT = "one-hot"
    SCALAR = "scalar"

    @classmethod
    def parse(cls, text: str | Encoding) -> Encoding:
        if isinstance(text, Encoding):
            return text
        key = str(text).strip().lower().replace("_", "-")
        if key in ("onehot", "one-hot"):
            return cls.ONE_HOT
        if key == "scalar":
            return cls.SCALAR
        raise ValueError(f"unknown encoding {text!r}; expected 'one-hot' or 'scalar'")


class EncodingError(ValueError):
    """Raised when a configuration does not fit the space it is encoded in."""


def _is_numeric(value: Any) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


@dataclass(frozen=True)
class Dimension:
    """One hyperparameter: a name, its ordered candidate values and an encoding.

    Scalar dimensions are encoded as a single min-max normalized component,
    one-hot dimensions as an indicator vector of length ``len(values)``.
    """

    name: str
    values: tuple
    encoding: Encoding = Encoding.ONE_HOT

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "encoding", Encoding.parse(self.encoding))
        if not self.name:
            raise ValueError("dimension name must be non-empty")
        if len(self.values) == 0:
            raise ValueError(f"dimension {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"dimension {self.name!r} has duplicate values")
        if self.encoding is Encoding.SCALAR:
            if not all(_is_numeric(v) for v in self.values):
                raise ValueError(
                    f"dimension {self.name!r}: scalar encoding needs numeric values"
                )
            if not all(math.isfinite(v) for v in self.values):
                raise ValueError(f"dimension {self.name!r}: values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def width(self) -> int:
        """Number of components this dimension contributes to an encoding."""
        return len(self.values) if self.encoding is Encoding.ONE_HOT else 1

    def scalar_table(self) -> np.ndarray:
        """Min-max normalized value per index (0 everywhere when max == min)."""
        vals = np.asarray(self.values, dtype=float)
        lo, hi = vals.min(), vals.max()
        if hi == lo:
            return np.zeros_like(vals)
        return (vals - lo) / (hi - lo)


@dataclass(frozen=True)
class Configuration:
    """Value indices, one per dimension of the owning space."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __getitem__(self, i: int) -> int:
        return self.indices[i]

    def replace(self, dim: int, value: int) -> Configuration:
        idx = list(self.indices)
        idx[dim] = value
        return Configuration(tuple(idx))


Action = tuple[int, int]
"""A single-dimension move: (dimension index, new value index)."""


class SearchSpace:
    """Cartesian product of finite dimensions.

    Args:
        dimensions: Ordered dimensions; names must be unique.

    Example:
        >>> space = SearchSpace([Dimension("a", (1, 2, 3), "scalar"),
        ...                      Dimension("b", ("x", "y"))])
        >>> space.cardinality
        6
        >>> space.config_from_flat_index(5).indices
        (2, 1)
    """

    def __init__(self, dimensions: Sequence[Dimension]):
        self.dimensions: tuple[Dimension, ...] = tuple(dimensions)
        if not self.dimensions:
            raise ValueError("search space needs at least one dimension")
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")
        self.sizes: tuple[int, ...] = tuple(len(d) for d in self.dimensions)
        # row-major strides, last dimension fastest
        strides = [1] * len(self.sizes)
        for i in range(len(self.sizes) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.sizes[i + 1]
        self._strides = tuple(strides)
        self._offsets = np.cumsum([0] + [d.width for d in self.dimensions])
        self._scalar = [
            d.scalar_table() if d.encoding is Encoding.SCALAR else None
            for d in self.dimensions
        ]

    def __repr__(self) -> str:
        return f"SearchSpace({[d.name for d in self.dimensions]}, sizes={self.sizes})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SearchSpace) and self.dimensions == other.dimensions

    def __hash__(self) -> int:
        return hash(self.dimensions)

    def __len__(self) -> int:
        return len(self.dimensions)

    @property
    def cardinality(self) -> int:
        return math.prod(self.sizes)

    @property
    def encoded_length(self) -> int:
        return int(self._offsets[-1])

    def check(self, config: Configuration) -> None:
        if len(config) != len(self.dimensions):
            raise EncodingError(
                f"configuration has {len(config)} indices, space has "
                f"{len(self.dimensions)} dimensions"
            )
        for dim, i in zip(self.dimensions, config):
            if not 0 <= i < len(dim):
                raise EncodingError(
                    f"index {i} out of range for dimension {dim.name!r} "
                    f"({len(dim)} values)"
                )

    def values_of(self, config: Configuration) -> dict[str, Any]:
        self.check(config)
        return {d.name: d.values[i] for d, i in zip(self.dimensions, config)}

    def encode(self, config: Configuration) -> np.ndarray:
        """Real-vector encoding: one-hot blocks and normalized scalars, in order."""
        self.check(config)
        out = np.zeros(self.encoded_length)
        for k, (dim, i) in enumerate(zip(self.dimensions, config)):
            start = self._offsets[k]
            if self._scalar[k] is None:
                out[start + i] = 1.0
            else:
                out[start] = self._scalar[k][i]
        return out

    def encode_all(self) -> np.ndarray:
        """Encodings of every configuration, rows in flat-index order."""
        return self.encode_indices(self.all_indices())

    def encode_indices(self, indices: np.ndarray) -> np.ndarray:
        indices = np.atleast_2d(indices)
        out = np.zeros((indices.shape[0], self.encoded_length))
        rows = np.arange(indices.shape[0])
        for k in range(len(self.dimensions)):
            start = self._offsets[k]
            col = indices[:, k]
            if self._scalar[k] is None:
                out[rows, start + col] = 1.0
            else:
                out[:, start] = self._scalar[k][col]
        return out

    def all_indices(self) -> np.ndarray:
        """Index matrix of shape (cardinality, n_dims) in flat-index order."""
        grids = np.meshgrid(*[np.arange(n) for n in self.sizes], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def flat_index(self, config: Configuration) -> int:
        self.check(config)
        return sum(i * s for i, s in zip(config, self._strides))

    def config_from_flat_index(self, k: int) -> Configuration:
        k = int(k)
        if not 0 <= k < self.cardinality:
            raise IndexError(f"flat index {k} outside [0, {self.cardinality})")
        idx = []
        for s in self._strides:
            q, k = divmod(k, s)
            idx.append(q)
        return Configuration(tuple(idx))

    def zero_config(self) -> Configuration:
        return Configuration((0,) * len(self.dimensions))

    def single_dim_actions(self) -> list[Action]:
        """All (dimension, value) moves, including no-op moves to the current value."""
        return [(i, v) for i, n in enumerate(self.sizes) for v in range(n)]

    def apply(self, config: Configuration, action: Action) -> Configuration:
        dim, value = action
        if not 0 <= dim < len(self.dimensions) or not 0 <= value < self.sizes[dim]:
            raise EncodingError(f"action {action} invalid for {self!r}")
        return config.replace(dim, value)

    def sample(self, rng: np.random.Generator) -> Configuration:
        return self.config_from_flat_index(int(rng.integers(self.cardinality)))

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {"name": d.name, "encoding": d.encoding.value, "values": list(d.values)}
            for d in self.dimensions
        ]

    @classmethod
    def from_records(cls, records: Sequence[dict[str, Any]]) -> SearchSpace:
        return cls(
            [
                Dimension(r["name"], tuple(r["values"]), r.get("encoding", "one-hot"))
                for r in records
            ]
        )


def cardinality(space: SearchSpace) -> int:
    return space.cardinality


def encode(space: SearchSpace, config: Configuration) -> np.ndarray:
    return space.encode(config)


def config_from_flat_index(space: SearchSpace, k: int) -> Configuration:
    return space.config_from_flat_index(k)


def flat_index(space: SearchSpace, config: Configuration) -> int:
    return space.flat_index(config)


def single_dim_actions(space: SearchSpace) -> list[Action]:
    return space.single_dim_actions()


def lstm_grid() -> SearchSpace:
    """The LSTM grid with structure, optimization and regularization groups."""
    return SearchSpace(
        [
            Dimension("activation", ("relu", "leaky_relu", "tanh"), Encoding.ONE_HOT),
            Dimension("neurons", (5, 10, 20), Encoding.SCALAR),
            Dimension("hidden_units", (10, 20, 50), Encoding.SCALAR),
            Dimension("optimizer", ("adam", "adadelta", "adagrad"), Encoding.ONE_HOT),
            Dimension("epochs", (10, 100), Encoding.SCALAR),
            Dimension("dropout", (0.0, 0.2, 0.4), Encoding.SCALAR),
            Dimension("regularization", ("l1", "l2"), Encoding.ONE_HOT),
            Dimension("reg_constant", (0.01, 0.001, 0.0001), Encoding.SCALAR),
        ]
    )


def cnn_grid() -> SearchSpace:
    """The CNN grid used for single-hyperparameter Q-learning."""
    return SearchSpace(
        [
            Dimension("learning_rate", (0.0001, 0.001, 0.01, 0.1), Encoding.SCALAR),
            Dimension("momentum", (0.5, 0.9, 0.95, 0.99), Encoding.SCALAR),
            Dimension("kernel_size", (1, 3, 5), Encoding.SCALAR),
            Dimension("fc_units", (128, 256, 512, 1024), Encoding.SCALAR),
            Dimension("dropout", (0.3, 0.4, 0.5, 0.6, 0.7), Encoding.SCALAR),
            Dimension("batch_size", (16, 32, 64, 128), Encoding.SCALAR),
        ]
    )
