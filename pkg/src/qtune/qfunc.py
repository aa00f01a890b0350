"""Q-value stores: a lazy tabular Q and a small numpy MLP Q-network.

The network scores one (state, action) pair per input row, where a row is the
state vector followed by the encoded action configuration. Greedy choices over
a grid are made by batch-scoring every candidate action.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

CHECKPOINT_MAGIC = b"QTUNE-QNET"
CHECKPOINT_VERSION = 1


class QTable:
    """Sparse Q(s, a) with a default for unseen pairs.

    Reading an unseen pair never inserts it.
    """

    def __init__(self, default: float = 0.0):
        self.default = float(default)
        self._entries: dict[tuple[Hashable, Hashable], float] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: tuple[Hashable, Hashable]) -> bool:
        return key in self._entries

    def get(self, state: Hashable, action: Hashable) -> float:
        return self._entries.get((state, action), self.default)

    def set(self, state: Hashable, action: Hashable, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"refusing to store non-finite Q value {value!r}")
        self._entries[(state, action)] = float(value)

    def values(self, state: Hashable, actions: Iterable[Hashable]) -> np.ndarray:
        return np.array([self.get(state, a) for a in actions])

    def max(self, state: Hashable, actions: Iterable[Hashable]) -> float:
        get = self._entries.get
        return max((get((state, a), self.default) for a in actions), default=0.0)


def tabular_update(table: QTable, s: Hashable, a: Hashable, r: float, s_next: Hashable,
                   action_set: Sequence[Hashable], alpha: float, gamma: float) -> float:
    """One Bellman step ``Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))``.

    An empty ``action_set`` means ``s_next`` is terminal (its max is 0).
    """
    for name, v in (("r", r), ("alpha", alpha), ("gamma", gamma)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    q = table.get(s, a)
    new = q + alpha * (r + gamma * table.max(s_next, action_set) - q)
    table.set(s, a, new)
    return new


class GradientDivergence(FloatingPointError):
    """Raised when a training step produces non-finite gradients."""


_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


class QNetwork:
    """Fully connected scalar-output Q-network with a target copy.

    Args:
        state_size: Length of the state vector part of each input row.
        action_size: Length of the encoded action part of each input row.
        hidden: Hidden layer widths.
        activation: Hidden activation, ``relu`` | ``tanh``. Output is linear.
        seed: Seed for the Glorot-uniform weight initialization.

    Weights are stored as ``(fan_in, fan_out)`` matrices, so a layer computes
    ``x @ W + b``. The target parameters change only through :meth:`sync_target`.
    """

    def __init__(self, state_size: int, action_size: int, hidden: Sequence[int] = (64, 64),
                 activation: str = "relu", seed: int = 0):
        if activation not in _ACTIVATIONS or activation == "identity":
            raise ValueError(f"unsupported activation {activation!r}")
        self.state_size = int(state_size)
        self.action_size = int(action_size)
        self.sizes = (self.state_size + self.action_size, *map(int, hidden), 1)
        self.activation = activation
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.target_weights = [w.copy() for w in self.weights]
        self.target_biases = [b.copy() for b in self.biases]

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    # -- forward / backward ---------------------------------------------------

    def _forward(self, X, weights, biases):
        act = _ACTIVATIONS[self.activation][0]
        a = X
        cache = [(None, X)]
        last = len(weights) - 1
        for i, (W, b) in enumerate(zip(weights, biases)):
            z = a @ W + b
            a = z if i == last else act(z)
            cache.append((z, a))
        return a[:, 0], cache

    def _check_inputs(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_size:
            raise ValueError(
                f"input rows have {X.shape[1]} columns, network expects {self.input_size}"
            )
        return X

    def predict(self, X) -> np.ndarray:
        return self._forward(self._check_inputs(X), self.weights, self.biases)[0]

    def predict_target(self, X) -> np.ndarray:
        return self._forward(self._check_inputs(X), self.target_weights, self.target_biases)[0]

    def rows(self, state_vector: np.ndarray, action_encodings: np.ndarray) -> np.ndarray:
        """Input matrix pairing one state with each candidate action."""
        state_vector = np.asarray(state_vector, dtype=float)
        action_encodings = np.atleast_2d(action_encodings)
        if state_vector.shape != (self.state_size,):
            raise ValueError(
                f"state vector has length {state_vector.size}, expected {self.state_size}"
            )
        if action_encodings.shape[1] != self.action_size:
            raise ValueError(
                f"action encodings have width {action_encodings.shape[1]}, "
                f"expected {self.action_size}"
            )
        return np.hstack(
            [np.broadcast_to(state_vector, (action_encodings.shape[0], self.state_size)),
             action_encodings]
        )

    def loss_and_gradients(self, X, targets):
        """Mean squared error and its gradient w.r.t. every weight and bias."""
        X = self._check_inputs(X)
        targets = np.asarray(targets, dtype=float).reshape(-1)
        pred, cache = self._forward(X, self.weights, self.biases)
        err = pred - targets
        loss = float(np.mean(err**2))
        dact = _ACTIVATIONS[self.activation][1]
        delta = (2.0 / len(targets)) * err[:, None]
        gW = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[i][1]
            gW[i] = a_prev.T @ delta
            gb[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * dact(cache[i][0])
        return loss, gW, gb

    def train_minibatch(self, X, targets, learning_rate: float) -> float:
        """One SGD step on the batch; returns the loss before the step."""
        targets = np.asarray(targets, dtype=float)
        if targets.size == 0:
            raise ValueError("empty minibatch")
        if not np.all(np.isfinite(targets)):
            raise ValueError("minibatch targets must be finite")
        with np.errstate(over="ignore", invalid="ignore"):
            loss, gW, gb = self.loss_and_gradients(X, targets)
        if not all(np.all(np.isfinite(g)) for g in (*gW, *gb)):
            raise GradientDivergence(f"non-finite gradient at loss {loss!r}")
        for W, b, dW, db in zip(self.weights, self.biases, gW, gb):
            W -= learning_rate * dW
            b -= learning_rate * db
        return loss

    def sync_target(self) -> None:
        self.target_weights = [w.copy() for w in self.weights]
        self.target_biases = [b.copy() for b in self.biases]

    # -- flat parameter view --------------------------------------------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for W, b in zip(self.weights, self.biases) for p in (W, b)])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.size}")
        pos = 0
        for W, b in zip(self.weights, self.biases):
            for p in (W, b):
                p[...] = flat[pos:pos + p.size].reshape(p.shape)
                pos += p.size

    def flat_gradient(self, X, targets) -> np.ndarray:
        _, gW, gb = self.loss_and_gradients(X, targets)
        return np.concatenate([g.ravel() for pair in zip(gW, gb) for g in pair])

    def loss(self, X, targets) -> float:
        pred = self.predict(X)
        return float(np.mean((pred - np.asarray(targets, dtype=float).reshape(-1)) ** 2))

    # -- checkpoint -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write a checkpoint.

        Layout: one ASCII header line ``QTUNE-QNET <json>\\n`` with version,
        layer sizes, state size, activation and seed, then every online
        parameter as little-endian float64, layer by layer, weight matrix
        (row-major, ``fan_in x fan_out``) before bias.
        """
        header = json.dumps(
            {
                "version": CHECKPOINT_VERSION,
                "layers": list(self.sizes),
                "state_size": self.state_size,
                "activation": self.activation,
                "seed": self.seed,
            },
            sort_keys=True,
        )
        body = self.get_flat().astype("<f8").tobytes()
        Path(path).write_bytes(CHECKPOINT_MAGIC + b" " + header.encode("ascii") + b"\n" + body)

    @classmethod
    def load(cls, path: str | Path) -> QNetwork:
        data = Path(path).read_bytes()
        head, sep, body = data.partition(b"\n")
        if not sep or not head.startswith(CHECKPOINT_MAGIC + b" "):
            raise ValueError(f"{path}: not a qtune network checkpoint")
        meta = json.loads(head[len(CHECKPOINT_MAGIC) + 1:].decode("ascii"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        layers = meta["layers"]
        net = cls(meta["state_size"], layers[0] - meta["state_size"], layers[1:-1],
                  meta["activation"], meta["seed"])
        flat = np.frombuffer(body, dtype="<f8")
        if flat.size != net.n_params:
            raise ValueError(
                f"{path}: checkpoint holds {flat.size} parameters, layout needs {net.n_params}"
            )
        net.set_flat(flat.astype(float))
        net.sync_target()
        return net


def qnet_predict(net: QNetwork, state_vector: np.ndarray, action_encoding: np.ndarray) -> float:
    return float(net.predict(net.rows(state_vector, action_encoding))[0])


def qnet_train_minibatch(net: QNetwork, X, targets, learning_rate: float) -> float:
    return net.train_minibatch(X, targets, learning_rate)


def target_value(r: float, gamma: float, next_state_vector: np.ndarray | None,
                 action_encodings: np.ndarray | None, target_net: QNetwork | None,
                 is_terminal: bool) -> float:
    """Regression target: ``r`` if terminal, else ``r + gamma * max_a Q_target(s', a)``."""
    if is_terminal or gamma == 0.0:
        return float(r)
    if action_encodings is None or len(action_encodings) == 0:
        raise ValueError("non-terminal target needs a non-empty action set")
    q = target_net.predict_target(target_net.rows(next_state_vector, action_encodings))
    return float(r + gamma * q.max())


def sync_target(net: QNetwork) -> None:
    net.sync_target()
