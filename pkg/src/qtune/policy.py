"""Action-selection policies over a finite vector of Q-values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


def _check(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("need a non-empty 1-D vector of Q-values")
    if not np.all(np.isfinite(q)):
        raise ValueError("Q-values must be finite")
    return q


def greedy(q) -> int:
    """Argmax with ties broken toward the lowest index."""
    return int(np.argmax(_check(q)))


@dataclass(frozen=True)
class EpsilonGreedy:
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    def probabilities(self, q) -> np.ndarray:
        q = _check(q)
        p = np.full(q.size, self.epsilon / q.size)
        p[greedy(q)] += 1.0 - self.epsilon
        return p

    def select(self, q, rng: np.random.Generator) -> int:
        q = _check(q)
        # the uniform branch may also pick the greedy action
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            return int(rng.integers(q.size))
        return greedy(q)

    def with_epsilon(self, epsilon: float) -> EpsilonGreedy:
        return EpsilonGreedy(epsilon)


@dataclass(frozen=True)
class Softmax:
    """Boltzmann sampling, ``p_i ∝ exp(q_i / temperature)``."""

    temperature: float = 0.1

    def __post_init__(self) -> None:
        if not self.temperature > 0 or not math.isfinite(self.temperature):
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    def probabilities(self, q) -> np.ndarray:
        q = _check(q)
        z = (q - q.max()) / self.temperature
        e = np.exp(z)
        return e / e.sum()

    def select(self, q, rng: np.random.Generator) -> int:
        p = self.probabilities(q)
        # inverse-CDF draw; clamp guards against cumsum rounding at the top end
        k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        return min(k, p.size - 1)


Policy = Union[EpsilonGreedy, Softmax]


def select(policy: Policy, q_values, rng: np.random.Generator) -> int:
    return policy.select(q_values, rng)


def make_policy(kind: str, epsilon: float = 0.1, temperature: float = 0.1) -> Policy:
    kind = kind.strip().lower().replace("-", "_")
    if kind in ("epsilon_greedy", "egreedy"):
        return EpsilonGreedy(epsilon)
    if kind in ("softmax", "boltzmann"):
        return Softmax(temperature)
    raise ValueError(f"unknown policy {kind!r}; expected epsilon_greedy | softmax")
