"""Input distributions and classical-quantum channels.

Symbols are addressed by their position in the alphabet; words over the
alphabet are tuples of such indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import density_matrix, tensor_all, trace_norm

PROB_TOL = 1e-12


@dataclass(frozen=True)
class InputDistribution:
    alphabet: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (len(self.alphabet),):
            raise ValueError("one probability per symbol required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"not a probability vector: {probs}")
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, alphabet: Sequence) -> "InputDistribution":
        n = len(alphabet)
        return cls(tuple(alphabet), np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, alphabet: Sequence, weights) -> "InputDistribution":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(tuple(alphabet), w / w.sum())

    def word_probability(self, word: Sequence[int]) -> float:
        return float(np.prod(self.probs[list(word)]))

    def __len__(self) -> int:
        return len(self.alphabet)


@dataclass(frozen=True)
class CqChannel:
    """A map from each alphabet symbol to a density matrix of common dimension."""

    alphabet: tuple
    outputs: tuple

    def __post_init__(self):
        if len(self.alphabet) == 0 or len(self.alphabet) != len(self.outputs):
            raise ValueError("need one output state per alphabet symbol")
        outs = tuple(density_matrix(o) for o in self.outputs)
        if len({o.shape for o in outs}) != 1:
            raise ValueError("all outputs must share one dimension")
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "outputs", outs)

    @classmethod
    def from_states(cls, states: Sequence, alphabet: Sequence | None = None) -> "CqChannel":
        alphabet = tuple(str(i) for i in range(len(states))) if alphabet is None else alphabet
        return cls(tuple(alphabet), tuple(states))

    @property
    def dim(self) -> int:
        return self.outputs[0].shape[0]

    @property
    def n_inputs(self) -> int:
        return len(self.alphabet)

    def __call__(self, x: int) -> np.ndarray:
        return self.outputs[x]

    def average(self, p: InputDistribution) -> np.ndarray:
        """Average output state ``sum_x p(x) W(x)``."""
        return np.tensordot(p.probs, np.array(self.outputs), axes=1)

    def word_output(self, word: Sequence[int]) -> np.ndarray:
        """Product state ``W(x_1) (x) ... (x) W(x_l)``."""
        return tensor_all([self.outputs[x] for x in word])


def check_compatible(channels: Sequence[CqChannel]) -> None:
    if len(channels) == 0:
        raise ValueError("empty channel family")
    first = channels[0]
    for w in channels[1:]:
        if w.n_inputs != first.n_inputs or w.dim != first.dim:
            raise ValueError("channels must share alphabet size and output dimension")


def mix_channels(q, channels: Sequence[CqChannel]) -> CqChannel:
    """Convex combination ``x -> sum_s q(s) A_s(x)``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (len(channels),):
        raise ValueError(f"{len(q)} weights for {len(channels)} channels")
    if np.any(q < -PROB_TOL) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("mixing weights must form a probability vector")
    check_compatible(channels)
    outs = np.tensordot(q, np.array([w.outputs for w in channels]), axes=1)
    return CqChannel(channels[0].alphabet, tuple(outs))


def cq_distance(w1: CqChannel, w2: CqChannel) -> float:
    """``max_x ||W1(x) - W2(x)||_1``."""
    return max(trace_norm(a - b) for a, b in zip(w1.outputs, w2.outputs))
