"""Communication graph, its Laplacian and the algebraic connectivity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sensing import adjacency

# lambda2 floor used wherever it divides something
LAMBDA2_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class CommGraph:
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        object.__setattr__(self, "adjacency", a.astype(float))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])


def build_graph(positions, radius: float) -> CommGraph:
    if not radius > 0:
        raise ValueError("radius must be positive")
    p = np.asarray(positions, dtype=float)
    if p.size == 0:
        return CommGraph(np.zeros((0, 0)))
    return CommGraph(adjacency(p, radius))


def laplacian(g: CommGraph) -> np.ndarray:
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def lambda2(g: CommGraph) -> float:
    """Second-smallest Laplacian eigenvalue (0 iff the graph is disconnected)."""
    if g.n < 2:
        raise ValueError("algebraic connectivity needs at least two nodes")
    w = np.linalg.eigvalsh(laplacian(g))
    return max(float(w[1]), 0.0)


def clamped_lambda2(g: CommGraph, eps: float = LAMBDA2_EPS) -> float:
    return max(lambda2(g), eps)


def local_lambda2(g: CommGraph, i: int, eps: float = LAMBDA2_EPS) -> float:
    """lambda2 of the subgraph induced by robot ``i`` and its neighbors."""
    idx = np.concatenate(([i], g.neighbors(i)))
    if len(idx) < 2:
        return eps
    sub = CommGraph(g.adjacency[np.ix_(idx, idx)])
    return max(lambda2(sub), eps)
