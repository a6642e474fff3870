"""Bottleneck and Wasserstein distances between persistence diagrams.

Both use the ∞-norm ground metric on (birth, death) points, with every
point allowed to match the diagonal at half its persistence.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist

from .const import P_INF
from .exceptions import DomainError
from .models import Embedding, PersistenceDiagram
from .preprocess import approx_diameter, normalize
from .topology import persistence, rips_complex

_LOGGER = logging.getLogger(__name__)

DIAGONAL = -1

Matching = list[tuple[int, int]]


def _costs(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return point-to-point ∞-norm costs and the diagonal costs of each side."""
    pair = cdist(a, b, metric="chebyshev") if len(a) and len(b) else np.zeros((len(a), len(b)))
    return pair, (a[:, 1] - a[:, 0]) / 2, (b[:, 1] - b[:, 0]) / 2


def _augmented_graph(pair: np.ndarray, half_a: np.ndarray, half_b: np.ndarray, limit: float) -> csr_matrix:
    """Bipartite graph of admissible edges at cost <= limit.

    Rows are the m points of a followed by n diagonal slots for b; columns
    are the n points of b followed by m diagonal slots for a.
    """
    m, n = pair.shape
    adjacency = np.zeros((m + n, n + m), dtype=bool)
    adjacency[:m, :n] = pair <= limit
    adjacency[np.arange(m), n + np.arange(m)] = half_a <= limit
    adjacency[m + np.arange(n), np.arange(n)] = half_b <= limit
    adjacency[m:, n:] = True
    return csr_matrix(adjacency.astype(np.int8))


def _decode(assignment: np.ndarray, m: int, n: int) -> Matching:
    """Translate an augmented row assignment into (index in a, index in b) pairs."""
    matching: Matching = []
    for row, col in enumerate(assignment.tolist()):
        if row < m:
            matching.append((row, col if col < n else DIAGONAL))
        elif col < n:
            matching.append((DIAGONAL, col))
    return matching


def bottleneck_matching(d1: PersistenceDiagram, d2: PersistenceDiagram, h: int) -> tuple[float, Matching]:
    """Return the exact bottleneck distance in dimension h with an optimal matching.

    Binary search over the finite set of candidate costs, testing each with
    a perfect-matching feasibility check on the diagonal-augmented graph.
    Matched pairs use -1 for the diagonal.
    """
    a, b = d1.get(h), d2.get(h)
    m, n = len(a), len(b)
    if m + n == 0:
        return 0.0, []

    pair, half_a, half_b = _costs(a, b)
    candidates = np.unique(np.concatenate([pair.ravel(), half_a, half_b, [0.0]]))

    lo, hi = 0, len(candidates) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        assignment = maximum_bipartite_matching(
            _augmented_graph(pair, half_a, half_b, candidates[mid]), perm_type="column"
        )
        if np.all(assignment >= 0):
            best = (mid, assignment)
            hi = mid - 1
        else:
            lo = mid + 1

    # The largest candidate always admits the full diagonal matching
    assert best is not None
    index, assignment = best
    return float(candidates[index]), _decode(assignment, m, n)


def bottleneck(d1: PersistenceDiagram, d2: PersistenceDiagram, h: int) -> float:
    """Return the exact bottleneck distance between two diagrams in dimension h."""
    return bottleneck_matching(d1, d2, h)[0]


def wasserstein(d1: PersistenceDiagram, d2: PersistenceDiagram, h: int, p: float = 2.0) -> float:
    """Return the exact p-Wasserstein distance in dimension h.

    Solved as a linear assignment on the diagonal-augmented cost matrix.
    p = inf gives the bottleneck distance.

    Raises:
        DomainError: p < 1
    """
    if not p >= 1:
        raise DomainError(f"Wasserstein order must be >= 1, got {p}")
    if p == P_INF:
        return bottleneck(d1, d2, h)

    a, b = d1.get(h), d2.get(h)
    m, n = len(a), len(b)
    if m + n == 0:
        return 0.0

    pair, half_a, half_b = _costs(a, b)
    powered = np.concatenate([pair.ravel(), half_a, half_b]) ** p
    forbidden = float(powered.sum()) + 1.0

    cost = np.full((m + n, n + m), forbidden)
    cost[:m, :n] = pair**p
    cost[np.arange(m), n + np.arange(m)] = half_a**p
    cost[m + np.arange(n), np.arange(n)] = half_b**p
    cost[m:, n:] = 0.0

    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    _LOGGER.debug("W_%s over %d+%d points: total cost %.6g", p, m, n, total)
    return total ** (1.0 / p)


def _normalized_diagram(points: np.ndarray, h: int, source_id: str) -> PersistenceDiagram:
    embedding = Embedding(data=points, source_id=source_id)
    scaled = normalize(embedding, approx_diameter(embedding))
    return persistence(rips_complex(cdist(scaled.data, scaled.data), h), h)


def normalized_bottleneck(x: np.ndarray, y: np.ndarray, h: int) -> float:
    """Bottleneck distance between the Rips diagrams of x/diam(x) and y/diam(y).

    Invariant under rescaling either point cloud.

    Raises:
        DegenerateError: Either cloud has zero diameter
    """
    return bottleneck(_normalized_diagram(x, h, "x"), _normalized_diagram(y, h, "y"), h)
