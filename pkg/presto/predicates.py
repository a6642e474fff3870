"""Circumsphere computations with an exact fallback for near-ties.

Floating-point answers are used when they are clearly away from the
boundary; anything inside the uncertainty band is recomputed with rational
arithmetic on the exact binary values of the input coordinates.
"""

from __future__ import annotations

import logging
from fractions import Fraction

import numpy as np

_LOGGER = logging.getLogger(__name__)

# Relative width of the band in which float in-sphere answers are not trusted
FILTER_BAND = 1e-9


def circumspheres(simplices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return centers and squared radii of the smallest circumspheres.

    Args:
        simplices: (m, j+1, k) array, the vertex coordinates of m j-simplices
            in R^k (j <= k)

    Returns:
        (m, k) centers lying in each simplex's affine hull and (m,) squared
        radii; degenerate simplices get an infinite radius
    """
    simplices = np.asarray(simplices, dtype=np.float64)
    m, size, dim = simplices.shape
    if size == 1:
        return simplices[:, 0, :].copy(), np.zeros(m)

    base = simplices[:, 0, :]
    edges = simplices[:, 1:, :] - base[:, None, :]
    gram = edges @ np.swapaxes(edges, 1, 2)
    rhs = 0.5 * np.einsum("mii->mi", gram)

    centers = np.empty((m, dim))
    radii = np.full(m, np.inf)
    scale = np.einsum("mii->m", gram) ** (size - 1)
    det = np.linalg.det(gram)
    regular = np.abs(det) > 1e-14 * np.maximum(scale, np.finfo(np.float64).tiny)
    if np.any(regular):
        weights = np.linalg.solve(gram[regular], rhs[regular][..., None])[..., 0]
        offsets = np.einsum("mi,mik->mk", weights, edges[regular])
        centers[regular] = base[regular] + offsets
        radii[regular] = np.einsum("mk,mk->m", offsets, offsets)
    centers[~regular] = base[~regular]
    return centers, radii


def _solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination over the rationals."""
    size = len(rhs)
    rows = [row[:] + [value] for row, value in zip(matrix, rhs)]
    for col in range(size):
        pivot = next(r for r in range(col, size) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col] / rows[col][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return [rows[i][size] / rows[i][i] for i in range(size)]


def exact_inside(simplex: np.ndarray, query: np.ndarray) -> bool:
    """Return True if query lies strictly inside the simplex's smallest circumsphere.

    Computed exactly from the binary values of the coordinates.
    """
    points = [[Fraction(float(v)) for v in row] for row in np.asarray(simplex)]
    target = [Fraction(float(v)) for v in np.asarray(query)]
    base = points[0]
    edges = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    gram = [[sum(a * b for a, b in zip(u, v)) for v in edges] for u in edges]
    weights = _solve_exact(gram, [g[i] / 2 for i, g in enumerate(gram)])
    center = [base[c] + sum(w * e[c] for w, e in zip(weights, edges)) for c in range(len(base))]
    radius = sum((c - b) ** 2 for c, b in zip(center, base))
    distance = sum((c - q) ** 2 for c, q in zip(center, target))
    return distance < radius


def strictly_inside(
    simplices: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    queries: np.ndarray,
) -> np.ndarray:
    """Vectorised strict in-circumsphere test with exact fallback.

    Args:
        simplices: (m, j+1, k) vertex coordinates
        centers: (m, k) circumcenters from circumspheres()
        radii: (m,) squared radii from circumspheres()
        queries: (m, k) one query point per simplex

    Returns:
        (m,) boolean array
    """
    distances = np.einsum("mk,mk->m", queries - centers, queries - centers)
    margin = radii - distances
    inside = margin > 0
    uncertain = np.isfinite(radii) & (np.abs(margin) <= FILTER_BAND * np.maximum(radii, distances))
    if np.any(uncertain):
        indices = np.flatnonzero(uncertain)
        _LOGGER.debug("Exact in-sphere fallback for %d near-cospherical configurations", len(indices))
        for i in indices:
            inside[i] = exact_inside(simplices[i], queries[i])
    return inside
