"""Diameter approximation, normalization and projection of embeddings."""

from __future__ import annotations

import logging

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .const import (
    DEFAULT_EXACT_THRESHOLD,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    PCA_COVARIANCE_MAX_D,
    PROJECTOR_GAUSSIAN,
    PROJECTOR_MMDS,
    PROJECTOR_PCA,
)
from .exceptions import DegenerateError, DomainError, StateError
from .models import Embedding, ProjectionConfig, ProjectionSet

_LOGGER = logging.getLogger(__name__)


def philox(seed: int, stream: int) -> np.random.Generator:
    """Return a counter-based generator keyed by (seed, stream).

    The same pair always yields the same sequence, independent of how many
    other streams were drawn before.
    """
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(stream)))


def approx_diameter(
    e: Embedding,
    restarts: int = DEFAULT_RESTARTS,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
) -> float:
    """Approximate the diameter of an embedding from below.

    Exact for n <= exact_threshold. Above it, the largest leg over
    `restarts` double-sweep walks: from seed point floor(i*n/restarts) to
    its farthest point, then to that point's farthest point.

    Raises:
        DomainError: Fewer than two points
        DegenerateError: All points coincide
    """
    if e.n < 2:
        raise DomainError(f"Diameter needs at least two points, got {e.n}")
    if restarts < 1:
        raise DomainError(f"restarts must be positive, got {restarts}")

    if e.n <= exact_threshold:
        diameter = float(np.max(pdist(e.data)))
    else:
        diameter = 0.0
        for i in range(restarts):
            current = (i * e.n) // restarts
            for _ in range(2):
                legs = np.linalg.norm(e.data - e.data[current], axis=1)
                current = int(np.argmax(legs))
                diameter = max(diameter, float(legs[current]))
        _LOGGER.debug("Double-sweep diameter estimate %.6g over %d restarts (n=%d)", diameter, restarts, e.n)

    if diameter == 0.0:
        raise DegenerateError(f"Embedding {e.source_id!r} has zero diameter (all points identical)")
    return diameter


def normalize(e: Embedding, diameter: float) -> Embedding:
    """Divide every coordinate by diameter.

    Raises:
        DomainError: diameter is not positive
        StateError: The embedding is already normalized
    """
    if e.normalized:
        raise StateError(f"Embedding {e.source_id!r} is already normalized by {e.diameter_used}")
    if not diameter > 0:
        raise DomainError(f"Normalization diameter must be positive, got {diameter}")
    return Embedding(data=e.data / diameter, source_id=e.source_id, normalized=True, diameter_used=float(diameter))


def subsample(e: Embedding, size: int, seed: int = DEFAULT_SEED) -> Embedding:
    """Return `size` rows drawn without replacement, in their original order.

    The embedding is returned unchanged when size >= n.
    """
    if size < 1:
        raise DomainError(f"Sample size must be positive, got {size}")
    if size >= e.n:
        return e
    rows = np.sort(philox(seed, 0).choice(e.n, size=size, replace=False))
    _LOGGER.debug("Subsampled %s from %d to %d rows", e.source_id, e.n, size)
    return Embedding(data=e.data[rows], source_id=e.source_id, normalized=e.normalized, diameter_used=e.diameter_used)


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its entry of largest magnitude is positive (lowest index on ties)."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _descending(values: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]


def project_pca(e: Embedding, k: int) -> ProjectionSet:
    """Project centered data onto the top-k covariance eigenvectors.

    Uses the d×d covariance for d <= 1024 and the n×n Gram matrix above.
    explained_variance carries all min(n, d) eigenvalues in descending order.

    Raises:
        DomainError: k > min(n, d)
    """
    limit = min(e.n, e.d)
    if not 1 <= k <= limit:
        raise DomainError(f"PCA needs 1 <= k <= min(n, d) = {limit}, got k={k}")

    centered = e.data - e.data.mean(axis=0)
    scale = max(e.n - 1, 1)

    if e.d <= PCA_COVARIANCE_MAX_D:
        values, vectors = _descending(*np.linalg.eigh(centered.T @ centered / scale))
        components = _orient(vectors[:, :k])
    else:
        gram_values, gram_vectors = _descending(*np.linalg.eigh(centered @ centered.T / scale))
        values = gram_values
        top = np.clip(gram_values[:k], 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            components = np.where(top > 0, (centered.T @ gram_vectors[:, :k]) / np.sqrt(scale * top), 0.0)
        components = _orient(components)

    explained = np.clip(values[:limit], 0.0, None)
    _LOGGER.debug("PCA of %s to k=%d, leading eigenvalues %s", e.source_id, k, explained[:k])
    return ProjectionSet(
        projections=(centered @ components,),
        config=ProjectionConfig(method=PROJECTOR_PCA, k=k),
        explained_variance=explained,
    )


def project_gaussian(e: Embedding, k: int, n_projections: int, seed: int) -> ProjectionSet:
    """Return n_projections Gaussian random projections e·R_j.

    Entries of R_j are Normal(0, 1/k), drawn from a Philox generator keyed by
    (seed, j), so projection j is bit-identical whatever else is computed.

    Raises:
        DomainError: k > d or n_projections < 1
    """
    if not 1 <= k <= e.d:
        raise DomainError(f"Gaussian projection needs 1 <= k <= d = {e.d}, got k={k}")
    if n_projections < 1:
        raise DomainError(f"Number of projections must be positive, got {n_projections}")

    scale = np.sqrt(1.0 / k)
    projections = tuple(e.data @ philox(seed, j).normal(0.0, scale, size=(e.d, k)) for j in range(n_projections))
    _LOGGER.debug("Drew %d Gaussian projections of %s to k=%d (seed %d)", n_projections, e.source_id, k, seed)
    return ProjectionSet(
        projections=projections,
        config=ProjectionConfig(method=PROJECTOR_GAUSSIAN, k=k, n_projections=n_projections, seed=seed),
    )


def project_mmds(e: Embedding, k: int) -> ProjectionSet:
    """Classical metric MDS coordinates of an embedding.

    Eigendecomposition of -1/2 · C·D²·C; negative eigenvalues are clamped to
    zero and never ranked among the top k.

    Raises:
        DomainError: k > min(n, d), or fewer than k positive eigenvalues
    """
    limit = min(e.n, e.d)
    if not 1 <= k <= limit:
        raise DomainError(f"mMDS needs 1 <= k <= min(n, d) = {limit}, got k={k}")

    squared = cdist(e.data, e.data, metric="sqeuclidean")
    centering = np.eye(e.n) - np.full((e.n, e.n), 1.0 / e.n)
    gram = -0.5 * centering @ squared @ centering
    values, vectors = _descending(*np.linalg.eigh((gram + gram.T) / 2))

    tolerance = e.n * np.finfo(np.float64).eps * max(float(np.max(np.abs(values))), 1.0)
    values = np.where(values > tolerance, values, 0.0)
    rank = int(np.count_nonzero(values))
    if rank < k:
        raise DomainError(f"mMDS of {e.source_id!r} has rank {rank}, cannot embed into k={k}")

    coordinates = _orient(vectors[:, :k]) * np.sqrt(values[:k])
    return ProjectionSet(
        projections=(coordinates,),
        config=ProjectionConfig(method=PROJECTOR_MMDS, k=k),
        explained_variance=values[:limit],
    )


def project(e: Embedding, cfg: ProjectionConfig) -> ProjectionSet:
    """Dispatch to the configured projector."""
    if cfg.method == PROJECTOR_PCA:
        return project_pca(e, cfg.k)
    if cfg.method == PROJECTOR_GAUSSIAN:
        return project_gaussian(e, cfg.k, cfg.n_projections, cfg.seed)
    if cfg.method == PROJECTOR_MMDS:
        return project_mmds(e, cfg.k)
    raise DomainError(f"Unknown projector {cfg.method!r}")
