"""Outliers, clustering, compression, Mantel tests and MMS comparison."""

from __future__ import annotations

import logging
from itertools import combinations
from typing import Any

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .const import (
    COMPRESSION_GREEDY,
    COMPRESSION_LINKAGE,
    DEFAULT_IQR_THRESHOLD,
    DEFAULT_PERMUTATIONS,
    DEFAULT_SEED,
    DEFAULT_ZSCORE_THRESHOLD,
    EXHAUSTIVE_COVER_MAX_M,
    METRIC_BOTTLENECK,
    METRIC_WASSERSTEIN,
    MIN_PERMUTATIONS,
    OUTLIER_IQR,
    OUTLIER_ZSCORE,
    SYMMETRY_TOLERANCE,
)
from .distances import bottleneck, wasserstein
from .exceptions import ConsistencyError, DegenerateError, DomainError
from .measures import landscape_norms
from .models import (
    CompressionResult,
    LandscapeSet,
    MantelResult,
    MultiverseMetricSpace,
    OutlierReport,
    PersistenceDiagram,
    PrestoConfig,
)
from .preprocess import philox
from .topology import persistence, rips_complex

_LOGGER = logging.getLogger(__name__)

COMPARE_MMS_METHOD = "rips persistence (h <= 1) of each distance matrix, diagram distances summed over h in {0, 1}"

MIN_OUTLIER_SIZE = {OUTLIER_ZSCORE: 3, OUTLIER_IQR: 4}


def detect_outliers(
    ls: LandscapeSet,
    method: str = OUTLIER_ZSCORE,
    threshold: float | None = None,
    cfg: PrestoConfig | None = None,
) -> OutlierReport:
    """Flag landscapes whose norm (summed over dimensions) is anomalous.

    zscore flags |x − μ|/σ > threshold with the population σ; iqr flags
    values outside [Q1 − t·IQR, Q3 + t·IQR] with linearly interpolated
    quartiles.

    Raises:
        DomainError: Unknown method or too few landscapes (3 for zscore, 4 for iqr)
    """
    cfg = cfg or PrestoConfig()
    if method not in MIN_OUTLIER_SIZE:
        raise DomainError(f"Unknown outlier method {method!r}")
    if len(ls) < MIN_OUTLIER_SIZE[method]:
        raise DomainError(f"{method} needs at least {MIN_OUTLIER_SIZE[method]} landscapes, got {len(ls)}")

    norms_by_dim = {uid: landscape_norms(landscape, cfg) for uid, landscape in zip(ls.ids, ls.landscapes)}
    scores = {uid: float(sum(norms.values())) for uid, norms in norms_by_dim.items()}
    values = np.array(list(scores.values()))

    if method == OUTLIER_ZSCORE:
        threshold = DEFAULT_ZSCORE_THRESHOLD if threshold is None else threshold
        sigma = float(values.std())
        if sigma == 0:
            _LOGGER.warning("All landscape norms are equal; no z-score outliers")
            flagged: tuple[str, ...] = ()
        else:
            z = np.abs(values - values.mean()) / sigma
            flagged = tuple(uid for uid, score in zip(ls.ids, z) if score > threshold)
    else:
        threshold = DEFAULT_IQR_THRESHOLD if threshold is None else threshold
        q1, q3 = np.percentile(values, [25, 75])
        low, high = q1 - threshold * (q3 - q1), q3 + threshold * (q3 - q1)
        flagged = tuple(uid for uid, value in zip(ls.ids, values) if value < low or value > high)

    _LOGGER.info("Flagged %d of %d landscapes as %s outliers", len(flagged), len(ls), method)
    return OutlierReport(
        scores=scores, flagged=flagged, method=method, threshold=float(threshold), norms_by_dim=norms_by_dim
    )


def _complete_linkage(dist: np.ndarray, cut: float) -> list[list[int]]:
    """Complete-linkage clusters of the dendrogram cut at height cut.

    The tree is built on the ranks of the distances, so equal distances
    merge in lexicographic order of their universe pairs; clusters are
    ordered by their smallest member.
    """
    m = len(dist)
    if m < 2:
        return [[i] for i in range(m)]
    condensed = squareform(dist, checks=False)
    ranks = np.empty(len(condensed))
    ranks[np.argsort(condensed, kind="stable")] = np.arange(len(condensed))
    tree = linkage(ranks, method="complete")
    # Heights are ranks: keep every merge realised by a distance <= cut
    labels = fcluster(tree, t=np.count_nonzero(condensed <= cut) - 0.5, criterion="distance")
    clusters: dict[int, list[int]] = {}
    for index, label in enumerate(labels.tolist()):
        clusters.setdefault(label, []).append(index)
    return sorted(clusters.values(), key=lambda members: members[0])


def cluster_universes(mms: MultiverseMetricSpace, cut_epsilon: float) -> dict[str, int]:
    """Label universes by complete-linkage clusters cut at height cut_epsilon.

    Raises:
        ConsistencyError: A cluster has a pairwise distance above the cut
    """
    clusters = _complete_linkage(mms.dist, cut_epsilon)
    labels = {}
    for label, members in enumerate(clusters):
        if len(members) > 1 and mms.dist[np.ix_(members, members)].max() > cut_epsilon:
            raise ConsistencyError(f"Cluster {label} has a pairwise distance above {cut_epsilon}")
        for index in members:
            labels[mms.ids[index]] = label
    _LOGGER.debug("Complete linkage at %.6g gives %d clusters", cut_epsilon, len(clusters))
    return {uid: labels[uid] for uid in mms.ids}


def resolve_epsilon(mms: MultiverseMetricSpace, epsilon: float | None, quantile: float | None) -> float:
    """Return epsilon, or the quantile (linear interpolation) of the off-diagonal distances."""
    if (epsilon is None) == (quantile is None):
        raise DomainError("Give exactly one of epsilon and quantile")
    if epsilon is not None:
        if not epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        return float(epsilon)
    if not 0 < quantile < 1:  # type: ignore[operator]
        raise DomainError(f"quantile must lie in (0, 1), got {quantile}")
    if mms.m < 2:
        raise DomainError("A quantile threshold needs at least two universes")
    return float(np.quantile(mms.off_diagonal(), quantile))


def _greedy_cover(coverage: np.ndarray) -> list[int]:
    uncovered = np.ones(len(coverage), dtype=bool)
    chosen: list[int] = []
    while uncovered.any():
        gains = coverage[:, uncovered].sum(axis=1)
        pick = int(np.argmax(gains))
        chosen.append(pick)
        uncovered &= ~coverage[pick]
    return sorted(chosen)


def _medoid_cover(dist: np.ndarray, epsilon: float) -> list[int]:
    """One representative per complete-linkage cluster: the member with the smallest eccentricity."""
    representatives = []
    for members in _complete_linkage(dist, epsilon):
        eccentricity = dist[np.ix_(members, members)].max(axis=1)
        representatives.append(members[int(np.argmin(eccentricity))])
    return sorted(representatives)


def _harmonic(m: int) -> float:
    return float(np.sum(1.0 / np.arange(1, m + 1)))


def optimal_cover_size(mms: MultiverseMetricSpace, epsilon: float) -> int:
    """Return the smallest number of representatives covering every universe within epsilon.

    Raises:
        DomainError: More than 20 universes
    """
    if mms.m > EXHAUSTIVE_COVER_MAX_M:
        raise DomainError(f"Exhaustive cover search is limited to m <= {EXHAUSTIVE_COVER_MAX_M}, got {mms.m}")
    masks = [sum(1 << j for j in np.flatnonzero(row).tolist()) for row in mms.dist <= epsilon]
    full = (1 << mms.m) - 1
    for size in range(1, mms.m + 1):
        for subset in combinations(masks, size):
            union = 0
            for mask in subset:
                union |= mask
            if union == full:
                return size
    return mms.m


def compress_search_space(
    mms: MultiverseMetricSpace,
    epsilon: float | None = None,
    quantile: float | None = None,
    method: str = COMPRESSION_GREEDY,
) -> CompressionResult:
    """Select representatives so every universe lies within epsilon of one.

    Greedy set cover picks the universe covering the most uncovered ones
    (lowest index on ties). complete_linkage takes one representative per
    cluster of the dendrogram cut at epsilon. Each universe is assigned to
    its nearest representative (lowest index on ties); representatives
    represent themselves. For m <= 20 the optimal cover size and the
    harmonic bound H(m)·c* are recorded.

    Raises:
        DomainError: Invalid threshold or unknown method
        ConsistencyError: A universe ends up farther than epsilon from its representative
    """
    epsilon = resolve_epsilon(mms, epsilon, quantile)
    coverage = mms.dist <= epsilon
    if method == COMPRESSION_GREEDY:
        chosen = _greedy_cover(coverage)
    elif method == COMPRESSION_LINKAGE:
        chosen = _medoid_cover(mms.dist, epsilon)
    else:
        raise DomainError(f"Unknown compression method {method!r}")

    assignment = {}
    for i, uid in enumerate(mms.ids):
        index = i if i in chosen else chosen[int(np.argmin(mms.dist[i, chosen]))]
        if mms.dist[i, index] > epsilon:
            raise ConsistencyError(f"{uid} is {mms.dist[i, index]} from its representative, above {epsilon}")
        assignment[uid] = mms.ids[index]

    optimal = optimal_cover_size(mms, epsilon) if mms.m <= EXHAUSTIVE_COVER_MAX_M else None
    bound = _harmonic(mms.m) * optimal if optimal is not None else None
    if bound is not None and method == COMPRESSION_GREEDY and len(chosen) > bound:
        raise ConsistencyError(f"Greedy cover of size {len(chosen)} exceeds H(m)·c* = {bound}")

    _LOGGER.info("Compressed %d universes to %d representatives at epsilon %.6g", mms.m, len(chosen), epsilon)
    return CompressionResult(
        representatives=tuple(mms.ids[i] for i in chosen),
        assignment=assignment,
        epsilon=epsilon,
        method=method,
        quantile=quantile,
        optimal_size=optimal,
        harmonic_bound=bound,
    )


def evaluate_representatives(target: MultiverseMetricSpace, result: CompressionResult) -> dict[str, Any]:
    """Measure a compression chosen in one setting against distances of another.

    Returns:
        Distance of every universe to its representative under the target
        distances, with their maximum and mean
    """
    index = {uid: i for i, uid in enumerate(target.ids)}
    missing = sorted(set(result.assignment) - set(index))
    if missing:
        raise DomainError(f"Universes missing from the target distances: {missing}")
    distances = {uid: float(target.dist[index[uid], index[rep]]) for uid, rep in result.assignment.items()}
    values = list(distances.values())
    return {
        "distances": distances,
        "max": max(values, default=0.0),
        "mean": float(np.mean(values)) if values else 0.0,
        "within_epsilon": all(value <= result.epsilon for value in values),
    }


def _as_matrix(value: MultiverseMetricSpace | np.ndarray, name: str) -> np.ndarray:
    matrix = value.dist if isinstance(value, MultiverseMetricSpace) else np.asarray(value, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f"{name} must be a square matrix, got shape {matrix.shape}")
    if np.any(np.abs(matrix - matrix.T) > SYMMETRY_TOLERANCE) or np.any(np.diag(matrix) != 0):
        raise DomainError(f"{name} must be symmetric with a zero diagonal")
    return matrix


def mantel_test(
    d1: MultiverseMetricSpace | np.ndarray,
    d2: MultiverseMetricSpace | np.ndarray,
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = DEFAULT_SEED,
    n_comparisons: int = 1,
) -> MantelResult:
    """One-sided Mantel permutation test of positive association.

    r is the Pearson correlation of the strictly upper triangles. Permutation
    k relabels the rows and columns of d2 with a generator keyed by
    (seed, k), so results do not depend on evaluation order.

    Raises:
        DomainError: Shape mismatch, fewer than 99 permutations or fewer than 3 universes
        DegenerateError: Either triangle has zero variance
    """
    a, b = _as_matrix(d1, "d1"), _as_matrix(d2, "d2")
    if a.shape != b.shape:
        raise DomainError(f"Matrices differ in shape: {a.shape} vs {b.shape}")
    if len(a) < 3:
        raise DomainError("A Mantel test needs at least three universes")
    if permutations < MIN_PERMUTATIONS:
        raise DomainError(f"At least {MIN_PERMUTATIONS} permutations are required, got {permutations}")
    if n_comparisons < 1:
        raise DomainError(f"n_comparisons must be positive, got {n_comparisons}")

    rows, cols = np.triu_indices(len(a), k=1)
    x, y = a[rows, cols], b[rows, cols]
    if x.std() == 0 or y.std() == 0:
        raise DegenerateError("Mantel test needs non-constant distances in both matrices")

    x = (x - x.mean()) / np.linalg.norm(x - x.mean())
    r = float(np.dot(x, (y - y.mean()) / np.linalg.norm(y - y.mean())))

    exceed = 0
    for k in range(permutations):
        order = philox(seed, k).permutation(len(b))
        permuted = b[np.ix_(order, order)][rows, cols]
        centered = permuted - permuted.mean()
        if float(np.dot(x, centered / np.linalg.norm(centered))) >= r:
            exceed += 1

    p_value = (1 + exceed) / (permutations + 1)
    _LOGGER.debug("Mantel r=%.6g, p=%.6g over %d permutations", r, p_value, permutations)
    return MantelResult(
        r=r, p_value=p_value, permutations=permutations, corrected_p=min(1.0, p_value * n_comparisons)
    )


def mms_diagram(mms: MultiverseMetricSpace) -> PersistenceDiagram:
    """Return the H0/H1 Rips diagram of a distance matrix."""
    if mms.m < 2:
        raise DomainError("Comparing distance matrices needs at least two universes each")
    return persistence(rips_complex(mms.dist, max_dim=1), 1)


def compare_mms(
    a: MultiverseMetricSpace,
    b: MultiverseMetricSpace,
    metric: str = METRIC_BOTTLENECK,
    p: float = 2.0,
) -> float:
    """Topological distance between two multiverse metric spaces.

    The ids of the two spaces need not match.
    """
    if metric not in (METRIC_BOTTLENECK, METRIC_WASSERSTEIN):
        raise DomainError(f"Unknown diagram metric {metric!r}")
    first, second = mms_diagram(a), mms_diagram(b)
    if metric == METRIC_BOTTLENECK:
        return sum(bottleneck(first, second, h) for h in (0, 1))
    return sum(wasserstein(first, second, h, p) for h in (0, 1))
