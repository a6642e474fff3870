"""Filtered complexes and persistent homology over Z/2.

Alpha filtration values follow the squared-circumradius convention: an
edge of length l between Gabriel neighbours enters at (l/2)^2. Rips
values are plain distances.
"""

from __future__ import annotations

import logging
from collections import Counter

import numpy as np
from scipy.spatial import Delaunay, QhullError
from scipy.spatial.distance import pdist, squareform

from .const import (
    ALPHA_MAX_DIM,
    COMPLEX_ALPHA,
    DUPLICATE_JITTER,
    RIPS_CHUNK_CELLS,
    RIPS_MAX_SIMPLICES,
    SYMMETRY_TOLERANCE,
)
from .exceptions import ConsistencyError, DomainError, UnsupportedDimension
from .models import FilteredComplex, PersistenceDiagram, PrestoConfig
from .predicates import circumspheres, strictly_inside

_LOGGER = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-12


def _perturb_duplicates(points: np.ndarray) -> np.ndarray:
    """Shift the j-th repeat of a point by j·1e-12·(bounding-box diagonal) in every coordinate."""
    seen: Counter[bytes] = Counter()
    shifts = np.zeros(len(points))
    for i, row in enumerate(points):
        key = row.tobytes()
        shifts[i] = seen[key]
        seen[key] += 1
    if not np.any(shifts):
        return points
    scale = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0))) or 1.0
    _LOGGER.warning("Perturbing %d duplicate points by multiples of %.3g", int(np.count_nonzero(shifts)), scale)
    return points + (shifts * DUPLICATE_JITTER * scale)[:, None]


def _affine_frame(points: np.ndarray) -> np.ndarray:
    """Return isometric coordinates of the points in their affine hull."""
    centered = points - points.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if singular.size == 0 or singular[0] == 0:
        return np.zeros((len(points), 0))
    rank = int(np.count_nonzero(singular > RANK_TOLERANCE * singular[0] * max(points.shape)))
    return centered @ vt[:rank].T


def _top_simplices(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return Delaunay top simplices and edges for points the triangulation skipped, as sorted index rows."""
    no_edges = np.empty((0, 2), dtype=np.int64)
    if coords.shape[1] == 1:
        order = np.argsort(coords[:, 0], kind="stable")
        return np.sort(np.column_stack([order[:-1], order[1:]]), axis=1), no_edges
    try:
        tri = Delaunay(coords)
    except QhullError as err:
        raise ConsistencyError(f"Delaunay triangulation failed: {err}") from err
    top = np.sort(tri.simplices, axis=1)

    # Qhull drops points it considers coincident with the hull; attach each to its nearest vertex
    used = np.zeros(len(coords), dtype=bool)
    used[top.ravel()] = True
    if not np.all(used):
        dropped = np.flatnonzero(~used)
        kept = np.flatnonzero(used)
        _LOGGER.warning("Attaching %d points skipped by the triangulation to their nearest vertex", len(dropped))
        nearest = kept[np.argmin(np.linalg.norm(coords[dropped, None, :] - coords[None, kept, :], axis=2), axis=1)]
        return top, np.sort(np.column_stack([dropped, nearest]), axis=1)
    return top, no_edges


def _facets(simplices: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return unique facets, the facet index of each (simplex, dropped vertex) pair, and the dropped vertex."""
    size = simplices.shape[1]
    pieces = [np.delete(simplices, drop, axis=1) for drop in range(size)]
    stacked = np.concatenate(pieces)
    opposite = np.concatenate([simplices[:, drop] for drop in range(size)])
    facets, inverse = np.unique(stacked, axis=0, return_inverse=True)
    return facets, inverse.ravel(), opposite


def alpha_complex(points: np.ndarray, k: int | None = None) -> FilteredComplex:
    """Build the alpha filtration of a point cloud in R^k, k <= 3.

    Top simplices of the Delaunay triangulation enter at their squared
    circumradius. A lower simplex enters at its own squared circumradius if
    it is Gabriel, and at the minimum value of its cofaces otherwise.
    Vertices enter at 0. Affinely degenerate clouds are triangulated in their
    affine hull.

    Raises:
        UnsupportedDimension: k > 3 (use the Rips complex instead)
        DomainError: Points are not a finite (n, k) array
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) < 1:
        raise DomainError(f"Points must be a non-empty (n, k) array, got shape {points.shape}")
    k = points.shape[1] if k is None else k
    if k > ALPHA_MAX_DIM:
        raise UnsupportedDimension(
            f"Alpha complexes are limited to k <= {ALPHA_MAX_DIM}, got k={k}; use the Rips complex (--complex rips)"
        )
    if k < 1 or points.shape[1] != k:
        raise DomainError(f"Points have {points.shape[1]} coordinates, expected k={k} in 1..{ALPHA_MAX_DIM}")
    if not np.all(np.isfinite(points)):
        raise DomainError("Points must be finite")

    n = len(points)
    if n == 1:
        return FilteredComplex(vertices=np.zeros((1, 1), dtype=np.int64), values=np.zeros(1), max_dim=0)

    points = _perturb_duplicates(points)
    coords = _affine_frame(points)
    top, extra_edges = _top_simplices(coords)
    top_dim = top.shape[1] - 1

    _, top_values = circumspheres(coords[top])
    flat = ~np.isfinite(top_values)
    if np.any(flat):
        _LOGGER.warning("Dropping %d flat top simplices", int(np.count_nonzero(flat)))
        top, top_values = top[~flat], top_values[~flat]

    layers: dict[int, np.ndarray] = {top_dim: top}
    values: dict[int, np.ndarray] = {top_dim: top_values}
    for dim in range(top_dim, 1, -1):
        facets, inverse, opposite = _facets(layers[dim])
        centers, radii = circumspheres(coords[facets])
        inside = strictly_inside(coords[facets][inverse], centers[inverse], radii[inverse], coords[opposite])

        attached = np.zeros(len(facets), dtype=bool)
        np.logical_or.at(attached, inverse, inside)
        lowest = np.full(len(facets), np.inf)
        np.minimum.at(lowest, inverse, np.tile(values[dim], dim + 1))

        layers[dim - 1] = facets
        # Faces never enter after their cofaces
        values[dim - 1] = np.minimum(np.where(attached, lowest, radii), lowest)

    if len(extra_edges):
        _, extra_values = circumspheres(coords[extra_edges])
        layers[1] = np.concatenate([layers[1], extra_edges])
        values[1] = np.concatenate([values[1], extra_values])

    layers[0] = np.arange(n)[:, None]
    values[0] = np.zeros(n)
    return _assemble(layers, values)


def _assemble(layers: dict[int, np.ndarray], values: dict[int, np.ndarray]) -> FilteredComplex:
    """Sort simplices by (value, dimension, vertices) and check monotonicity."""
    width = max(layers) + 1
    total = sum(len(rows) for rows in layers.values())
    vertices = np.full((total, width), -1, dtype=np.int64)
    dims = np.empty(total, dtype=np.int64)
    offset = 0
    for dim in sorted(layers):
        rows = np.sort(layers[dim], axis=1)
        vertices[offset : offset + len(rows), : dim + 1] = rows
        dims[offset : offset + len(rows)] = dim
        offset += len(rows)
    filtration = np.concatenate([values[dim] for dim in sorted(layers)]).astype(np.float64)

    keys = tuple(vertices[:, column] for column in reversed(range(width)))
    order = np.lexsort(keys + (dims, filtration))
    complex_ = FilteredComplex(vertices=vertices[order], values=filtration[order], max_dim=max(layers))
    check_filtration(complex_)
    return complex_


def _row_keys(rows: np.ndarray, base: int) -> np.ndarray:
    keys = np.zeros(len(rows), dtype=np.int64)
    for column in range(rows.shape[1]):
        keys = keys * base + rows[:, column]
    return keys


def _locate(level: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Return the row of `level` equal to each query row, or -1."""
    base = int(max(level.max(initial=0), queries.max(initial=0))) + 1
    if base ** level.shape[1] < 2**62:
        level_keys, query_keys = _row_keys(level, base), _row_keys(queries, base)
    else:
        _, inverse = np.unique(np.concatenate([level, queries]), axis=0, return_inverse=True)
        inverse = inverse.ravel()
        level_keys, query_keys = inverse[: len(level)], inverse[len(level) :]
    if len(level_keys) == 0:
        return np.full(len(query_keys), -1, dtype=np.int64)

    sorter = np.argsort(level_keys, kind="stable")
    slot = np.minimum(np.searchsorted(level_keys, query_keys, sorter=sorter), len(level_keys) - 1)
    return np.where(level_keys[sorter[slot]] == query_keys, sorter[slot], -1)


def _facet_positions(complex_: FilteredComplex) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Group simplex positions by dimension and find the position of every facet.

    Returns positions[d], the increasing filtration positions of the
    d-simplices, and facets[d], the (m_d, d + 1) positions of their facets
    (-1 where a facet is missing) for d >= 1.
    """
    dims = complex_.dims()
    top = int(dims.max(initial=0))
    positions = {dim: np.flatnonzero(dims == dim) for dim in range(top + 1)}
    facets: dict[int, np.ndarray] = {}
    for dim in range(1, top + 1):
        rows = complex_.vertices[positions[dim], : dim + 1]
        level = complex_.vertices[positions[dim - 1], :dim]
        found = np.empty((len(rows), dim + 1), dtype=np.int64)
        for drop in range(dim + 1):
            row = _locate(level, np.delete(rows, drop, axis=1))
            found[:, drop] = np.where(row >= 0, positions[dim - 1][row], -1)
        facets[dim] = found
    return positions, facets


def check_filtration(complex_: FilteredComplex) -> None:
    """Verify every face is present and enters no later than its cofaces.

    Raises:
        ConsistencyError: A face is missing, enters later, or a value is
            negative or not finite
    """
    if np.any(~np.isfinite(complex_.values)) or np.any(complex_.values < 0):
        raise ConsistencyError("Filtration values must be finite and nonnegative")
    positions, facets = _facet_positions(complex_)
    for dim, found in facets.items():
        late = np.any((found < 0) | (found > positions[dim][:, None]), axis=1)
        if np.any(late):
            row = complex_.vertices[positions[dim][np.argmax(late)]]
            raise ConsistencyError(f"A face of {tuple(row[row >= 0].tolist())} is missing or enters later")


def _validated_distances(dist: np.ndarray) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] < 1:
        raise DomainError(f"Distance matrix must be square and non-empty, got shape {dist.shape}")
    if not np.all(np.isfinite(dist)):
        raise DomainError("Distance matrix must be finite")
    if np.any(np.abs(dist - dist.T) > SYMMETRY_TOLERANCE):
        raise DomainError("Distance matrix is not symmetric")
    if np.any(np.abs(np.diag(dist)) > SYMMETRY_TOLERANCE):
        raise DomainError("Distance matrix diagonal must be zero")
    dist = (dist + dist.T) / 2
    np.fill_diagonal(dist, 0.0)
    return dist


def rips_complex(dist: np.ndarray, max_dim: int, threshold: float | None = None) -> FilteredComplex:
    """Build the Vietoris-Rips filtration of a distance matrix.

    A simplex enters at the largest pairwise distance among its vertices;
    simplices above threshold are omitted; simplices up to dimension
    max_dim + 1 are built, each one by extending a lower simplex with a
    common neighbour of larger label.

    Raises:
        DomainError: Matrix not square, asymmetric beyond 1e-9, nonzero
            diagonal, negative threshold, or more than RIPS_MAX_SIMPLICES
            simplices
    """
    dist = _validated_distances(dist)
    if max_dim < 0:
        raise DomainError(f"max_dim must be nonnegative, got {max_dim}")
    m = len(dist)
    threshold = float(dist.max()) if threshold is None else float(threshold)
    if threshold < 0:
        raise DomainError(f"Threshold must be nonnegative, got {threshold}")

    adjacency = dist <= threshold
    np.fill_diagonal(adjacency, False)
    labels = np.arange(m)

    layers: dict[int, np.ndarray] = {0: labels[:, None]}
    values: dict[int, np.ndarray] = {0: np.zeros(m)}
    count = m
    for dim in range(1, max_dim + 2):
        lower, lower_values = layers[dim - 1], values[dim - 1]
        chunk = max(1, RIPS_CHUNK_CELLS // (m * dim))
        rows, vals = [], []
        for start in range(0, len(lower), chunk):
            block = lower[start : start + chunk]
            common = np.all(adjacency[block], axis=1) & (labels > block[:, -1:])
            owner, vertex = np.nonzero(common)
            rows.append(np.column_stack([block[owner], vertex]))
            vals.append(np.maximum(lower_values[start + owner], dist[block[owner], vertex[:, None]].max(axis=1)))
            count += len(vertex)
            if count > RIPS_MAX_SIMPLICES:
                raise DomainError(
                    f"Rips complex on {m} points exceeds {RIPS_MAX_SIMPLICES} simplices; "
                    "lower the homology dimension or subsample (--sample-size)"
                )
        if not rows or not sum(len(r) for r in rows):
            break
        layers[dim], values[dim] = np.concatenate(rows), np.concatenate(vals)

    _LOGGER.debug("Rips complex on %d points: %s simplices per dimension", m, {d: len(s) for d, s in layers.items()})
    return _assemble(layers, values)


def _component_pairs(
    vertex_count: int, edges: np.ndarray, edge_positions: np.ndarray
) -> tuple[list[tuple[int, int]], list[int], set[int]]:
    """Merge components along edges in filtration order, the younger root dying.

    Returns (vertex position, edge position) pairs, the positions of the
    surviving roots, and the set of edges that merged two components.
    """
    parent = list(range(vertex_count))

    def root(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    pairs: list[tuple[int, int]] = []
    merging: set[int] = set()
    for (u, v), position in zip(edges.tolist(), edge_positions.tolist()):
        ru, rv = root(u), root(v)
        if ru == rv:
            continue
        older, younger = min(ru, rv), max(ru, rv)
        parent[younger] = older
        pairs.append((younger, position))
        merging.add(position)
    survivors = [v for v in range(vertex_count) if parent[v] == v]
    return pairs, survivors, merging


def _coboundary_reduction(
    columns: np.ndarray, faces: np.ndarray, cofaces: np.ndarray, cleared: set[int]
) -> tuple[list[tuple[int, int]], list[int]]:
    """Reduce the coboundary columns of one dimension, youngest simplex first.

    A column's pivot is its oldest coface; the pairs coincide with those of
    the boundary reduction.
    """
    order = np.lexsort((cofaces, faces))
    faces, cofaces = faces[order], cofaces[order]
    starts = np.searchsorted(faces, columns, side="left")
    ends = np.searchsorted(faces, columns, side="right")

    owner: dict[int, int] = {}
    reduced: dict[int, np.ndarray] = {}
    pairs: list[tuple[int, int]] = []
    essential: list[int] = []
    for j, start, end in zip(columns[::-1].tolist(), starts[::-1].tolist(), ends[::-1].tolist()):
        if j in cleared:
            continue
        column = cofaces[start:end]
        while len(column):
            pivot = int(column[0])
            other = owner.get(pivot)
            if other is None:
                owner[pivot] = j
                reduced[j] = column
                pairs.append((j, pivot))
                break
            column = np.setxor1d(column, reduced[other], assume_unique=True)
        else:
            essential.append(j)
    return pairs, essential


def persistence(complex_: FilteredComplex, max_h: int, cap_essential: bool = False) -> PersistenceDiagram:
    """Compute the persistence diagram of a filtered complex over Z/2.

    Components are merged by union-find. Higher dimensions reduce the
    coboundary matrix from the bottom up, skipping every simplex already
    paired as a death one dimension below. Zero-persistence pairs are
    discarded; infinite bars are counted in essential_count and, with
    cap_essential, also reported as intervals ending at the largest
    filtration value.

    Raises:
        DomainError: max_h outside 0..2
        ConsistencyError: A face is missing, or Euler characteristic and
            essential classes disagree
    """
    if max_h not in (0, 1, 2):
        raise DomainError(f"max_h must be 0, 1 or 2, got {max_h}")

    values = complex_.values
    positions, facets = _facet_positions(complex_)
    if any(np.any(found < 0) for found in facets.values()):
        raise ConsistencyError("Complex is missing faces of some simplices")
    top = max(positions)

    vertex_of = np.full(len(complex_), -1, dtype=np.int64)
    vertex_of[positions[0]] = np.arange(len(positions[0]))
    edges = vertex_of[facets[1]] if 1 in facets else np.empty((0, 2), dtype=np.int64)
    edge_positions = positions.get(1, np.empty(0, dtype=np.int64))
    merges, survivors, cleared = _component_pairs(len(positions[0]), edges, edge_positions)

    pairs = {0: [(int(positions[0][v]), position) for v, position in merges]}
    essential = {0: [int(positions[0][v]) for v in survivors]}
    for dim in range(1, min(max_h, top) + 1):
        if dim + 1 in facets:
            cofaces = np.repeat(positions[dim + 1], dim + 2)
            pairs[dim], essential[dim] = _coboundary_reduction(
                positions[dim], facets[dim + 1].ravel(), cofaces, cleared
            )
        else:
            pairs[dim] = []
            essential[dim] = [j for j in positions[dim].tolist() if j not in cleared]
        cleared = {death for _, death in pairs[dim]}

    max_value = float(values.max()) if len(values) else 0.0
    intervals: dict[int, list[tuple[float, float]]] = {h: [] for h in range(max_h + 1)}
    counts = {h: len(essential.get(h, ())) for h in range(max_h + 1)}
    for h in range(max_h + 1):
        for birth_index, death_index in pairs.get(h, ()):
            birth, death = float(values[birth_index]), float(values[death_index])
            if death > birth:
                intervals[h].append((birth, death))
        if cap_essential:
            intervals[h].extend((float(values[i]), max_value) for i in essential.get(h, ()) if max_value > values[i])

    if max_h >= top:
        euler = sum((-1) ** h * count for h, count in counts.items())
        if euler != complex_.euler_characteristic():
            raise ConsistencyError(
                f"Essential classes give Euler characteristic {euler}, complex has {complex_.euler_characteristic()}"
            )
    if counts[0]:
        _LOGGER.debug("Dropping %d essential H0 bars from the finite diagram", counts[0])

    arrays = {
        h: np.array(sorted(pairs_), dtype=np.float64).reshape(len(pairs_), 2) for h, pairs_ in intervals.items()
    }
    for array in arrays.values():
        array.setflags(write=False)
    return PersistenceDiagram(intervals=arrays, essential_count=counts)


def diagram_from_points(points: np.ndarray, cfg: PrestoConfig) -> PersistenceDiagram:
    """Build the configured complex on a point cloud and reduce it."""
    points = np.asarray(points, dtype=np.float64)
    if cfg.complex == COMPLEX_ALPHA:
        complex_ = alpha_complex(points, points.shape[1])
    else:
        complex_ = rips_complex(squareform(pdist(points)) if len(points) > 1 else np.zeros((1, 1)), cfg.h_max)
    _LOGGER.debug("%s complex with %d simplices", cfg.complex, len(complex_))
    return persistence(complex_, cfg.h_max, cap_essential=cfg.cap_essential)
