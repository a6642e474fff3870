"""Exact persistence landscapes and their L^p geometry.

A layer is an (m, 2) array of (t, value) critical points with strictly
increasing t and zero first and last values; between critical points the
layer is linear and outside them it is zero.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from .const import P_INF, SUPPORTED_P
from .exceptions import ConsistencyError, DomainError, FormatError
from .models import GridSpec, LandscapeProvenance, PersistenceDiagram, PersistenceLandscape

_LOGGER = logging.getLogger(__name__)

DOMINANCE_TOLERANCE = 1e-12

Layer = np.ndarray


def _tent(birth: float, death: float) -> Layer:
    return np.array([[birth, 0.0], [(birth + death) / 2, (death - birth) / 2], [death, 0.0]])


def _layer_from_chain(births: np.ndarray, deaths: np.ndarray) -> tuple[Layer, np.ndarray, np.ndarray]:
    """Trace one layer through a chain of intervals with increasing births and deaths.

    Consecutive intervals either leave a gap, touch or cross. Each crossing
    leaves the overlap (next birth, previous death) for the layers below.
    """
    previous, following, final = deaths[:-1], births[1:], deaths[1:]
    gap = following > previous
    cross = following < previous

    slots = np.empty((len(following), 3, 2))
    slots[:, 0, 0] = np.where(cross, (following + previous) / 2, np.where(gap, previous, following))
    slots[:, 0, 1] = np.where(cross, (previous - following) / 2, 0.0)
    slots[:, 1, 0] = following
    slots[:, 1, 1] = 0.0
    slots[:, 2, 0] = (following + final) / 2
    slots[:, 2, 1] = (final - following) / 2
    present = np.ones((len(following), 3), dtype=bool)
    present[:, 1] = gap

    head = [[births[0], 0.0], [(births[0] + deaths[0]) / 2, (deaths[0] - births[0]) / 2]]
    layer = np.concatenate([head, slots[present], [[deaths[-1], 0.0]]])
    keep = np.concatenate([[True], np.diff(layer[:, 0]) > 0])
    return layer[keep], following[cross], previous[cross]


def _layers_from_intervals(intervals: np.ndarray) -> tuple[Layer, ...]:
    """Sweep the tent functions of finite intervals into exact layers.

    Intervals are ordered by increasing birth and decreasing death. Each
    layer is traced through the intervals whose death exceeds every death
    before them in that order; the rest, together with the overlaps left by
    crossings, make up the layers below. Intervals sharing one birth are
    nested, and their layers are their tents by decreasing death.
    """
    intervals = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    intervals = intervals[intervals[:, 1] > intervals[:, 0]]
    if len(intervals) == 0:
        return ()
    births, deaths = intervals[:, 0], intervals[:, 1]
    if np.all(births == births[0]):
        return tuple(_tent(births[0], death) for death in np.sort(deaths)[::-1].tolist())

    layers: list[Layer] = []
    while len(births):
        order = np.lexsort((-deaths, births))
        births, deaths = births[order], deaths[order]
        chain = np.ones(len(deaths), dtype=bool)
        chain[1:] = deaths[1:] > np.maximum.accumulate(deaths)[:-1]

        layer, overlap_births, overlap_deaths = _layer_from_chain(births[chain], deaths[chain])
        layers.append(layer)
        births = np.concatenate([births[~chain], overlap_births])
        deaths = np.concatenate([deaths[~chain], overlap_deaths])
    return tuple(layers)


def landscape_evaluate(landscape: PersistenceLandscape, h: int, layer: int, t: Any) -> np.ndarray:
    """Evaluate layer `layer` (0-based) of dimension h at t; missing layers are zero."""
    layers = landscape.layers(h)
    t = np.asarray(t, dtype=np.float64)
    if layer >= len(layers):
        return np.zeros_like(t)
    return _evaluate(layers[layer], t)


def _evaluate(layer: Layer, t: np.ndarray) -> np.ndarray:
    return np.interp(t, layer[:, 0], layer[:, 1], left=0.0, right=0.0)


def _check_dominance(layers: tuple[Layer, ...], source_id: str) -> None:
    """Assert layer j dominates layer j+1 at the critical abscissae of both."""
    for j in range(len(layers) - 1):
        grid = np.union1d(layers[j][:, 0], layers[j + 1][:, 0])
        gap = _evaluate(layers[j], grid) - _evaluate(layers[j + 1], grid)
        if np.any(gap < -DOMINANCE_TOLERANCE * max(1.0, float(np.abs(layers[j][:, 1]).max()))):
            raise ConsistencyError(f"Landscape {source_id!r}: layer {j + 1} exceeds layer {j}")


def _freeze(layers: tuple[Layer, ...]) -> tuple[Layer, ...]:
    for layer in layers:
        layer.setflags(write=False)
    return layers


def landscape_from_diagram(
    d: PersistenceDiagram,
    h_max: int,
    source_id: str = "",
    provenance: LandscapeProvenance | None = None,
) -> PersistenceLandscape:
    """Build the exact landscape of every dimension 0..h_max of a diagram.

    All nonzero layers are retained. An empty diagram gives the zero
    function.
    """
    layers_by_dim: dict[int, tuple[Layer, ...]] = {}
    for h in range(h_max + 1):
        layers = _layers_from_intervals(d.get(h))
        _check_dominance(layers, source_id)
        layers_by_dim[h] = _freeze(layers)
    if _LOGGER.isEnabledFor(logging.DEBUG):
        _LOGGER.debug(
            "Landscape %s: layers per dimension %s", source_id, {h: len(ls) for h, ls in layers_by_dim.items()}
        )
    return PersistenceLandscape(
        layers_by_dim=layers_by_dim,
        h_max=h_max,
        source_id=source_id,
        provenance=provenance,
        sources=({h: d.get(h) for h in range(h_max + 1)},),
    )


def _mean_layer(layers: list[Layer], count: int) -> Layer:
    """Exact pointwise mean of `count` functions of which `layers` are the nonzero ones."""
    grid = np.unique(np.concatenate([layer[:, 0] for layer in layers]))
    values = np.sum([_evaluate(layer, grid) for layer in layers], axis=0) / count
    return np.column_stack([grid, values])


def landscape_average(ls: list[PersistenceLandscape], source_id: str = "average") -> PersistenceLandscape:
    """Return the exact pointwise mean landscape, layer by layer.

    Missing layers count as the zero function. The result's critical
    abscissae are the union of the inputs'.

    Raises:
        DomainError: Empty list or mixed h_max
    """
    if not ls:
        raise DomainError("Cannot average an empty list of landscapes")
    h_max = ls[0].h_max
    if any(landscape.h_max != h_max for landscape in ls):
        raise DomainError("Cannot average landscapes with different h_max")
    if len(ls) == 1:
        return ls[0]

    layers_by_dim: dict[int, tuple[Layer, ...]] = {}
    for h in range(h_max + 1):
        depth = max(len(landscape.layers(h)) for landscape in ls)
        averaged = []
        for j in range(depth):
            present = [landscape.layers(h)[j] for landscape in ls if j < len(landscape.layers(h))]
            averaged.append(_mean_layer(present, len(ls)))
        layers_by_dim[h] = _freeze(tuple(averaged))
        _check_dominance(layers_by_dim[h], source_id)

    # Re-derivation from sources needs equally weighted single-diagram inputs
    single = all(len(landscape.sources) == 1 for landscape in ls)
    return PersistenceLandscape(
        layers_by_dim=layers_by_dim,
        h_max=h_max,
        source_id=source_id,
        provenance=ls[0].provenance,
        grid=ls[0].grid,
        sources=tuple(landscape.sources[0] for landscape in ls) if single else (),
    )


def _segment_norms(t: np.ndarray, g: np.ndarray, p: float) -> float:
    """Exact ∫|g|^p (p = 1, 2) or max |g| (p = inf) of a piecewise-linear function."""
    if len(t) == 0:
        return 0.0
    if p == P_INF:
        return float(np.max(np.abs(g)))

    width = np.diff(t)
    g0, g1 = g[:-1], g[1:]
    if p == 2.0:
        return float(np.sum(width * (g0 * g0 + g0 * g1 + g1 * g1) / 3))

    crossing = g0 * g1 < 0
    total = width * (np.abs(g0) + np.abs(g1)) / 2
    if np.any(crossing):
        a, b, w = np.abs(g0[crossing]), np.abs(g1[crossing]), width[crossing]
        # Two triangles meeting at the zero crossing
        total[crossing] = w * (a * a + b * b) / (2 * (a + b))
    return float(np.sum(total))


def _combine(per_layer: list[float], p: float) -> float:
    if not per_layer:
        return 0.0
    if p == P_INF:
        return max(per_layer)
    if p == 2.0:
        return float(np.sqrt(sum(per_layer)))
    return float(sum(per_layer))


def _check_p(p: float) -> None:
    if p not in SUPPORTED_P:
        raise DomainError(f"Landscape norms support p in {SUPPORTED_P}, got {p}")


def landscape_norm(landscape: PersistenceLandscape, h: int, p: float) -> float:
    """Return the L^p norm of the dimension-h landscape.

    Layers combine as Σ_j ∥λ_j∥_1 for p = 1, (Σ_j ∥λ_j∥_2²)^½ for p = 2 and
    max_j ∥λ_j∥_∞ for p = inf.
    """
    _check_p(p)
    return _combine([_segment_norms(layer[:, 0], layer[:, 1], p) for layer in landscape.layers(h)], p)


def landscape_distance(a: PersistenceLandscape, b: PersistenceLandscape, h: int, p: float) -> float:
    """Return ∥a − b∥_p in dimension h, computed on the exact layerwise difference."""
    _check_p(p)
    layers_a, layers_b = a.layers(h), b.layers(h)
    per_layer = []
    for j in range(max(len(layers_a), len(layers_b))):
        if j >= len(layers_a) or j >= len(layers_b):
            layer = layers_a[j] if j < len(layers_a) else layers_b[j]
            per_layer.append(_segment_norms(layer[:, 0], layer[:, 1], p))
            continue
        grid = np.union1d(layers_a[j][:, 0], layers_b[j][:, 0])
        per_layer.append(_segment_norms(grid, _evaluate(layers_a[j], grid) - _evaluate(layers_b[j], grid), p))
    return _combine(per_layer, p)


def _round_to_grid(values: np.ndarray, step: float) -> np.ndarray:
    return np.floor(values / step + 0.5) * step


def landscape_grid_round(landscape: PersistenceLandscape, step: float) -> PersistenceLandscape:
    """Rebuild a landscape from source intervals rounded to multiples of step.

    Intervals that collapse to zero length disappear. An averaged landscape
    rounds each source diagram and averages again.

    Raises:
        DomainError: step <= 0, or the landscape carries no source intervals
    """
    if not step > 0:
        raise DomainError(f"Grid step must be positive, got {step}")
    if not landscape.sources:
        raise DomainError(f"Landscape {landscape.source_id!r} has no source intervals to round")

    rebuilt = []
    for source in landscape.sources:
        rounded = {h: _round_to_grid(np.asarray(intervals).reshape(-1, 2), step) for h, intervals in source.items()}
        diagram = PersistenceDiagram(intervals={h: iv[iv[:, 1] > iv[:, 0]] for h, iv in rounded.items()})
        rebuilt.append(landscape_from_diagram(diagram, landscape.h_max, landscape.source_id, landscape.provenance))

    result = landscape_average(rebuilt, landscape.source_id)
    _LOGGER.debug("Rounded landscape %s to grid step %g", landscape.source_id, step)
    return PersistenceLandscape(
        layers_by_dim=result.layers_by_dim,
        h_max=result.h_max,
        source_id=landscape.source_id,
        provenance=landscape.provenance,
        grid=GridSpec(origin=0.0, step=float(step)),
        sources=result.sources,
    )


def landscape_to_dict(landscape: PersistenceLandscape) -> dict[str, Any]:
    """Return the JSON layout of a landscape."""
    return {
        "h": {str(h): [layer.tolist() for layer in layers] for h, layers in sorted(landscape.layers_by_dim.items())},
        "h_max": landscape.h_max,
        "source_id": landscape.source_id,
        "grid": None if landscape.grid is None else {"origin": landscape.grid.origin, "step": landscape.grid.step},
        "pipeline": None if landscape.provenance is None else landscape.provenance.to_dict(),
        "sources": [
            {str(h): np.asarray(intervals).tolist() for h, intervals in sorted(source.items())}
            for source in landscape.sources
        ],
    }


def _parse_layer(raw: Any, where: str) -> Layer:
    layer = np.asarray(raw, dtype=np.float64).reshape(-1, 2)
    if len(layer) < 2 or not np.all(np.isfinite(layer)):
        raise FormatError(f"{where}: layer needs at least two finite critical points")
    if np.any(np.diff(layer[:, 0]) <= 0):
        raise FormatError(f"{where}: critical abscissae must be strictly increasing")
    if np.any(layer[:, 1] < 0) or layer[0, 1] != 0 or layer[-1, 1] != 0:
        raise FormatError(f"{where}: layer must be nonnegative and start and end at zero")
    return layer


def landscape_from_dict(document: dict[str, Any], source_id: str | None = None) -> PersistenceLandscape:
    """Create a PersistenceLandscape from its JSON layout.

    Raises:
        FormatError: A layer violates the landscape invariants
    """
    source_id = document.get("source_id") or source_id or ""
    layers_by_dim = {
        int(h): _freeze(tuple(_parse_layer(raw, f"{source_id} h{h}[{j}]") for j, raw in enumerate(layers)))
        for h, layers in document["h"].items()
    }
    for layers in layers_by_dim.values():
        _check_dominance(layers, source_id)

    grid = document.get("grid")
    provenance = document.get("pipeline")
    return PersistenceLandscape(
        layers_by_dim=layers_by_dim,
        h_max=int(document.get("h_max", max(layers_by_dim, default=0))),
        source_id=source_id,
        provenance=None if provenance is None else LandscapeProvenance.from_dict(provenance),
        grid=None if grid is None else GridSpec(origin=float(grid["origin"]), step=float(grid["step"])),
        sources=tuple(
            {int(h): np.asarray(intervals, dtype=np.float64).reshape(-1, 2) for h, intervals in source.items()}
            for source in document.get("sources", [])
        ),
    )
