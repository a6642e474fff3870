"""Data models for presto."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .const import (
    COMPLEX_ALPHA,
    DEFAULT_EXACT_THRESHOLD,
    DEFAULT_H_MAX,
    DEFAULT_K,
    DEFAULT_N_PROJECTIONS,
    DEFAULT_P,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    MMS_SYMMETRY_TOLERANCE,
    MMS_TRIANGLE_TOLERANCE,
    P_INF,
    RIPS_CHUNK_CELLS,
    PROJECTOR_PCA,
    format_p,
)
from .exceptions import DataError, DomainError, ProvenanceError

ParamValue = str | int | float


def _frozen_array(values: Any) -> np.ndarray:
    """Return a read-only float64 copy of values."""
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


def _empty_intervals() -> np.ndarray:
    return _frozen_array(np.empty((0, 2)))


@dataclass(frozen=True)
class Embedding:
    """An n×d matrix of samples in a latent space."""

    data: np.ndarray
    source_id: str = ""
    normalized: bool = False
    diameter_used: float | None = None

    def __post_init__(self) -> None:
        """Validate shape, finiteness and normalization metadata."""
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"Embedding must be a non-empty 2-D matrix, got shape {data.shape}")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise DataError(f"Non-finite value at row {row}, column {col}", row=row, col=col)
        if self.normalized and (self.diameter_used is None or self.diameter_used <= 0):
            raise DataError("Normalized embedding requires a positive diameter_used")
        object.__setattr__(self, "data", _frozen_array(data))

    @property
    def n(self) -> int:
        """Return the sample count."""
        return int(self.data.shape[0])

    @property
    def d(self) -> int:
        """Return the latent dimension."""
        return int(self.data.shape[1])


@dataclass(frozen=True)
class UniverseSpec:
    """One universe: a parameter vector and the embedding it produced."""

    id: str
    params: dict[str, ParamValue]
    embedding_path: Path

    def class_key(self, dim_name: str) -> tuple[tuple[str, ParamValue], ...]:
        """Return the values of every parameter except dim_name.

        Two universes share an equivalence class for dim_name exactly when
        their class keys are equal.
        """
        return tuple((name, value) for name, value in self.params.items() if name != dim_name)


@dataclass(frozen=True)
class MultiverseManifest:
    """A validated set of universes."""

    universes: tuple[UniverseSpec, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def ids(self) -> list[str]:
        """Return universe ids in manifest order."""
        return [u.id for u in self.universes]

    @property
    def parameter_names(self) -> list[str]:
        """Return the ordered parameter names shared by all universes."""
        return list(self.universes[0].params)

    @property
    def c(self) -> int:
        """Return the cardinality of the parameter vector."""
        return len(self.parameter_names)

    def get(self, universe_id: str) -> UniverseSpec:
        """Return the universe with the given id."""
        for universe in self.universes:
            if universe.id == universe_id:
                return universe
        raise DomainError(f"Unknown universe id {universe_id!r}")


@dataclass(frozen=True)
class ProjectionConfig:
    """Configuration of the projection step."""

    method: str = PROJECTOR_PCA
    k: int = DEFAULT_K
    n_projections: int = DEFAULT_N_PROJECTIONS
    seed: int = DEFAULT_SEED

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {"method": self.method, "k": self.k, "n_projections": self.n_projections, "seed": self.seed}


@dataclass(frozen=True)
class ProjectionSet:
    """The projected embeddings of one source embedding."""

    projections: tuple[np.ndarray, ...]
    config: ProjectionConfig
    explained_variance: np.ndarray | None = None


@dataclass(frozen=True)
class FilteredComplex:
    """Simplices sorted by (filtration value, dimension, vertices).

    Row i of `vertices` holds the increasing vertex labels of simplex i,
    padded with -1 past its dimension.
    """

    vertices: np.ndarray
    values: np.ndarray
    max_dim: int

    def __post_init__(self) -> None:
        """Freeze the arrays."""
        values = _frozen_array(self.values)
        vertices = np.array(self.vertices, dtype=np.int64).reshape(len(values), -1)
        vertices.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "vertices", vertices)

    @staticmethod
    def from_simplices(simplices: Sequence[Sequence[int]], values: Any, max_dim: int | None = None) -> FilteredComplex:
        """Create a FilteredComplex from vertex tuples already in filtration order."""
        width = max((len(simplex) for simplex in simplices), default=1)
        vertices = np.full((len(simplices), width), -1, dtype=np.int64)
        for row, simplex in zip(vertices, simplices):
            row[: len(simplex)] = sorted(simplex)
        return FilteredComplex(vertices=vertices, values=values, max_dim=width - 1 if max_dim is None else max_dim)

    def __len__(self) -> int:
        """Return the number of simplices."""
        return len(self.values)

    @property
    def simplices(self) -> tuple[tuple[int, ...], ...]:
        """Return the simplices as vertex tuples."""
        return tuple(tuple(vertex for vertex in row if vertex >= 0) for row in self.vertices.tolist())

    def dims(self) -> np.ndarray:
        """Return the dimension of each simplex."""
        return np.count_nonzero(self.vertices >= 0, axis=1) - 1

    def euler_characteristic(self) -> int:
        """Return the alternating count of simplices."""
        dims = self.dims()
        return int(np.sum(np.where(dims % 2 == 0, 1, -1)))


@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite persistence intervals per homology dimension."""

    intervals: dict[int, np.ndarray]
    essential_count: dict[int, int] = field(default_factory=dict)

    def get(self, h: int) -> np.ndarray:
        """Return the (m, 2) interval array for dimension h (possibly empty)."""
        return self.intervals.get(h, _empty_intervals())

    @property
    def dimensions(self) -> list[int]:
        """Return the homology dimensions carried by the diagram."""
        return sorted(set(self.intervals) | set(self.essential_count))

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON layout {"h0": [[b, d], ...], ..., "essential": {...}}."""
        payload: dict[str, Any] = {f"h{h}": self.get(h).tolist() for h in self.dimensions}
        payload["essential"] = {str(h): count for h, count in sorted(self.essential_count.items())}
        return payload

    @staticmethod
    def from_dict(data: dict[str, Any]) -> PersistenceDiagram:
        """Create a PersistenceDiagram from its JSON layout."""
        intervals = {
            int(key[1:]): _frozen_array(np.reshape(np.asarray(value, dtype=np.float64), (-1, 2)))
            for key, value in data.items()
            if key.startswith("h") and key[1:].isdigit()
        }
        essential = {int(h): int(count) for h, count in data.get("essential", {}).items()}
        return PersistenceDiagram(intervals=intervals, essential_count=essential)


@dataclass(frozen=True)
class GridSpec:
    """Grid metadata of a grid-rounded landscape."""

    origin: float
    step: float


@dataclass(frozen=True)
class LandscapeProvenance:
    """Pipeline choices a landscape was computed under."""

    h_max: int = DEFAULT_H_MAX
    normalized: bool = False
    projector: str = PROJECTOR_PCA
    k: int = DEFAULT_K
    complex: str = COMPLEX_ALPHA

    def compatible(self, other: LandscapeProvenance, ignore_projection: bool = False) -> bool:
        """Return True if landscapes of both provenances may be compared."""
        if ignore_projection:
            return (self.h_max, self.normalized, self.complex) == (other.h_max, other.normalized, other.complex)
        return self == other

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "h_max": self.h_max,
            "normalized": self.normalized,
            "projector": self.projector,
            "k": self.k,
            "complex": self.complex,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> LandscapeProvenance:
        """Create a LandscapeProvenance from its JSON layout."""
        return LandscapeProvenance(
            h_max=int(data.get("h_max", DEFAULT_H_MAX)),
            normalized=bool(data.get("normalized", False)),
            projector=data.get("projector", PROJECTOR_PCA),
            k=int(data.get("k", DEFAULT_K)),
            complex=data.get("complex", COMPLEX_ALPHA),
        )


@dataclass(frozen=True)
class PersistenceLandscape:
    """Exact piecewise-linear landscape layers per homology dimension.

    Each layer is an (m, 2) array of (t, value) critical points with strictly
    increasing t, zero first and last values, and linear interpolation in
    between. ``sources`` keeps the finite intervals of every diagram the
    landscape was built from, so grid rounding can be re-derived diagram-side.
    """

    layers_by_dim: dict[int, tuple[np.ndarray, ...]]
    h_max: int = DEFAULT_H_MAX
    source_id: str = ""
    provenance: LandscapeProvenance | None = None
    grid: GridSpec | None = None
    sources: tuple[dict[int, np.ndarray], ...] = ()

    def layers(self, h: int) -> tuple[np.ndarray, ...]:
        """Return the layers of dimension h (empty for the zero function)."""
        return self.layers_by_dim.get(h, ())


@dataclass(frozen=True)
class LandscapeSet:
    """Landscapes sharing one pipeline provenance, keyed by universe id."""

    ids: tuple[str, ...]
    landscapes: tuple[PersistenceLandscape, ...]

    def __post_init__(self) -> None:
        """Validate non-emptiness and homogeneous provenance."""
        if not self.landscapes:
            raise DomainError("LandscapeSet must not be empty")
        if len(self.ids) != len(self.landscapes):
            raise DomainError("LandscapeSet ids and landscapes differ in length")
        first = self.landscapes[0]
        for landscape in self.landscapes[1:]:
            if landscape.h_max != first.h_max or landscape.provenance != first.provenance:
                raise ProvenanceError(f"Landscape {landscape.source_id!r} has mixed provenance")

    def __len__(self) -> int:
        """Return N, the number of landscapes."""
        return len(self.landscapes)

    @staticmethod
    def from_mapping(landscapes: dict[str, PersistenceLandscape]) -> LandscapeSet:
        """Create a LandscapeSet from an id → landscape mapping."""
        return LandscapeSet(ids=tuple(landscapes), landscapes=tuple(landscapes.values()))


@dataclass(frozen=True)
class PrestoConfig:  # pylint: disable=too-many-instance-attributes
    """Resolved pipeline configuration, recorded into every result."""

    p: float = DEFAULT_P
    h_max: int = DEFAULT_H_MAX
    normalize: bool = False
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    complex: str = COMPLEX_ALPHA
    grid_step: float | None = None
    cap_essential: bool = False
    sample_size: int | None = None
    restarts: int = DEFAULT_RESTARTS
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD

    def landscape_provenance(self) -> LandscapeProvenance:
        """Return the provenance landscapes built under this config carry."""
        return LandscapeProvenance(
            h_max=self.h_max,
            normalized=self.normalize,
            projector=self.projection.method,
            k=self.projection.k,
            complex=self.complex,
        )

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "p": format_p(self.p),
            "h_max": self.h_max,
            "normalize": self.normalize,
            "projection": self.projection.to_dict(),
            "complex": self.complex,
            "grid_step": self.grid_step,
            "cap_essential": self.cap_essential,
            "sample_size": self.sample_size,
            "restarts": self.restarts,
            "exact_threshold": self.exact_threshold,
        }


def _triangle_violation(dist: np.ndarray) -> tuple[int, int, int] | None:
    """Return a triple (i, j, k) with dist[i, k] > dist[i, j] + dist[j, k] beyond tolerance, if any."""
    m = len(dist)
    slack = MMS_TRIANGLE_TOLERANCE * max(1.0, float(dist.max(initial=0.0)))
    block = max(1, RIPS_CHUNK_CELLS // max(1, m * m))
    for start in range(0, m, block):
        rows = dist[start : start + block]
        excess = rows[:, None, :] - rows[:, :, None] - dist[None, :, :]
        if np.any(excess > slack):
            i, j, k = np.unravel_index(int(np.argmax(excess)), excess.shape)
            return start + int(i), int(j), int(k)
    return None


@dataclass(frozen=True)
class MultiverseMetricSpace:
    """Pairwise topological distances over a multiverse."""

    ids: tuple[str, ...]
    dist: np.ndarray
    config: PrestoConfig | None = None
    notes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate shape, symmetry, zero diagonal, nonnegativity and the triangle inequality."""
        dist = np.asarray(self.dist, dtype=np.float64)
        m = len(self.ids)
        if dist.shape != (m, m):
            raise DomainError(f"Distance matrix shape {dist.shape} does not match {m} ids")
        if len(set(self.ids)) != m:
            raise DomainError("Distance matrix ids must be unique")
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise DomainError("Distances must be finite and nonnegative")
        if np.any(np.abs(dist - dist.T) > MMS_SYMMETRY_TOLERANCE):
            raise DomainError("Distance matrix is not symmetric")
        if np.any(np.diag(dist) != 0):
            raise DomainError("Distance matrix diagonal must be zero")
        violation = _triangle_violation(dist)
        if violation is not None:
            i, j, k = violation
            detour = dist[i, j] + dist[j, k]
            raise DomainError(
                f"Distances violate the triangle inequality: d({self.ids[i]}, {self.ids[k]}) = {dist[i, k]:.6g} "
                f"exceeds d({self.ids[i]}, {self.ids[j]}) + d({self.ids[j]}, {self.ids[k]}) = {detour:.6g}"
            )
        object.__setattr__(self, "dist", _frozen_array(dist))
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def m(self) -> int:
        """Return the number of universes."""
        return len(self.ids)

    def off_diagonal(self) -> np.ndarray:
        """Return the strictly-upper-triangle distances."""
        rows, cols = np.triu_indices(self.m, k=1)
        return self.dist[rows, cols]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "ids": list(self.ids),
            "dist": self.dist.tolist(),
            "config": self.config.to_dict() if self.config else None,
            "notes": dict(self.notes),
        }


@dataclass(frozen=True)
class TopologicalLossReport:
    """Per-universe distances between original and projected landscapes."""

    ids: tuple[str, ...]
    per_universe_loss: tuple[float, ...]
    projector: str
    k: int

    @property
    def loss(self) -> float:
        """Return the topological loss, the maximal per-universe distance."""
        return max(self.per_universe_loss) if self.per_universe_loss else 0.0

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "ids": list(self.ids),
            "per_universe_loss": list(self.per_universe_loss),
            "loss": self.loss,
            "projector": self.projector,
            "k": self.k,
        }


@dataclass(frozen=True)
class MetricPreservationReport:
    """Outcome of checking projected distances against the loss bound."""

    max_slack: float
    violations: tuple[tuple[str, str, float], ...]
    loss: float

    @property
    def passed(self) -> bool:
        """Return True if no pair violates the bound."""
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "passed": self.passed,
            "loss": self.loss,
            "max_slack": self.max_slack,
            "violations": [list(v) for v in self.violations],
        }


@dataclass(frozen=True)
class VarianceBoundReport:  # pylint: disable=too-many-instance-attributes
    """Outcome of checking landscape norms and variance against the loss bound."""

    sandwich_passed: bool
    sandwich_slacks: tuple[float, ...]
    pv_difference: float
    absolute_deviation_bound: float
    absolute_deviation_passed: bool
    derived_bound: float
    derived_passed: bool
    loss: float

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "sandwich": {"passed": self.sandwich_passed, "slacks": list(self.sandwich_slacks)},
            "pv_difference": self.pv_difference,
            "absolute_deviation_reading": {
                "bound": self.absolute_deviation_bound,
                "passed": self.absolute_deviation_passed,
            },
            "derived": {"bound": self.derived_bound, "passed": self.derived_passed},
            "loss": self.loss,
        }


@dataclass(frozen=True)
class ProjectionReport:
    """Topological loss of a projected multiverse with its bound checks."""

    loss: TopologicalLossReport
    metric: MetricPreservationReport
    variance: VarianceBoundReport

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {"loss": self.loss.to_dict(), "metric": self.metric.to_dict(), "variance": self.variance.to_dict()}


@dataclass(frozen=True)
class SensitivityReport:
    """Sensitivities of a multiverse to each parameter dimension."""

    rows: tuple[tuple[str, tuple[tuple[str, ParamValue], ...], float], ...]
    local: dict[str, float]
    global_sensitivity: float

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "individual": [
                {"dimension": dim_name, "class": dict(class_key), "sensitivity": value}
                for dim_name, class_key, value in self.rows
            ],
            "local": dict(self.local),
            "global": self.global_sensitivity,
        }


@dataclass(frozen=True)
class CompressionResult:
    """Representatives covering a multiverse within epsilon."""

    representatives: tuple[str, ...]
    assignment: dict[str, str]
    epsilon: float
    method: str
    quantile: float | None = None
    optimal_size: int | None = None
    harmonic_bound: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "representatives": list(self.representatives),
            "assignment": dict(self.assignment),
            "epsilon": self.epsilon,
            "quantile": self.quantile,
            "method": self.method,
            "optimal_size": self.optimal_size,
            "harmonic_bound": self.harmonic_bound,
        }


@dataclass(frozen=True)
class OutlierReport:
    """Landscape-norm outlier scores."""

    scores: dict[str, float]
    flagged: tuple[str, ...]
    method: str
    threshold: float
    norms_by_dim: dict[str, dict[int, float]]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "scores": dict(self.scores),
            "flagged": list(self.flagged),
            "method": self.method,
            "threshold": self.threshold,
            "norms_by_dim": {uid: {str(h): v for h, v in norms.items()} for uid, norms in self.norms_by_dim.items()},
        }


@dataclass(frozen=True)
class MantelResult:
    """Permutation test of the correlation between two distance matrices."""

    r: float
    p_value: float
    permutations: int
    corrected_p: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready dict."""
        return {
            "r": self.r,
            "p_value": self.p_value,
            "permutations": self.permutations,
            "corrected_p": self.corrected_p,
        }


def p_from_text(value: str | float) -> float:
    """Parse a norm exponent written as 1, 2, "inf" or infinity."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return P_INF
    return float(value)
