"""Distance, variance, sensitivity and loss measures over landscapes."""

from __future__ import annotations

import logging
from collections import defaultdict
from math import comb
from collections.abc import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .const import (
    BOUND_TOLERANCE,
    COMPLEX_RIPS,
    PROJECTOR_NONE,
    RIPS_REFERENCE_MAX_D,
    RIPS_REFERENCE_MAX_N,
    RIPS_REFERENCE_MAX_SIMPLICES,
)
from .exceptions import DomainError, ProvenanceError
from .landscape import landscape_distance, landscape_from_diagram, landscape_norm
from .models import (
    Embedding,
    LandscapeProvenance,
    LandscapeSet,
    MetricPreservationReport,
    MultiverseManifest,
    MultiverseMetricSpace,
    ParamValue,
    PersistenceLandscape,
    PrestoConfig,
    SensitivityReport,
    TopologicalLossReport,
    VarianceBoundReport,
)
from .topology import persistence, rips_complex

_LOGGER = logging.getLogger(__name__)

ClassKey = tuple[tuple[str, ParamValue], ...]


def _sum_over_dims(a: PersistenceLandscape, b: PersistenceLandscape, cfg: PrestoConfig) -> float:
    return sum(landscape_distance(a, b, x, cfg.p) for x in range(cfg.h_max + 1))


def presto_distance(a: PersistenceLandscape, b: PersistenceLandscape, cfg: PrestoConfig) -> float:
    """Return the sum over dimensions 0..h_max of L^p landscape distances.

    A pseudometric: landscapes of different embeddings may be at distance 0.

    Raises:
        ProvenanceError: The landscapes were built under different pipelines
    """
    if a.h_max != b.h_max or (
        a.provenance is not None and b.provenance is not None and not a.provenance.compatible(b.provenance)
    ):
        raise ProvenanceError(
            f"Cannot compare {a.source_id!r} ({a.provenance}) with {b.source_id!r} ({b.provenance})"
        )
    return _sum_over_dims(a, b, cfg)


def landscape_norms(landscape: PersistenceLandscape, cfg: PrestoConfig) -> dict[int, float]:
    """Return the L^p norm of every dimension 0..h_max."""
    return {x: landscape_norm(landscape, x, cfg.p) for x in range(cfg.h_max + 1)}


def total_norm(landscape: PersistenceLandscape, cfg: PrestoConfig) -> float:
    """Return the norm summed over dimensions, the distance to the empty landscape."""
    return sum(landscape_norms(landscape, cfg).values())


def norm_matrix(ls: LandscapeSet, cfg: PrestoConfig) -> np.ndarray:
    """Return the (N, h_max + 1) matrix of per-dimension landscape norms."""
    return np.array([list(landscape_norms(landscape, cfg).values()) for landscape in ls.landscapes])


def variance_from_norms(norms: np.ndarray) -> float:
    """Return (1/N)·Σ_x Σ_i (norms[i, x] − μ_x)² for an (N, dims) norm matrix."""
    norms = np.asarray(norms, dtype=np.float64)
    if norms.ndim == 1:
        norms = norms[:, None]
    if len(norms) == 0:
        raise DomainError("Variance needs at least one landscape")
    return float(np.sum((norms - norms.mean(axis=0)) ** 2) / len(norms))


def presto_variance(ls: LandscapeSet, cfg: PrestoConfig) -> float:
    """Return the per-dimension variance of landscape norms, summed over dimensions."""
    return variance_from_norms(norm_matrix(ls, cfg))


def _classes(
    m: MultiverseManifest, landscapes: Mapping[str, PersistenceLandscape], dim_name: str
) -> dict[ClassKey, list[str]]:
    """Group universe ids by the values of every parameter except dim_name, in manifest order."""
    if dim_name not in m.parameter_names:
        raise DomainError(f"Unknown parameter dimension {dim_name!r}; known: {m.parameter_names}")
    classes: dict[ClassKey, list[str]] = defaultdict(list)
    for universe in m.universes:
        if universe.id not in landscapes:
            raise DomainError(f"No landscape for universe {universe.id!r}")
        classes[universe.class_key(dim_name)].append(universe.id)
    return dict(classes)


def _class_variance(members: Sequence[str], landscapes: Mapping[str, PersistenceLandscape], cfg: PrestoConfig) -> float:
    return presto_variance(LandscapeSet(tuple(members), tuple(landscapes[uid] for uid in members)), cfg)


def presto_sensitivity_individual(
    m: MultiverseManifest,
    landscapes: Mapping[str, PersistenceLandscape],
    dim_name: str,
    class_key: ClassKey,
    cfg: PrestoConfig | None = None,
) -> float:
    """Return the square root of the variance within one equivalence class.

    Raises:
        DomainError: The class has no members or dim_name is unknown
    """
    cfg = cfg or PrestoConfig()
    members = _classes(m, landscapes, dim_name).get(tuple(class_key))
    if not members:
        raise DomainError(f"No universes in class {dict(class_key)} for dimension {dim_name!r}")
    return float(np.sqrt(_class_variance(members, landscapes, cfg)))


def _mean_class_variance(
    m: MultiverseManifest, landscapes: Mapping[str, PersistenceLandscape], dim_name: str, cfg: PrestoConfig
) -> float:
    classes = _classes(m, landscapes, dim_name)
    return float(np.mean([_class_variance(members, landscapes, cfg) for members in classes.values()]))


def presto_sensitivity_local(
    m: MultiverseManifest,
    landscapes: Mapping[str, PersistenceLandscape],
    dim_name: str,
    cfg: PrestoConfig | None = None,
) -> float:
    """Return the root of the mean class variance over the classes of one dimension."""
    return float(np.sqrt(_mean_class_variance(m, landscapes, dim_name, cfg or PrestoConfig())))


def presto_sensitivity_global(
    m: MultiverseManifest,
    landscapes: Mapping[str, PersistenceLandscape],
    cfg: PrestoConfig | None = None,
) -> float:
    """Return the root of the mean over all dimensions of their mean class variance."""
    cfg = cfg or PrestoConfig()
    means = [_mean_class_variance(m, landscapes, name, cfg) for name in m.parameter_names]
    return float(np.sqrt(np.mean(means))) if means else 0.0


def sensitivity_table(
    m: MultiverseManifest,
    landscapes: Mapping[str, PersistenceLandscape],
    cfg: PrestoConfig | None = None,
) -> SensitivityReport:
    """Return individual sensitivities of every class, local ones per dimension and the global one."""
    cfg = cfg or PrestoConfig()
    rows = []
    local = {}
    for name in m.parameter_names:
        variances = []
        for class_key, members in _classes(m, landscapes, name).items():
            variance = _class_variance(members, landscapes, cfg)
            variances.append(variance)
            rows.append((name, class_key, float(np.sqrt(variance))))
        local[name] = float(np.sqrt(np.mean(variances)))
    overall = float(np.sqrt(np.mean([value**2 for value in local.values()]))) if local else 0.0
    return SensitivityReport(rows=tuple(rows), local=local, global_sensitivity=overall)


def reference_landscape(e: Embedding, cfg: PrestoConfig) -> PersistenceLandscape:
    """Landscape of the Rips filtration on an embedding's exact distance matrix.

    Raises:
        DomainError: The embedding exceeds d <= 16 or n <= 256, or its Rips
            complex through dimension h_max + 1 would hold more than
            RIPS_REFERENCE_MAX_SIMPLICES top simplices; the loss is not
            computable at desk scale
    """
    top_simplices = comb(e.n, cfg.h_max + 2)
    if e.d > RIPS_REFERENCE_MAX_D or e.n > RIPS_REFERENCE_MAX_N or top_simplices > RIPS_REFERENCE_MAX_SIMPLICES:
        _LOGGER.warning(
            "Reference topology of %s (n=%d, d=%d, h_max=%d) is not computable at desk scale",
            e.source_id,
            e.n,
            e.d,
            cfg.h_max,
        )
        raise DomainError(
            f"Topological loss for {e.source_id!r} is not computable at desk scale "
            f"(needs d <= {RIPS_REFERENCE_MAX_D}, n <= {RIPS_REFERENCE_MAX_N} and at most "
            f"{RIPS_REFERENCE_MAX_SIMPLICES} Rips {cfg.h_max + 1}-simplices; got d={e.d}, n={e.n}, "
            f"{top_simplices} simplices)"
        )
    complex_ = rips_complex(squareform(pdist(e.data)) if e.n > 1 else np.zeros((1, 1)), cfg.h_max)
    diagram = persistence(complex_, cfg.h_max, cap_essential=cfg.cap_essential)
    provenance = LandscapeProvenance(
        h_max=cfg.h_max, normalized=e.normalized, projector=PROJECTOR_NONE, k=e.d, complex=COMPLEX_RIPS
    )
    return landscape_from_diagram(diagram, cfg.h_max, e.source_id, provenance)


def topological_loss(originals: LandscapeSet, projecteds: LandscapeSet, cfg: PrestoConfig) -> TopologicalLossReport:
    """Return per-universe distances between original and projected landscapes, and their maximum.

    Raises:
        DomainError: The sets are not parallel (same ids in the same order)
        ProvenanceError: The sets differ in anything but the projection
    """
    if originals.ids != projecteds.ids:
        raise DomainError(f"Original and projected landscapes differ: {originals.ids} vs {projecteds.ids}")
    reference, projected = originals.landscapes[0].provenance, projecteds.landscapes[0].provenance
    if reference is not None and projected is not None and not reference.compatible(projected, ignore_projection=True):
        raise ProvenanceError(f"Reference provenance {reference} is not comparable to {projected}")

    losses = tuple(_sum_over_dims(a, b, cfg) for a, b in zip(originals.landscapes, projecteds.landscapes))
    report = TopologicalLossReport(
        ids=originals.ids,
        per_universe_loss=losses,
        projector=projected.projector if projected else cfg.projection.method,
        k=projected.k if projected else cfg.projection.k,
    )
    _LOGGER.info("Topological loss %.6g over %d universes", report.loss, len(losses))
    return report


def check_metric_preservation(
    mms: MultiverseMetricSpace, pmms: MultiverseMetricSpace, loss: float
) -> MetricPreservationReport:
    """Check that every projected distance is at most the original plus twice the loss.

    Violations are logged as errors; a correct pipeline never produces one.
    """
    if mms.ids != pmms.ids:
        raise DomainError("Original and projected distance matrices must share ids and order")

    slack = mms.dist + 2 * loss - pmms.dist
    rows, cols = np.triu_indices(mms.m, k=1)
    violations = tuple(
        (mms.ids[i], mms.ids[j], float(-slack[i, j]))
        for i, j in zip(rows.tolist(), cols.tolist())
        if slack[i, j] < -BOUND_TOLERANCE
    )
    for a, b, excess in violations:
        _LOGGER.error("Projected distance %s-%s exceeds the loss bound by %.3g", a, b, excess)
    max_slack = float(slack[rows, cols].max()) if len(rows) else 2 * loss
    return MetricPreservationReport(max_slack=max_slack, violations=violations, loss=loss)


def check_variance_bound(
    pv_orig: float,
    pv_proj: float,
    loss: float,
    norms: np.ndarray | Sequence[Sequence[float]],
    projected_norms: np.ndarray | Sequence[Sequence[float]],
    n: int | None = None,
) -> VarianceBoundReport:
    """Check landscape-norm and variance perturbation bounds under projection.

    Args:
        pv_orig: Variance of the original landscape set
        pv_proj: Variance of the projected landscape set
        loss: Topological loss of the projection
        norms: (N, dims) per-dimension norms of the original landscapes
        projected_norms: The same for the projected landscapes
        n: Number of landscapes, defaults to len(norms)

    The per-norm sandwich |∥L(E_i)∥ − ∥L(P_i)∥| <= loss is the primary
    check. The aggregate bound is evaluated with σ read as the sum of
    absolute deviations from the mean, (4ℓ/N)σ + (2ℓ)²/N, and as
    (2ℓ/N)σ + ℓ², which every instance satisfies.
    """
    original = np.asarray(norms, dtype=np.float64).reshape(len(norms), -1)
    projected = np.asarray(projected_norms, dtype=np.float64).reshape(len(projected_norms), -1)
    n = len(original) if n is None else n
    if original.shape != projected.shape or n != len(original) or n < 1:
        raise DomainError(f"Norm tables {original.shape} and {projected.shape} do not describe {n} landscapes")

    slacks = loss - np.abs(original - projected).max(axis=1)
    sandwich_passed = bool(np.all(slacks >= -BOUND_TOLERANCE))
    if not sandwich_passed:
        _LOGGER.error("Landscape norms moved by more than the loss %.6g: slacks %s", loss, slacks)

    sigma = float(np.sum(np.abs(original - original.mean(axis=0))))
    difference = abs(pv_orig - pv_proj)
    literal = 4 * loss / n * sigma + (2 * loss) ** 2 / n
    derived = 2 * loss / n * sigma + loss**2
    if difference > derived + BOUND_TOLERANCE:
        _LOGGER.error("Variance changed by %.6g, above the bound %.6g", difference, derived)

    return VarianceBoundReport(
        sandwich_passed=sandwich_passed,
        sandwich_slacks=tuple(float(s) for s in slacks),
        pv_difference=difference,
        absolute_deviation_bound=literal,
        absolute_deviation_passed=difference <= literal + BOUND_TOLERANCE,
        derived_bound=derived,
        derived_passed=difference <= derived + BOUND_TOLERANCE,
        loss=loss,
    )
