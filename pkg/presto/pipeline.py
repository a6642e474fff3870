"""Per-universe landscape pipeline and multiverse metric space construction."""

from __future__ import annotations

import asyncio
import logging
from dataclasses import replace
from typing import Any

import numpy as np

from .const import COMPLEX_RIPS
from .exceptions import PrestoException, UniverseError
from .ingest import load_embedding
from .landscape import landscape_average, landscape_from_diagram, landscape_grid_round
from .measures import (
    check_metric_preservation,
    check_variance_bound,
    norm_matrix,
    presto_distance,
    presto_variance,
    reference_landscape,
    topological_loss,
)
from .models import (
    Embedding,
    LandscapeSet,
    MultiverseManifest,
    MultiverseMetricSpace,
    PersistenceLandscape,
    PrestoConfig,
    ProjectionReport,
    UniverseSpec,
)
from .preprocess import approx_diameter, normalize, project, subsample
from .provenance import StageTimer
from .topology import diagram_from_points

_LOGGER = logging.getLogger(__name__)


def prepare_embedding(e: Embedding, cfg: PrestoConfig, timer: StageTimer | None = None) -> Embedding:
    """Subsample and normalize an embedding as configured."""
    timer = timer or StageTimer()
    if cfg.sample_size is not None:
        with timer.stage("subsample"):
            e = subsample(e, cfg.sample_size, cfg.projection.seed)
    if cfg.normalize:
        with timer.stage("normalize"):
            e = normalize(e, approx_diameter(e, cfg.restarts, cfg.exact_threshold))
    return e


def embedding_landscape(e: Embedding, cfg: PrestoConfig, timer: StageTimer | None = None) -> PersistenceLandscape:
    """Run the full pipeline on one embedding: prepare, project, reduce, vectorize."""
    timer = timer or StageTimer()
    return projected_landscape(prepare_embedding(e, cfg, timer), cfg, timer)


def projected_landscape(e: Embedding, cfg: PrestoConfig, timer: StageTimer | None = None) -> PersistenceLandscape:
    """Project a prepared embedding and return the landscape of its topology.

    With several projections the result is the mean of their landscapes.
    """
    timer = timer or StageTimer()
    with timer.stage("project"):
        projections = project(e, cfg.projection)

    provenance = cfg.landscape_provenance()
    landscapes = []
    for coordinates in projections.projections:
        with timer.stage("persistence"):
            diagram = diagram_from_points(coordinates, cfg)
        with timer.stage("landscape"):
            landscapes.append(landscape_from_diagram(diagram, cfg.h_max, e.source_id, provenance))

    with timer.stage("landscape"):
        landscape = landscape_average(landscapes, e.source_id)
        if cfg.grid_step is not None:
            landscape = landscape_grid_round(landscape, cfg.grid_step)
    return landscape


class MultiversePipeline:
    """Compute and cache landscapes for every universe of a manifest."""

    def __init__(self, manifest: MultiverseManifest, cfg: PrestoConfig, jobs: int = 1) -> None:
        """Initialize."""
        self.manifest = manifest
        self.cfg = cfg
        self.jobs = max(1, jobs)
        self.timer = StageTimer()

        # Landscapes are computed once per universe id
        self._landscapes: dict[str, PersistenceLandscape] = {}
        self.statistics = self._initialize_statistics()

    def _initialize_statistics(self) -> dict[str, Any]:
        """Initialize statistics tracking dictionary.

        Returns:
            Dictionary with initial statistics values
        """
        return {
            "universes": len(self.manifest.universes),
            "computed": 0,
            "cached": 0,
            "failed": 0,
            "error_counts": {},
        }

    def _track_failure(self, err: Exception) -> None:
        """Track a per-universe failure by error type."""
        error_type = type(err).__name__
        self.statistics["failed"] += 1
        self.statistics["error_counts"][error_type] = self.statistics["error_counts"].get(error_type, 0) + 1

    def _compute(self, embedding: Embedding, timer: StageTimer) -> PersistenceLandscape:
        return embedding_landscape(embedding, self.cfg, timer)

    def _universe_landscape(self, universe: UniverseSpec) -> tuple[PersistenceLandscape, StageTimer]:
        """Load one universe's embedding and compute its landscape (runs in a worker thread)."""
        timer = StageTimer()
        with timer.stage("load"):
            embedding = load_embedding(universe.embedding_path)
        return self._compute(Embedding(data=embedding.data, source_id=universe.id), timer), timer

    async def _run_universe(self, universe: UniverseSpec, semaphore: asyncio.Semaphore) -> PersistenceLandscape:
        if universe.id in self._landscapes:
            self.statistics["cached"] += 1
            return self._landscapes[universe.id]

        async with semaphore:
            try:
                landscape, timer = await asyncio.to_thread(self._universe_landscape, universe)
            except PrestoException as err:
                self._track_failure(err)
                _LOGGER.error("Universe %s failed: %s", universe.id, err)
                raise UniverseError(str(err), universe.id) from err

        self.timer.merge(timer)
        self.statistics["computed"] += 1
        self._landscapes[universe.id] = landscape
        _LOGGER.debug("Computed landscape for universe %s", universe.id)
        return landscape

    async def async_landscapes(self) -> dict[str, PersistenceLandscape]:
        """Return landscapes of every universe in manifest order.

        Raises:
            UniverseError: The pipeline failed for a universe (carries its id)
        """
        semaphore = asyncio.Semaphore(self.jobs)
        results = await asyncio.gather(
            *(self._run_universe(universe, semaphore) for universe in self.manifest.universes),
            return_exceptions=True,
        )
        for result in results:
            if isinstance(result, BaseException):
                raise result
        _LOGGER.info(
            "Landscapes ready: %d computed, %d cached", self.statistics["computed"], self.statistics["cached"]
        )
        return dict(zip(self.manifest.ids, results))

    async def _distance_row(self, i: int, landscapes: list[PersistenceLandscape]) -> list[float]:
        return await asyncio.to_thread(
            lambda: [presto_distance(landscapes[i], landscapes[j], self.cfg) for j in range(i + 1, len(landscapes))]
        )

    async def async_distance_matrix(self, landscapes: dict[str, PersistenceLandscape]) -> np.ndarray:
        """Fill the pairwise distance matrix, one upper-triangle row per task."""
        ordered = list(landscapes.values())
        m = len(ordered)
        semaphore = asyncio.Semaphore(self.jobs)

        async def bounded(i: int) -> list[float]:
            async with semaphore:
                return await self._distance_row(i, ordered)

        with self.timer.stage("distances"):
            rows = await asyncio.gather(*(bounded(i) for i in range(m)))

        dist = np.zeros((m, m))
        for i, row in enumerate(rows):
            dist[i, i + 1 :] = row
            dist[i + 1 :, i] = row
        return dist

    async def async_build_mms(self) -> MultiverseMetricSpace:
        """Return the multiverse metric space of the manifest."""
        landscapes = await self.async_landscapes()
        dist = await self.async_distance_matrix(landscapes)
        _LOGGER.info("Built %dx%d multiverse metric space", len(dist), len(dist))
        return MultiverseMetricSpace(ids=tuple(landscapes), dist=dist, config=self.cfg)


def build_mms(m: MultiverseManifest, cfg: PrestoConfig, jobs: int = 1) -> MultiverseMetricSpace:
    """Compute landscapes of every universe and their pairwise PRESTO distances."""
    return asyncio.run(MultiversePipeline(m, cfg, jobs).async_build_mms())


class ProjectionPipeline(MultiversePipeline):
    """Compare each universe's full-dimension topology with that of its projection.

    Both sides use Rips filtrations so their landscapes are in the same units.
    """

    def __init__(self, manifest: MultiverseManifest, cfg: PrestoConfig, jobs: int = 1) -> None:
        """Initialize."""
        super().__init__(manifest, replace(cfg, complex=COMPLEX_RIPS), jobs)
        self._references: dict[str, PersistenceLandscape] = {}

    def _compute(self, embedding: Embedding, timer: StageTimer) -> PersistenceLandscape:
        prepared = prepare_embedding(embedding, self.cfg, timer)
        with timer.stage("reference"):
            self._references[embedding.source_id] = reference_landscape(prepared, self.cfg)
        return projected_landscape(prepared, self.cfg, timer)

    async def async_evaluate(self) -> ProjectionReport:
        """Return the topological loss and the bound checks it implies."""
        projected = await self.async_landscapes()
        references = {uid: self._references[uid] for uid in projected}

        originals = LandscapeSet.from_mapping(references)
        projecteds = LandscapeSet.from_mapping(projected)
        loss = topological_loss(originals, projecteds, self.cfg)

        mms = MultiverseMetricSpace(
            ids=originals.ids, dist=await self.async_distance_matrix(references), config=self.cfg
        )
        pmms = MultiverseMetricSpace(
            ids=projecteds.ids, dist=await self.async_distance_matrix(projected), config=self.cfg
        )
        metric = check_metric_preservation(mms, pmms, loss.loss)
        variance = check_variance_bound(
            presto_variance(originals, self.cfg),
            presto_variance(projecteds, self.cfg),
            loss.loss,
            norm_matrix(originals, self.cfg),
            norm_matrix(projecteds, self.cfg),
        )
        return ProjectionReport(loss=loss, metric=metric, variance=variance)


def evaluate_projection(m: MultiverseManifest, cfg: PrestoConfig, jobs: int = 1) -> ProjectionReport:
    """Compute the topological loss of projecting every universe, with its bound checks."""
    return asyncio.run(ProjectionPipeline(m, cfg, jobs).async_evaluate())
