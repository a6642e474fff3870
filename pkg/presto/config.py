"""Configuration schemas and validation for presto."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    COMPLEX_ALPHA,
    COMPLEXES,
    CONF_CAP_ESSENTIAL,
    CONF_COMPLEX,
    CONF_EXACT_THRESHOLD,
    CONF_GRID_STEP,
    CONF_H_MAX,
    CONF_K,
    CONF_METHOD,
    CONF_N_PROJECTIONS,
    CONF_NORMALIZE,
    CONF_P,
    CONF_PROJECTION,
    CONF_RESTARTS,
    CONF_SAMPLE_SIZE,
    CONF_SEED,
    DEFAULT_EXACT_THRESHOLD,
    DEFAULT_H_MAX,
    DEFAULT_K,
    DEFAULT_N_PROJECTIONS,
    DEFAULT_P,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    ENV_JOBS,
    PROJECTOR_PCA,
    PROJECTORS,
    SUPPORTED_H,
    SUPPORTED_P,
)
from .exceptions import DomainError, ManifestError
from .models import MultiverseManifest, ProjectionConfig, PrestoConfig, UniverseSpec, p_from_text

_LOGGER = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1

POSITIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=1))

PROJECTION_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_METHOD, default=PROJECTOR_PCA): vol.In(PROJECTORS),
        vol.Optional(CONF_K, default=DEFAULT_K): POSITIVE_INT,
        vol.Optional(CONF_N_PROJECTIONS, default=DEFAULT_N_PROJECTIONS): POSITIVE_INT,
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(vol.Coerce(int), vol.Range(min=0, max=MAX_SEED)),
    }
)

PRESTO_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_P, default=DEFAULT_P): vol.All(p_from_text, vol.In(SUPPORTED_P)),
        vol.Optional(CONF_H_MAX, default=DEFAULT_H_MAX): vol.All(vol.Coerce(int), vol.In(SUPPORTED_H)),
        vol.Optional(CONF_NORMALIZE, default=False): vol.Boolean(),
        vol.Optional(CONF_PROJECTION, default={}): PROJECTION_SCHEMA,
        vol.Optional(CONF_COMPLEX, default=COMPLEX_ALPHA): vol.In(COMPLEXES),
        vol.Optional(CONF_GRID_STEP, default=None): vol.Any(
            None, vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
        ),
        vol.Optional(CONF_CAP_ESSENTIAL, default=False): vol.Boolean(),
        vol.Optional(CONF_SAMPLE_SIZE, default=None): vol.Any(None, POSITIVE_INT),
        vol.Optional(CONF_RESTARTS, default=DEFAULT_RESTARTS): POSITIVE_INT,
        vol.Optional(CONF_EXACT_THRESHOLD, default=DEFAULT_EXACT_THRESHOLD): POSITIVE_INT,
    }
)

UNIVERSE_SCHEMA = vol.Schema(
    {
        vol.Required("id"): vol.All(vol.Coerce(str), vol.Length(min=1)),
        vol.Required("params"): {str: vol.Any(str, int, float)},
        vol.Required("embedding"): vol.All(str, vol.Length(min=1)),
    }
)

MANIFEST_SCHEMA = vol.Schema(
    {
        vol.Required("universes"): [UNIVERSE_SCHEMA],
        vol.Optional("metadata", default={}): {str: vol.Coerce(str)},
    },
    extra=vol.ALLOW_EXTRA,
)


def validate_presto_config(data: dict[str, Any] | None = None) -> PrestoConfig:
    """Validate raw configuration and return a resolved PrestoConfig.

    Args:
        data: Raw configuration keyed by the CONF_* constants

    Returns:
        PrestoConfig with defaults filled in

    Raises:
        DomainError: A value is missing, of the wrong type or out of range
    """
    try:
        resolved = PRESTO_SCHEMA(dict(data or {}))
    except vol.Invalid as err:
        raise DomainError(f"Invalid configuration: {err}") from err

    projection = resolved[CONF_PROJECTION]
    return PrestoConfig(
        p=resolved[CONF_P],
        h_max=resolved[CONF_H_MAX],
        normalize=resolved[CONF_NORMALIZE],
        projection=ProjectionConfig(
            method=projection[CONF_METHOD],
            k=projection[CONF_K],
            n_projections=projection[CONF_N_PROJECTIONS],
            seed=projection[CONF_SEED],
        ),
        complex=resolved[CONF_COMPLEX],
        grid_step=resolved[CONF_GRID_STEP],
        cap_essential=resolved[CONF_CAP_ESSENTIAL],
        sample_size=resolved[CONF_SAMPLE_SIZE],
        restarts=resolved[CONF_RESTARTS],
        exact_threshold=resolved[CONF_EXACT_THRESHOLD],
    )


def validate_manifest_document(document: Any, base_dir: Path) -> MultiverseManifest:
    """Validate a parsed manifest document.

    Embedding paths are resolved relative to base_dir. Parameter names must
    form the same set in every universe; their order is taken from the first
    universe.

    Raises:
        ManifestError: Schema violation, empty list, duplicate id or
            heterogeneous parameter names
    """
    try:
        resolved = MANIFEST_SCHEMA(document)
    except vol.Invalid as err:
        raise ManifestError(f"Invalid manifest: {err}") from err

    raw_universes = resolved["universes"]
    if not raw_universes:
        raise ManifestError("Manifest lists no universes")

    seen: set[str] = set()
    names = list(raw_universes[0]["params"])
    universes = []
    for raw in raw_universes:
        universe_id = raw["id"]
        if universe_id in seen:
            raise ManifestError(f"Duplicate universe id {universe_id!r}", universe_id=universe_id)
        seen.add(universe_id)

        if set(raw["params"]) != set(names):
            raise ManifestError(
                f"Universe {universe_id!r} has parameters {sorted(raw['params'])}, expected {sorted(names)}",
                universe_id=universe_id,
            )

        path = Path(raw["embedding"])
        universes.append(
            UniverseSpec(
                id=universe_id,
                params={name: raw["params"][name] for name in names},
                embedding_path=path if path.is_absolute() else base_dir / path,
            )
        )

    _LOGGER.debug("Validated manifest with %d universes and %d parameters", len(universes), len(names))
    return MultiverseManifest(universes=tuple(universes), metadata=resolved["metadata"])


def resolve_jobs(jobs: int | None) -> int:
    """Return the per-universe parallelism bound.

    Args:
        jobs: Explicit --jobs value, or None to fall back to PRESTO_JOBS

    Returns:
        A positive worker count (1 when neither is set)
    """
    if jobs is not None:
        if jobs < 1:
            raise DomainError(f"--jobs must be positive, got {jobs}")
        return jobs

    raw = os.environ.get(ENV_JOBS)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as err:
        raise DomainError(f"{ENV_JOBS} must be an integer, got {raw!r}") from err
    if value < 1:
        raise DomainError(f"{ENV_JOBS} must be positive, got {value}")
    return value
