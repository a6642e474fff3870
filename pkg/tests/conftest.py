"""Shared fixtures for presto tests."""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from presto.landscape import landscape_from_diagram
from presto.models import LandscapeProvenance, PersistenceDiagram, PersistenceLandscape


@pytest.fixture
def unit_square() -> np.ndarray:
    """Corners of the unit square."""
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


@pytest.fixture
def collinear_points() -> np.ndarray:
    """Three collinear points with spacing 1."""
    return np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for randomized property tests."""
    return np.random.default_rng(20240611)


@pytest.fixture
def circle() -> Callable[..., np.ndarray]:
    """Factory for evenly spaced points on a circle."""

    def _circle(n: int = 12, radius: float = 1.0, center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
        angles = 2 * np.pi * np.arange(n) / n
        return np.column_stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)])

    return _circle


@pytest.fixture
def two_circles(circle: Callable[..., np.ndarray]) -> np.ndarray:
    """Two disjoint circles of the same size."""
    return np.vstack([circle(8, 1.0, (0.0, 0.0)), circle(8, 1.0, (4.0, 0.0))])


@pytest.fixture
def make_diagram() -> Callable[..., PersistenceDiagram]:
    """Factory for diagrams from {h: [(birth, death), ...]}."""

    def _make(intervals: dict[int, list[tuple[float, float]]] | None = None) -> PersistenceDiagram:
        return PersistenceDiagram(
            intervals={h: np.array(pairs, dtype=np.float64).reshape(-1, 2) for h, pairs in (intervals or {}).items()}
        )

    return _make


@pytest.fixture
def make_landscape(make_diagram: Callable[..., PersistenceDiagram]) -> Callable[..., PersistenceLandscape]:
    """Factory for exact landscapes from {h: [(birth, death), ...]}."""

    def _make(
        intervals: dict[int, list[tuple[float, float]]] | None = None,
        h_max: int = 1,
        source_id: str = "",
        provenance: LandscapeProvenance | None = None,
    ) -> PersistenceLandscape:
        return landscape_from_diagram(make_diagram(intervals), h_max, source_id, provenance)

    return _make


@pytest.fixture
def random_intervals(rng: np.random.Generator) -> Callable[[int], list[tuple[float, float]]]:
    """Factory for random finite intervals with positive persistence."""

    def _random(count: int) -> list[tuple[float, float]]:
        births = rng.uniform(0.0, 1.0, size=count)
        lengths = rng.uniform(0.01, 1.0, size=count)
        return [(float(b), float(b + length)) for b, length in zip(births, lengths)]

    return _random


def _write_csv(path: Path, points: np.ndarray) -> None:
    path.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in points) + "\n", encoding="utf-8")


@pytest.fixture
def write_embedding(tmp_path: Path) -> Callable[[str, np.ndarray], Path]:
    """Factory writing a point cloud as CSV under tmp_path."""

    def _write(name: str, points: np.ndarray) -> Path:
        path = tmp_path / f"{name}.csv"
        _write_csv(path, points)
        return path

    return _write


@pytest.fixture
def write_manifest(tmp_path: Path) -> Callable[..., Path]:
    """Factory writing embeddings and a manifest referencing them by relative path.

    Each universe is given as (id, params, points).
    """

    def _write(universes: list[tuple[str, dict[str, Any], np.ndarray]], name: str = "manifest.json") -> Path:
        (tmp_path / "embeddings").mkdir(exist_ok=True)
        entries = []
        for universe_id, params, points in universes:
            _write_csv(tmp_path / "embeddings" / f"{universe_id}.csv", points)
            entries.append({"id": universe_id, "params": params, "embedding": f"embeddings/{universe_id}.csv"})
        path = tmp_path / name
        path.write_text(json.dumps({"universes": entries}), encoding="utf-8")
        return path

    return _write
