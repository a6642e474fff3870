"""Tests for presto configuration validation."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import pytest

from presto.config import resolve_jobs, validate_manifest_document, validate_presto_config
from presto.const import ENV_JOBS, P_INF
from presto.exceptions import DomainError, ManifestError
from presto.models import PrestoConfig, ProjectionConfig


class TestPrestoConfig:
    """Tests for validate_presto_config."""

    def test_defaults(self) -> None:
        """Test an empty configuration resolves to the documented defaults."""
        assert validate_presto_config() == PrestoConfig()
        assert validate_presto_config({}).projection == ProjectionConfig(method="pca", k=2, n_projections=1, seed=0)

    def test_values_are_coerced(self) -> None:
        """Test textual values are coerced to their types."""
        cfg = validate_presto_config(
            {"p": "inf", "h_max": "1", "projection": {"method": "gaussian", "k": "3", "n_projections": 4}}
        )

        assert cfg.p == P_INF
        assert cfg.h_max == 1
        assert cfg.projection == ProjectionConfig(method="gaussian", k=3, n_projections=4, seed=0)

    @pytest.mark.parametrize(
        "raw",
        [
            {"p": 3},
            {"p": "one"},
            {"h_max": 3},
            {"projection": {"method": "tsne"}},
            {"projection": {"k": 0}},
            {"projection": {"seed": -1}},
            {"complex": "cech"},
            {"grid_step": 0},
            {"sample_size": 0},
            {"unknown": 1},
        ],
    )
    def test_invalid_values(self, raw: dict[str, Any]) -> None:
        """Test out-of-range and unknown values raise DomainError."""
        with pytest.raises(DomainError):
            validate_presto_config(raw)


class TestManifestDocument:
    """Tests for validate_manifest_document."""

    def test_two_universes(self, tmp_path: Path) -> None:
        """Test a two-universe manifest with one parameter."""
        manifest = validate_manifest_document(
            {
                "universes": [
                    {"id": "a", "params": {"beta": 1}, "embedding": "a.csv"},
                    {"id": "b", "params": {"beta": 4}, "embedding": "/data/b.csv"},
                ]
            },
            tmp_path,
        )

        assert manifest.c == 1
        assert manifest.ids == ["a", "b"]
        assert manifest.universes[0].embedding_path == tmp_path / "a.csv"
        assert manifest.universes[1].embedding_path == Path("/data/b.csv")

    def test_parameter_order_from_first_universe(self, tmp_path: Path) -> None:
        """Test parameters are reordered to match the first universe."""
        manifest = validate_manifest_document(
            {
                "universes": [
                    {"id": "a", "params": {"lr": 0.1, "beta": 1}, "embedding": "a.csv"},
                    {"id": "b", "params": {"beta": 4, "lr": 0.2}, "embedding": "b.csv"},
                ]
            },
            tmp_path,
        )

        assert list(manifest.universes[1].params) == ["lr", "beta"]

    def test_heterogeneous_parameters(self, tmp_path: Path) -> None:
        """Test differing parameter names name the offending universe."""
        with pytest.raises(ManifestError) as err:
            validate_manifest_document(
                {
                    "universes": [
                        {"id": "a", "params": {"beta": 1}, "embedding": "a.csv"},
                        {"id": "b", "params": {"gamma": 1}, "embedding": "b.csv"},
                    ]
                },
                tmp_path,
            )

        assert err.value.universe_id == "b"

    def test_duplicate_id(self, tmp_path: Path) -> None:
        """Test duplicate universe ids are rejected."""
        universe = {"id": "a", "params": {"beta": 1}, "embedding": "a.csv"}

        with pytest.raises(ManifestError):
            validate_manifest_document({"universes": [universe, universe]}, tmp_path)

    @pytest.mark.parametrize(
        "document",
        [
            {"universes": []},
            {},
            {"universes": [{"id": "a", "params": {"beta": 1}}]},
            {"universes": [{"id": "a", "params": {"beta": [1]}, "embedding": "a.csv"}]},
            [],
        ],
    )
    def test_invalid_documents(self, tmp_path: Path, document: Any) -> None:
        """Test empty, incomplete and mistyped manifests."""
        with pytest.raises(ManifestError):
            validate_manifest_document(document, tmp_path)


class TestResolveJobs:
    """Tests for resolve_jobs."""

    def test_explicit_value_wins(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test --jobs overrides the environment."""
        monkeypatch.setenv(ENV_JOBS, "8")

        assert resolve_jobs(3) == 3

    def test_environment_fallback(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test PRESTO_JOBS is used when --jobs is absent."""
        monkeypatch.setenv(ENV_JOBS, "4")

        assert resolve_jobs(None) == 4

    def test_default_is_one(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test a single worker when nothing is set."""
        monkeypatch.delenv(ENV_JOBS, raising=False)

        assert resolve_jobs(None) == 1

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_invalid_environment(self, monkeypatch: pytest.MonkeyPatch, raw: str) -> None:
        """Test malformed PRESTO_JOBS values."""
        monkeypatch.setenv(ENV_JOBS, raw)

        with pytest.raises(DomainError):
            resolve_jobs(None)

    def test_invalid_explicit(self) -> None:
        """Test non-positive --jobs."""
        with pytest.raises(DomainError):
            resolve_jobs(0)
