"""Tests for run provenance."""

from __future__ import annotations

from pathlib import Path

import pytest
from freezegun import freeze_time
from pytest_mock import MockerFixture

from presto.exceptions import IoError
from presto.provenance import Fnv1a64, StageTimer, build_provenance, file_digest, fnv1a_64, strip_volatile


class TestDigest:
    """Tests for the FNV-1a digest."""

    @pytest.mark.parametrize(
        ("data", "expected"),
        [(b"", "cbf29ce484222325"), (b"a", "af63dc4c8601ec8c"), (b"foobar", "85944171f73967e8")],
    )
    def test_known_values(self, data: bytes, expected: str) -> None:
        """Test published FNV-1a 64-bit vectors."""
        assert fnv1a_64(data) == expected

    def test_file_digest(self, tmp_path: Path) -> None:
        """Test a file digests like its bytes."""
        path = tmp_path / "data.bin"
        path.write_bytes(b"foobar")

        assert file_digest(path) == fnv1a_64(b"foobar")

    def test_file_read_in_small_chunks(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test chunked reads fold into the same digest as the whole buffer."""
        mocker.patch("presto.provenance.FILE_CHUNK_BYTES", 7)
        data = bytes(range(256)) * 3
        path = tmp_path / "data.bin"
        path.write_bytes(data)

        assert file_digest(path) == fnv1a_64(data)

    def test_incremental_updates(self) -> None:
        """Test split updates match a single update."""
        hasher = Fnv1a64()
        hasher.update(b"foo")
        hasher.update(b"")
        hasher.update(b"bar")

        assert hasher.hexdigest() == "85944171f73967e8"

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test unreadable inputs raise IoError."""
        with pytest.raises(IoError):
            file_digest(tmp_path / "missing")


class TestStageTimer:
    """Tests for StageTimer."""

    def test_stages_accumulate(self) -> None:
        """Test repeated stages add up and merging sums totals."""
        timer = StageTimer()
        with timer.stage("load"):
            pass
        with timer.stage("load"):
            pass
        other = StageTimer()
        other.stages_ms = {"load": 1.0, "reduce": 2.0}

        timer.merge(other)

        assert set(timer.stages_ms) == {"load", "reduce"}
        assert timer.stages_ms["load"] >= 1.0
        assert timer.stages_ms["reduce"] == 2.0

    def test_stage_recorded_on_error(self) -> None:
        """Test a failing block still records its time."""
        timer = StageTimer()

        with pytest.raises(ValueError), timer.stage("broken"):
            raise ValueError("boom")

        assert "broken" in timer.stages_ms


class TestBuildProvenance:
    """Tests for build_provenance and strip_volatile."""

    @freeze_time("2024-06-01 08:30:00")
    def test_block(self, tmp_path: Path) -> None:
        """Test the provenance block lists tool, config, digests, timings and time."""
        source = tmp_path / "input.csv"
        source.write_bytes(b"a")
        timer = StageTimer()
        timer.stages_ms["load"] = 1.23456

        provenance = build_provenance("distance", {"p": "2"}, [source], timer, {"method": "exact"})

        assert provenance == {
            "tool": "presto",
            "version": "0.4.0",
            "command": "distance",
            "config": {"p": "2"},
            "inputs": {str(source): "af63dc4c8601ec8c"},
            "stages_ms": {"load": 1.235},
            "timestamp": "2024-06-01T08:30:00+00:00",
            "notes": {"method": "exact"},
        }

    def test_strip_volatile(self) -> None:
        """Test timestamps and timings are removed at any depth."""
        payload = {"a": 1, "timestamp": "now", "nested": [{"stages_ms": {}, "b": 2}]}

        assert strip_volatile(payload) == {"a": 1, "nested": [{"b": 2}]}

    def test_no_notes(self) -> None:
        """Test notes are omitted when empty."""
        assert "notes" not in build_provenance("norms", {})
