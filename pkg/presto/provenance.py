"""Run provenance: tool version, resolved config, input digests and stage timings."""

from __future__ import annotations

import logging
import time
from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from functools import partial
from pathlib import Path
from typing import Any

from .const import DOMAIN, VERSION
from .exceptions import IoError

_LOGGER = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
FNV_MASK = 0xFFFFFFFFFFFFFFFF
FILE_CHUNK_BYTES = 1 << 20

# Fields that differ between otherwise identical runs
VOLATILE_KEYS = frozenset({"timestamp", "stages_ms"})


class Fnv1a64:
    """Incremental 64-bit FNV-1a hash."""

    def __init__(self) -> None:
        """Initialize."""
        self._digest = FNV_OFFSET

    def update(self, data: bytes) -> None:
        """Fold data into the running digest."""
        digest = self._digest
        for byte in data:
            digest = ((digest ^ byte) * FNV_PRIME) & FNV_MASK
        self._digest = digest

    def hexdigest(self) -> str:
        """Return the digest as 16 hex digits."""
        return f"{self._digest:016x}"


def fnv1a_64(data: bytes) -> str:
    """Return the 64-bit FNV-1a digest of data as 16 hex digits."""
    hasher = Fnv1a64()
    hasher.update(data)
    return hasher.hexdigest()


def file_digest(path: Path | str) -> str:
    """Return the FNV-1a digest of a file's bytes, read in fixed-size chunks."""
    hasher = Fnv1a64()
    try:
        with Path(path).open("rb") as handle:
            for chunk in iter(partial(handle.read, FILE_CHUNK_BYTES), b""):
                hasher.update(chunk)
    except OSError as err:
        raise IoError(f"Cannot read {path}: {err}") from err
    return hasher.hexdigest()


class StageTimer:
    """Accumulate wall-clock milliseconds per named pipeline stage."""

    def __init__(self) -> None:
        """Initialize."""
        self.stages_ms: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time the enclosed block and add it to the stage's total."""
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = (time.perf_counter() - start) * 1000.0
            self.stages_ms[name] = self.stages_ms.get(name, 0.0) + elapsed
            _LOGGER.debug("Stage %s took %.1f ms", name, elapsed)

    def merge(self, other: StageTimer) -> None:
        """Add another timer's totals to this one."""
        for name, elapsed in other.stages_ms.items():
            self.stages_ms[name] = self.stages_ms.get(name, 0.0) + elapsed


def build_provenance(
    command: str,
    config: dict[str, Any],
    inputs: Iterable[Path | str] = (),
    timer: StageTimer | None = None,
    notes: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Assemble the provenance block attached to every artifact.

    Args:
        command: Subcommand that produced the artifact
        config: Resolved configuration
        inputs: Files read by the run; each is digested
        timer: Stage timings of the run
        notes: Interpretation choices worth recording with the result

    Returns:
        Dictionary with tool, version, command, config, input digests,
        per-stage milliseconds and a UTC timestamp
    """
    provenance: dict[str, Any] = {
        "tool": DOMAIN,
        "version": VERSION,
        "command": command,
        "config": config,
        "inputs": {str(path): file_digest(path) for path in inputs},
        "stages_ms": {name: round(ms, 3) for name, ms in (timer.stages_ms if timer else {}).items()},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if notes:
        provenance["notes"] = notes
    return provenance


def strip_volatile(payload: Any) -> Any:
    """Return payload without timestamp and timing fields, at any depth."""
    if isinstance(payload, dict):
        return {key: strip_volatile(value) for key, value in payload.items() if key not in VOLATILE_KEYS}
    if isinstance(payload, list):
        return [strip_volatile(item) for item in payload]
    return payload
