"""Loading embeddings and manifests, and serializing artifacts."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .config import validate_manifest_document
from .const import format_p
from .exceptions import DataError, FormatError, IoError
from .landscape import landscape_from_dict, landscape_to_dict
from .models import Embedding, MultiverseManifest, MultiverseMetricSpace, PersistenceDiagram, PersistenceLandscape

_LOGGER = logging.getLogger(__name__)

FORMAT_CSV = "csv"
FORMAT_NPY = "npy"
NPY_DTYPES = ("<f4", "<f8")
COMMENT_PREFIX = "#"


def infer_format(path: Path) -> str:
    """Return the embedding format implied by a file suffix."""
    suffix = path.suffix.lower().lstrip(".")
    if suffix in (FORMAT_CSV, FORMAT_NPY):
        return suffix
    raise FormatError(f"Cannot infer embedding format from {path.name!r}; use .csv or .npy")


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as err:
        raise IoError(f"Cannot read {path}: {err}") from err


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _parse_csv(text: str, source: str) -> np.ndarray:
    """Parse comma-separated reals, skipping one auto-detected header row."""
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(cell.strip() for cell in row)]
    if rows and not _is_number(rows[0][0].strip()):
        _LOGGER.debug("Skipping header row in %s: %s", source, rows[0])
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{source} contains no data rows")

    width = len(rows[0])
    values = np.empty((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"{source}: row {i} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError as err:
                raise FormatError(f"{source}: row {i}, column {j} is not a number: {cell!r}") from err
    return values


def _parse_npy(raw: bytes, source: str) -> np.ndarray:
    """Parse the NPY v1.0 subset: 2-D, C-order, little-endian float32/float64."""
    stream = io.BytesIO(raw)
    try:
        version = np.lib.format.read_magic(stream)
        if version != (1, 0):
            raise FormatError(f"{source}: NPY version {version} is not supported, expected (1, 0)")
        shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(stream)
    except ValueError as err:
        raise FormatError(f"{source}: invalid NPY header: {err}") from err

    if fortran_order:
        raise FormatError(f"{source}: Fortran-ordered arrays are not supported")
    if dtype.str not in NPY_DTYPES:
        raise FormatError(f"{source}: dtype {dtype.str} is not supported, expected one of {NPY_DTYPES}")
    if len(shape) != 2:
        raise FormatError(f"{source}: expected a 2-D array, got shape {shape}")

    count = int(np.prod(shape))
    payload = stream.read()
    if len(payload) != count * dtype.itemsize:
        raise FormatError(f"{source}: payload holds {len(payload)} bytes, expected {count * dtype.itemsize}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float64)


def load_embedding(path: Path | str, fmt: str | None = None) -> Embedding:
    """Load an embedding from CSV or NPY.

    Args:
        path: File to read
        fmt: "csv" or "npy"; inferred from the suffix when omitted

    Returns:
        Unnormalized Embedding with 64-bit values

    Raises:
        IoError: File cannot be read
        FormatError: Ragged rows, non-numeric cells, unsupported NPY layout
        DataError: NaN or Inf entry (carries row/col)
    """
    path = Path(path)
    fmt = fmt or infer_format(path)
    raw = _read_bytes(path)

    if fmt == FORMAT_CSV:
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError as err:
            raise FormatError(f"{path}: not UTF-8 text") from err
        data = _parse_csv(text, str(path))
    elif fmt == FORMAT_NPY:
        data = _parse_npy(raw, str(path))
    else:
        raise FormatError(f"Unknown embedding format {fmt!r}")

    try:
        embedding = Embedding(data=data, source_id=path.stem)
    except DataError as err:
        raise DataError(f"{path}: {err}", row=err.row, col=err.col) from err

    _LOGGER.debug("Loaded %s embedding %s with shape %dx%d", fmt, path.name, embedding.n, embedding.d)
    return embedding


def _read_json(path: Path) -> Any:
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{path}: invalid JSON: {err}") from err


def load_manifest(path: Path | str) -> MultiverseManifest:
    """Load and validate a multiverse manifest.

    Raises:
        FormatError: Not valid JSON
        ManifestError: Schema violation, empty list, duplicate id or
            heterogeneous parameter names
    """
    path = Path(path)
    manifest = validate_manifest_document(_read_json(path), path.parent)
    _LOGGER.info("Loaded manifest %s with %d universes", path.name, len(manifest.universes))
    return manifest


def load_landscape(path: Path | str) -> PersistenceLandscape:
    """Load a landscape written by save_artifact."""
    path = Path(path)
    document = _read_json(path)
    try:
        return landscape_from_dict(document, source_id=path.stem)
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"{path}: not a landscape artifact: {err}") from err


def load_diagram(path: Path | str) -> PersistenceDiagram:
    """Load a diagram written by save_artifact."""
    path = Path(path)
    try:
        return PersistenceDiagram.from_dict(_read_json(path))
    except (AttributeError, TypeError, ValueError) as err:
        raise FormatError(f"{path}: not a diagram artifact: {err}") from err


def load_landscape_dir(directory: Path | str) -> dict[str, PersistenceLandscape]:
    """Load every *.json landscape in a directory, keyed by file stem, in name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoError(f"{directory} is not a directory")
    return {path.stem: load_landscape(path) for path in sorted(directory.glob("*.json"))}


def _parse_matrix_csv(text: str, source: str) -> tuple[list[str], np.ndarray]:
    rows = [row for row in csv.reader(io.StringIO(text)) if row and not row[0].startswith(COMMENT_PREFIX)]
    if not rows:
        raise FormatError(f"{source}: empty matrix")
    ids = rows[0][1:]
    body = rows[1:]
    if len(body) != len(ids) or any(len(row) != len(ids) + 1 for row in body):
        raise FormatError(f"{source}: matrix is not square with an id header")
    if [row[0] for row in body] != ids:
        raise FormatError(f"{source}: row ids do not match column ids")
    try:
        values = np.array([[float(cell) for cell in row[1:]] for row in body], dtype=np.float64)
    except ValueError as err:
        raise FormatError(f"{source}: non-numeric distance: {err}") from err
    return ids, values.reshape(len(ids), len(ids))


def load_mms(path: Path | str) -> MultiverseMetricSpace:
    """Load a distance matrix from CSV (id header row/column) or JSON."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        document = _read_json(path)
        try:
            ids, dist = document["ids"], np.asarray(document["dist"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as err:
            raise FormatError(f"{path}: not a distance-matrix artifact: {err}") from err
        return MultiverseMetricSpace(ids=tuple(ids), dist=dist, notes=dict(document.get("notes") or {}))

    try:
        text = _read_bytes(path).decode("utf-8")
    except UnicodeDecodeError as err:
        raise FormatError(f"{path}: not UTF-8 text") from err
    ids, dist = _parse_matrix_csv(text, str(path))
    return MultiverseMetricSpace(ids=tuple(ids), dist=dist)


def _render(value: float) -> str:
    """Render a float with the shortest decimal that round-trips."""
    return repr(float(value))


def _matrix_csv(ids: tuple[str, ...] | list[str], dist: np.ndarray) -> list[list[str]]:
    rows = [["id", *ids]]
    for uid, row in zip(ids, dist):
        rows.append([uid, *(_render(v) for v in row)])
    return rows


def _to_payload(value: Any) -> Any:
    """Convert a result value to a JSON-ready structure."""
    if isinstance(value, PersistenceLandscape):
        return landscape_to_dict(value)
    if hasattr(value, "to_dict"):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return format_p(value) if value > 0 else str(value)
    if isinstance(value, dict):
        return {str(key): _to_payload(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_payload(item) for item in value]
    return value


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as err:
        raise IoError(f"Cannot write {path}: {err}") from err


def save_artifact(value: Any, path: Path | str, provenance: dict[str, Any] | None = None) -> None:
    """Serialize a result to JSON, or to CSV when path ends in .csv.

    CSV is used for distance matrices (full symmetric matrix with an id
    header row and column) and for id → value mappings (labels,
    assignments, scores). Provenance is embedded as a "provenance" key in
    JSON and as a leading comment line in CSV.

    Raises:
        IoError: Path cannot be written
        FormatError: Value has no CSV rendering
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if isinstance(value, MultiverseMetricSpace):
            rows = _matrix_csv(value.ids, value.dist)
        elif isinstance(value, dict):
            rows = [["id", "value"], *([str(k), str(_to_payload(v))] for k, v in value.items())]
        else:
            raise FormatError(f"{type(value).__name__} has no CSV rendering; use a .json path")

        buffer = io.StringIO()
        if provenance is not None:
            buffer.write(f"{COMMENT_PREFIX} provenance: {json.dumps(_to_payload(provenance), sort_keys=True)}\n")
        csv.writer(buffer, lineterminator="\n").writerows(rows)
        _write_text(path, buffer.getvalue())
    else:
        payload = _to_payload(value)
        if provenance is not None:
            if not isinstance(payload, dict):
                payload = {"value": payload}
            payload = {**payload, "provenance": _to_payload(provenance)}
        _write_text(path, json.dumps(payload, indent=2, sort_keys=False) + "\n")

    _LOGGER.debug("Wrote %s artifact to %s", type(value).__name__, path)
