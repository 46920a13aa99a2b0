# epslens/adapters/persistence.py
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from epslens.contracts import (
    DefinitionDocument,
    DefinitionEnvelope,
    EpslensError,
    FixtureDocument,
    InputFormatError,
    Report,
    StructureDocument,
    TopometricDocument,
    ValueKind,
)
from epslens.stability import StabilityProfile, WeightedBipartiteStructure
from epslens.value_space import ValueSpace

logger = logging.getLogger(__name__)

PathLike = str | Path
ModelT = TypeVar("ModelT", bound=BaseModel)

VECTOR_SEPARATOR = ";"


def _to_jsonable(x: Any) -> Any:
    if isinstance(x, BaseModel):
        return x.model_dump(mode="json")
    if isinstance(x, dict):
        return {str(k): _to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _read_rows(path: PathLike) -> list[tuple[int, list[str]]]:
    p = Path(path)
    try:
        with p.open("r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            return [
                (reader.line_num, [cell.strip() for cell in row])
                for row in reader
                if any(cell.strip() for cell in row)
            ]
    except OSError as exc:
        raise InputFormatError(f"cannot read file: {exc.strerror}", path=p) from exc
    except csv.Error as exc:
        raise InputFormatError(f"malformed CSV: {exc}", path=p) from exc


def _parse_cell(cell: str, *, path: PathLike, line: int) -> float | list[float]:
    try:
        if VECTOR_SEPARATOR in cell:
            return [float(part) for part in cell.split(VECTOR_SEPARATOR)]
        return float(cell)
    except ValueError:
        raise InputFormatError(f"cannot parse value {cell!r}", path=path, line=line) from None


def _is_number(cell: str) -> bool:
    try:
        float(cell.split(VECTOR_SEPARATOR)[0])
    except ValueError:
        return False
    return True


# ------------------------------------------------------------------------------
# Matrices
# ------------------------------------------------------------------------------


def read_matrix_csv(path: PathLike, *, space: ValueSpace | None = None) -> WeightedBipartiteStructure:
    """Read a table; a first line whose first cell is not a number is a column-label header.

    Vector cells separate coordinates with ``;``. With a finite-metric ``space`` the
    cells are point indices.
    """
    rows = _read_rows(path)
    if not rows:
        raise InputFormatError("empty matrix file", path=path)
    labelled = not _is_number(rows[0][1][0])
    col_labels: list[str] | None = None
    if labelled:
        header_line, header = rows[0]
        col_labels = header[1:]
        rows = rows[1:]
        if not rows:
            raise InputFormatError("matrix has a header but no rows", path=path, line=header_line)
    row_labels: list[str] = []
    grid: list[list[float | list[float]]] = []
    width: int | None = None
    for line, cells in rows:
        if labelled:
            row_labels.append(cells[0])
            cells = cells[1:]
        values = [_parse_cell(cell, path=path, line=line) for cell in cells]
        if width is None:
            width = len(values)
        if len(values) != width or (col_labels is not None and len(values) != len(col_labels)):
            raise InputFormatError(
                f"row has {len(values)} values, expected {len(col_labels) if col_labels else width}",
                path=path,
                line=line,
            )
        grid.append(values)

    shapes = {len(v) if isinstance(v, list) else 0 for line in grid for v in line}
    if len(shapes) != 1:
        raise InputFormatError("cells mix scalars and vectors of different lengths", path=path)
    (dim,) = shapes
    if space is None:
        space = ValueSpace.sup_vector(dim) if dim else ValueSpace.real()
    elif (space.kind is ValueKind.SUP_VECTOR) != bool(dim) or (dim and dim != space.dim):
        raise InputFormatError(f"cells do not match a {space.kind.value} value space", path=path)
    data = np.asarray(grid, dtype=np.float64)
    if space.kind is ValueKind.FINITE_METRIC and not np.all(data == np.round(data)):
        raise InputFormatError("finite-metric cells must be integer point indices", path=path)
    try:
        structure = WeightedBipartiteStructure.from_array(
            data,
            rows=row_labels or None,
            cols=col_labels,
            space=space,
        )
    except EpslensError as exc:
        raise InputFormatError(str(exc), path=path) from exc
    logger.debug("read %dx%d %s matrix from %s", *structure.shape, space.kind.value, path)
    return structure


def _format_value(raw: Any) -> str:
    if isinstance(raw, (list, tuple, np.ndarray)):
        return VECTOR_SEPARATOR.join(repr(float(v)) for v in raw)
    if isinstance(raw, (int, np.integer)):
        return str(int(raw))
    return repr(float(raw))


def write_matrix_csv(path: PathLike, f: WeightedBipartiteStructure) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["", *f.cols])
        for a, label in enumerate(f.rows):
            writer.writerow([label, *(_format_value(f.data[a, b]) for b in range(len(f.cols)))])


def read_metric_csv(path: PathLike) -> ValueSpace:
    rows = _read_rows(path)
    table: list[list[float]] = []
    for line, cells in rows:
        values = [_parse_cell(cell, path=path, line=line) for cell in cells]
        if any(isinstance(v, list) for v in values):
            raise InputFormatError("metric entries must be scalars", path=path, line=line)
        table.append([float(v) for v in values])  # type: ignore[arg-type]
    try:
        return ValueSpace.finite_metric(table)
    except EpslensError as exc:
        raise InputFormatError(str(exc), path=path) from exc


def read_type_column(path: PathLike, f: WeightedBipartiteStructure) -> np.ndarray:
    """External type as ``column_label,value`` lines covering every column of f."""
    found: dict[str, float | list[float]] = {}
    for line, cells in _read_rows(path):
        if len(cells) != 2:
            raise InputFormatError("expected 'column,value'", path=path, line=line)
        label, cell = cells
        if not found and not _is_number(cell):
            continue  # header
        if label not in f.cols:
            raise InputFormatError(f"unknown column label {label!r}", path=path, line=line)
        found[label] = _parse_cell(cell, path=path, line=line)
    missing = [label for label in f.cols if label not in found]
    if missing:
        raise InputFormatError(f"type column misses labels {missing}", path=path)
    dtype = np.int64 if f.space.kind is ValueKind.FINITE_METRIC else np.float64
    values = np.asarray([found[label] for label in f.cols], dtype=dtype)
    if values.shape != f.data.shape[1:]:
        raise InputFormatError(f"type values have shape {values.shape}, expected {f.data.shape[1:]}", path=path)
    return values


# ------------------------------------------------------------------------------
# JSON documents
# ------------------------------------------------------------------------------


def _read_json(path: PathLike) -> Any:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputFormatError(f"cannot read file: {exc.strerror}", path=p) from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg} (column {exc.colno})", path=p, line=exc.lineno) from exc


def read_model(path: PathLike, model: type[ModelT]) -> ModelT:
    raw = _read_json(path)
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise InputFormatError(f"{model.__name__} invalid at {where or '<root>'}: {first['msg']}", path=path) from exc


def write_json(path: PathLike, obj: Any) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(_to_jsonable(obj), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_structure(path: PathLike) -> StructureDocument:
    return read_model(path, StructureDocument)


def read_topometric(path: PathLike) -> TopometricDocument:
    return read_model(path, TopometricDocument)


def read_fixture(path: PathLike, *, space: ValueSpace | None = None) -> tuple[FixtureDocument, WeightedBipartiteStructure]:
    """Fixture JSON plus its table; a relative table path resolves against the JSON file."""
    doc = read_model(path, FixtureDocument)
    table_path = Path(doc.table)
    if not table_path.is_absolute():
        table_path = Path(path).parent / table_path
    return doc, read_matrix_csv(table_path, space=space)


def write_report(path: PathLike, report: Report) -> None:
    write_json(path, report)


def read_report(path: PathLike) -> Report:
    return read_model(path, Report)


def write_definition(path: PathLike, document: DefinitionDocument) -> None:
    write_json(path, DefinitionEnvelope(definition=document))


def read_definition(path: PathLike) -> DefinitionDocument:
    return read_model(path, DefinitionEnvelope).definition


def write_profile_csv(path: PathLike, profile: StabilityProfile) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "epsilon", "certified", "diameter"])
        for k, epsilon, certified in profile.to_rows():
            writer.writerow([k, repr(epsilon), str(certified).lower(), repr(profile.diameter)])


def read_profile_csv(path: PathLike) -> list[tuple[int, float]]:
    rows = _read_rows(path)
    out: list[tuple[int, float]] = []
    for line, cells in rows[1:]:
        try:
            out.append((int(cells[0]), float(cells[1])))
        except (ValueError, IndexError):
            raise InputFormatError("malformed profile row", path=path, line=line) from None
    return out

