"""Flat-file formats shared by the CLI subcommands.

One dialect everywhere: UTF-8, comma separator, header row, ``NA`` for
missing cells, and floats printed with ``repr`` so every value survives a
write/read/write round trip byte for byte.  Data files are oriented the
tabular way (rows are observations, columns are variables) and transposed
into :class:`~bmb.linalg.DataMatrix` on load.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .linalg import DataMatrix


def fmt_float(v: float) -> str:
    """Shortest decimal string that round-trips, or NA for missing."""
    v = float(v)
    if np.isnan(v):
        return "NA"
    return repr(v)


def _parse_float(cell: str, where: str) -> float:
    if cell == "NA" or cell == "":
        return float("nan")
    try:
        return float(cell)
    except ValueError as exc:
        raise DataFormatError(f"{where}: not a number: {cell!r}") from exc


def _open_rows(path: Path) -> list[list[str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_data_csv(path: Path, data: DataMatrix) -> None:
    """Write variables-by-observations data as an observations-per-row CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(data.names)
        for obs in data.values.T:
            w.writerow([fmt_float(v) for v in obs])


def read_data_csv(path: Path) -> DataMatrix:
    """Load a data CSV; NA cells become NaN."""
    rows = _open_rows(path)
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    names = rows[0]
    if len(names) == 0 or any(not n for n in names):
        raise DataFormatError(f"{path}: header has empty variable names")
    if len(set(names)) != len(names):
        raise DataFormatError(f"{path}: duplicate variable names in header")
    body = rows[1:]
    if not body:
        raise DataFormatError(f"{path}: no observation rows")
    values = np.empty((len(body), len(names)))
    for i, row in enumerate(body):
        if len(row) != len(names):
            raise DataFormatError(
                f"{path}: row {i + 2} has {len(row)} cells, expected {len(names)}"
            )
        values[i] = [_parse_float(c, f"{path}: row {i + 2}") for c in row]
    return DataMatrix(values=values.T, names=list(names))


def write_truth_csv(path: Path, query_names: list[str],
                    other_names: list[str], blanket: np.ndarray) -> None:
    """Write the signed true blanket as a query-per-row weight matrix."""
    blanket = np.asarray(blanket, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["query"] + list(other_names))
        for name, row in zip(query_names, blanket):
            w.writerow([name] + [fmt_float(v) for v in row])


def read_truth_csv(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    """Load truth.csv back into (query names, other names, blanket)."""
    rows = _open_rows(path)
    if not rows or rows[0][:1] != ["query"]:
        raise DataFormatError(f"{path}: expected a header starting with 'query'")
    other_names = rows[0][1:]
    if not other_names:
        raise DataFormatError(f"{path}: no other-variable columns")
    query_names = []
    blanket = np.empty((len(rows) - 1, len(other_names)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(other_names) + 1:
            raise DataFormatError(f"{path}: ragged row {i + 2}")
        query_names.append(row[0])
        blanket[i] = [_parse_float(c, f"{path}: row {i + 2}") for c in row[1:]]
    if not query_names:
        raise DataFormatError(f"{path}: no query rows")
    if not np.all(np.isfinite(blanket)):
        raise DataFormatError(f"{path}: blanket weights must be finite")
    return query_names, other_names, blanket


def write_edges_csv(path: Path, query_names, other_names,
                    w12: np.ndarray) -> None:
    """Write retained blanket draws in long form (sample, query, other, weight)."""
    w12 = np.asarray(w12, dtype=float)
    m, p, q = w12.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["sample", "query", "other", "weight"])
        for s in range(m):
            for i in range(p):
                row_w = w12[s, i]
                for j in range(q):
                    w.writerow([s, query_names[i], other_names[j],
                                fmt_float(row_w[j])])


def read_edges_csv(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    """Load edges.csv into (query names, other names, draws of shape m,p,q).

    Variable orders are taken from first appearance; every sample must
    cover the same query-by-other grid exactly once.
    """
    rows = _open_rows(path)
    if not rows or rows[0] != ["sample", "query", "other", "weight"]:
        raise DataFormatError(
            f"{path}: expected header sample,query,other,weight"
        )
    query_names: list[str] = []
    other_names: list[str] = []
    qpos: dict[str, int] = {}
    opos: dict[str, int] = {}
    triples = []
    for i, row in enumerate(rows[1:]):
        if len(row) != 4:
            raise DataFormatError(f"{path}: ragged row {i + 2}")
        try:
            s = int(row[0])
        except ValueError as exc:
            raise DataFormatError(
                f"{path}: row {i + 2}: bad sample index {row[0]!r}"
            ) from exc
        if row[1] not in qpos:
            qpos[row[1]] = len(query_names)
            query_names.append(row[1])
        if row[2] not in opos:
            opos[row[2]] = len(other_names)
            other_names.append(row[2])
        weight = _parse_float(row[3], f"{path}: row {i + 2}")
        triples.append((s, qpos[row[1]], opos[row[2]], weight))
    if not triples:
        raise DataFormatError(f"{path}: no edge rows")
    m = max(t[0] for t in triples) + 1
    p, q = len(query_names), len(other_names)
    if min(t[0] for t in triples) < 0 or len(triples) != m * p * q:
        raise DataFormatError(
            f"{path}: expected {m}x{p}x{q} complete grid, got {len(triples)} rows"
        )
    w12 = np.full((m, p, q), np.nan)
    for s, i, j, weight in triples:
        w12[s, i, j] = weight
    if np.isnan(w12).any():
        raise DataFormatError(f"{path}: duplicate or missing (sample, edge) cells")
    return query_names, other_names, w12


def read_kinds_csv(path: Path) -> dict[str, str]:
    """Load a per-variable kind declaration (columns: name, kind)."""
    rows = _open_rows(path)
    if not rows or rows[0] != ["name", "kind"]:
        raise DataFormatError(f"{path}: expected header name,kind")
    kinds: dict[str, str] = {}
    for i, row in enumerate(rows[1:]):
        if len(row) != 2:
            raise DataFormatError(f"{path}: ragged row {i + 2}")
        name, kind = row
        if name in kinds:
            raise DataFormatError(f"{path}: duplicate kind for {name!r}")
        kinds[name] = kind
    return kinds


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    return obj


def write_json(path: Path, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2)
        fh.write("\n")


def read_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot parse {path}: {exc}") from exc
