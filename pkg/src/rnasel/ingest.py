"""File ingestion, validation, and ratio computation.

Formats (UTF-8, '.' decimal separator, scientific notation accepted):

* matrix: header ``feature_id`` then sample ids; one row per feature with
  one numeric field per sample; tab- or comma-separated by extension or
  explicit format.
* metadata: columns sample_id, role (control|treated), compound, replicate,
  control_id, header required, any column order.
* weights: columns sample_a, sample_b, weight (-1|0|1); pairs not listed
  take the configured default.

Ratios are log2(treated / control) per feature. A zero numerator or
denominator is replaced by the smallest strictly positive value of its own
column, so every ratio is finite. The stored matrix keeps literal zeros;
replacement happens per occurrence at ratio time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import (
    ROLE_TREATED,
    ExpressionMatrix,
    PairWeights,
    RatioMatrix,
    SampleMeta,
    SampleRecord,
)

_META_COLUMNS = ("sample_id", "role", "compound", "replicate", "control_id")
_WEIGHT_COLUMNS = ("sample_a", "sample_b", "weight")


@dataclass
class IngestReport:
    """What ingestion changed or flagged: replacements, drops, warnings."""

    zero_replacements: list[tuple[str, float, int]] = field(default_factory=list)
    dropped_features: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _delimiter(path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "csv" if Path(path).suffix.lower() == ".csv" else "tsv"
    if fmt == "tsv":
        return "\t"
    if fmt == "csv":
        return ","
    raise ValidationError(f"unknown format {fmt!r}, expected 'tsv' or 'csv'")


def _read_rows(path, fmt: str | None) -> list[list[str]]:
    delim = _delimiter(path, fmt)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [[cell.strip() for cell in row] for row in csv.reader(fh, delimiter=delim)]


def _parse_level(token: str, path, line: int, column_id: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ValidationError(
            f"{path}:{line}: non-numeric value {token!r} in column {column_id!r}"
        ) from None
    if not np.isfinite(value):
        raise ValidationError(f"{path}:{line}: non-finite value {token!r} in column {column_id!r}")
    if value < 0:
        raise ValidationError(f"{path}:{line}: negative value {token!r} in column {column_id!r}")
    return value


def load_matrix(path, fmt: str | None = None) -> tuple[ExpressionMatrix, IngestReport]:
    """Parse and validate an expression matrix file.

    Features that are zero in every sample are dropped (they carry no signal
    and break correlation) and listed in the report.
    """
    rows = _read_rows(path, fmt)
    rows = [r for r in rows if r and any(cell for cell in r)]
    if not rows:
        raise ValidationError(f"{path}: empty matrix file")
    header = rows[0]
    if header[0] != "feature_id":
        raise ValidationError(f"{path}:1: first header field must be 'feature_id', got {header[0]!r}")
    sample_ids = header[1:]
    if len(sample_ids) < 2:
        raise ValidationError(f"{path}:1: need at least 2 sample columns")
    feature_ids = []
    values = []
    report = IngestReport()
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(sample_ids) + 1:
            raise ValidationError(
                f"{path}:{line_no}: expected {len(sample_ids) + 1} fields, got {len(row)} (ragged row)"
            )
        fid = row[0]
        levels = [
            _parse_level(tok, path, line_no, sample_ids[k]) for k, tok in enumerate(row[1:])
        ]
        if all(v == 0.0 for v in levels):
            report.dropped_features.append(fid)
            continue
        feature_ids.append(fid)
        values.append(levels)
    if report.dropped_features:
        report.warnings.append(
            f"dropped {len(report.dropped_features)} all-zero feature(s)"
        )
    if len(feature_ids) < 2:
        raise ValidationError(f"{path}: fewer than 2 usable features after dropping all-zero rows")
    matrix = ExpressionMatrix(tuple(feature_ids), tuple(sample_ids), np.array(values))
    return matrix, report


def _header_map(header: list[str], required: tuple[str, ...], path) -> dict[str, int]:
    if sorted(header) != sorted(required):
        raise ValidationError(
            f"{path}:1: expected columns {list(required)}, got {header}"
        )
    return {name: header.index(name) for name in required}


def load_meta(path, fmt: str | None = None) -> SampleMeta:
    """Parse sample metadata; id consistency with a matrix is checked at pairing time."""
    rows = _read_rows(path, fmt)
    rows = [r for r in rows if r and any(cell for cell in r)]
    if not rows:
        raise ValidationError(f"{path}: empty metadata file")
    cols = _header_map(rows[0], _META_COLUMNS, path)
    records = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(_META_COLUMNS):
            raise ValidationError(f"{path}:{line_no}: expected {len(_META_COLUMNS)} fields, got {len(row)}")
        rep_token = row[cols["replicate"]]
        try:
            replicate = int(rep_token)
        except ValueError:
            raise ValidationError(f"{path}:{line_no}: replicate must be an integer, got {rep_token!r}") from None
        records.append(
            SampleRecord(
                sample_id=row[cols["sample_id"]],
                role=row[cols["role"]],
                compound=row[cols["compound"]],
                replicate=replicate,
                control_id=row[cols["control_id"]],
            )
        )
    return SampleMeta(tuple(records))


def load_weights(path, fmt: str | None = None) -> list[tuple[str, str, int]]:
    """Parse explicit pair-weight entries; completion against the treated set
    and defaulting of unlisted pairs happen in PairWeights.from_entries."""
    rows = _read_rows(path, fmt)
    rows = [r for r in rows if r and any(cell for cell in r)]
    if not rows:
        raise ValidationError(f"{path}: empty weights file")
    cols = _header_map(rows[0], _WEIGHT_COLUMNS, path)
    entries = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(_WEIGHT_COLUMNS):
            raise ValidationError(f"{path}:{line_no}: expected {len(_WEIGHT_COLUMNS)} fields, got {len(row)}")
        token = row[cols["weight"]]
        if token not in ("-1", "0", "1"):
            raise ValidationError(f"{path}:{line_no}: weight must be -1, 0 or 1, got {token!r}")
        entries.append((row[cols["sample_a"]], row[cols["sample_b"]], int(token)))
    return entries


def replacement_value(column) -> float:
    """Smallest strictly positive value of the column (the zero stand-in)."""
    col = np.asarray(column, dtype=np.float64)
    positive = col[col > 0]
    if positive.size == 0:
        raise ValidationError("all-zero column has no replacement value")
    return float(positive.min())


def compute_ratios(matrix: ExpressionMatrix, meta: SampleMeta, report: IngestReport | None = None) -> RatioMatrix:
    """log2(treated / control) per feature, with per-column zero replacement.

    Treated columns appear in matrix column order. Applied replacements are
    appended to the report (one entry per affected column) when given.
    """
    matrix_ids = set(matrix.sample_ids)
    meta_ids = {rec.sample_id for rec in meta.samples}
    if matrix_ids != meta_ids:
        missing = sorted(meta_ids - matrix_ids)
        extra = sorted(matrix_ids - meta_ids)
        raise ValidationError(
            f"matrix and metadata sample ids differ (missing from matrix: {missing}, "
            f"not in metadata: {extra})"
        )
    treated_ids = [s for s in matrix.sample_ids if meta.record(s).role == ROLE_TREATED]
    if not treated_ids:
        raise ValidationError("metadata lists no treated samples")
    replaced: dict[str, tuple[float, int]] = {}

    def resolved(sample_id: str) -> np.ndarray:
        col = matrix.values[:, matrix.sample_index(sample_id)]
        zeros = int(np.count_nonzero(col == 0.0))
        if zeros == 0:
            return col
        try:
            stand_in = replacement_value(col)
        except ValidationError:
            raise ValidationError(f"column {sample_id!r} is entirely zero; ratios are undefined") from None
        if sample_id not in replaced:
            replaced[sample_id] = (stand_in, zeros)
        return np.where(col > 0, col, stand_in)

    columns = []
    for treated in treated_ids:
        control = meta.control_for(treated)
        x = resolved(control)
        y = resolved(treated)
        columns.append(np.log2(y / x))
    if report is not None:
        for sample_id in sorted(replaced):
            stand_in, count = replaced[sample_id]
            report.zero_replacements.append((sample_id, stand_in, count))
    ratios = np.column_stack(columns)
    return RatioMatrix(matrix.feature_ids, tuple(treated_ids), ratios)


def _fmt_value(v: float) -> str:
    return f"{v:.17g}"


def write_matrix(matrix: ExpressionMatrix, path, fmt: str | None = None) -> None:
    delim = _delimiter(path, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("feature_id" + delim + delim.join(matrix.sample_ids) + "\n")
        for i, fid in enumerate(matrix.feature_ids):
            row = delim.join(_fmt_value(v) for v in matrix.values[i])
            fh.write(fid + delim + row + "\n")


def write_meta(meta: SampleMeta, path, fmt: str | None = None) -> None:
    delim = _delimiter(path, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delim.join(_META_COLUMNS) + "\n")
        for rec in meta.samples:
            fh.write(
                delim.join(
                    (rec.sample_id, rec.role, rec.compound, str(rec.replicate), rec.control_id)
                )
                + "\n"
            )


def write_weights(weights: PairWeights, path, fmt: str | None = None) -> None:
    delim = _delimiter(path, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delim.join(_WEIGHT_COLUMNS) + "\n")
        for (a, b) in sorted(weights.weights):
            fh.write(delim.join((a, b, str(weights.weights[(a, b)]))) + "\n")
