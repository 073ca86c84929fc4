"""Decision-matrix data model, CSV ingestion and validation.

A decision matrix scores a set of alternatives (DMUs, the columns) on a
set of performance metrics (the rows).  Every metric is either an input
(smaller is better) or an output (larger is better), and carries either
cardinal data (positive reals) or ordinal data (integer Likert points
within declared lower/upper bounds).  All values must be strictly
positive.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Direction",
    "Scale",
    "MetricSpec",
    "DecisionMatrix",
    "MetricPartition",
    "MatrixError",
    "NonPositiveValue",
    "OrdinalOutOfBounds",
    "OrdinalNotInteger",
    "DuplicateName",
    "EmptyAxis",
    "UnknownDmu",
    "ParseError",
    "validate_matrix",
    "load_matrix",
    "loads_matrix",
    "save_matrix",
    "dumps_matrix",
    "remove_dmus",
    "matrix_digest",
]


class Direction(str, Enum):
    INPUT = "input"
    OUTPUT = "output"


class Scale(str, Enum):
    CARDINAL = "cardinal"
    ORDINAL = "ordinal"


class MatrixError(ValueError):
    """Base class for decision-matrix validation and parsing failures."""


class NonPositiveValue(MatrixError):
    def __init__(self, metric: str, dmu: str, value: float):
        super().__init__(f"value for metric {metric!r}, DMU {dmu!r} must be > 0, got {value!r}")
        self.metric, self.dmu, self.value = metric, dmu, value


class OrdinalOutOfBounds(MatrixError):
    def __init__(self, metric: str, dmu: str, value: float, lower: int, upper: int):
        super().__init__(
            f"ordinal value for metric {metric!r}, DMU {dmu!r} must lie in "
            f"[{lower}, {upper}], got {value!r}"
        )
        self.metric, self.dmu, self.value = metric, dmu, value


class OrdinalNotInteger(MatrixError):
    def __init__(self, metric: str, dmu: str, value: float):
        super().__init__(
            f"ordinal value for metric {metric!r}, DMU {dmu!r} must be an integer "
            f"Likert point, got {value!r}"
        )
        self.metric, self.dmu, self.value = metric, dmu, value


class DuplicateName(MatrixError):
    def __init__(self, kind: str, name: str):
        super().__init__(f"duplicate {kind} name {name!r}")
        self.kind, self.name = kind, name


class EmptyAxis(MatrixError):
    def __init__(self, axis: str):
        super().__init__(f"matrix needs at least one {axis}")
        self.axis = axis


class UnknownDmu(MatrixError):
    def __init__(self, name: str):
        super().__init__(f"unknown DMU {name!r}")
        self.name = name


class ParseError(MatrixError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line, self.reason = line, reason


@dataclass(frozen=True)
class MetricSpec:
    """One criterion: a named row of the decision matrix.

    Ordinal metrics must declare both Likert bounds, 1 <= lower < upper,
    even when only one side ends up binding in a given model.
    """

    name: str
    direction: Direction
    scale: Scale = Scale.CARDINAL
    lower: int | None = None
    upper: int | None = None
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "scale", Scale(self.scale))
        if self.scale is Scale.ORDINAL:
            if self.lower is None or self.upper is None:
                raise MatrixError(f"ordinal metric {self.name!r} needs lower and upper Likert bounds")
            if not (1 <= self.lower < self.upper):
                raise MatrixError(
                    f"ordinal metric {self.name!r} needs 1 <= lower < upper, "
                    f"got ({self.lower}, {self.upper})"
                )
        elif self.lower is not None or self.upper is not None:
            raise MatrixError(f"cardinal metric {self.name!r} must not carry Likert bounds")

    @property
    def is_input(self) -> bool:
        return self.direction is Direction.INPUT

    @property
    def is_ordinal(self) -> bool:
        return self.scale is Scale.ORDINAL


@dataclass(frozen=True, eq=False)
class DecisionMatrix:
    """Metrics x DMUs table of strictly positive values.

    Immutable after construction; the value array is locked read-only so
    instances can be shared freely across concurrent evaluations.
    """

    metrics: tuple[MetricSpec, ...]
    dmu_names: tuple[str, ...]
    values: np.ndarray  # shape (n_metrics, n_dmus)

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "dmu_names", tuple(str(n) for n in self.dmu_names))
        arr = np.array(self.values, dtype=float)
        if arr.shape != (len(self.metrics), len(self.dmu_names)):
            raise MatrixError(
                f"value table shape {arr.shape} does not match "
                f"{len(self.metrics)} metrics x {len(self.dmu_names)} DMUs"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DecisionMatrix):
            return NotImplemented
        return (
            self.metrics == other.metrics
            and self.dmu_names == other.dmu_names
            and np.array_equal(self.values, other.values)
        )

    @property
    def n_metrics(self) -> int:
        return len(self.metrics)

    @property
    def n_dmus(self) -> int:
        return len(self.dmu_names)

    def metric_index(self, name: str) -> int:
        for i, spec in enumerate(self.metrics):
            if spec.name == name:
                return i
        raise MatrixError(f"unknown metric {name!r}")

    def dmu_index(self, name: str) -> int:
        try:
            return self.dmu_names.index(name)
        except ValueError:
            raise UnknownDmu(name) from None

    def value(self, metric: str, dmu: str) -> float:
        return float(self.values[self.metric_index(metric), self.dmu_index(dmu)])

    def column(self, dmu: str) -> np.ndarray:
        return self.values[:, self.dmu_index(dmu)]

    def partition(self) -> "MetricPartition":
        return MetricPartition.from_matrix(self)


@dataclass(frozen=True)
class MetricPartition:
    """Input/output split of a matrix with Likert bounds pre-extracted.

    Positions in ``ordinal_inputs``/``ordinal_outputs`` index into the
    input and output metric lists respectively (not the full metric list);
    the bound arrays are aligned with those positions.
    """

    input_specs: tuple[MetricSpec, ...]
    output_specs: tuple[MetricSpec, ...]
    x: np.ndarray  # (m, n) input values
    y: np.ndarray  # (s, n) output values
    ordinal_inputs: tuple[int, ...]
    ordinal_outputs: tuple[int, ...]
    x_lower: np.ndarray
    x_upper: np.ndarray
    y_lower: np.ndarray
    y_upper: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: DecisionMatrix) -> "MetricPartition":
        in_pos = [i for i, m in enumerate(matrix.metrics) if m.is_input]
        out_pos = [i for i, m in enumerate(matrix.metrics) if not m.is_input]
        input_specs = tuple(matrix.metrics[i] for i in in_pos)
        output_specs = tuple(matrix.metrics[i] for i in out_pos)
        ord_in = tuple(k for k, m in enumerate(input_specs) if m.is_ordinal)
        ord_out = tuple(k for k, m in enumerate(output_specs) if m.is_ordinal)
        return cls(
            input_specs=input_specs,
            output_specs=output_specs,
            x=matrix.values[in_pos, :],
            y=matrix.values[out_pos, :],
            ordinal_inputs=ord_in,
            ordinal_outputs=ord_out,
            x_lower=np.array([input_specs[k].lower for k in ord_in], dtype=float),
            x_upper=np.array([input_specs[k].upper for k in ord_in], dtype=float),
            y_lower=np.array([output_specs[k].lower for k in ord_out], dtype=float),
            y_upper=np.array([output_specs[k].upper for k in ord_out], dtype=float),
        )

    @property
    def m(self) -> int:
        return len(self.input_specs)

    @property
    def s(self) -> int:
        return len(self.output_specs)


def validate_matrix(raw: DecisionMatrix) -> DecisionMatrix:
    """Return ``raw`` unchanged iff every matrix invariant holds.

    Checks, in order: unique names, non-empty axes, strict positivity,
    and ordinal values being integer Likert points within bounds.
    """
    seen: set[str] = set()
    for spec in raw.metrics:
        if spec.name in seen:
            raise DuplicateName("metric", spec.name)
        seen.add(spec.name)
    seen = set()
    for name in raw.dmu_names:
        if name in seen:
            raise DuplicateName("DMU", name)
        seen.add(name)

    if raw.n_dmus == 0:
        raise EmptyAxis("DMU")
    if not any(m.is_input for m in raw.metrics):
        raise EmptyAxis("input metric")
    if not any(not m.is_input for m in raw.metrics):
        raise EmptyAxis("output metric")

    for i, spec in enumerate(raw.metrics):
        for j, dmu in enumerate(raw.dmu_names):
            val = float(raw.values[i, j])
            if not np.isfinite(val) or val <= 0.0:
                raise NonPositiveValue(spec.name, dmu, val)
            if spec.is_ordinal:
                if val != int(val):
                    raise OrdinalNotInteger(spec.name, dmu, val)
                if not (spec.lower <= val <= spec.upper):
                    raise OrdinalOutOfBounds(spec.name, dmu, val, spec.lower, spec.upper)
    return raw


_HEADER_PREFIX = ["metric", "direction", "scale", "lower", "upper", "unit"]


def loads_matrix(text: str) -> DecisionMatrix:
    """Parse the CSV matrix format from a string and validate it.

    Layout: ``metric,direction,scale,lower,upper,unit,<dmu1>,<dmu2>,...``
    with one row per metric.  ``lower``/``upper`` stay empty for cardinal
    metrics.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty file") from None
    header = [h.strip() for h in header]
    if header[: len(_HEADER_PREFIX)] != _HEADER_PREFIX:
        raise ParseError(1, f"header must start with {','.join(_HEADER_PREFIX)}")
    dmu_names = header[len(_HEADER_PREFIX):]
    if not dmu_names:
        raise ParseError(1, "header lists no DMU columns")

    specs: list[MetricSpec] = []
    rows: list[list[float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} cells, got {len(row)}")
        name, direction, scale, lower, upper, unit = (cell.strip() for cell in row[:6])
        try:
            direction = Direction(direction.lower())
        except ValueError:
            raise ParseError(lineno, f"direction must be input or output, got {direction!r}") from None
        try:
            scale = Scale(scale.lower())
        except ValueError:
            raise ParseError(lineno, f"scale must be cardinal or ordinal, got {scale!r}") from None

        def parse_bound(cell: str, label: str) -> int | None:
            if cell == "":
                return None
            try:
                return int(cell)
            except ValueError:
                raise ParseError(lineno, f"{label} bound must be an integer, got {cell!r}") from None

        try:
            spec = MetricSpec(
                name=name,
                direction=direction,
                scale=scale,
                lower=parse_bound(lower, "lower"),
                upper=parse_bound(upper, "upper"),
                unit=unit,
            )
        except MatrixError as exc:
            raise ParseError(lineno, str(exc)) from None

        values = []
        for cell, dmu in zip(row[6:], dmu_names):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(lineno, f"non-numeric value {cell!r} for DMU {dmu!r}") from None
        specs.append(spec)
        rows.append(values)

    if not specs:
        raise ParseError(2, "no metric rows")
    matrix = DecisionMatrix(tuple(specs), tuple(dmu_names), np.array(rows, dtype=float))
    return validate_matrix(matrix)


def load_matrix(path) -> DecisionMatrix:
    """Read and validate a decision matrix from a CSV file."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads_matrix(fh.read())


def _format_value(value: float) -> str:
    # repr() emits the shortest decimal string (<= 17 significant digits)
    # that reparses to the identical float, so dumps/loads is bit-exact.
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def dumps_matrix(matrix: DecisionMatrix) -> str:
    """Serialize a matrix back to the CSV format (bit-exact round trip)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_HEADER_PREFIX + list(matrix.dmu_names))
    for i, spec in enumerate(matrix.metrics):
        writer.writerow(
            [
                spec.name,
                spec.direction.value,
                spec.scale.value,
                "" if spec.lower is None else spec.lower,
                "" if spec.upper is None else spec.upper,
                spec.unit,
            ]
            + [_format_value(v) for v in matrix.values[i, :]]
        )
    return out.getvalue()


def save_matrix(matrix: DecisionMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_matrix(matrix))


def remove_dmus(matrix: DecisionMatrix, names) -> DecisionMatrix:
    """Drop the named DMU columns, keeping the remaining original order."""
    names = set(names)
    for name in names:
        if name not in matrix.dmu_names:
            raise UnknownDmu(name)
    keep = [j for j, name in enumerate(matrix.dmu_names) if name not in names]
    return DecisionMatrix(
        metrics=matrix.metrics,
        dmu_names=tuple(matrix.dmu_names[j] for j in keep),
        values=matrix.values[:, keep],
    )


def matrix_digest(matrix: DecisionMatrix) -> str:
    """Content hash of a matrix (sha256 over its canonical CSV form)."""
    return hashlib.sha256(dumps_matrix(matrix).encode("utf-8")).hexdigest()
