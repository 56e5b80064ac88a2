"""Sensor dataset ingestion, rebalancing, and train/test splitting.

The on-disk carrier is a UTF-8 CSV whose header row lists sensor symbols
followed by a final "class" column; cells are decimal or scientific
notation numbers and labels are bare integers.  All operations here are
pure functions of (input, seed) and every returned Dataset is immutable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClassTooSmallError,
    DegenerateFractionError,
    EmptyDatasetError,
    MalformedRowError,
    SchemaMismatchError,
    SingleClassError,
    TargetTooLargeError,
    UnknownSensorError,
)

LABEL_COLUMN = "class"

SENSOR_KINDS = ("power", "mass_flow", "pressure", "temperature")

KIND_UNITS = {
    "power": "W",
    "mass_flow": "kg/min",
    "pressure": "MPa",
    "temperature": "°C",
}


@dataclass(frozen=True)
class SensorMeta:
    """One installed sensor: short symbol, free-text description, unit, kind."""

    symbol: str
    description: str
    unit: str
    kind: str

    def __post_init__(self):
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if KIND_UNITS[self.kind] != self.unit:
            raise ValueError(
                f"unit {self.unit!r} inconsistent with kind {self.kind!r} "
                f"for sensor {self.symbol!r}"
            )


def _power(symbol, description):
    return SensorMeta(symbol, description, "W", "power")


def _flow(symbol, description):
    return SensorMeta(symbol, description, "kg/min", "mass_flow")


def _pressure(symbol, description):
    return SensorMeta(symbol, description, "MPa", "pressure")


def _temp(symbol, description):
    return SensorMeta(symbol, description, "°C", "temperature")


# The full 40-sensor instrumentation schema of the two-stage CO2 rig:
# 6 power, 3 mass flow, 7 pressure, and 24 temperature sensors.
INSTALLED_SENSORS: tuple[SensorMeta, ...] = (
    _power("W1", "MT 1st compressor power"),
    _power("W2", "MT 2nd compressor power"),
    _power("W3", "MT 3rd compressor power"),
    _power("W4", "LT 1st compressor power"),
    _power("W5", "LT 2nd compressor power"),
    _power("W6", "Condenser fan power"),
    _flow("M1", "Flash tank bypass mass flow rate"),
    _flow("M2", "LT evaporator mass flow rate"),
    _flow("M3", "MT evaporator mass flow rate"),
    _pressure("P_dis1", "MT compressor rack outlet pressure"),
    _pressure("P_suc1", "MT compressor rack inlet pressure"),
    _pressure("P_dis2", "LT compressor rack outlet pressure"),
    _pressure("P_suc2", "LT compressor rack inlet pressure"),
    _pressure("P_dis3", "Flash tank vapor outlet pressure"),
    _pressure("P_suc3", "LT display case suction pressure"),
    _pressure("P_suc4", "MT display case suction pressure"),
    _temp("T_dis1", "MT 1st compressor discharge temperature"),
    _temp("T_suc1", "MT 1st compressor suction temperature"),
    _temp("T_dis2", "MT 2nd compressor discharge temperature"),
    _temp("T_suc2", "MT 2nd compressor suction temperature"),
    _temp("T_dis3", "MT 3rd compressor discharge temperature"),
    _temp("T_suc3", "MT 3rd compressor suction temperature"),
    _temp("T_dis4", "LT 1st compressor discharge temperature"),
    _temp("T_suc4", "LT 1st compressor suction temperature"),
    _temp("T_dis5", "LT 2nd compressor discharge temperature"),
    _temp("T_suc5", "LT 2nd compressor suction temperature"),
    _temp("T_dis6", "MT compressor rack outlet temperature"),
    _temp("T_suc6", "MT compressor rack inlet temperature"),
    _temp("T_dis7", "LT compressor rack outlet temperature"),
    _temp("T_suc7", "LT compressor rack inlet temperature"),
    _temp("T_suc8", "Flash tank vapor outlet temperature"),
    _temp("T_suc9", "LT display case suction temperature"),
    _temp("T_suc10", "MT display case suction temperature"),
    _temp("T_C", "Condenser outlet temperature"),
    _temp("T_FI", "Condenser inlet air temperature"),
    _temp("T_FO", "Condenser outlet air temperature"),
    _temp("T_sup1", "MT evaporator supply air temperature"),
    _temp("T_ret1", "MT evaporator return air temperature"),
    _temp("T_sup2", "LT evaporator supply air temperature"),
    _temp("T_ret2", "LT evaporator return air temperature"),
)

INSTALLED_SENSOR_INDEX = {s.symbol: s for s in INSTALLED_SENSORS}


@dataclass(frozen=True)
class FaultClass:
    """Integer class id and human-readable condition name; id 0 is non-faulty."""

    id: int
    name: str


# Fault taxonomy: class 0 is the non-faulty condition, 1..6 are the six
# seeded fault conditions of the rig.  5 and 6 are the condenser air-side
# pair: both push the fan to full power, with opposite effects on the
# condenser inlet air temperature.
FAULT_CLASSES: tuple[FaultClass, ...] = (
    FaultClass(0, "Non-faulty condition"),
    FaultClass(1, "Open LT display case door"),
    FaultClass(2, "Ice accumulation on LT evaporator coil"),
    FaultClass(3, "LT evaporator expansion valve failure"),
    FaultClass(4, "MT evaporator fan motor failure"),
    FaultClass(5, "Condenser air path blockage"),
    FaultClass(6, "Condenser fan overspeed"),
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable numeric sensor table plus an integer fault label per row."""

    schema: tuple[SensorMeta, ...]
    values: np.ndarray  # (n_rows, n_sensors) float64, finite
    labels: np.ndarray  # (n_rows,) int64, >= 0

    def __post_init__(self):
        values = _freeze(np.asarray(self.values, dtype=np.float64))
        labels = _freeze(np.asarray(self.labels, dtype=np.int64))
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != values.shape[0]:
            raise ValueError("labels length must equal the number of rows")
        if values.shape[1] != len(self.schema):
            raise ValueError("column count must equal schema length")
        if values.size and not np.isfinite(values).all():
            raise ValueError("values contain NaN or Inf")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        symbols = [s.symbol for s in self.schema]
        if len(set(symbols)) != len(symbols):
            raise ValueError("sensor symbols must be unique")
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.n_rows else 0

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(s.symbol for s in self.schema)

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def sensor_index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise UnknownSensorError(f"sensor {symbol!r} not in schema") from None

    def select_sensors(self, indices) -> "Dataset":
        """New Dataset restricted to the given sensor columns, rows unchanged."""
        indices = list(indices)
        schema = tuple(self.schema[i] for i in indices)
        return Dataset(schema, self.values[:, indices], self.labels)

    def take_rows(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.values[indices], self.labels[indices])


@dataclass(frozen=True)
class SplitPair:
    """Disjoint, exhaustive train/test partition of one source Dataset."""

    train: Dataset
    test: Dataset
    seed: int
    train_fraction: float

    def __post_init__(self):
        if self.train.schema != self.test.schema:
            raise ValueError("train and test must share one schema")


def _parse_header(header: list[str], schema_policy: str) -> tuple[SensorMeta, ...]:
    if not header or header[-1] != LABEL_COLUMN:
        raise SchemaMismatchError(
            f"last header column must be {LABEL_COLUMN!r}, got {header[-1:]!r}"
        )
    symbols = header[:-1]
    if not symbols:
        raise SchemaMismatchError("header names no sensor columns")
    if len(set(symbols)) != len(symbols):
        raise SchemaMismatchError("duplicate sensor symbols in header")
    if schema_policy == "strict":
        unknown = [s for s in symbols if s not in INSTALLED_SENSOR_INDEX]
        if unknown:
            raise SchemaMismatchError(f"unknown sensor symbols {unknown!r}")
        return tuple(INSTALLED_SENSOR_INDEX[s] for s in symbols)
    if schema_policy == "infer":
        return tuple(
            INSTALLED_SENSOR_INDEX.get(s, _temp(s, "inferred sensor"))
            for s in symbols
        )
    raise ValueError(f"schema_policy must be 'strict' or 'infer', got {schema_policy!r}")


def load_dataset(path, schema_policy: str = "strict") -> Dataset:
    """Load a CSV sensor table into a Dataset.

    Args:
        path: CSV file with a header row of sensor symbols plus a final
            "class" column.
        schema_policy: "strict" requires every symbol to name an installed
            sensor; "infer" accepts any unique names and defaults their
            kind to temperature.

    Raises:
        FileNotFoundError: path does not exist.
        SchemaMismatchError: header malformed or unknown symbol in strict mode.
        MalformedRowError: any cell is missing or non-numeric; the error
            lists every offending (row, column).
        EmptyDatasetError: no data rows.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path} is empty") from None
        schema = _parse_header(header, schema_policy)
        n_cols = len(header)

        rows: list[list[float]] = []
        labels: list[int] = []
        bad_cells: list[tuple[int, str]] = []
        for row_index, row in enumerate(reader):
            if len(row) != n_cols:
                col = header[len(row)] if len(row) < n_cols else LABEL_COLUMN
                bad_cells.append((row_index, col))
                continue
            try:
                rows.append([float(cell) for cell in row[:-1]])
            except ValueError:
                for col, cell in zip(header, row[:-1]):
                    try:
                        float(cell)
                    except ValueError:
                        bad_cells.append((row_index, col))
                continue
            try:
                labels.append(int(row[-1]))
            except ValueError:
                rows.pop()
                bad_cells.append((row_index, LABEL_COLUMN))

    if bad_cells:
        raise MalformedRowError(bad_cells)
    if not rows:
        raise EmptyDatasetError(f"{path} has a header but no data rows")
    values = np.array(rows, dtype=np.float64)
    if not np.isfinite(values).all():
        where = np.argwhere(~np.isfinite(values))
        raise MalformedRowError([(int(r), header[c]) for r, c in where])
    return Dataset(schema, values, np.array(labels, dtype=np.int64))


def write_csv(d: Dataset, path) -> None:
    """Write a Dataset in the loadable CSV format.

    Floats are rendered with repr, the shortest text that parses back to
    the identical float64, so write/load round-trips exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(d.symbols) + f",{LABEL_COLUMN}\n")
        for row, label in zip(d.values, d.labels):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write(f",{int(label)}\n")


def undersample_majority(d: Dataset, target="match_largest_minority", seed: int = 0) -> Dataset:
    """Reduce the majority class; keep every minority row verbatim.

    Args:
        d: source dataset, at least two distinct labels.
        target: "match_largest_minority" shrinks the majority class to the
            size of the largest minority class; an integer shrinks it to
            exactly that count.
        seed: drives the uniform without-replacement subsample.

    Returns:
        Dataset with surviving rows in their original order.
    """
    counts = d.class_counts()
    if len(counts) < 2:
        raise SingleClassError("undersampling needs at least two classes")
    majority = min(c for c in counts if counts[c] == max(counts.values()))
    if target == "match_largest_minority":
        n_keep = max(n for c, n in counts.items() if c != majority)
    else:
        n_keep = int(target)
        if n_keep > counts[majority]:
            raise TargetTooLargeError(
                f"target {n_keep} exceeds majority count {counts[majority]}"
            )
        if n_keep < 0:
            raise ValueError("explicit target must be non-negative")

    majority_rows = np.flatnonzero(d.labels == majority)
    rng = np.random.default_rng(seed)
    kept = rng.choice(majority_rows, size=n_keep, replace=False)
    mask = np.ones(d.n_rows, dtype=bool)
    mask[majority_rows] = False
    mask[kept] = True
    return d.take_rows(np.flatnonzero(mask))


def split_train_test(
    d: Dataset, train_fraction: float, stratified: bool = True, seed: int = 0
) -> SplitPair:
    """Split rows into disjoint train/test sets.

    Stratified mode keeps each class's train share within one row of
    train_fraction times its count and requires every class to have at
    least two rows.  Deterministic for a fixed seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateFractionError(f"train_fraction {train_fraction} not in (0, 1)")
    if d.n_rows == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)

    train_idx: list[np.ndarray] = []
    if stratified:
        for class_id, count in sorted(d.class_counts().items()):
            if count < 2:
                raise ClassTooSmallError(
                    f"class {class_id} has {count} row(s); stratified split needs >= 2"
                )
            class_rows = np.flatnonzero(d.labels == class_id)
            n_train = int(np.floor(train_fraction * count))
            train_idx.append(rng.permutation(class_rows)[:n_train])
    else:
        n_train = int(np.floor(train_fraction * d.n_rows))
        train_idx.append(rng.permutation(d.n_rows)[:n_train])

    train_mask = np.zeros(d.n_rows, dtype=bool)
    train_mask[np.concatenate(train_idx)] = True
    train = d.take_rows(np.flatnonzero(train_mask))
    test = d.take_rows(np.flatnonzero(~train_mask))
    return SplitPair(train=train, test=test, seed=seed, train_fraction=train_fraction)
