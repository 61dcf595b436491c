"""Dataset ingestion, feature engineering, and synthetic stream generation.

Dataset files are plain UTF-8 CSV: a header row of node ids, one row per time
step. Only the bottom-level columns are required; aggregated columns are
recomputed from the summing matrix when absent and kept verbatim when present
(responses are allowed to be incoherent; the aggregation mismatch is
reported, never rejected). Features live in a separate CSV with columns
``x1..xm`` or are rebuilt from a :class:`FeatureRecipe`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyFile,
    InvalidPeriod,
    MissingColumn,
    NonNumericCell,
)
from .hierarchy import HierarchySpec, SummingMatrix, build_summing_matrix

#: Named seasonal periods accepted by configs and the CLI.
SEASONAL_PERIODS = {"day-of-week": 7, "month-of-year": 12}


@dataclass(frozen=True)
class FeatureRecipe:
    """Deterministic feature engineering: time index and/or seasonal one-hot.

    ``seasonal_period`` of 7 encodes a day-of-week slot, 12 a month-of-year
    slot, any other integer >= 2 a custom period. Step ``t`` (1-based) maps to
    slot ``(t - 1 + phase) mod p``; ``phase`` aligns the encoding to a real
    calendar when needed.
    """

    time_index: bool = True
    seasonal_period: int | None = None
    phase: int = 0

    @property
    def m(self) -> int:
        return int(self.time_index) + (self.seasonal_period or 0)

    @classmethod
    def day_of_week(cls, time_index: bool = True, phase: int = 0) -> "FeatureRecipe":
        return cls(time_index=time_index, seasonal_period=7, phase=phase)

    @classmethod
    def month_of_year(cls, time_index: bool = True, phase: int = 0) -> "FeatureRecipe":
        return cls(time_index=time_index, seasonal_period=12, phase=phase)


def make_features(T: int, recipe: FeatureRecipe) -> np.ndarray:
    """Build the ``T x m`` deterministic feature matrix for a recipe.

    The first column is the 1-based time index (when enabled); a seasonal
    period ``p`` appends ``p`` indicator columns, each row summing to one.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if recipe.seasonal_period is not None and recipe.seasonal_period < 2:
        raise InvalidPeriod(f"seasonal period must be >= 2, got {recipe.seasonal_period}")
    columns = []
    if recipe.time_index:
        columns.append(np.arange(1, T + 1, dtype=float)[:, None])
    if recipe.seasonal_period:
        p = recipe.seasonal_period
        onehot = np.zeros((T, p))
        slots = (np.arange(T) + recipe.phase) % p
        onehot[np.arange(T), slots] = 1.0
        columns.append(onehot)
    if not columns:
        raise ConfigError("feature recipe produces no columns")
    return np.hstack(columns)


@dataclass
class DatasetBundle:
    """A loaded stream: responses in hierarchy node order plus engineered features."""

    labels: tuple[str, ...]
    responses: np.ndarray  # (T, n)
    summing: SummingMatrix
    features: np.ndarray  # (T, m)
    aggregation_residual: float | None = None

    @property
    def T(self) -> int:
        return self.responses.shape[0]

    @property
    def n(self) -> int:
        return self.responses.shape[1]

    @property
    def m(self) -> int:
        return self.features.shape[1]


def _parse_cell(raw: str, row: int, column: str) -> float:
    text = raw.strip()
    if not text:
        raise NonNumericCell(f"empty cell at row {row}, column {column!r}")
    try:
        return float(text)
    except ValueError:
        raise NonNumericCell(
            f"non-numeric cell {raw!r} at row {row}, column {column!r}"
        ) from None


def _read_csv_table(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyFile(f"{path} has no header row")
    if len(rows) == 1:
        raise EmptyFile(f"{path} has no data rows")
    return [c.strip() for c in rows[0]], rows[1:]


def ingest_csv(
    path,
    spec: HierarchySpec,
    recipe: FeatureRecipe | None = None,
    features_path=None,
) -> DatasetBundle:
    """Load a response table against a hierarchy spec.

    Bottom-level columns must be present. Aggregated columns present in the
    file are kept verbatim and their worst mismatch against the recomputed
    sums is reported in ``aggregation_residual``; absent ones are recomputed.
    Features come from ``features_path`` when given, otherwise from
    ``recipe`` (default: time index only).
    """
    header, raw_rows = _read_csv_table(path)
    summing = build_summing_matrix(spec)
    order = summing.labels
    col_of = {name: i for i, name in enumerate(header)}
    for leaf in spec.bottom:
        if leaf not in col_of:
            raise MissingColumn(f"{path} lacks required bottom-level column {leaf!r}")

    T = len(raw_rows)
    width = len(header)
    table = np.empty((T, width))
    for i, row in enumerate(raw_rows):
        if len(row) != width:
            raise NonNumericCell(
                f"row {i + 1} has {len(row)} cells, header has {width}"
            )
        for j, cell in enumerate(row):
            table[i, j] = _parse_cell(cell, i + 1, header[j])

    bottom_block = table[:, [col_of[leaf] for leaf in spec.bottom]]
    recomputed = bottom_block @ summing.S.T  # (T, n) in node order
    responses = recomputed.copy()
    worst = 0.0
    any_aggregated_present = False
    for k, node in enumerate(order):
        if node in spec.bottom:
            continue
        if node in col_of:
            any_aggregated_present = True
            given = table[:, col_of[node]]
            worst = max(worst, float(np.max(np.abs(given - recomputed[:, k]))))
            responses[:, k] = given
    return DatasetBundle(
        labels=order,
        responses=responses,
        summing=summing,
        features=_load_features(T, recipe, features_path),
        aggregation_residual=worst if any_aggregated_present else None,
    )


def _load_features(T, recipe, features_path) -> np.ndarray:
    if features_path is not None:
        features = read_features_csv(features_path)
        if features.shape[0] != T:
            raise DimensionMismatch(
                f"features file has {features.shape[0]} rows, responses have {T}"
            )
        return features
    return make_features(T, recipe or FeatureRecipe())


def write_dataset_csv(bundle: DatasetBundle, path) -> None:
    """Emit the response table (all nodes, hierarchy order) as UTF-8 CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(bundle.labels)
        for row in bundle.responses:
            writer.writerow([repr(float(v)) for v in row])


def write_features_csv(features: np.ndarray, path) -> None:
    features = np.asarray(features, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(features.shape[1])])
        for row in features:
            writer.writerow([repr(float(v)) for v in row])


def read_features_csv(path) -> np.ndarray:
    header, raw_rows = _read_csv_table(path)
    out = np.empty((len(raw_rows), len(header)))
    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise NonNumericCell(f"row {i + 1} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            out[i, j] = _parse_cell(cell, i + 1, header[j])
    return out


def synth_generate(
    seed: int,
    spec: HierarchySpec,
    T: int,
    m: int,
    sigma: float,
    recipe: FeatureRecipe | None = None,
) -> DatasetBundle:
    """Seeded synthetic stream from a ground-truth linear model on the hierarchy.

    Draws a unit-variance parameter matrix, builds features from ``recipe``
    (if any) padded with standard-normal columns up to width ``m``, and emits
    ``y_t = S Theta x_t + sigma * noise``. The draw order (parameters, feature
    noise, response noise) is fixed, so identical seeds give bit-identical
    bundles. With ``sigma = 0`` every row is exactly coherent and the stream
    is exactly realizable.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    summing = build_summing_matrix(spec)
    deterministic = (
        make_features(T, recipe) if recipe is not None else np.zeros((T, 0))
    )
    if deterministic.shape[1] > m:
        raise ConfigError(
            f"recipe produces {deterministic.shape[1]} columns, more than m={m}"
        )
    rng = np.random.default_rng(seed)
    theta0 = rng.standard_normal((summing.d, m))
    pad = m - deterministic.shape[1]
    noise_cols = rng.standard_normal((T, pad)) if pad else np.zeros((T, 0))
    features = np.hstack([deterministic, noise_cols])
    responses = features @ theta0.T @ summing.S.T
    if sigma > 0.0:
        responses = responses + sigma * rng.standard_normal(responses.shape)
    return DatasetBundle(
        labels=summing.labels,
        responses=responses,
        summing=summing,
        features=features,
    )
