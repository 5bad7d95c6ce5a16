"""Measurement ingestion, validation, noise filtering, holdout splitting.

A dataset is an ordered, immutable collection of field measurements, each
joined with the externally simulated received power for the same link.
Rows that fail validation or fall in the thermal-noise band are never
silently dropped: every removal lands in the dataset's filter log with the
row's index in the original source and a reason string.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyDatasetError, SchemaError
from .propagation import ObstaclePath, free_space_loss_db, knife_edge_loss, knife_edge_parameter

# Canonical column names, in file order.
COLUMNS = ("p_rx", "d", "p_tx", "h", "f", "p_lr")

# Received-power interval treated as receiver thermal noise, dB (closed).
NOISE_BAND_DEFAULT = (-120.0, -100.0)

# Admissible carrier band for incoming measurements, MHz.
FREQUENCY_BAND_DEFAULT = (20.0, 40.0)

HOLDOUT_SIZE_DEFAULT = 25


@dataclass(frozen=True)
class MeasurementRecord:
    """One field sample.

    Attributes:
        p_rx: received power, dB
        d: transmitter-receiver distance, meters
        p_tx: transmit power, dB
        h: height above sea level, meters
        f: carrier frequency, MHz
    """

    p_rx: float
    d: float
    p_tx: float
    h: float
    f: float

    def __post_init__(self):
        for name in ("p_rx", "d", "p_tx", "h", "f"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")
        if self.d <= 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if self.f <= 0:
            raise ValueError(f"f must be positive, got {self.f}")


@dataclass(frozen=True)
class LinkPrediction:
    """A measurement joined with the simulated received power for the link."""

    record: MeasurementRecord
    p_lr: float

    def __post_init__(self):
        if not math.isfinite(self.p_lr):
            raise ValueError(f"p_lr must be finite, got {self.p_lr}")

    def value(self, name: str) -> float:
        if name == "p_lr":
            return self.p_lr
        return getattr(self.record, name)


@dataclass(frozen=True)
class Dataset:
    """Ordered rows plus the log of everything removed on the way here.

    ``source_rows[i]`` is the index row ``i`` had in the original source
    (0-based over the source's data rows), so filter-log indices stay
    meaningful across chained filters.
    """

    rows: tuple
    provenance: str = ""
    filter_log: tuple = ()
    source_rows: tuple = None

    def __post_init__(self):
        if self.source_rows is None:
            object.__setattr__(self, "source_rows", tuple(range(len(self.rows))))
        if len(self.source_rows) != len(self.rows):
            raise ValueError("source_rows must parallel rows")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        """One column across all rows as a float array."""
        if name not in COLUMNS:
            raise KeyError(f"unknown column {name!r}; expected one of {COLUMNS}")
        return np.array([row.value(name) for row in self.rows], dtype=float)

    def subset(self, indices: Sequence[int], provenance: str = None) -> "Dataset":
        """Rows at the given positions, preserving their relative order."""
        idx = sorted(indices)
        return Dataset(
            rows=tuple(self.rows[i] for i in idx),
            provenance=self.provenance if provenance is None else provenance,
            filter_log=(),
            source_rows=tuple(self.source_rows[i] for i in idx),
        )


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/holdout partition of a dataset."""

    train: Dataset
    holdout: Dataset
    seed: int


def _resolve_schema(schema: Mapping[str, str] | None) -> dict:
    mapping = {name: name for name in COLUMNS}
    if schema:
        unknown = set(schema) - set(COLUMNS)
        if unknown:
            raise SchemaError(f"schema maps unknown fields: {sorted(unknown)}")
        mapping.update(schema)
    return mapping


def load_dataset(
    source,
    schema: Mapping[str, str] | None = None,
    frequency_band: tuple = FREQUENCY_BAND_DEFAULT,
    provenance: str = None,
) -> Dataset:
    """Parse a comma-delimited measurement file into a Dataset.

    Args:
        source: path or open text stream; must have a header row
        schema: optional mapping from canonical field names to the column
            names actually used in the file
        frequency_band: admissible (low, high) carrier band in MHz; rows
            outside it are logged and skipped
        provenance: source tag; defaults to the file name

    Rows that cannot be parsed or violate record invariants are recorded in
    the filter log and skipped; the remainder loads in file order.

    Raises:
        SchemaError: required columns missing from the header
        EmptyDatasetError: no data rows at all
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", newline="") as handle:
            return load_dataset(handle, schema, frequency_band, provenance or str(source))

    mapping = _resolve_schema(schema)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise EmptyDatasetError("input has no header row")
    header = [name.strip() for name in reader.fieldnames]
    missing = [mapping[name] for name in COLUMNS if mapping[name] not in header]
    if missing:
        raise SchemaError(f"missing required columns: {missing}")

    rows, source_rows, log = [], [], []
    count = 0
    for index, raw in enumerate(reader):
        count += 1
        try:
            values = {
                name: float(raw[mapping[name]].strip()) for name in COLUMNS
            }
        except (TypeError, ValueError, AttributeError) as exc:
            log.append((index, f"parse: {exc}"))
            continue
        try:
            record = MeasurementRecord(
                p_rx=values["p_rx"], d=values["d"], p_tx=values["p_tx"],
                h=values["h"], f=values["f"],
            )
            row = LinkPrediction(record=record, p_lr=values["p_lr"])
        except ValueError as exc:
            log.append((index, f"domain: {exc}"))
            continue
        low, high = frequency_band
        if not low <= record.f <= high:
            log.append((index, f"domain: f={record.f} outside admissible band [{low}, {high}] MHz"))
            continue
        rows.append(row)
        source_rows.append(index)

    if count == 0:
        raise EmptyDatasetError("input contains a header but no data rows")
    return Dataset(
        rows=tuple(rows),
        provenance=provenance or "<stream>",
        filter_log=tuple(log),
        source_rows=tuple(source_rows),
    )


def save_dataset(data: Dataset, dest) -> None:
    """Write a dataset as comma-delimited text with full-precision floats."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as handle:
            save_dataset(data, handle)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in data.rows:
        writer.writerow([repr(row.value(name)) for name in COLUMNS])


def save_filter_log(data: Dataset, dest) -> None:
    """Write the removal log as comma-delimited (original_index, reason)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as handle:
            save_filter_log(data, handle)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(("original_index", "reason"))
    for index, reason in data.filter_log:
        writer.writerow((index, reason))


def filter_noise_band(data: Dataset, band: tuple = NOISE_BAND_DEFAULT) -> Dataset:
    """Remove rows whose received power lies inside the closed dB band.

    Removed rows are appended to the filter log with reason
    "thermal-noise band". Filtering twice with the same band is a no-op
    the second time.
    """
    low, high = band
    if low > high:
        raise ValueError(f"band low must not exceed high, got [{low}, {high}]")
    rows, source_rows, removed = [], [], []
    for row, origin in zip(data.rows, data.source_rows):
        if low <= row.record.p_rx <= high:
            removed.append((origin, "thermal-noise band"))
        else:
            rows.append(row)
            source_rows.append(origin)
    return Dataset(
        rows=tuple(rows),
        provenance=data.provenance,
        filter_log=data.filter_log + tuple(removed),
        source_rows=tuple(source_rows),
    )


def split_holdout(data: Dataset, holdout_size: int = HOLDOUT_SIZE_DEFAULT, seed: int = 0) -> SplitDataset:
    """Deterministic seeded partition into train and holdout rows.

    Args:
        data: dataset to split
        holdout_size: number of rows withheld from fitting
        seed: RNG seed; the same (data, size, seed) always yields the same split

    Raises:
        ValueError: holdout_size negative or not smaller than the row count
    """
    n = len(data)
    if holdout_size < 0:
        raise ValueError(f"holdout_size must be non-negative, got {holdout_size}")
    if holdout_size >= n:
        raise ValueError(f"holdout_size {holdout_size} must be smaller than the row count {n}")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(n, size=holdout_size, replace=False).tolist())
    train_idx = [i for i in range(n) if i not in chosen]
    return SplitDataset(
        train=data.subset(train_idx, provenance=f"{data.provenance}[train]"),
        holdout=data.subset(sorted(chosen), provenance=f"{data.provenance}[holdout]"),
        seed=seed,
    )


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings for desk-scale datasets with known ground truth.

    The simulated received power for each link is free-space loss applied to
    the transmit power (plus an optional knife-edge term); the measured
    received power is then the planted log-domain correction of it:

        p_rx_dB = coef_p_lr * p_lr_dB
                  + 10*(coef_log_f*log10(f) + coef_log_d*log10(d) + coef_h*h
                        + intercept)
                  + noise

    with noise drawn N(0, noise_sd_db) in dB.
    """

    coef_p_lr: float = 1.0
    coef_log_f: float = 0.0
    coef_log_d: float = 0.0
    coef_h: float = 0.0
    intercept: float = 0.0
    noise_sd_db: float = 0.0
    n_rows: int = 256
    seed: int = 0
    d_range_m: tuple = (100.0, 15000.0)
    f_range_mhz: tuple = (20.0, 40.0)
    h_range_m: tuple = (200.0, 1500.0)
    p_tx_levels_db: tuple = (30.0, 37.0, 43.0)
    knife_edge: bool = False
    obstacle_height_range_m: tuple = (0.0, 120.0)

    def __post_init__(self):
        if self.n_rows <= 0:
            raise ValueError(f"n_rows must be positive, got {self.n_rows}")
        if self.noise_sd_db < 0:
            raise ValueError(f"noise_sd_db must be non-negative, got {self.noise_sd_db}")
        for name in ("d_range_m", "f_range_mhz", "h_range_m"):
            low, high = getattr(self, name)
            if low <= 0 or high < low:
                raise ValueError(f"{name} must be a positive non-empty range, got ({low}, {high})")
        if not self.p_tx_levels_db:
            raise ValueError("p_tx_levels_db must be non-empty")


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """Build a dataset from the planted correction functional.

    Deterministic for a given seed; the planted coefficients are exactly
    recoverable by a correction fit when noise_sd_db is zero.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_rows
    d = rng.uniform(*config.d_range_m, n)
    f = rng.uniform(*config.f_range_mhz, n)
    h = rng.uniform(*config.h_range_m, n)
    p_tx = rng.choice(np.asarray(config.p_tx_levels_db, dtype=float), n)

    loss = np.array([free_space_loss_db(fi, di) for fi, di in zip(f, d)])
    if config.knife_edge:
        h_obs = rng.uniform(*config.obstacle_height_range_m, n)
        loss = loss + np.array([
            knife_edge_loss(knife_edge_parameter(ObstaclePath(ho, di / 2, di / 2, fi)))
            for ho, di, fi in zip(h_obs, d, f)
        ])
    p_lr = p_tx - loss

    noise = rng.normal(0.0, config.noise_sd_db, n) if config.noise_sd_db > 0 else np.zeros(n)
    p_rx = (
        config.coef_p_lr * p_lr
        + 10.0 * (
            config.coef_log_f * np.log10(f)
            + config.coef_log_d * np.log10(d)
            + config.coef_h * h
            + config.intercept
        )
        + noise
    )

    rows = tuple(
        LinkPrediction(
            record=MeasurementRecord(
                p_rx=float(p_rx[i]), d=float(d[i]), p_tx=float(p_tx[i]),
                h=float(h[i]), f=float(f[i]),
            ),
            p_lr=float(p_lr[i]),
        )
        for i in range(n)
    )
    return Dataset(rows=rows, provenance=f"synthetic(seed={config.seed})")
