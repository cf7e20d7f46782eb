"""Dataset ingestion, normalization, and experiment configuration parsing.

CSV inputs are plain comma-separated UTF-8 text with '.' decimal points and
an optional single header row. Experiment configuration files are flat
``key = value`` documents with a closed key set; unknown keys are an error
so that a config cannot silently drift from what a run actually used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstantColumn, DimensionMismatch, ParseError, RaggedRows

NORMALIZE_MODES = ("per-dimension", "joint")


@dataclass(frozen=True)
class DataMatrix:
    """N samples of dimension n, rows = samples."""

    values: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch(f"samples must be 2-D, got shape {v.shape}")
        if v.shape[0] < 2:
            raise ValueError("need at least 2 samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples contain non-finite entries")
        if self.column_names is not None and len(self.column_names) != v.shape[1]:
            raise DimensionMismatch("column name count does not match width")
        object.__setattr__(self, "values", v)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-column shift/scale sufficient to invert the normalization."""

    mode: str
    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if self.mode not in NORMALIZE_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        shift = np.asarray(self.shift, dtype=float)
        scale = np.asarray(self.scale, dtype=float)
        if shift.shape != scale.shape or shift.ndim != 1:
            raise DimensionMismatch("shift/scale must be matching 1-D arrays")
        if np.any(scale <= 0):
            raise ValueError("every scale must be positive")
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "scale", scale)


def load_csv(path, has_header: bool = False) -> DataMatrix:
    """Load a rectangular numeric CSV file.

    Raises ParseError (with 1-based row/column location) on non-numeric
    cells and RaggedRows when row lengths differ.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: empty file")
    names = None
    if has_header:
        names = tuple(cell.strip() for cell in lines[0].split(","))
        lines = lines[1:]
    rows = []
    width = None
    for i, line in enumerate(lines):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise RaggedRows(
                f"row {i + 1} has {len(cells)} cells, expected {width}",
                row=i + 1,
            )
        row = []
        for j, cell in enumerate(cells):
            try:
                row.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"non-numeric cell {cell.strip()!r} at row {i + 1}, column {j + 1}",
                    row=i + 1,
                    col=j + 1,
                ) from None
        rows.append(row)
    return DataMatrix(np.array(rows, dtype=float), column_names=names)


def save_csv(path, values: np.ndarray, column_names=None) -> None:
    """Write a numeric matrix as CSV with 17-significant-digit cells."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if column_names is not None:
            fh.write(",".join(column_names) + "\n")
        for row in values:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def normalize(data: DataMatrix, mode: str = "per-dimension"):
    """Standardize to zero mean, unit standard deviation.

    ``per-dimension`` standardizes every column independently; ``joint``
    applies a single global shift and scale to all entries (useful when the
    columns are readings of one quantity, e.g. an hourly series). Returns
    the normalized data together with the spec needed to invert it.
    """
    if mode not in NORMALIZE_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    x = data.values
    if mode == "per-dimension":
        shift = x.mean(axis=0)
        scale = x.std(axis=0)
        bad = np.nonzero(scale <= 0)[0]
        if bad.size:
            raise ConstantColumn(f"column {bad[0]} is constant")
    else:
        shift = np.full(data.dim, x.mean())
        global_scale = x.std()
        if global_scale <= 0:
            raise ConstantColumn("all entries are equal")
        scale = np.full(data.dim, global_scale)
    spec = NormalizationSpec(mode=mode, shift=shift, scale=scale)
    normalized = DataMatrix((x - shift) / scale, column_names=data.column_names)
    return normalized, spec


def denormalize(data: DataMatrix, spec: NormalizationSpec) -> DataMatrix:
    """Invert :func:`normalize`."""
    if data.dim != spec.shift.shape[0]:
        raise DimensionMismatch("spec dimension does not match data")
    return DataMatrix(
        data.values * spec.scale + spec.shift, column_names=data.column_names
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Meta-parameters for one experiment run."""

    epsilon_grid: tuple[float, ...]
    z: int
    eta: float
    epochs: int = 100
    inner_steps: int = 15
    lr: float = 1e-3
    seed: int = 0
    noise_draws: int = 100
    mode: str = "per-dimension"

    def __post_init__(self):
        if not self.epsilon_grid:
            raise ValueError("epsilon_grid must be non-empty")
        if any(e <= 0 for e in self.epsilon_grid):
            raise ValueError("every epsilon must be positive")
        if self.z < 1:
            raise ValueError("z must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.noise_draws < 1:
            raise ValueError("noise_draws must be >= 1")
        if self.mode not in NORMALIZE_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


_CONFIG_PARSERS = {
    "epsilon_grid": lambda s: tuple(float(tok) for tok in s.split(",") if tok.strip()),
    "z": int,
    "eta": float,
    "epochs": int,
    "inner_steps": int,
    "lr": float,
    "seed": int,
    "noise_draws": int,
    "mode": str.strip,
}


def load_config(path) -> ExperimentConfig:
    """Parse a ``key = value`` experiment config document.

    Recognized keys: epsilon_grid (comma list), z, eta, epochs,
    inner_steps, lr, seed, noise_draws, mode. Lines starting with '#'
    are comments. Unknown keys raise ParseError.
    """
    fields: dict = {}
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"line {i + 1}: expected 'key = value'", row=i + 1)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ParseError(f"line {i + 1}: unknown key {key!r}", row=i + 1)
        if key in fields:
            raise ParseError(f"line {i + 1}: duplicate key {key!r}", row=i + 1)
        try:
            fields[key] = _CONFIG_PARSERS[key](value.strip())
        except ValueError:
            raise ParseError(
                f"line {i + 1}: bad value for {key!r}", row=i + 1
            ) from None
    missing = {"epsilon_grid", "z", "eta"} - fields.keys()
    if missing:
        raise ParseError(f"missing required keys: {sorted(missing)}")
    return ExperimentConfig(**fields)
