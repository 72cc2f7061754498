"""Data ingestion, validation and synthetic benchmark generators.

A DataMatrix couples an (N, n) value array with a per-column schema and a
missing mask. Discrete columns hold integer codes 0..k-1; continuous columns
hold finite floats. Every sample carries the same empirical weight 1/N.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DataError
from .information import MAX_STATES, JointTable

DISCRETE = "discrete"
CONTINUOUS = "continuous"

# Auto-detection: a CSV column is discrete iff every non-missing value is a
# non-negative integer and there are at most this many distinct levels.
AUTO_DISCRETE_MAX_LEVELS = 10


@dataclass(frozen=True)
class ColumnSchema:
    """Declared type of one data column."""

    name: str
    kind: str
    cardinality: int | None = None
    missing_allowed: bool = True

    def __post_init__(self) -> None:
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == DISCRETE:
            if self.cardinality is None or int(self.cardinality) < 2:
                raise DataError(
                    f"column {self.name!r}: discrete cardinality must be >= 2"
                )
            object.__setattr__(self, "cardinality", int(self.cardinality))
        elif self.cardinality is not None:
            raise DataError(
                f"column {self.name!r}: continuous columns take no cardinality"
            )


@dataclass(frozen=True)
class ColumnarView:
    """Solver-facing split of a DataMatrix into discrete and continuous parts.

    Missing cells are zeroed in the value arrays and flagged False in the
    observation masks.
    """

    n_samples: int
    n_variables: int
    disc_cols: np.ndarray
    cont_cols: np.ndarray
    disc_codes: np.ndarray
    disc_obs: np.ndarray
    cardinalities: np.ndarray
    k_max: int
    cont_values: np.ndarray
    cont_obs: np.ndarray


class DataMatrix:
    """Validated samples-by-variables table with optional missing cells."""

    def __init__(
        self,
        schema: Sequence[ColumnSchema],
        values: np.ndarray,
        mask: np.ndarray | None = None,
    ) -> None:
        self.schema = list(schema)
        vals = np.array(values, dtype=np.float64)
        if vals.ndim != 2:
            raise DataError(f"values must be 2-dimensional, got shape {vals.shape}")
        n_samples, n_vars = vals.shape
        if n_samples < 1:
            raise DataError("data must contain at least one sample")
        if n_vars < 1 or n_vars != len(self.schema):
            raise DataError(
                f"{n_vars} value columns do not match {len(self.schema)} schema columns"
            )
        if mask is None:
            miss = np.isnan(vals)
        else:
            miss = np.array(mask, dtype=bool)
            if miss.shape != vals.shape:
                raise DataError("mask shape must match values shape")
            miss |= np.isnan(vals)
        for i, col in enumerate(self.schema):
            col_missing = miss[:, i]
            if col_missing.any() and not col.missing_allowed:
                row = int(np.argmax(col_missing))
                raise DataError(
                    f"missing value at row {row}, column {col.name!r} "
                    "(schema forbids missing)"
                )
            observed = vals[~col_missing, i]
            if col.kind == DISCRETE:
                if observed.size and not np.all(observed == np.floor(observed)):
                    row = int(np.flatnonzero(~col_missing)[
                        int(np.argmax(observed != np.floor(observed)))
                    ])
                    raise DataError(
                        f"non-integer value at row {row}, column {col.name!r}"
                    )
                k = col.cardinality
                bad = (observed < 0) | (observed >= k)
                if bad.any():
                    row = int(np.flatnonzero(~col_missing)[int(np.argmax(bad))])
                    raise DataError(
                        f"value out of alphabet 0..{k - 1} at row {row}, "
                        f"column {col.name!r}"
                    )
            else:
                if observed.size and not np.all(np.isfinite(observed)):
                    row = int(np.flatnonzero(~col_missing)[
                        int(np.argmax(~np.isfinite(observed)))
                    ])
                    raise DataError(
                        f"non-finite value at row {row}, column {col.name!r}"
                    )
        vals[miss] = np.nan
        vals.flags.writeable = False
        miss.flags.writeable = False
        self.values = vals
        self.missing = miss
        self._view: ColumnarView | None = None

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]

    def is_discrete(self, i: int) -> bool:
        return self.schema[i].kind == DISCRETE

    def codes(self, i: int) -> np.ndarray:
        """Integer codes of a discrete column; missing cells are -1."""
        if not self.is_discrete(i):
            raise DataError(f"column {self.schema[i].name!r} is not discrete")
        col = self.values[:, i]
        out = np.where(self.missing[:, i], -1.0, col)
        return out.astype(np.int64)

    def columnar(self) -> ColumnarView:
        if self._view is None:
            disc = np.array(
                [i for i in range(self.n_variables) if self.is_discrete(i)],
                dtype=np.int64,
            )
            cont = np.array(
                [i for i in range(self.n_variables) if not self.is_discrete(i)],
                dtype=np.int64,
            )
            obs = ~self.missing
            disc_obs = obs[:, disc] if disc.size else np.ones((self.n_samples, 0), bool)
            codes = np.zeros((self.n_samples, disc.size), dtype=np.int64)
            if disc.size:
                raw = self.values[:, disc]
                codes = np.where(disc_obs, np.nan_to_num(raw), 0.0).astype(np.int64)
            cards = np.array(
                [self.schema[i].cardinality for i in disc], dtype=np.int64
            )
            cont_obs = obs[:, cont] if cont.size else np.ones((self.n_samples, 0), bool)
            cvals = np.zeros((self.n_samples, cont.size), dtype=np.float64)
            if cont.size:
                cvals = np.where(cont_obs, np.nan_to_num(self.values[:, cont]), 0.0)
            self._view = ColumnarView(
                n_samples=self.n_samples,
                n_variables=self.n_variables,
                disc_cols=disc,
                cont_cols=cont,
                disc_codes=codes,
                disc_obs=disc_obs,
                cardinalities=cards,
                k_max=int(cards.max()) if cards.size else 0,
                cont_values=cvals,
                cont_obs=cont_obs,
            )
        return self._view


def schema_compatible(a: Sequence[ColumnSchema], b: Sequence[ColumnSchema]) -> bool:
    """Structural match: same length, kinds and cardinalities (names may differ)."""
    if len(a) != len(b):
        return False
    return all(
        x.kind == y.kind and x.cardinality == y.cardinality for x, y in zip(a, b)
    )


def as_data_matrix(
    data: "DataMatrix | np.ndarray | Sequence",
    schema: Sequence[ColumnSchema] | None = None,
) -> DataMatrix:
    """Coerce arrays to a DataMatrix.

    Without a schema, integer arrays become discrete columns (alphabet
    0..max) and float arrays become continuous columns with NaN as missing.
    """
    if isinstance(data, DataMatrix):
        if schema is not None and not schema_compatible(data.schema, list(schema)):
            raise DataError("data does not match the requested schema")
        return data
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise DataError(f"expected a 2-dimensional array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError("data must contain at least one sample and one variable")
    if schema is not None:
        return DataMatrix(list(schema), arr.astype(np.float64))
    if np.issubdtype(arr.dtype, np.integer) or (
        np.issubdtype(arr.dtype, np.bool_)
    ):
        arr = arr.astype(np.int64)
        if arr.min() < 0:
            raise DataError("discrete codes must be non-negative")
        cols = []
        for i in range(arr.shape[1]):
            k = max(2, int(arr[:, i].max()) + 1)
            cols.append(ColumnSchema(f"x{i}", DISCRETE, k))
        return DataMatrix(cols, arr.astype(np.float64))
    cols = [ColumnSchema(f"x{i}", CONTINUOUS) for i in range(arr.shape[1])]
    return DataMatrix(cols, arr.astype(np.float64))


# ---------------------------------------------------------------------------
# CSV ingestion


def load_schema(path: str | Path) -> list[ColumnSchema]:
    """Read a JSON sidecar: a list of column descriptors."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read schema file {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError("schema file must contain a JSON list of columns")
    cols = []
    for entry in raw:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise DataError(f"bad schema entry: {entry!r}")
        cols.append(
            ColumnSchema(
                name=str(entry["name"]),
                kind=str(entry["kind"]),
                cardinality=entry.get("cardinality"),
                missing_allowed=bool(entry.get("missing_allowed", True)),
            )
        )
    return cols


def _parse_cell(text: str, row: int, name: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(
            f"cannot parse value {text!r} at row {row}, column {name!r}"
        ) from exc


def _infer_column(
    raw: list[float | None], name: str
) -> ColumnSchema:
    observed = [v for v in raw if v is not None]
    if observed:
        distinct = set(observed)
        integral = all(v == math.floor(v) and v >= 0 for v in distinct)
        if integral and len(distinct) <= AUTO_DISCRETE_MAX_LEVELS:
            k = max(2, int(max(distinct)) + 1)
            return ColumnSchema(name, DISCRETE, k)
    return ColumnSchema(name, CONTINUOUS)


def load_csv(
    path: str | Path,
    schema: Sequence[ColumnSchema] | str | Path | None = None,
    missing_token: str = "NA",
) -> DataMatrix:
    """Load a UTF-8 CSV with a header row.

    ``schema`` may be a list of ColumnSchema, a path to a JSON sidecar, or
    None to auto-detect column kinds.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    n = len(header)
    parsed: list[list[float | None]] = []
    for r, row in enumerate(body):
        if len(row) != n:
            raise DataError(
                f"{path}: row {r} has {len(row)} fields, expected {n}"
            )
        out: list[float | None] = []
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == missing_token:
                out.append(None)
            else:
                out.append(_parse_cell(cell, r, header[c]))
        parsed.append(out)

    if schema is None or (isinstance(schema, str) and schema == "auto"):
        columns = [
            _infer_column([parsed[r][c] for r in range(len(parsed))], header[c])
            for c in range(n)
        ]
    elif isinstance(schema, (str, Path)):
        columns = load_schema(schema)
    else:
        columns = list(schema)
    if len(columns) != n:
        raise DataError(
            f"{path}: schema declares {len(columns)} columns, file has {n}"
        )

    values = np.full((len(parsed), n), np.nan)
    for r, row in enumerate(parsed):
        for c, v in enumerate(row):
            if v is not None:
                values[r, c] = v
    return DataMatrix(columns, values)


def _atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never observe
    a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(
    data: DataMatrix, path: str | Path, missing_token: str = "NA"
) -> None:
    """Write a DataMatrix as CSV (header row, 6 decimals for continuous)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow([c.name for c in data.schema])
    for r in range(data.n_samples):
        row = []
        for c in range(data.n_variables):
            if data.missing[r, c]:
                row.append(missing_token)
            elif data.is_discrete(c):
                row.append(str(int(data.values[r, c])))
            else:
                row.append(f"{data.values[r, c]:.6f}")
        writer.writerow(row)
    _atomic_write_text(path, buffer.getvalue())


# ---------------------------------------------------------------------------
# Synthetic benchmarks

INDEPENDENT = "independent"
SUMMED_OVERLAP = "summed_overlap"


@dataclass(frozen=True)
class BlockGaussianSpec:
    """Groups of continuous columns, each a noisy copy of a binary driver.

    With ``summed_overlap`` the last block's driver is Z_0 + Z_1 (three
    valued), so its columns depend on the first two drivers.
    """

    num_blocks: int
    block_size: int
    noise_sd: float
    dependency: str = INDEPENDENT
    n_samples: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_blocks < 1 or self.block_size < 1 or self.n_samples < 1:
            raise DataError("block counts and sample count must be positive")
        if self.noise_sd <= 0:
            raise DataError("noise_sd must be positive")
        if self.dependency not in (INDEPENDENT, SUMMED_OVERLAP):
            raise DataError(f"unknown dependency {self.dependency!r}")
        if self.dependency == SUMMED_OVERLAP and self.num_blocks < 3:
            raise DataError("summed_overlap needs at least three blocks")


@dataclass(frozen=True)
class LatentTreeSpec:
    """Binary latent tree with noisy-copy edges and observed leaves."""

    depth: int
    branching: int
    leaf_count: int
    flip_prob: float
    n_samples: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 1 or self.branching < 1 or self.leaf_count < 1:
            raise DataError("tree shape parameters must be positive")
        if self.n_samples < 1:
            raise DataError("sample count must be positive")
        if not 0.0 <= self.flip_prob < 0.5:
            raise DataError("flip_prob must lie in [0, 0.5)")


@dataclass
class GroundTruth:
    """Generator-side record of where each observed column came from."""

    kind: str
    column_parents: list[list[int]]
    latent_names: list[str]
    latent_values: np.ndarray
    params: dict = field(default_factory=dict)

    def parent_labels(self) -> np.ndarray:
        """First parent index per column, the clustering target."""
        return np.array([p[0] for p in self.column_parents], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "column_parents": self.column_parents,
            "latent_names": self.latent_names,
            "latent_values": self.latent_values.astype(int).tolist(),
            "params": self.params,
        }


def _generate_block_gaussian(spec: BlockGaussianSpec) -> tuple[DataMatrix, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    n_free = (
        spec.num_blocks
        if spec.dependency == INDEPENDENT
        else spec.num_blocks - 1
    )
    free = rng.integers(0, 2, size=(spec.n_samples, n_free))
    if spec.dependency == INDEPENDENT:
        drivers = free
    else:
        derived = (free[:, 0] + free[:, 1])[:, None]
        drivers = np.concatenate([free, derived], axis=1)
    n_cols = spec.num_blocks * spec.block_size
    noise = rng.normal(0.0, spec.noise_sd, size=(spec.n_samples, n_cols))
    block_of = np.repeat(np.arange(spec.num_blocks), spec.block_size)
    values = drivers[:, block_of] + noise
    schema = [ColumnSchema(f"x{i}", CONTINUOUS) for i in range(n_cols)]
    parents: list[list[int]] = []
    for b in block_of:
        if spec.dependency == SUMMED_OVERLAP and b == spec.num_blocks - 1:
            parents.append([0, 1])
        else:
            parents.append([int(b)])
    truth = GroundTruth(
        kind="block_gaussian",
        column_parents=parents,
        latent_names=[f"Z{j}" for j in range(spec.num_blocks)],
        latent_values=drivers,
        params={
            "num_blocks": spec.num_blocks,
            "block_size": spec.block_size,
            "noise_sd": spec.noise_sd,
            "dependency": spec.dependency,
            "n_samples": spec.n_samples,
            "seed": spec.seed,
        },
    )
    return DataMatrix(schema, values), truth


def _generate_latent_tree(spec: LatentTreeSpec) -> tuple[DataMatrix, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    level = rng.integers(0, 2, size=(n, 1))
    for d in range(1, spec.depth):
        width = spec.branching**d
        parent = level[:, np.arange(width) // spec.branching]
        flips = rng.random((n, width)) < spec.flip_prob
        level = parent ^ flips
    bottom = level
    n_bottom = bottom.shape[1]
    leaf_parent = (np.arange(spec.leaf_count) * n_bottom) // spec.leaf_count
    flips = rng.random((n, spec.leaf_count)) < spec.flip_prob
    leaves = bottom[:, leaf_parent] ^ flips
    schema = [
        ColumnSchema(f"x{i}", DISCRETE, 2, missing_allowed=False)
        for i in range(spec.leaf_count)
    ]
    truth = GroundTruth(
        kind="latent_tree",
        column_parents=[[int(p)] for p in leaf_parent],
        latent_names=[f"Z{j}" for j in range(n_bottom)],
        latent_values=bottom,
        params={
            "depth": spec.depth,
            "branching": spec.branching,
            "leaf_count": spec.leaf_count,
            "flip_prob": spec.flip_prob,
            "n_samples": spec.n_samples,
            "seed": spec.seed,
        },
    )
    return DataMatrix(schema, leaves.astype(np.float64)), truth


def generate(
    spec: BlockGaussianSpec | LatentTreeSpec,
) -> tuple[DataMatrix, GroundTruth]:
    """Draw a synthetic dataset; identical specs produce identical data."""
    if isinstance(spec, BlockGaussianSpec):
        return _generate_block_gaussian(spec)
    if isinstance(spec, LatentTreeSpec):
        return _generate_latent_tree(spec)
    raise DataError(f"unknown synthetic spec {type(spec).__name__}")


def analytic_block_tc(
    num_blocks: int, block_size: int, noise_sd: float
) -> float:
    """Exact total correlation of independent block-Gaussian data, in nats.

    Per block, TC = s * (H(X_i) - H(X_i | Z)) - H(Z) with H(X_i) obtained by
    1-D quadrature over the two-component Gaussian mixture. The driver is
    recoverable from a whole block essentially surely when noise_sd is well
    below the unit gap between the component means, which makes the residual
    H(Z | X_block) term negligible; that regime is assumed here.
    """
    sd = float(noise_sd)
    norm = 1.0 / (sd * math.sqrt(2.0 * math.pi))

    def mixture(x: float) -> float:
        a = math.exp(-0.5 * (x / sd) ** 2)
        b = math.exp(-0.5 * ((x - 1.0) / sd) ** 2)
        return 0.5 * norm * (a + b)

    def integrand(x: float) -> float:
        f = mixture(x)
        return -f * math.log(f) if f > 0.0 else 0.0

    lo, hi = -12.0 * sd, 1.0 + 12.0 * sd
    h_mix, _ = quad(integrand, lo, hi, points=[0.0, 1.0], limit=200)
    h_noise = 0.5 * math.log(2.0 * math.pi * math.e * sd * sd)
    per_block = block_size * (h_mix - h_noise) - math.log(2.0)
    return num_blocks * per_block


def empirical_joint(
    data: DataMatrix, columns: Sequence[int] | None = None
) -> JointTable:
    """Exact empirical joint over discrete columns, each sample weighted 1/N."""
    cols = list(range(data.n_variables)) if columns is None else list(columns)
    for i in cols:
        if not data.is_discrete(i):
            raise DataError(
                f"column {data.schema[i].name!r} is continuous; "
                "empirical joints need discrete columns"
            )
        if data.missing[:, i].any():
            raise DataError(
                f"column {data.schema[i].name!r} has missing cells; "
                "empirical joints need complete data"
            )
    cards = [data.schema[i].cardinality for i in cols]
    if math.prod(cards) > MAX_STATES:
        raise DataError("empirical state space exceeds the exact-measure cap")
    codes = np.stack([data.codes(i) for i in cols], axis=0)
    flat = np.ravel_multi_index(codes, dims=cards)
    counts = np.bincount(flat, minlength=math.prod(cards))
    return JointTable(tuple(cards), counts / data.n_samples)
