"""Sparse data matrices in triplet form, their row supports and column norms.

The text format is one header line ``m n nnz`` followed by nnz lines
``row col value`` with 1-based indices; lines starting with '%' are comments.
Duplicate (row, col) pairs are rejected rather than summed - silent summation
hides data errors. Explicit zeros are dropped after the duplicate check since
they never contribute to supports or norms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from . import config
from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class DataMatrix:
    """m-by-n real matrix stored as (row, col, value) triplets."""

    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if self.m < 1 or self.n < 1:
            raise ValidationError("shape", "m and n must be positive")
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValidationError("triplets", "rows, cols and values must be equal-length vectors")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.m:
                raise ValidationError("rows", f"row indices must lie in [0, {self.m})")
            if cols.min() < 0 or cols.max() >= self.n:
                raise ValidationError("cols", f"column indices must lie in [0, {self.n})")
            if not np.all(np.isfinite(values)):
                raise ValidationError("values", "non-finite entry")
            keys = rows * self.n + cols
            if np.unique(keys).size != keys.size:
                raise ValidationError("triplets", "duplicate (row, col) entries are rejected")
        # Canonical order, explicit zeros dropped.
        keep = values != 0.0
        rows, cols, values = rows[keep], cols[keep], values[keep]
        order = np.lexsort((cols, rows))
        object.__setattr__(self, "rows", rows[order])
        object.__setattr__(self, "cols", cols[order])
        object.__setattr__(self, "values", values[order])

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_triplets(m: int, n: int, triplets: Iterable[tuple[int, int, float]]) -> "DataMatrix":
        items = list(triplets)
        rows = np.array([t[0] for t in items], dtype=np.int64)
        cols = np.array([t[1] for t in items], dtype=np.int64)
        values = np.array([t[2] for t in items], dtype=float)
        return DataMatrix(m, n, rows, cols, values)

    @staticmethod
    def from_dense(a) -> "DataMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise ValidationError("matrix", "expected a 2-d array")
        rows, cols = np.nonzero(a)
        return DataMatrix(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    # -- derived quantities --------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @cached_property
    def row_supports(self) -> tuple[tuple[int, ...], ...]:
        """J_j: columns with a nonzero entry in row j."""
        supports: list[list[int]] = [[] for _ in range(self.m)]
        for r, c in zip(self.rows, self.cols):
            supports[r].append(int(c))
        return tuple(tuple(s) for s in supports)

    @cached_property
    def column_sq_norms(self) -> np.ndarray:
        """w_i = sum_j A_ji^2."""
        w = np.zeros(self.n)
        np.add.at(w, self.cols, self.values**2)
        return w

    @property
    def max_row_support(self) -> int:
        """omega: degree of partial separability."""
        return max((len(s) for s in self.row_supports), default=0)

    @cached_property
    def row_entries(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per-row (column indices, values) views."""
        idx: list[list[int]] = [[] for _ in range(self.m)]
        vals: list[list[float]] = [[] for _ in range(self.m)]
        for r, c, v in zip(self.rows, self.cols, self.values):
            idx[r].append(int(c))
            vals[r].append(float(v))
        return tuple(
            (np.asarray(i, dtype=np.int64), np.asarray(v, dtype=float))
            for i, v in zip(idx, vals)
        )

    @cached_property
    def column_entries(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per-column (row indices, values) views."""
        idx: list[list[int]] = [[] for _ in range(self.n)]
        vals: list[list[float]] = [[] for _ in range(self.n)]
        for r, c, v in zip(self.rows, self.cols, self.values):
            idx[c].append(int(r))
            vals[c].append(float(v))
        return tuple(
            (np.asarray(i, dtype=np.int64), np.asarray(v, dtype=float))
            for i, v in zip(idx, vals)
        )

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.m, self.n))
        a[self.rows, self.cols] = self.values
        return a

    def gram(self, cap: int = config.DENSE_EIG_CAP) -> np.ndarray:
        """Dense A^T A; refused beyond the dense cap."""
        if self.n > cap:
            raise ValidationError("n", f"gram matrix of size {self.n} exceeds dense cap {cap}")
        g = np.zeros((self.n, self.n))
        for idx, vals in self.row_entries:
            if idx.size:
                g[np.ix_(idx, idx)] += np.outer(vals, vals)
        return g

    def scaled(self, factor: float) -> "DataMatrix":
        return DataMatrix(self.m, self.n, self.rows, self.cols, self.values * factor)

    def with_ridge_rows(self, ridge: float) -> "DataMatrix":
        """Append sqrt(ridge) * e_i rows so the Gram matrix gains ridge * I."""
        if ridge < 0:
            raise ValidationError("ridge", "must be nonnegative")
        if ridge == 0.0:
            return self
        extra = np.arange(self.n, dtype=np.int64)
        return DataMatrix(
            self.m + self.n,
            self.n,
            np.concatenate([self.rows, self.m + extra]),
            np.concatenate([self.cols, extra]),
            np.concatenate([self.values, np.full(self.n, np.sqrt(ridge))]),
        )


# ---------------------------------------------------------------------------
# Text format


def write_matrix(data: DataMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{data.m} {data.n} {data.nnz}\n")
        for r, c, v in zip(data.rows, data.cols, data.values):
            fh.write(f"{r + 1} {c + 1} {float(v)!r}\n")


def read_matrix(path) -> DataMatrix:
    """Parse the triplet text format, reporting 1-based line numbers on errors."""
    header: tuple[int, int, int] | None = None
    triplets: list[tuple[int, int, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            parts = line.split()
            if header is None:
                if len(parts) != 3:
                    raise ParseError("header must be 'm n nnz'", lineno)
                try:
                    header = (int(parts[0]), int(parts[1]), int(parts[2]))
                except ValueError as e:
                    raise ParseError(f"bad header: {e}", lineno) from e
                continue
            if len(parts) != 3:
                raise ParseError("expected 'row col value'", lineno)
            try:
                r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as e:
                raise ParseError(f"bad triplet: {e}", lineno) from e
            if r < 1 or c < 1:
                raise ParseError("row and col are 1-based and must be >= 1", lineno)
            triplets.append((r - 1, c - 1, v))
    if header is None:
        raise ParseError("empty matrix file")
    m, n, nnz = header
    if len(triplets) != nnz:
        raise ParseError(f"header promises {nnz} entries, file has {len(triplets)}")
    try:
        return DataMatrix.from_triplets(m, n, triplets)
    except ValidationError as e:
        raise ParseError(str(e)) from e


# ---------------------------------------------------------------------------
# Composite smooth functions


@dataclass(frozen=True)
class ComposedFunction:
    """Sum of gamma_j-smooth terms phi_j(M_j x); its Gram matrix is
    sum_j gamma_j M_j' M_j."""

    pieces: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        pieces = tuple((float(g), np.asarray(m, dtype=float)) for g, m in self.pieces)
        if not pieces:
            raise ValidationError("pieces", "at least one piece required")
        n = pieces[0][1].shape[1]
        for g, m in pieces:
            if g <= 0:
                raise ValidationError("pieces", "smoothness constants must be positive")
            if m.ndim != 2 or m.shape[1] != n:
                raise ValidationError("pieces", "all maps must share the column dimension")
        object.__setattr__(self, "pieces", pieces)

    @property
    def n(self) -> int:
        return self.pieces[0][1].shape[1]

    def gram(self) -> np.ndarray:
        return sum(g * m.T @ m for g, m in self.pieces)


def _is_binary_diagonal(m: np.ndarray) -> bool:
    if m.shape[0] != m.shape[1]:
        return False
    if np.any(m - np.diag(np.diag(m))):
        return False
    d = np.diag(m)
    return bool(np.all((d == 0.0) | (d == 1.0)))


def assemble_from_pieces(pieces: ComposedFunction) -> DataMatrix:
    """Single data matrix whose Gram matrix equals the composite one.

    Recognizes the three structured cases (coordinate-subset indicators ->
    diagonal matrix; a single map -> scaled map; all-scalar rows -> row-scaled
    stack); otherwise stacks the scaled maps.
    """
    parts = pieces.pieces
    n = pieces.n
    if all(_is_binary_diagonal(m) for _, m in parts):
        weights = np.zeros(n)
        for g, m in parts:
            weights += g * np.diag(m)
        return DataMatrix.from_dense(np.diag(np.sqrt(weights)))
    if len(parts) == 1:
        g, m = parts[0]
        return DataMatrix.from_dense(np.sqrt(g) * m)
    # Row-scaled and general cases coincide under stacking.
    stacked = np.vstack([np.sqrt(g) * m for g, m in parts])
    return DataMatrix.from_dense(stacked)
