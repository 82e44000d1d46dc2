"""Column-compressed design matrix, coordinate partitions and file I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import (
    DimensionError,
    DuplicateEntryError,
    MatrixFormatError,
    PartitionError,
    ZeroEntryError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MM_BANNER = "%%matrixmarket"


# -------------------- SPARSE MATRIX --------------------

@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable n x d matrix in compressed sparse column layout.

    Row indices inside each column are strictly increasing and no explicit
    zeros are stored, so structural and numeric nonzero counts agree.
    """

    csc: sp.csc_array

    def __post_init__(self):
        csc = self.csc
        n, d = csc.shape
        indptr = np.asarray(csc.indptr)
        indices = np.asarray(csc.indices)
        values = np.asarray(csc.data)

        if indptr.shape != (d + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise MatrixFormatError("column pointer array must be monotone with length d+1")
        if indptr[-1] != indices.size or indices.size != values.size:
            raise MatrixFormatError("column pointers do not match stored entries")
        if indices.size:
            if indices.min() < 0 or indices.max() >= n:
                raise MatrixFormatError("row index out of range")
            # positions that continue a column must increase strictly
            steps = np.diff(indices)
            starts = np.zeros(indices.size, dtype=bool)
            starts[indptr[:-1][indptr[:-1] < indices.size]] = True
            if np.any(steps[~starts[1:]] <= 0):
                raise MatrixFormatError("row indices must be strictly increasing within a column")
        if np.any(values == 0):
            raise ZeroEntryError("explicitly stored zero value")
        if not np.all(np.isfinite(values)):
            raise MatrixFormatError("nonfinite value")

    # -------------------- CONSTRUCTORS --------------------
    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        arr = np.atleast_2d(np.asarray(dense, dtype=float))
        return cls(sp.csc_array(arr))

    @classmethod
    def from_triplets(
        cls,
        n_rows: int,
        n_cols: int,
        rows: Sequence[int],
        cols: Sequence[int],
        values: Sequence[float],
    ) -> "SparseMatrix":
        """Build from (row, col, value) triplets; duplicates and zeros are rejected."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionError("triplet arrays must have equal length")
        if rows.size:
            keys = cols * n_rows + rows
            if np.unique(keys).size != keys.size:
                raise DuplicateEntryError("duplicate (row, column) entry")
        if np.any(values == 0):
            raise ZeroEntryError("explicitly stored zero value")
        csc = sp.csc_array((values, (rows, cols)), shape=(n_rows, n_cols))
        csc.sort_indices()
        return cls(csc)

    # -------------------- SHAPE --------------------
    @property
    def n_rows(self) -> int:
        return self.csc.shape[0]

    @property
    def n_cols(self) -> int:
        return self.csc.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.csc.shape

    @property
    def nnz(self) -> int:
        return int(self.csc.indptr[-1])

    # -------------------- ACCESS --------------------
    def column(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of column i."""
        lo, hi = self.csc.indptr[i], self.csc.indptr[i + 1]
        return self.csc.indices[lo:hi], self.csc.data[lo:hi]

    def col_sq_norm(self, i: int) -> float:
        _, vals = self.column(i)
        return float(vals @ vals)

    @cached_property
    def col_sq_norms(self) -> np.ndarray:
        counts = np.diff(self.csc.indptr)
        col_ids = np.repeat(np.arange(self.n_cols), counts)
        return np.bincount(col_ids, weights=self.csc.data**2, minlength=self.n_cols)

    @cached_property
    def nnz_per_col(self) -> np.ndarray:
        return np.diff(self.csc.indptr)

    def submatrix(self, cols: np.ndarray) -> sp.csc_array:
        """Column slice A[:, cols] as a standalone CSC array."""
        sub = self.csc[:, np.asarray(cols)]
        sub = sp.csc_array(sub)
        sub.sort_indices()
        return sub

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.n_cols,):
            raise DimensionError(f"x has shape {x.shape}, expected ({self.n_cols},)")
        return self.csc @ x

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.n_rows,):
            raise DimensionError(f"vector has shape {v.shape}, expected ({self.n_rows},)")
        return self.csc.T @ v

    def to_dense(self) -> np.ndarray:
        return self.csc.toarray()


# -------------------- PARTITION --------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Balanced assignment of d coordinates to c nodes."""

    c: int
    s: int
    block_of: np.ndarray
    blocks: tuple[np.ndarray, ...]
    position: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.block_of.size

    @classmethod
    def from_assignment(cls, block_of, c: Optional[int] = None) -> "Partition":
        """Build from a coordinate -> node map, checking balance."""
        block_of = np.array(block_of, dtype=np.int64)
        if block_of.ndim != 1 or block_of.size == 0:
            raise PartitionError("partition must assign at least one coordinate")
        if c is None:
            c = int(block_of.max()) + 1
        if c < 1:
            raise PartitionError("node count must be >= 1")
        if block_of.min() < 0 or block_of.max() >= c:
            raise PartitionError(f"node ids must lie in [0, {c})")
        d = block_of.size
        if d % c:
            raise PartitionError(f"{c} nodes do not divide {d} coordinates")
        s = d // c
        counts = np.bincount(block_of, minlength=c)
        if np.any(counts != s):
            bad = int(np.flatnonzero(counts != s)[0])
            raise PartitionError(f"node {bad} owns {counts[bad]} coordinates, expected {s}")
        blocks = tuple(np.flatnonzero(block_of == l) for l in range(c))
        position = np.empty(d, dtype=np.int64)
        for blk in blocks:
            position[blk] = np.arange(s)
        for blk in blocks:
            blk.setflags(write=False)
        block_of.setflags(write=False)
        position.setflags(write=False)
        return cls(c=c, s=s, block_of=block_of, blocks=blocks, position=position)


def contiguous_partition(d: int, c: int) -> Partition:
    """Block l = {l*s, ..., (l+1)*s - 1}."""
    if c < 1:
        raise PartitionError("node count must be >= 1")
    if d < 1 or d % c:
        raise PartitionError(f"{c} nodes do not divide {d} coordinates")
    return Partition.from_assignment(np.repeat(np.arange(c), d // c), c)


# -------------------- ROW STATISTICS --------------------

def nnz_per_row(A: SparseMatrix) -> np.ndarray:
    """omega(r): structural nonzeros in each row."""
    return np.bincount(A.csc.indices, minlength=A.n_rows)


def blocks_per_row(A: SparseMatrix, P: Partition) -> np.ndarray:
    """omega'(r): number of blocks with a nonzero in each row."""
    if P.d != A.n_cols:
        raise PartitionError(f"partition covers {P.d} coordinates, matrix has {A.n_cols}")
    counts = np.zeros(A.n_rows, dtype=np.int64)
    touched = np.zeros(A.n_rows, dtype=bool)
    for blk in P.blocks:
        touched[:] = False
        touched[A.submatrix(blk).indices] = True
        counts += touched
    return counts


# -------------------- MATRIX MARKET --------------------

def load_matrix_market(path: PathLike) -> SparseMatrix:
    """Read a real general coordinate Matrix Market file (1-based indices)."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    if not lines or not lines[0].lower().startswith(MM_BANNER):
        raise MatrixFormatError("missing %%MatrixMarket banner", line=1)
    banner = lines[0].lower().split()
    if len(banner) != 5 or banner[1] != "matrix" or banner[2] != "coordinate":
        raise MatrixFormatError("only 'matrix coordinate' files are supported", line=1)
    if banner[3] not in ("real", "integer", "double"):
        raise MatrixFormatError(f"unsupported field '{banner[3]}'", line=1)
    if banner[4] != "general":
        raise MatrixFormatError(f"unsupported symmetry '{banner[4]}'", line=1)

    lineno = 1
    size = None
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    seen: dict[tuple[int, int], int] = {}

    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if size is None:
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise MatrixFormatError(f"bad size line '{text}'", line=lineno) from None
            if len(size) != 3 or min(size) < 0:
                raise MatrixFormatError(f"bad size line '{text}'", line=lineno)
            continue
        if len(parts) != 3:
            raise MatrixFormatError(f"expected 'row col value', got '{text}'", line=lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixFormatError(f"cannot parse entry '{text}'", line=lineno) from None
        n, d, _ = size
        if not (1 <= i <= n and 1 <= j <= d):
            raise MatrixFormatError(f"index ({i}, {j}) outside {n}x{d}", line=lineno)
        if v == 0.0:
            raise ZeroEntryError(f"explicit zero at ({i}, {j})", line=lineno)
        if not np.isfinite(v):
            raise MatrixFormatError(f"nonfinite value at ({i}, {j})", line=lineno)
        if (i, j) in seen:
            raise DuplicateEntryError(
                f"duplicate entry ({i}, {j}), first seen on line {seen[(i, j)]}", line=lineno
            )
        seen[(i, j)] = lineno
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)

    if size is None:
        raise MatrixFormatError("missing size line", line=lineno)
    n, d, nnz = size
    if len(vals) != nnz:
        raise MatrixFormatError(f"header declares {nnz} entries, found {len(vals)}", line=lineno)

    logger.debug("Loaded %s: %dx%d, nnz=%d", path, n, d, nnz)
    return SparseMatrix.from_triplets(n, d, rows, cols, vals)


def save_matrix_market(path: PathLike, A: SparseMatrix) -> Path:
    """Write A as a general coordinate Matrix Market file with exact round-trip values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        scipy.io.mmwrite(fh, A.csc, precision=None, symmetry="general")
    return path


# -------------------- VECTORS AND PARTITION FILES --------------------

def load_vector(path: PathLike, length: Optional[int] = None) -> np.ndarray:
    """Plain text, one number per line."""
    path = Path(path)
    try:
        v = np.loadtxt(path, dtype=float, ndmin=1, comments="#")
    except ValueError as e:
        raise MatrixFormatError(f"{path}: {e}") from e
    if length is not None and v.size != length:
        raise DimensionError(f"{path}: expected {length} values, found {v.size}")
    return v


def save_vector(path: PathLike, v: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(v, dtype=float), fmt="%.17g")
    return path


def load_partition(path: PathLike, c: Optional[int] = None, d: Optional[int] = None) -> Partition:
    """d lines, each a node id in [0, c)."""
    path = Path(path)
    try:
        ids = np.loadtxt(path, dtype=np.int64, ndmin=1, comments="#")
    except ValueError as e:
        raise PartitionError(f"{path}: {e}") from e
    if d is not None and ids.size != d:
        raise PartitionError(f"{path}: expected {d} node ids, found {ids.size}")
    return Partition.from_assignment(ids, c)


def save_partition(path: PathLike, P: Partition) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, P.block_of, fmt="%d")
    return path
