"""Smooth losses f(x) = sum_j l(y^j, A_j: x) expressed through a maintained residual.

The residual g is A x - y for the square loss and -Diag(y) A x for the
logistic and square hinge losses. Every partial derivative and the loss
value itself can be read off g, so nodes never need the full x.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np
from scipy.special import expit

from .errors import DimensionError, ZeroColumnError
from .matrix import SparseMatrix

logger = logging.getLogger(__name__)


class LossKind(str, Enum):
    """The three supported losses."""

    SQUARE = "square"
    LOGISTIC = "logistic"
    SQUARE_HINGE = "square_hinge"

    @classmethod
    def parse(cls, value: Union[str, "LossKind"]) -> "LossKind":
        if isinstance(value, LossKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"sl": cls.SQUARE, "ll": cls.LOGISTIC, "hl": cls.SQUARE_HINGE, "hinge": cls.SQUARE_HINGE}
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def curvature_scale(self) -> float:
        """Factor in M = scale * A^T A."""
        return 0.25 if self is LossKind.LOGISTIC else 1.0

    @property
    def uses_labels_in_residual(self) -> bool:
        return self is not LossKind.SQUARE


@dataclass
class Residual:
    g: np.ndarray
    kind: LossKind


ResidualLike = Union[Residual, np.ndarray]


def _vector(g: ResidualLike) -> np.ndarray:
    return g.g if isinstance(g, Residual) else g


# -------------------- CURVATURE --------------------

def m_diag(A: SparseMatrix, kind: LossKind, active: Optional[np.ndarray] = None) -> np.ndarray:
    """Diagonal of M: ||A_:i||^2 (SL, HL) or ||A_:i||^2 / 4 (LL).

    Coordinates listed in ``active`` (all by default) must have nonzero columns.
    """
    kind = LossKind.parse(kind)
    diag = A.col_sq_norms * kind.curvature_scale
    check = diag if active is None else diag[np.asarray(active)]
    if np.any(check <= 0):
        ids = np.flatnonzero(diag <= 0)
        if active is not None:
            ids = np.intersect1d(ids, np.asarray(active))
        raise ZeroColumnError(ids.tolist())
    return diag


# -------------------- RESIDUAL --------------------

def _check_labels(y: np.ndarray, kind: LossKind) -> None:
    if not kind.uses_labels_in_residual:
        return
    if np.any(y == 0):
        raise DimensionError("labels must be nonzero for logistic and square hinge losses")
    if not np.all(np.abs(y) == 1):
        logger.warning("Labels are not all +/-1; the curvature bound M assumes |y^j| = 1")


def init_residual(A: SparseMatrix, x: np.ndarray, y: np.ndarray, kind: LossKind) -> Residual:
    kind = LossKind.parse(kind)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (A.n_rows,):
        raise DimensionError(f"y has shape {y.shape}, expected ({A.n_rows},)")
    _check_labels(y, kind)
    Ax = A.matvec(x)
    if kind is LossKind.SQUARE:
        return Residual(Ax - y, kind)
    return Residual(-(y * Ax), kind)


# -------------------- DERIVATIVES --------------------

def column_derivative(
    rows: np.ndarray, vals: np.ndarray, g: np.ndarray, y: np.ndarray, kind: LossKind
) -> float:
    """f'_i from one column (rows, vals) of A and the residual vector."""
    gr = g[rows]
    if kind is LossKind.SQUARE:
        return float(vals @ gr)
    yv = y[rows] * vals
    if kind is LossKind.LOGISTIC:
        return -float(yv @ expit(gr))
    # strict: rows with g^j == -1 sit on the kink and contribute nothing
    slack = np.where(gr > -1.0, 1.0 + gr, 0.0)
    return -float(yv @ slack)


def partial_derivative(
    i: int, g: ResidualLike, A: SparseMatrix, y: np.ndarray, kind: LossKind
) -> float:
    rows, vals = A.column(i)
    return column_derivative(rows, vals, _vector(g), y, LossKind.parse(kind))


def column_delta(
    rows: np.ndarray, vals: np.ndarray, h: float, y: np.ndarray, kind: LossKind, out: np.ndarray
) -> None:
    """Add the residual change caused by x^i += h into ``out``."""
    if kind is LossKind.SQUARE:
        out[rows] += h * vals
    else:
        out[rows] -= h * (y[rows] * vals)


def delta_g(
    updates: Iterable[tuple[int, float]],
    A: SparseMatrix,
    y: np.ndarray,
    kind: LossKind,
    out: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Sum of h_i A_:i (SL) or -h_i Diag(y) A_:i (LL, HL)."""
    kind = LossKind.parse(kind)
    if out is None:
        out = np.zeros(A.n_rows)
    for i, h in updates:
        rows, vals = A.column(i)
        column_delta(rows, vals, h, y, kind, out)
    return out


# -------------------- VALUES --------------------

def loss_value(g: ResidualLike, kind: Optional[LossKind] = None) -> float:
    if kind is None:
        if not isinstance(g, Residual):
            raise TypeError("loss kind is required for a raw residual vector")
        kind = g.kind
    kind = LossKind.parse(kind)
    v = _vector(g)
    if kind is LossKind.SQUARE:
        return 0.5 * float(v @ v)
    if kind is LossKind.LOGISTIC:
        return float(np.logaddexp(0.0, v).sum())
    hinge = np.maximum(0.0, 1.0 + v)
    return 0.5 * float(hinge @ hinge)


def loss_value_direct(A: SparseMatrix, x: np.ndarray, y: np.ndarray, kind: LossKind) -> float:
    """f(x) evaluated from the loss table, without a residual."""
    kind = LossKind.parse(kind)
    margin = A.matvec(np.asarray(x, dtype=float))
    if kind is LossKind.SQUARE:
        r = y - margin
        return 0.5 * float(r @ r)
    if kind is LossKind.LOGISTIC:
        return float(np.logaddexp(0.0, -y * margin).sum())
    hinge = np.maximum(0.0, 1.0 - y * margin)
    return 0.5 * float(hinge @ hinge)


def partial_derivative_direct(
    i: int, A: SparseMatrix, x: np.ndarray, y: np.ndarray, kind: LossKind
) -> float:
    """f'_i(x) from the closed forms written directly in x."""
    kind = LossKind.parse(kind)
    margin = A.matvec(np.asarray(x, dtype=float))
    rows, vals = A.column(i)
    if kind is LossKind.SQUARE:
        return float(vals @ (margin[rows] - y[rows]))
    ym = y[rows] * margin[rows]
    if kind is LossKind.LOGISTIC:
        return -float((y[rows] * vals) @ expit(-ym))
    active = ym < 1.0
    return -float((y[rows] * vals)[active] @ (1.0 - ym[active]))
