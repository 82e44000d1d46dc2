"""Composite problem L(x) = f(x) + R(x) and its serial evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError
from .loss import LossKind, init_residual, loss_value, m_diag
from .matrix import SparseMatrix
from .regularizer import SeparableReg, reg_value


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    A: SparseMatrix
    y: np.ndarray
    kind: LossKind
    reg: SeparableReg
    x_star: Optional[np.ndarray] = None
    L_star: Optional[float] = None

    @property
    def n(self) -> int:
        return self.A.n_rows

    @property
    def d(self) -> int:
        return self.A.n_cols

    def validate(self) -> "ProblemInstance":
        """Dimension checks, labels, and no zero column for any coordinate."""
        if self.y.shape != (self.n,):
            raise DimensionError(f"y has length {self.y.size}, matrix has {self.n} rows")
        if self.reg.d != self.d:
            raise DimensionError(f"regularizer covers {self.reg.d} coordinates, matrix has {self.d}")
        if self.x_star is not None and self.x_star.shape != (self.d,):
            raise DimensionError(f"x* has length {self.x_star.size}, expected {self.d}")
        m_diag(self.A, self.kind)
        init_residual(self.A, np.zeros(self.d), self.y, self.kind)
        return self

    def curvature(self) -> np.ndarray:
        return m_diag(self.A, self.kind)


def objective(problem: ProblemInstance, x: np.ndarray) -> float:
    """L(x) recomputed from scratch on one machine."""
    g = init_residual(problem.A, x, problem.y, problem.kind)
    return loss_value(g) + reg_value(x, problem.reg)
