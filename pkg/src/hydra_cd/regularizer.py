"""Separable regularizers R(x) = sum_i R_i(x^i) and the exact coordinate prox."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DimensionError, NonFiniteError

BOX_SLACK = 1e-12


class RegKind(IntEnum):
    ZERO = 0
    L1 = 1
    L2 = 2
    ELASTIC_NET = 3
    BOX = 4

    @classmethod
    def parse(cls, value: Union[str, int, "RegKind"]) -> "RegKind":
        if isinstance(value, (RegKind, int)):
            return cls(value)
        key = str(value).strip().lower().replace("-", "_")
        names = {
            "zero": cls.ZERO,
            "none": cls.ZERO,
            "l1": cls.L1,
            "l2": cls.L2,
            "elastic": cls.ELASTIC_NET,
            "elastic_net": cls.ELASTIC_NET,
            "box": cls.BOX,
        }
        try:
            return names[key]
        except KeyError:
            raise ConfigError(f"unknown regularizer '{value}'") from None


@dataclass(frozen=True, eq=False)
class SeparableReg:
    """Per-coordinate regularizer parameters.

    L1: lam*|t|.  L2: (lam/2)*t^2.  ElasticNet: lam*|t| + (lam2/2)*t^2.
    Box: indicator of [lower, upper].  Zero: 0.
    """

    kinds: np.ndarray
    lam: np.ndarray
    lam2: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        d = self.kinds.size
        for name in ("lam", "lam2", "lower", "upper"):
            if getattr(self, name).shape != (d,):
                raise DimensionError(f"regularizer field '{name}' must have length {d}")
        if np.any(self.lam < 0) or np.any(self.lam2 < 0):
            raise ConfigError("regularization weights must be nonnegative")
        l2 = self.kinds == RegKind.L2
        if np.any(self.lam[l2] <= 0):
            raise ConfigError("L2 weights must be positive")
        if np.any(self.lower > self.upper):
            raise ConfigError("box bounds must satisfy lower <= upper")

    @property
    def d(self) -> int:
        return self.kinds.size

    @classmethod
    def uniform(
        cls,
        kind: Union[str, RegKind],
        d: int,
        lam: Union[float, np.ndarray] = 0.0,
        lam2: Union[float, np.ndarray] = 0.0,
        lower: Union[float, np.ndarray] = -np.inf,
        upper: Union[float, np.ndarray] = np.inf,
    ) -> "SeparableReg":
        kind = RegKind.parse(kind)

        def full(v):
            return np.broadcast_to(np.asarray(v, dtype=float), (d,)).copy()

        return cls(
            kinds=np.full(d, int(kind), dtype=np.int8),
            lam=full(lam),
            lam2=full(lam2),
            lower=full(lower),
            upper=full(upper),
        )

    @classmethod
    def zero(cls, d: int) -> "SeparableReg":
        return cls.uniform(RegKind.ZERO, d)

    @classmethod
    def l1(cls, d: int, lam: Union[float, np.ndarray]) -> "SeparableReg":
        return cls.uniform(RegKind.L1, d, lam=lam)

    def kind_at(self, i: int) -> RegKind:
        return RegKind(int(self.kinds[i]))

    def describe(self) -> str:
        kinds = {RegKind(int(k)).name.lower() for k in np.unique(self.kinds)}
        return "+".join(sorted(kinds))


# -------------------- PROX --------------------

def prox_step(
    i: int,
    fprime: float,
    m_ii: float,
    beta: float,
    x_i: float,
    reg: SeparableReg,
) -> float:
    """argmin_t  fprime*t + (m_ii*beta/2)*t^2 + R_i(x_i + t)."""
    if not (math.isfinite(fprime) and math.isfinite(x_i) and math.isfinite(m_ii) and math.isfinite(beta)):
        raise NonFiniteError("nonfinite prox input", coordinate=i)
    a = m_ii * beta
    if a <= 0:
        raise ConfigError(f"M_ii * beta must be positive, got {a}")

    kind = reg.kinds[i]
    if kind == RegKind.ZERO:
        return -fprime / a
    if kind == RegKind.L1:
        lam = reg.lam[i]
        lo = (-lam - fprime) / a
        hi = (lam - fprime) / a
        # closest point of [lo, hi] to -x_i
        return min(max(-x_i, lo), hi)
    if kind == RegKind.L2:
        lam = reg.lam[i]
        return -(fprime + lam * x_i) / (a + lam)
    if kind == RegKind.ELASTIC_NET:
        lam, lam2 = reg.lam[i], reg.lam2[i]
        v = a * x_i - fprime
        z = math.copysign(max(abs(v) - lam, 0.0), v) / (a + lam2)
        return z - x_i
    # box
    z = min(max(x_i - fprime / a, reg.lower[i]), reg.upper[i])
    return z - x_i


def reg_value(x: np.ndarray, reg: SeparableReg, coords: Optional[np.ndarray] = None) -> float:
    """sum_i R_i(x^i) over ``coords`` (all coordinates by default); +inf outside a box."""
    x = np.asarray(x, dtype=float)
    if coords is None:
        coords = np.arange(reg.d)
    if x.shape != coords.shape:
        raise DimensionError(f"x has shape {x.shape}, expected {coords.shape}")
    kinds = reg.kinds[coords]
    lam = reg.lam[coords]
    lam2 = reg.lam2[coords]

    box = kinds == RegKind.BOX
    if np.any(box):
        xb = x[box]
        lower, upper = reg.lower[coords][box], reg.upper[coords][box]
        # x + h lands on a bound only up to rounding
        slack = BOX_SLACK * (1.0 + np.abs(xb))
        if np.any(xb < lower - slack) or np.any(xb > upper + slack):
            return math.inf

    total = 0.0
    abs_part = (kinds == RegKind.L1) | (kinds == RegKind.ELASTIC_NET)
    total += float(lam[abs_part] @ np.abs(x[abs_part]))
    l2 = kinds == RegKind.L2
    total += 0.5 * float(lam[l2] @ (x[l2] ** 2))
    en = kinds == RegKind.ELASTIC_NET
    total += 0.5 * float(lam2[en] @ (x[en] ** 2))
    return total


def step_objective(t: float, fprime: float, m_ii: float, beta: float, x_i: float, reg: SeparableReg, i: int) -> float:
    """Value of the one-dimensional prox model at step t."""
    r = reg_value(np.array([x_i + t]), reg, np.array([i]))
    return fprime * t + 0.5 * m_ii * beta * t * t + r
