"""Synthetic problems: block-angular matrices and LASSO instances with a certified optimum.

Certified instances are built backwards from the optimality conditions. A
residual direction g* is drawn first; every column is then rescaled so that
A_i^T g* sits exactly on the subgradient boundary (support coordinates) or
strictly inside it (all other coordinates). Any x* with that support and
the matching signs is then optimal for y = A x* - g*.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CertificateError, ConfigError
from .loss import LossKind
from .matrix import Partition, SparseMatrix, contiguous_partition
from .problem import ProblemInstance
from .regularizer import RegKind, SeparableReg

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 10
CERTIFICATE_TOL = 1e-8
MIN_COSINE = 0.2
MAX_REDRAWS = 50
SLACK_RANGE = (0.1, 0.9)
MAGNITUDE_RANGE = (0.5, 1.5)


@dataclass(frozen=True)
class GeneratorSpec:
    """Shape, density and optimum parameters of a generated instance.

    Rows are ordered block by block: ``local_rows`` rows per block whose
    nonzeros stay inside that block's ``block_size`` columns, followed by
    ``global_rows`` rows that may touch any column.
    """

    c: int = 4
    local_rows: int = 32
    global_rows: int = 8
    block_size: int = 16
    nnz_local: int = 4
    nnz_global: int = 8
    lam: float = 1.0
    support: int = 8
    seed: int = 0
    l2_ratio: float = 0.0

    def __post_init__(self):
        for name in ("c", "block_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.local_rows < 0 or self.global_rows < 0:
            raise ConfigError("row counts must be >= 0")
        if self.local_rows + self.global_rows == 0:
            raise ConfigError("the matrix needs at least one row")
        if self.local_rows and not 1 <= self.nnz_local <= self.block_size:
            raise ConfigError(
                f"nnz per local row must lie in [1, {self.block_size}], got {self.nnz_local}"
            )
        if self.global_rows and not 1 <= self.nnz_global <= self.d:
            raise ConfigError(f"nnz per global row must lie in [1, {self.d}], got {self.nnz_global}")
        if not 0 <= self.support <= self.d:
            raise ConfigError(f"support size must lie in [0, {self.d}], got {self.support}")
        if not self.lam > 0:
            raise ConfigError("lam must be positive")
        if self.l2_ratio < 0:
            raise ConfigError("l2_ratio must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def d(self) -> int:
        return self.c * self.block_size

    @property
    def n(self) -> int:
        return self.c * self.local_rows + self.global_rows

    def partition(self) -> Partition:
        """The natural partition: node l owns the columns of local block l."""
        return contiguous_partition(self.d, self.c)


# -------------------- BLOCK ANGULAR --------------------

def _row_patterns(spec: GeneratorSpec, rng: np.random.Generator) -> list[np.ndarray]:
    s, d = spec.block_size, spec.d
    patterns = []
    for l in range(spec.c):
        for _ in range(spec.local_rows):
            picked = rng.choice(s, size=spec.nnz_local, replace=False)
            patterns.append(np.sort(picked) + l * s)
    for _ in range(spec.global_rows):
        patterns.append(np.sort(rng.choice(d, size=spec.nnz_global, replace=False)))
    return patterns


def _fill_empty_columns(
    spec: GeneratorSpec, patterns: list[np.ndarray], rng: np.random.Generator
) -> None:
    """Move entries into empty columns without changing any row's density.

    An entry may only move within its row and only out of a column that keeps
    at least one other entry, so the block-angular structure survives.
    """
    d, s = spec.d, spec.block_size
    counts = np.bincount(np.concatenate(patterns), minlength=d) if patterns else np.zeros(d, int)
    global_rows = np.arange(spec.c * spec.local_rows, spec.n)
    for i in np.flatnonzero(counts == 0):
        l = i // s
        local = np.arange(l * spec.local_rows, (l + 1) * spec.local_rows)
        hosts = rng.permutation(np.concatenate([local, global_rows]))
        for r in hosts:
            cols = patterns[r]
            donors = cols[counts[cols] >= 2]
            if donors.size == 0:
                continue
            j = donors[rng.integers(donors.size)]
            patterns[r] = np.sort(np.append(cols[cols != j], i))
            counts[j] -= 1
            counts[i] += 1
            break
        else:
            raise ConfigError(
                f"too few nonzeros to give column {i} an entry; raise nnz_local, nnz_global or the row counts"
            )


def _nonzero_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    v = rng.standard_normal(size)
    v[v == 0.0] = 1.0
    return v


def gen_block_angular(spec: GeneratorSpec, rng: Optional[np.random.Generator] = None) -> SparseMatrix:
    """Block-angular matrix with exactly the requested nonzeros per row and no empty column."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    patterns = _row_patterns(spec, rng)
    _fill_empty_columns(spec, patterns, rng)

    rows = np.concatenate([np.full(p.size, r) for r, p in enumerate(patterns)])
    cols = np.concatenate(patterns)
    values = _nonzero_normal(rng, cols.size)
    logger.debug("Block-angular matrix %dx%d with %d nonzeros", spec.n, spec.d, cols.size)
    return SparseMatrix.from_triplets(spec.n, spec.d, rows, cols, values)


# -------------------- CERTIFICATE --------------------

@dataclass(frozen=True)
class CertificateReport:
    support_residual: float
    offsupport_excess: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.support_residual <= self.tol and self.offsupport_excess <= self.tol


def check_certificate(
    A: SparseMatrix,
    y: np.ndarray,
    x_star: np.ndarray,
    lam: float,
    lam2: Optional[np.ndarray] = None,
    tol: float = CERTIFICATE_TOL,
) -> CertificateReport:
    """Subgradient optimality of x* for 1/2||Ax - y||^2 + lam||x||_1 (+ sum lam2_i x_i^2 / 2).

    On the support A_i^T g* + lam*sign(x_i) + lam2_i*x_i must vanish; off it
    |A_i^T g*| may not exceed lam. Both are measured in absolute terms.
    """
    g = A.matvec(x_star) - y
    grad = A.rmatvec(g)
    quad = np.zeros_like(x_star) if lam2 is None else lam2 * x_star
    on = x_star != 0
    support_residual = (
        float(np.max(np.abs(grad[on] + lam * np.sign(x_star[on]) + quad[on]))) if on.any() else 0.0
    )
    offsupport_excess = max(0.0, float(np.max(np.abs(grad[~on]) - lam))) if (~on).any() else 0.0
    return CertificateReport(support_residual, offsupport_excess, tol)


@dataclass(frozen=True, eq=False)
class CertifiedInstance:
    A: SparseMatrix
    y: np.ndarray
    lam: float
    x_star: np.ndarray
    g_star: np.ndarray
    L_star: float
    spec: GeneratorSpec
    lam2: Optional[np.ndarray] = None
    attempt: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x_star)

    def check_certificate(self, tol: float = CERTIFICATE_TOL) -> CertificateReport:
        return check_certificate(self.A, self.y, self.x_star, self.lam, self.lam2, tol)

    def regularizer(self) -> SeparableReg:
        d = self.A.n_cols
        if self.lam2 is None:
            return SeparableReg.l1(d, self.lam)
        return SeparableReg.uniform(RegKind.ELASTIC_NET, d, lam=self.lam, lam2=self.lam2)

    def to_problem(self) -> ProblemInstance:
        return ProblemInstance(
            A=self.A,
            y=self.y,
            kind=LossKind.SQUARE,
            reg=self.regularizer(),
            x_star=self.x_star,
            L_star=self.L_star,
        )


def _scale_column(
    vals: np.ndarray, g_rows: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Redraw values until their correlation with g* is not too weak; returns (values, v^T g)."""
    for _ in range(MAX_REDRAWS):
        dot = float(vals @ g_rows)
        denom = float(np.linalg.norm(vals) * np.linalg.norm(g_rows))
        if denom > 0 and abs(dot) >= MIN_COSINE * denom:
            return vals, dot
        vals = _nonzero_normal(rng, vals.size)
    dot = float(vals @ g_rows)
    if dot == 0.0:
        raise CertificateError("column is orthogonal to the residual direction")
    return vals, dot


def _build(spec: GeneratorSpec, rng: np.random.Generator, attempt: int) -> CertifiedInstance:
    A0 = gen_block_angular(spec, rng)
    d, lam, r = spec.d, spec.lam, spec.l2_ratio
    g_star = rng.standard_normal(spec.n)

    support = np.sort(rng.choice(d, size=spec.support, replace=False))
    on_support = np.zeros(d, dtype=bool)
    on_support[support] = True
    signs = rng.choice([-1.0, 1.0], size=d)
    draws = rng.uniform(*MAGNITUDE_RANGE, size=d)
    slack = rng.uniform(*SLACK_RANGE, size=d)

    csc = A0.csc.copy()
    x_star = np.zeros(d)
    lam2 = np.zeros(d) if r > 0 else None
    for i in range(d):
        lo, hi = csc.indptr[i], csc.indptr[i + 1]
        rows = csc.indices[lo:hi]
        vals, dot = _scale_column(csc.data[lo:hi].copy(), g_star[rows], rng)
        if on_support[i]:
            # A_i^T g* = -sign_i * target
            target = lam * (1.0 + draws[i]) if r > 0 else lam
            alpha = -signs[i] * target / dot
        else:
            alpha = signs[i] * slack[i] * lam / dot
        csc.data[lo:hi] = alpha * vals
        if r > 0:
            lam2[i] = r * float(csc.data[lo:hi] @ csc.data[lo:hi])
        if on_support[i]:
            magnitude = lam * draws[i] / lam2[i] if r > 0 else draws[i]
            x_star[i] = signs[i] * magnitude

    A = SparseMatrix(csc)
    y = A.matvec(x_star) - g_star
    g = A.matvec(x_star) - y
    L_star = 0.5 * float(g @ g) + lam * float(np.abs(x_star).sum())
    if lam2 is not None:
        L_star += 0.5 * float(lam2 @ (x_star * x_star))
    return CertifiedInstance(
        A=A, y=y, lam=lam, x_star=x_star, g_star=g, L_star=L_star,
        spec=spec, lam2=lam2, attempt=attempt,
    )


def gen_lasso_certified(spec: GeneratorSpec, tol: float = CERTIFICATE_TOL) -> CertifiedInstance:
    """LASSO (or elastic net when ``l2_ratio > 0``) instance whose optimum is known.

    Attempt a uses the sub-seed (seed, a); an instance that fails its own
    certificate is discarded.
    """
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, attempt])
        try:
            inst = _build(spec, rng, attempt)
        except CertificateError as e:
            logger.warning("Attempt %d discarded: %s", attempt, e)
            continue
        report = inst.check_certificate(tol)
        if report.passed:
            logger.info(
                "Certified instance %dx%d, support=%d, L*=%.12g (attempt %d)",
                spec.n, spec.d, spec.support, inst.L_star, attempt,
            )
            return inst
        logger.warning(
            "Attempt %d failed its certificate (support residual %.3g, off-support excess %.3g)",
            attempt, report.support_residual, report.offsupport_excess,
        )
    raise CertificateError(f"no certified instance after {MAX_ATTEMPTS} attempts (seed {spec.seed})")
