"""Stepsize theory: data-dependent constants, safe beta and iteration bounds.

Q = (D^M)^{-1/2} M (D^M)^{-1/2} has ones on its diagonal and does not depend
on the global factor in M, so it is always built from A and its column
norms. sigma is the largest eigenvalue of Q and sigma' the largest
generalized eigenvalue of (Q, B^Q), where B^Q keeps only the diagonal
blocks of Q induced by the partition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DenseLimitError,
    SigmaNotConvergedError,
    SingularBlockError,
    ZeroColumnError,
)
from .loss import LossKind, m_diag as loss_m_diag
from .matrix import Partition, SparseMatrix, blocks_per_row, nnz_per_row
from .regularizer import RegKind, SeparableReg

logger = logging.getLogger(__name__)

DENSE_LIMIT = 500
SIGMA_TOL = 1e-6
SIGMA_MAX_ITER = 5000
SAFETY_FACTOR = 10.0


class SigmaSource(str, Enum):
    EXACT_POWER_ITERATION = "exact_power_iteration"
    EXACT_DENSE = "exact_dense"
    UPPER_BOUND_OMEGA = "upper_bound_omega"


class SigmaPrimeSource(str, Enum):
    EXACT_SMALL_INSTANCE = "exact_small_instance"
    UPPER_BOUND_OMEGA_PRIME = "upper_bound_omega_prime"
    SKIPPED_DOUBLING = "skipped_doubling"


@dataclass(frozen=True)
class StepsizeInfo:
    omega: int
    omega_prime: int
    sigma: float
    sigma_source: SigmaSource
    sigma_prime: float
    sigma_prime_source: SigmaPrimeSource
    beta1: float
    beta2: float
    beta: float
    s: int
    s1: int
    tau: int
    c: int
    sigma_estimate: Optional[float] = None

    def as_dict(self) -> dict:
        out = asdict(self)
        out["sigma_source"] = self.sigma_source.value
        out["sigma_prime_source"] = self.sigma_prime_source.value
        return out


@dataclass(frozen=True)
class ConvergenceInputs:
    mu_f: float
    mu_R: float
    epsilon: float
    rho: float
    initial_gap: float

    def __post_init__(self):
        if self.mu_f < 0 or self.mu_R < 0:
            raise ConfigError("strong convexity moduli must be nonnegative")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.rho < 1:
            raise ConfigError("rho must lie in (0, 1)")
        if self.initial_gap <= 0:
            raise ConfigError("initial gap must be positive")
        if self.epsilon >= self.initial_gap:
            raise ConfigError("epsilon must be smaller than the initial gap")


# -------------------- OMEGA --------------------

def omega(A: SparseMatrix) -> int:
    """Max nonzeros in a row."""
    counts = nnz_per_row(A)
    return int(counts.max()) if counts.size else 0


def omega_prime(A: SparseMatrix, P: Partition) -> int:
    """Max number of blocks touched by a row."""
    counts = blocks_per_row(A, P)
    return int(counts.max()) if counts.size else 0


# -------------------- SIGMA --------------------

def _inv_sqrt_diag(A: SparseMatrix, m_diag: Optional[np.ndarray]) -> np.ndarray:
    if m_diag is not None and np.any(np.asarray(m_diag) <= 0):
        raise ZeroColumnError(np.flatnonzero(np.asarray(m_diag) <= 0).tolist())
    norms = A.col_sq_norms
    if np.any(norms <= 0):
        raise ZeroColumnError(np.flatnonzero(norms <= 0).tolist())
    return 1.0 / np.sqrt(norms)


def sigma(
    A: SparseMatrix,
    m_diag: Optional[np.ndarray] = None,
    tol: float = SIGMA_TOL,
    max_iter: int = SIGMA_MAX_ITER,
    seed: int = 0,
) -> float:
    """Largest eigenvalue of Q by power iteration.

    Stops when |lambda_{t+1} - lambda_t| <= tol * lambda_{t+1}. The returned
    Rayleigh quotient never exceeds the true sigma.
    """
    scale = _inv_sqrt_diag(A, m_diag)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.n_cols)
    v /= np.linalg.norm(v)

    previous = None
    estimate = 0.0
    for t in range(1, max_iter + 1):
        w = scale * A.rmatvec(A.matvec(scale * v))
        estimate = float(v @ w)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # start vector fell into the null space
            v = rng.standard_normal(A.n_cols)
            v /= np.linalg.norm(v)
            previous = None
            continue
        v = w / norm
        if previous is not None and abs(estimate - previous) <= tol * estimate:
            logger.debug("sigma converged after %d iterations: %.10g", t, estimate)
            return estimate
        previous = estimate
    raise SigmaNotConvergedError(estimate, max_iter)


def q_matrix(A: SparseMatrix, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense Q, for small instances only."""
    if A.n_cols > dense_limit:
        raise DenseLimitError(f"d={A.n_cols} exceeds the dense oracle limit {dense_limit}")
    scale = _inv_sqrt_diag(A, None)
    gram = (A.csc.T @ A.csc).toarray()
    return scale[:, None] * gram * scale[None, :]


def block_diagonal(G: np.ndarray, P: Partition) -> np.ndarray:
    """B^G: entries of G whose row and column lie in the same block."""
    same = P.block_of[:, None] == P.block_of[None, :]
    return np.where(same, G, 0.0)


def sigma_exact(A: SparseMatrix, dense_limit: int = DENSE_LIMIT) -> float:
    """Largest eigenvalue of Q from a dense symmetric eigensolver."""
    Q = q_matrix(A, dense_limit)
    return float(scipy.linalg.eigvalsh(Q)[-1])


def sigma_prime_exact(
    A: SparseMatrix,
    m_diag: Optional[np.ndarray],
    P: Partition,
    dense_limit: int = DENSE_LIMIT,
) -> float:
    """Largest generalized eigenvalue of (Q, B^Q)."""
    if m_diag is not None:
        _inv_sqrt_diag(A, m_diag)
    Q = q_matrix(A, dense_limit)
    BQ = block_diagonal(Q, P)
    try:
        values = scipy.linalg.eigh(Q, BQ, eigvals_only=True)
    except np.linalg.LinAlgError as e:
        raise SingularBlockError(f"block diagonal of Q is not positive definite: {e}") from e
    return float(values[-1])


# -------------------- BETA --------------------

def s1_of(s: int) -> int:
    return max(1, s - 1)


def beta2_prefactor(tau: int, s: int) -> float:
    """tau/s - (tau-1)/s1, the coefficient in front of the partition term."""
    return tau / s - (tau - 1) / s1_of(s)


def _check_tau(tau: int, s: int) -> None:
    if not 1 <= tau <= s:
        raise ConfigError(f"tau must lie in [1, {s}], got {tau}")


def beta_star(tau: int, s: int, sigma: float, sigma_prime: float) -> tuple[float, float, float]:
    """(beta1*, beta2*, beta1* + beta2*)."""
    _check_tau(tau, s)
    if sigma < 1 or sigma_prime < 1:
        raise ConfigError("sigma and sigma' must be >= 1")
    beta1 = 1.0 + (tau - 1) * (sigma - 1) / s1_of(s)
    beta2 = beta2_prefactor(tau, s) * ((sigma_prime - 1) / sigma_prime) * sigma
    return beta1, beta2, beta1 + beta2


def beta_safe_doubling(tau: int, s: int, sigma: float) -> float:
    """2 * beta1*, an upper bound on beta* that does not need sigma'."""
    if tau < 2:
        raise ConfigError("beta doubling requires tau >= 2")
    _check_tau(tau, s)
    return 2.0 * (1.0 + (tau - 1) * (sigma - 1) / s1_of(s))


def beta_partition_free(tau: int, s: int, c: int, sigma: float) -> float:
    """Safe beta without sigma': exact for c = 1, doubled beta1* for tau >= 2, else sigma' <= c."""
    if c == 1:
        return beta_star(tau, s, sigma, 1.0)[0]
    if tau >= 2:
        return beta_safe_doubling(tau, s, sigma)
    return beta_star(tau, s, sigma, float(c))[2]


def eso_expectation_formula(G: np.ndarray, x: np.ndarray, tau: int, P: Partition) -> float:
    """Closed form of E[(x^S)^T G x^S] for the tau-distributed sampling."""
    s = P.s
    _check_tau(tau, s)
    s1 = s1_of(s)
    a1 = 1.0 - (tau - 1) / s1
    a2 = (tau - 1) / s1
    a3 = tau / s - (tau - 1) / s1
    diag_term = float(np.diag(G) @ (x * x))
    full_term = float(x @ G @ x)
    off_block_term = float(x @ (G - block_diagonal(G, P)) @ x)
    return (tau / s) * (a1 * diag_term + a2 * full_term + a3 * off_block_term)


def leading_factor_gamma(tau: int, s: int, c: int, sigma: float, sigma_prime: float) -> float:
    """d * beta* / (c * tau) = s * beta* / tau."""
    _, _, beta = beta_star(tau, s, sigma, sigma_prime)
    return s * beta / tau


# -------------------- ITERATION COMPLEXITY --------------------

def theorem1_iterations(d: int, c: int, tau: int, beta: float, inputs: ConvergenceInputs) -> int:
    """Iterations after which P(L(x_T) - L* <= epsilon) >= 1 - rho."""
    if inputs.mu_f + inputs.mu_R <= 0:
        raise ConfigError("mu_f + mu_R must be positive")
    if beta < 1:
        raise ConfigError("beta must be >= 1")
    factor = (d / (c * tau)) * ((beta + inputs.mu_R) / (inputs.mu_f + inputs.mu_R))
    bound = factor * math.log(inputs.initial_gap / (inputs.epsilon * inputs.rho))
    return max(0, math.ceil(bound))


def strong_convexity_moduli(
    A: SparseMatrix,
    kind: LossKind,
    reg: SeparableReg,
    dense_limit: int = DENSE_LIMIT,
) -> tuple[float, float]:
    """(mu_f, mu_R) with respect to the norm sum_i M_ii (x^i)^2.

    mu_f is lambda_min(Q) for the square loss and 0 otherwise; mu_R is
    min_i w_i / M_ii over the quadratic regularizer weights.
    """
    kind = LossKind.parse(kind)
    mu_f = 0.0
    if kind is LossKind.SQUARE:
        mu_f = max(0.0, float(scipy.linalg.eigvalsh(q_matrix(A, dense_limit))[0]))
    weights = np.where(
        reg.kinds == RegKind.L2, reg.lam, np.where(reg.kinds == RegKind.ELASTIC_NET, reg.lam2, 0.0)
    )
    mu_R = float(np.min(weights / loss_m_diag(A, kind)))
    return mu_f, mu_R


# -------------------- PRICE OF DISTRIBUTION --------------------

@dataclass(frozen=True)
class CurvePoint:
    c: int
    tau: int
    s: int
    sigma: float
    beta1: float
    scaled_beta1: float
    scaled_safe_beta: float


def price_of_distribution(
    d: int, cs: Iterable[int], taus: Iterable[int], sigmas: Iterable[float]
) -> list[CurvePoint]:
    """d*beta1*/(c*tau) and d*beta_safe/(c*tau) over grids of (c, tau, sigma)."""
    points = []
    sigmas = list(sigmas)
    for c in cs:
        if d % c:
            raise ConfigError(f"{c} nodes do not divide d={d}")
        s = d // c
        for tau in taus:
            _check_tau(tau, s)
            for sig in sigmas:
                b1 = beta_star(tau, s, sig, 1.0)[0]
                safe = beta_partition_free(tau, s, c, sig)
                points.append(
                    CurvePoint(
                        c=c,
                        tau=tau,
                        s=s,
                        sigma=float(sig),
                        beta1=b1,
                        scaled_beta1=d * b1 / (c * tau),
                        scaled_safe_beta=d * safe / (c * tau),
                    )
                )
    return points


# -------------------- STEPSIZE INFO --------------------

def compute_stepsize_info(
    A: SparseMatrix,
    P: Partition,
    tau: int,
    kind: LossKind = LossKind.SQUARE,
    sigma_mode: str = "power",
    sigma_prime_mode: str = "bound",
    tol: float = SIGMA_TOL,
    max_iter: int = SIGMA_MAX_ITER,
    seed: int = 0,
    dense_limit: int = DENSE_LIMIT,
) -> StepsizeInfo:
    """Collect omega, omega', sigma, sigma' and the resulting safe beta.

    sigma_mode: power | exact | bound.  sigma_prime_mode: bound | exact | doubling.
    A power-iteration estimate is inflated by (1 + 10*tol) and capped by omega
    before it enters beta.
    """
    _check_tau(tau, P.s)
    md = loss_m_diag(A, kind)
    om = max(1, omega(A))
    omp = max(1, omega_prime(A, P))

    estimate = None
    if sigma_mode == "power":
        try:
            estimate = sigma(A, md, tol=tol, max_iter=max_iter, seed=seed)
            sig = min(float(om), max(1.0, estimate * (1.0 + SAFETY_FACTOR * tol)))
            sig_source = SigmaSource.EXACT_POWER_ITERATION
        except SigmaNotConvergedError as e:
            logger.warning("%s; falling back to omega=%d", e, om)
            sig, sig_source = float(om), SigmaSource.UPPER_BOUND_OMEGA
    elif sigma_mode == "exact":
        estimate = sigma_exact(A, dense_limit)
        sig, sig_source = max(1.0, estimate), SigmaSource.EXACT_DENSE
    elif sigma_mode == "bound":
        sig, sig_source = float(om), SigmaSource.UPPER_BOUND_OMEGA
    else:
        raise ConfigError(f"unknown sigma mode '{sigma_mode}'")

    if sigma_prime_mode == "doubling":
        if tau < 2:
            raise ConfigError("sigma' can only be skipped (beta doubling) when tau >= 2")
        b1 = beta_star(tau, P.s, sig, 1.0)[0]
        beta = beta_safe_doubling(tau, P.s, sig)
        info = StepsizeInfo(
            omega=om, omega_prime=omp, sigma=sig, sigma_source=sig_source,
            sigma_prime=math.nan, sigma_prime_source=SigmaPrimeSource.SKIPPED_DOUBLING,
            beta1=b1, beta2=beta - b1, beta=beta, s=P.s, s1=s1_of(P.s), tau=tau, c=P.c,
            sigma_estimate=estimate,
        )
        logger.info("Stepsize: beta=%.6g (doubled beta1, sigma=%.6g)", beta, sig)
        return info

    if sigma_prime_mode == "exact":
        try:
            sp_value = max(1.0, sigma_prime_exact(A, md, P, dense_limit))
            sp_source = SigmaPrimeSource.EXACT_SMALL_INSTANCE
        except (SingularBlockError, DenseLimitError) as e:
            logger.warning("sigma' unavailable (%s); using omega'=%d", e, omp)
            sp_value, sp_source = float(omp), SigmaPrimeSource.UPPER_BOUND_OMEGA_PRIME
    elif sigma_prime_mode == "bound":
        sp_value, sp_source = float(omp), SigmaPrimeSource.UPPER_BOUND_OMEGA_PRIME
    else:
        raise ConfigError(f"unknown sigma' mode '{sigma_prime_mode}'")

    b1, b2, beta = beta_star(tau, P.s, sig, sp_value)
    logger.info(
        "Stepsize: beta=%.6g (sigma=%.6g [%s], sigma'=%.6g [%s])",
        beta, sig, sig_source.value, sp_value, sp_source.value,
    )
    return StepsizeInfo(
        omega=om, omega_prime=omp, sigma=sig, sigma_source=sig_source,
        sigma_prime=sp_value, sigma_prime_source=sp_source,
        beta1=b1, beta2=b2, beta=beta, s=P.s, s1=s1_of(P.s), tau=tau, c=P.c,
        sigma_estimate=estimate,
    )
