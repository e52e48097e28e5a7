"""Density evolution on the BEC for multiplicatively repeated (d_v, d_c) codes.

Over the BEC (all-zero codeword) the support of every BP message is a linear
subspace of GF(2)^m, so a message is summarised by the dimension of that
subspace. A density is a length-(m+1) probability vector over dimensions.

    variable node:  intersection of subspaces  ->  boxdot  (identity: dim m)
    check node:     sum of subspaces           ->  boxtimes (identity: dim 0)

    P(0)   = E boxdot ... boxdot E            (T copies)
    Q(l+1) = P(l) boxtimes ... boxtimes P(l)  (d_c - 1 copies)
    P(l+1) = P(0) boxdot Q(l+1)               (d_v - 1 copies of Q)

Both kernels are conditional distributions of the output dimension given the
two input dimensions, for uniformly random subspaces; coefficients come from
2-Gaussian binomials evaluated in the log2 domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List
import logging

import numpy as np
from scipy.stats import binom

import config
from errors import ConfigError
from services.gf import MAX_M

logger = logging.getLogger(__name__)

# once the erasure mass is this small the linearised map governs the tail
LINEAR_REGIME = 1e-3
# successive P_0 closer than this: the recursion sits on a fixed point
STALL_EPS = 1e-14


# ---------------------------------------------------------------------------
# Gaussian binomials and operator kernels
# ---------------------------------------------------------------------------

def _log2_gaussian_binomial(m: int, k: int) -> float:
    if k < 0 or k > m:
        return -np.inf
    ell = np.arange(k, dtype=np.float64)
    return float(np.sum(np.log2(2.0 ** m - 2.0 ** ell) - np.log2(2.0 ** k - 2.0 ** ell)))


def gaussian_binomial(m: int, k: int) -> float:
    """Number of k-dimensional subspaces of GF(2)^m (0 when k > m)."""
    if k < 0 or k > m:
        return 0.0
    return float(2.0 ** _log2_gaussian_binomial(m, k))


@dataclass(frozen=True, eq=False)
class OperatorTables:
    m: int
    boxdot: np.ndarray = field(repr=False)  # [k, i, j]
    boxtimes: np.ndarray = field(repr=False)  # [k, i, j]


@lru_cache(maxsize=None)
def build_tables(m: int) -> OperatorTables:
    if not 1 <= m <= MAX_M:
        raise ConfigError(f"density evolution supports 1 <= m <= {MAX_M}, got {m}")
    lgb = _log2_gaussian_binomial
    size = m + 1
    c_dot = np.zeros((size, size, size))
    c_times = np.zeros((size, size, size))
    for k in range(size):
        for i in range(size):
            for j in range(size):
                if k <= i and k <= j and i + j - k <= m:
                    c_dot[k, i, j] = 2.0 ** (
                        (i - k) * (j - k) + lgb(i, k) + lgb(m - i, j - k) - lgb(m, j)
                    )
                if i <= k and j <= k and k - i <= j:
                    c_times[k, i, j] = 2.0 ** (
                        (k - i) * (k - j) + lgb(m - i, m - k) + lgb(i, k - j) - lgb(m, m - j)
                    )
    c_dot.setflags(write=False)
    c_times.setflags(write=False)
    return OperatorTables(m=m, boxdot=c_dot, boxtimes=c_times)


def _apply(kernel: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # sum_ij kernel[k, i, j] p_i q_j
    out = (kernel @ q) @ p
    return np.clip(out, 0.0, None)


def boxdot(p: np.ndarray, q: np.ndarray, tables: OperatorTables) -> np.ndarray:
    return _apply(tables.boxdot, p, q)


def boxtimes(p: np.ndarray, q: np.ndarray, tables: OperatorTables) -> np.ndarray:
    return _apply(tables.boxtimes, p, q)


def point_mass(m: int, dim: int) -> np.ndarray:
    d = np.zeros(m + 1)
    d[dim] = 1.0
    return d


def _fold(op, p: np.ndarray, copies: int, identity: np.ndarray, tables: OperatorTables) -> np.ndarray:
    out = identity
    for _ in range(copies):
        out = op(out, p, tables)
    return out


# ---------------------------------------------------------------------------
# Channel and initial densities
# ---------------------------------------------------------------------------

def channel_density(m: int, epsilon: float) -> np.ndarray:
    """E_i = C(m, i) eps^i (1 - eps)^(m - i)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"erasure probability must lie in [0, 1], got {epsilon}")
    return binom.pmf(np.arange(m + 1), m, epsilon)


def initial_density(
    m: int, T: int, epsilon: float, puncture: float = 0.0, tables: OperatorTables = None
) -> np.ndarray:
    """P(0): the mother copy (possibly punctured) intersected with T-1 copies."""
    if T < 1:
        raise ConfigError(f"repetition parameter T must be >= 1, got {T}")
    if not 0.0 <= puncture < 1.0:
        raise ConfigError(f"puncture fraction must lie in [0, 1), got {puncture}")
    tables = tables or build_tables(m)
    e = channel_density(m, epsilon)
    mother = (1.0 - puncture) * e + puncture * point_mass(m, m)
    return _fold(boxdot, e, T - 1, mother, tables)


# ---------------------------------------------------------------------------
# Evolution and thresholds
# ---------------------------------------------------------------------------

@dataclass
class EvolveResult:
    converged: bool
    reason: str  # converged | stable-tail | fixed-point | unstable | max-iter
    trajectory: List[float]  # P_0 per round
    density: np.ndarray

    @property
    def iterations(self) -> int:
        return len(self.trajectory) - 1


def stability_radius(
    m: int, dc: int, T: int, epsilon: float, dv: int = 2, puncture: float = 0.0
) -> float:
    """Spectral radius of one DE round linearised around the all-known density.

    Only d_v = 2 has a first-order term; with d_v >= 3 the intersection of two
    small subspaces is second order and the radius is 0.
    """
    if dv != 2:
        return 0.0
    tables = build_tables(m)
    p0 = initial_density(m, T, epsilon, puncture, tables)
    # L[k, j] = (dc - 1) * sum_i C_dot[k, i, j] P0_i, k, j >= 1
    linear = (dc - 1) * np.einsum("kij,i->kj", tables.boxdot, p0)[1:, 1:]
    if linear.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(linear))))


def evolve(
    m: int,
    dc: int,
    T: int,
    epsilon: float,
    max_iter: int = config.DE_MAX_ITER,
    delta: float = config.DE_DELTA,
    dv: int = 2,
    puncture: float = 0.0,
) -> EvolveResult:
    if dc < 2:
        raise ConfigError(f"check degree must be >= 2, got {dc}")
    if dv < 1:
        raise ConfigError(f"variable degree must be >= 1, got {dv}")
    tables = build_tables(m)
    p0 = initial_density(m, T, epsilon, puncture, tables)
    known = point_mass(m, 0)
    unknown = point_mass(m, m)

    p = p0
    trajectory = [float(p[0])]
    if 1.0 - p[0] <= delta:
        return EvolveResult(True, "converged", trajectory, p)
    # all-known density repels: no amount of iterating reaches it
    radius = stability_radius(m, dc, T, epsilon, dv, puncture)
    if radius > 1.0:
        return EvolveResult(False, "unstable", trajectory, p)

    stalled = False
    for _ in range(max_iter):
        q = _fold(boxtimes, p, dc - 1, known, tables)
        p_next = boxdot(p0, _fold(boxdot, q, dv - 1, unknown, tables), tables)
        trajectory.append(float(p_next[0]))
        if 1.0 - p_next[0] <= delta:
            return EvolveResult(True, "converged", trajectory, p_next)
        if abs(p_next[0] - p[0]) < STALL_EPS:
            stalled = True
            p = p_next
            break
        p = p_next

    erasure = 1.0 - p[0]
    if stalled:
        return EvolveResult(False, "fixed-point", trajectory, p)
    tail = trajectory[-3:]
    decreasing = len(tail) == 3 and tail[0] < tail[1] < tail[2]
    if erasure <= LINEAR_REGIME and decreasing and radius < 1.0:
        return EvolveResult(True, "stable-tail", trajectory, p)
    return EvolveResult(False, "max-iter", trajectory, p)


def threshold(
    m: int,
    dc: int,
    T: int,
    bisect_tol: float = config.BISECT_TOL,
    dv: int = 2,
    puncture: float = 0.0,
    max_iter: int = config.DE_MAX_ITER,
    delta: float = config.DE_DELTA,
) -> float:
    """sup{eps : P_0 -> 1} by bisection on [0, 1]; midpoint of the last bracket."""
    if not bisect_tol > 0:
        raise ConfigError(f"bisection tolerance must be positive, got {bisect_tol}")
    lo, hi = 0.0, 1.0
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        result = evolve(m, dc, T, mid, max_iter, delta, dv, puncture)
        logger.debug("m=%d dc=%d T=%d eps=%.7f -> %s after %d", m, dc, T, mid, result.reason, result.iterations)
        if result.converged:
            lo = mid
        else:
            hi = mid
    eps_star = 0.5 * (lo + hi)
    logger.info("threshold m=%d dv=%d dc=%d T=%d puncture=%.4f: %.6f", m, dv, dc, T, puncture, eps_star)
    return eps_star


def design_rate(dc: int, T: int, dv: int = 2, puncture: float = 0.0) -> float:
    return (1.0 - dv / dc) / (T - puncture)


def shannon_limit(rate: float) -> float:
    """Largest erasure probability a rate-R code can survive, 1 - R."""
    return 1.0 - rate


def normalized_gap(epsilon_star: float, rate: float) -> float:
    return (1.0 - epsilon_star - rate) / rate
