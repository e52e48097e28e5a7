"""Belief propagation for C_T that iterates on the mother-code graph only.

The degree-one repetition symbols are folded into the initial message of
their mother symbol once (`initialize`); after that every iteration touches
exactly the M checks and N variables of C_1, whatever T is.

Messages are probability vectors of length q = 2^m indexed by symbol value.
Check nodes rotate each incoming vector by its label, convolve over the
additive group (GF(2))^m in the Walsh-Hadamard domain, and rotate back.
Schedule is flooding: all checks, then all variables, then a tentative
decision with syndrome check.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple, Union
import logging

import numpy as np

import config
from errors import ConfigError, DecodeError
from services.channel import Observations, symbol_posteriors
from services.code import PuncturePattern, RepCode, syndrome, with_puncture

logger = logging.getLogger(__name__)

# relative slack when breaking argmax ties toward the smallest symbol
TIE_RTOL = 1e-9


# ---------------------------------------------------------------------------
# Transform helpers
# ---------------------------------------------------------------------------

def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis.

    Applying it twice multiplies by q, so the inverse is fwht(a) / q.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    lead = a.shape[:-1]
    q = a.shape[-1]
    h = 1
    while h < q:
        blocks = a.reshape(*lead, q // (2 * h), 2, h)
        lo = blocks[..., 0, :]
        hi = blocks[..., 1, :]
        a = np.stack((lo + hi, lo - hi), axis=-2).reshape(*lead, q)
        h *= 2
    return a


def xor_convolve(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """(p1 * p2)(x) = sum over y + z = x of p1(y) p2(z), via the transform."""
    q = p1.shape[-1]
    return fwht(fwht(p1) * fwht(p2)) / q


def _leave_one_out(factors: np.ndarray) -> np.ndarray:
    """Along axis 1: product of every slice except the one at that index."""
    n = factors.shape[1]
    prefix = np.ones_like(factors)
    suffix = np.ones_like(factors)
    for j in range(1, n):
        prefix[:, j] = prefix[:, j - 1] * factors[:, j - 1]
    for j in range(n - 2, -1, -1):
        suffix[:, j] = suffix[:, j + 1] * factors[:, j + 1]
    return prefix * suffix


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DecoderState:
    code: RepCode
    var_init: np.ndarray  # (N, q)  p_v^(0)
    v2c: np.ndarray  # (E, q) in mother edge order
    c2v: np.ndarray  # (E, q)
    max_iter: int = config.MAX_ITER
    iteration: int = 0
    contradictions: int = 0

    @property
    def active_checks(self) -> int:
        return self.code.mother.n_checks


@dataclass(eq=False)
class DecodeResult:
    success: bool
    estimate: np.ndarray  # last tentative decision, N mother symbols
    iterations: int
    syndrome_trace: List[int] = dc_field(default_factory=list)
    contradictions: int = 0

    @property
    def codeword(self) -> Optional[np.ndarray]:
        return self.estimate if self.success else None


def _normalize(p: np.ndarray, state: Optional[DecoderState] = None) -> np.ndarray:
    total = p.sum(axis=-1, keepdims=True)
    dead = total[..., 0] <= 0
    if np.any(dead):
        count = int(dead.sum())
        if state is not None:
            state.contradictions += count
        logger.debug("%d zero-sum message(s); falling back to uniform", count)
        p = p.copy()
        p[dead] = 1.0
        total = p.sum(axis=-1, keepdims=True)
    return p / total


def channel_posteriors(code: RepCode, received: Union[Observations, np.ndarray]) -> np.ndarray:
    """Posteriors for the transmitted positions, in transmission order."""
    if isinstance(received, Observations):
        return symbol_posteriors(code.field, received)
    return np.asarray(received, dtype=np.float64)


def expand_posteriors(
    code: RepCode, posteriors: np.ndarray, pattern: Optional[PuncturePattern] = None
) -> np.ndarray:
    """(T*N, q) posteriors with uniform rows at punctured positions."""
    q = code.field.q
    if pattern is not None and not np.array_equal(pattern.positions, code.puncture.positions):
        code = with_puncture(code, pattern)
    if posteriors.shape != (code.n_transmitted, q):
        raise DecodeError(
            f"expected posteriors of shape ({code.n_transmitted}, {q}), got {posteriors.shape}"
        )
    full = np.full((code.length, q), 1.0 / q)
    full[code.transmitted_positions] = posteriors
    return full


# ---------------------------------------------------------------------------
# Decoder steps
# ---------------------------------------------------------------------------

def initialize(
    code: RepCode,
    received: Union[Observations, np.ndarray],
    pattern: Optional[PuncturePattern] = None,
    max_iter: int = config.MAX_ITER,
) -> DecoderState:
    """p_v^(0)(x) = xi * P(x | y_v) * prod_t P(r_{t,v} x | y_{tN+v})."""
    gf = code.field
    mother = code.mother
    n = mother.n
    full = expand_posteriors(code, channel_posteriors(code, received), pattern)

    p0 = full[:n].copy()
    for t in range(1, code.T):
        copy = full[t * n:(t + 1) * n]
        # factor(x) = copy(r * x)
        p0 *= np.take_along_axis(copy, gf.mul_table[code.coeffs[t - 1]], axis=1)

    state = DecoderState(
        code=code,
        var_init=p0,
        v2c=np.empty((mother.n_edges, gf.q)),
        c2v=np.full((mother.n_edges, gf.q), 1.0 / gf.q),
        max_iter=max_iter,
    )
    state.var_init = _normalize(p0, state)
    state.v2c = state.var_init[mother.var_idx].copy()
    return state


def check_to_variable(state: DecoderState) -> np.ndarray:
    mother = state.code.mother
    gf = mother.field
    q = gf.q
    labels = mother.labels

    # rotate: p~(y) = p(h^-1 y)
    rotated = np.take_along_axis(state.v2c, gf.mul_table[gf.inv_table[labels]], axis=1)
    spectra = fwht(rotated)[mother.check_edges]  # (M, dc, q)
    conv = fwht(_leave_one_out(spectra)) / q
    conv = conv.reshape(mother.n_edges, q)
    # un-rotate: p(x) = p~(h x)
    out = np.take_along_axis(conv, gf.mul_table[labels], axis=1)
    # cancellation in the transform leaves small negatives
    out[out < 0.0] = 0.0
    state.c2v = _normalize(out, state)
    return state.c2v


def variable_to_check(state: DecoderState) -> np.ndarray:
    mother = state.code.mother
    incoming = state.c2v[mother.var_edges]  # (N, dv, q)
    outgoing = state.var_init[:, None, :] * _leave_one_out(incoming)
    outgoing = _normalize(outgoing, state)
    v2c = np.empty_like(state.v2c)
    v2c[mother.var_edges] = outgoing
    state.v2c = v2c
    return state.v2c


def decide(posterior: np.ndarray) -> np.ndarray:
    """Row-wise argmax, ties going to the smallest symbol value."""
    top = posterior.max(axis=1, keepdims=True)
    return np.argmax(posterior >= top * (1.0 - TIE_RTOL), axis=1).astype(np.int64)


def tentative_decision(state: DecoderState) -> Tuple[np.ndarray, bool, int]:
    """(x_hat, all checks satisfied, number of unsatisfied checks)."""
    mother = state.code.mother
    incoming = state.c2v[mother.var_edges]
    posterior = state.var_init * np.prod(incoming, axis=1)
    x_hat = decide(posterior)
    unsatisfied = int(np.count_nonzero(syndrome(mother, x_hat)))
    return x_hat, unsatisfied == 0, unsatisfied


def decode(
    code: RepCode,
    received: Union[Observations, np.ndarray],
    pattern: Optional[PuncturePattern] = None,
    max_iter: int = config.MAX_ITER,
) -> DecodeResult:
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    state = initialize(code, received, pattern, max_iter)
    x_hat, ok, weight = tentative_decision(state)
    trace = [weight]
    while not ok and state.iteration < max_iter:
        check_to_variable(state)
        variable_to_check(state)
        state.iteration += 1
        x_hat, ok, weight = tentative_decision(state)
        trace.append(weight)
    return DecodeResult(
        success=ok,
        estimate=x_hat,
        iterations=state.iteration,
        syndrome_trace=trace,
        contradictions=state.contradictions,
    )
