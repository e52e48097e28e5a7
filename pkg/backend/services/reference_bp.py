"""Plain BP over the complete Tanner graph of C_T.

This is the slow, obvious decoder the reduced one is checked against. It
keeps every degree-one repetition variable and every degree-two repetition
check, loops over nodes in Python and convolves by direct summation.

Schedule: the repetition checks fire once before the first flooding round
(the degree-one variables hand their channel messages up), then every round
floods over all checks and all variables of C_T.
"""

from __future__ import annotations

from typing import List, Tuple, Union
import logging

import numpy as np

import config
from errors import ConfigError
from services.channel import Observations
from services.code import PuncturePattern, RepCode, syndrome
from services.decoder import (
    DecodeResult,
    channel_posteriors,
    decide,
    expand_posteriors,
)

logger = logging.getLogger(__name__)


def direct_convolve(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """O(q^2) convolution over the additive group of GF(2^m)."""
    q = p1.size
    sym = np.arange(q)
    out = np.zeros(q)
    np.add.at(out, sym[:, None] ^ sym[None, :], np.outer(p1, p2))
    return out


class FullGraphDecoder:
    """BP on C_T with explicit repetition nodes."""

    def __init__(self, code: RepCode, channel: np.ndarray):
        self.code = code
        self.gf = code.field
        mother = code.mother
        n = mother.n

        # edges as (check, variable, label); mother edges first, in mother order
        edges: List[Tuple[int, int, int]] = list(
            zip(mother.check_idx.tolist(), mother.var_idx.tolist(), mother.labels.tolist())
        )
        self.n_mother_edges = len(edges)
        check = mother.n_checks
        for t in range(1, code.T):
            for v in range(n):
                # r * x_v + 1 * x_{tN+v} = 0
                edges.append((check, v, int(code.coeffs[t - 1, v])))
                edges.append((check, t * n + v, 1))
                check += 1
        self.n_checks = check
        self.edges = edges
        self.rep_checks = list(range(mother.n_checks, check))

        self.check_edges: List[List[int]] = [[] for _ in range(self.n_checks)]
        self.var_edges: List[List[int]] = [[] for _ in range(code.length)]
        for e, (c, v, _) in enumerate(edges):
            self.check_edges[c].append(e)
            self.var_edges[v].append(e)

        self.channel = channel  # (T*N, q)
        q = self.gf.q
        self.v2c = np.array([channel[v] for _, v, _ in edges])
        self.c2v = np.full((len(edges), q), 1.0 / q)
        self.iteration = 0

    # -- node updates -------------------------------------------------------

    def _check_update(self, c: int) -> None:
        gf = self.gf
        q = gf.q
        members = self.check_edges[c]
        rotated = {}
        for e in members:
            h = self.edges[e][2]
            # p~(h x) = p(x)
            p = np.zeros(q)
            p[gf.mul_table[h]] = self.v2c[e]
            rotated[e] = p
        for e in members:
            acc = np.zeros(q)
            acc[0] = 1.0
            for other in members:
                if other != e:
                    acc = direct_convolve(acc, rotated[other])
            h = self.edges[e][2]
            out = acc[gf.mul_table[h]]
            out[out < 0.0] = 0.0
            total = out.sum()
            self.c2v[e] = out / total if total > 0 else np.full(q, 1.0 / q)

    def _variable_update(self, v: int) -> None:
        members = self.var_edges[v]
        for e in members:
            p = self.channel[v].copy()
            for other in members:
                if other != e:
                    p *= self.c2v[other]
            total = p.sum()
            self.v2c[e] = p / total if total > 0 else np.full(p.size, 1.0 / p.size)

    # -- schedule -----------------------------------------------------------

    def start(self) -> None:
        for c in self.rep_checks:
            self._check_update(c)
        for v in range(self.code.length):
            self._variable_update(v)

    def iterate(self) -> None:
        for c in range(self.n_checks):
            self._check_update(c)
        for v in range(self.code.length):
            self._variable_update(v)
        self.iteration += 1

    def mother_posterior(self) -> np.ndarray:
        n = self.code.n
        post = self.channel[:n].copy()
        for v in range(n):
            for e in self.var_edges[v]:
                post[v] *= self.c2v[e]
        return post

    def tentative(self) -> Tuple[np.ndarray, bool, int]:
        x_hat = decide(self.mother_posterior())
        unsatisfied = int(np.count_nonzero(syndrome(self.code.mother, x_hat)))
        return x_hat, unsatisfied == 0, unsatisfied

    def mother_c2v(self) -> np.ndarray:
        return self.c2v[: self.n_mother_edges]

    def mother_v2c(self) -> np.ndarray:
        return self.v2c[: self.n_mother_edges]


def full_graph_decode(
    code: RepCode,
    received: Union[Observations, np.ndarray],
    pattern: PuncturePattern = None,
    max_iter: int = config.MAX_ITER,
) -> DecodeResult:
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    channel = expand_posteriors(code, channel_posteriors(code, received), pattern)
    decoder = FullGraphDecoder(code, channel)
    decoder.start()
    x_hat, ok, weight = decoder.tentative()
    trace = [weight]
    while not ok and decoder.iteration < max_iter:
        decoder.iterate()
        x_hat, ok, weight = decoder.tentative()
        trace.append(weight)
    logger.debug("full-graph BP finished after %d iteration(s), success=%s", decoder.iteration, ok)
    return DecodeResult(success=ok, estimate=x_hat, iterations=decoder.iteration, syndrome_trace=trace)
