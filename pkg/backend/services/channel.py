"""Binary-input channels and per-symbol posteriors.

Bits are transmitted symbol by symbol, m bits each, bit 0 (the coefficient of
alpha^0) first. BPSK maps 0 -> +1 and 1 -> -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional
import logging

import numpy as np

from errors import ChannelError, ConfigError
from services.gf import FieldSpec

logger = logging.getLogger(__name__)

ERASED = -1


class ChannelKind(str, Enum):
    BEC = "bec"
    AWGN = "awgn"


@dataclass(frozen=True, eq=False)
class Observations:
    """What the receiver sees for a run of bits.

    BEC values are int8 in {0, 1, ERASED}; AWGN values are the real channel
    outputs y together with the noise variance used to produce them.
    """

    kind: ChannelKind
    values: np.ndarray
    sigma2: Optional[float] = None

    def __len__(self) -> int:
        return int(self.values.size)

    def take(self, index) -> "Observations":
        return Observations(self.kind, self.values[index], self.sigma2)


def awgn_sigma2(ebn0_db: float, rate_bits: float) -> float:
    """Noise variance for unit-energy BPSK at the given Eb/N0 and bit rate."""
    if not rate_bits > 0 or rate_bits > 1:
        raise ConfigError(f"rate must lie in (0, 1], got {rate_bits}")
    return 1.0 / (2.0 * rate_bits * 10.0 ** (ebn0_db / 10.0))


def transmit_bec(bits, epsilon: float, rng: np.random.Generator) -> Observations:
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"erasure probability must lie in [0, 1], got {epsilon}")
    values = np.asarray(bits, dtype=np.int8).copy()
    values[rng.random(values.size) < epsilon] = ERASED
    return Observations(ChannelKind.BEC, values)


def transmit_awgn(bits, ebn0_db: float, rate_bits: float, rng: np.random.Generator) -> Observations:
    sigma2 = awgn_sigma2(ebn0_db, rate_bits)
    s = 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
    y = s + np.sqrt(sigma2) * rng.standard_normal(s.size)
    return Observations(ChannelKind.AWGN, y, sigma2)


def noiseless(bits, kind: ChannelKind = ChannelKind.BEC) -> Observations:
    """Observations of an error-free channel (for tests and sanity runs)."""
    bits = np.asarray(bits)
    if kind is ChannelKind.BEC:
        return Observations(kind, bits.astype(np.int8))
    return Observations(kind, 1.0 - 2.0 * bits.astype(np.float64), 1e-12)


def _require_kind(obs: Observations) -> None:
    if obs.kind is ChannelKind.AWGN and not (obs.sigma2 and obs.sigma2 > 0):
        raise ChannelError("AWGN observations need a positive noise variance")


def symbol_posteriors(field: FieldSpec, obs: Observations) -> np.ndarray:
    """(len(obs) / m, 2^m) posteriors, one row per symbol."""
    _require_kind(obs)
    m = field.m
    if len(obs) % m:
        raise ChannelError(f"{len(obs)} bit observations do not split into {m}-bit symbols")
    bits = field.bit_matrix  # (q, m)

    if obs.kind is ChannelKind.BEC:
        y = obs.values.reshape(-1, m).astype(np.int64)
        known = y >= 0
        # (S, q, m): symbol x contradicts a known bit
        clash = known[:, None, :] & (bits[None, :, :] != y[:, None, :])
        p = (~clash.any(axis=2)).astype(np.float64)
    else:
        llr = (2.0 / obs.sigma2) * obs.values.reshape(-1, m)  # log P(b=0)/P(b=1)
        logp = -(llr @ bits.T.astype(np.float64))
        logp -= logp.max(axis=1, keepdims=True)
        p = np.exp(logp)

    total = p.sum(axis=1, keepdims=True)
    empty = total[:, 0] <= 0
    if np.any(empty):
        # only reachable with hand-built contradictory input
        logger.debug("%d symbol(s) with empty posterior; using uniform", int(empty.sum()))
        p[empty] = 1.0
        total[empty] = field.q
    return p / total


def symbol_posterior(field: FieldSpec, obs: Observations) -> np.ndarray:
    """Posterior of one symbol from exactly m bit observations."""
    if len(obs) != field.m:
        raise ChannelError(f"expected {field.m} bit observations, got {len(obs)}")
    return symbol_posteriors(field, obs)[0]


def symbols_to_bits(field: FieldSpec, symbols) -> np.ndarray:
    return field.to_bits(symbols)


def bits_to_symbols(field: FieldSpec, bits) -> np.ndarray:
    return field.from_bits(bits)
