"""GF(2^m) arithmetic for 1 <= m <= 10.

Symbols are plain integers in [0, 2^m). Bit i of a symbol is the coefficient
of alpha^i in the polynomial basis, which is also the order in which a
symbol's bits go on the channel (least significant first).

Multiplication goes through exp/log tables; a full q x q product table is
kept as well because the decoder permutes whole probability vectors by
`x -> h*x` and wants that as one fancy-indexing lookup.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import logging

import numpy as np

from errors import ConfigError, FieldError

logger = logging.getLogger(__name__)

# Primitive polynomials, bit k = coefficient of x^k.
#   m=1  x + 1            (degenerate: GF(2), alpha = 1)
#   m=2  x^2 + x + 1
#   m=3  x^3 + x + 1
#   m=4  x^4 + x + 1
#   m=5  x^5 + x^2 + 1
#   m=6  x^6 + x + 1
#   m=7  x^7 + x^3 + 1
#   m=8  x^8 + x^4 + x^3 + x^2 + 1
#   m=9  x^9 + x^4 + 1
#   m=10 x^10 + x^3 + 1
PRIMITIVE_POLYS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
}

MAX_M = max(PRIMITIVE_POLYS)


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """Immutable description of GF(2^m); safe to share between workers."""

    m: int
    poly: int
    exp_table: np.ndarray  # length q-1, exp_table[i] = alpha^i
    log_table: np.ndarray  # length q, log_table[0] = -1 (undefined)
    mul_table: np.ndarray = field(repr=False)  # q x q
    inv_table: np.ndarray = field(repr=False)  # inv_table[0] = 0 (undefined)
    bit_matrix: np.ndarray = field(repr=False)  # q x m, row x = bits of x

    @property
    def q(self) -> int:
        return 1 << self.m

    @property
    def order(self) -> int:
        """Order of the multiplicative group, 2^m - 1."""
        return self.q - 1

    def add(self, a: int, b: int) -> int:
        return int(a) ^ int(b)

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp_table[(self.log_table[a] + self.log_table[b]) % self.order])

    def inv(self, a: int) -> int:
        if a == 0:
            raise FieldError("zero has no multiplicative inverse")
        return int(self.exp_table[(-self.log_table[a]) % self.order])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def alpha_pow(self, k: int) -> int:
        return int(self.exp_table[k % self.order])

    # Vectorised helpers ---------------------------------------------------

    def mul_vec(self, a, b) -> np.ndarray:
        """Elementwise product of broadcastable integer arrays."""
        return self.mul_table[np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)]

    def to_bits(self, symbols) -> np.ndarray:
        """Symbols -> flat bit array, m bits per symbol, bit 0 first."""
        return self.bit_matrix[np.asarray(symbols, dtype=np.int64)].reshape(-1)

    def from_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.m)
        weights = 1 << np.arange(self.m, dtype=np.int64)
        return bits @ weights

    def times_perm(self, h: int) -> np.ndarray:
        """Index array x -> h*x, so p[times_perm(h^-1)] is x -> p(h^-1 x)."""
        return self.mul_table[int(h)]


@lru_cache(maxsize=None)
def build_field(m: int) -> FieldSpec:
    """Build (and cache) the field for extension degree m."""
    if m not in PRIMITIVE_POLYS:
        raise ConfigError(f"unsupported field degree m={m}; expected 1..{MAX_M}")

    poly = PRIMITIVE_POLYS[m]
    q = 1 << m
    order = q - 1

    exp_table = np.zeros(order, dtype=np.int64)
    log_table = np.full(q, -1, dtype=np.int64)
    x = 1
    for i in range(order):
        exp_table[i] = x
        log_table[x] = i
        x <<= 1
        if x & q:
            x ^= poly
    if x != 1 or np.any(log_table[1:] < 0):
        # the polynomial table is frozen, so this only fires if someone edits it
        raise ConfigError(f"polynomial 0x{poly:x} is not primitive for m={m}")

    symbols = np.arange(q, dtype=np.int64)
    logs = log_table.copy()
    logs[0] = 0
    mul_table = exp_table[(logs[:, None] + logs[None, :]) % order]
    mul_table[0, :] = 0
    mul_table[:, 0] = 0

    inv_table = np.zeros(q, dtype=np.int64)
    inv_table[1:] = exp_table[(-log_table[1:]) % order]

    bit_matrix = (symbols[:, None] >> np.arange(m, dtype=np.int64)[None, :]) & 1

    for table in (exp_table, log_table, mul_table, inv_table, bit_matrix):
        table.setflags(write=False)

    logger.debug("built GF(2^%d) with polynomial 0x%x", m, poly)
    return FieldSpec(
        m=m,
        poly=poly,
        exp_table=exp_table,
        log_table=log_table,
        mul_table=mul_table,
        inv_table=inv_table,
        bit_matrix=bit_matrix,
    )
