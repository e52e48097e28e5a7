"""Mother codes, multiplicative repetition, encoding and the code file format.

A mother code C_1 is a (d_v, d_c)-regular LDPC code over GF(2^m) given by a
labelled Tanner graph. C_T appends T-1 copies of every mother symbol, copy t of
symbol v being r[t, v] * x_v. Puncturing only ever removes mother symbols.

Construction
------------
* Configuration model: shuffle the check sockets against the variable
  sockets, then swap sockets until no parallel edge is left. With enough
  variables, sockets sitting on a 4-cycle are swapped away as well
  (best effort; a warning is logged when some survive).
* Labels are uniform over GF(2^m) without zero. If H is rank deficient the
  labels are redrawn up to 10 times, then the whole graph is redrawn; after
  100 attempts the build fails.
* The encoder is a one-time Gauss-Jordan elimination: pivot columns carry
  parity, the remaining K = N - M columns carry information.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union
import logging
import math
import re
import zlib

import numpy as np

from errors import CodeFileError, ConfigError, ConstructionError
from services.gf import FieldSpec, build_field

logger = logging.getLogger(__name__)

COEFF_DOMAINS = ("exclude-zero", "exclude-zero-one", "all-ones")
DEFAULT_COEFF_DOMAIN = "exclude-zero-one"

CODE_FILE_MAGIC = "nbmr-code v1"

MAX_BUILD_ATTEMPTS = 100
MAX_LABEL_RETRIES = 10
MAX_SWAP_ROUNDS = 200


def derive_seed(seed: int, *tags: int) -> int:
    """Independent integer seed for a sub-task, reproducible from (seed, tags)."""
    state = np.random.SeedSequence([int(seed), *[int(t) for t in tags]]).generate_state(1)
    return int(state[0])


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MotherCode:
    field: FieldSpec
    n: int
    n_checks: int
    dv: int
    dc: int
    seed: int
    # edges sorted by (check, variable)
    check_idx: np.ndarray
    var_idx: np.ndarray
    labels: np.ndarray
    # encoder: x[parity_positions] = parity_map (*) x[info_positions]
    info_positions: np.ndarray
    parity_positions: np.ndarray
    parity_map: np.ndarray

    @property
    def k(self) -> int:
        return self.n - self.n_checks

    @property
    def n_edges(self) -> int:
        return int(self.labels.size)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @cached_property
    def check_edges(self) -> np.ndarray:
        """(M, d_c) edge indices per check."""
        return np.arange(self.n_edges).reshape(self.n_checks, self.dc)

    @cached_property
    def check_vars(self) -> np.ndarray:
        return self.var_idx[self.check_edges]

    @cached_property
    def check_labels(self) -> np.ndarray:
        return self.labels[self.check_edges]

    @cached_property
    def var_edges(self) -> np.ndarray:
        """(N, d_v) edge indices per variable, in check order."""
        order = np.argsort(self.var_idx, kind="stable")
        return order.reshape(self.n, self.dv)

    @cached_property
    def H(self) -> np.ndarray:
        h = np.zeros((self.n_checks, self.n), dtype=np.int64)
        h[self.check_idx, self.var_idx] = self.labels
        return h


@dataclass(frozen=True, eq=False)
class PuncturePattern:
    """Sorted, unique mother-code positions that are never transmitted."""

    positions: np.ndarray

    @classmethod
    def empty(cls) -> "PuncturePattern":
        return cls(np.zeros(0, dtype=np.int64))

    @classmethod
    def of(cls, positions: Iterable[int]) -> "PuncturePattern":
        return cls(np.unique(np.asarray(list(positions), dtype=np.int64)))

    def __len__(self) -> int:
        return int(self.positions.size)


@dataclass(frozen=True, eq=False)
class RepCode:
    mother: MotherCode
    T: int
    coeffs: np.ndarray  # (T-1, N); row t-1 multiplies copy t
    puncture: PuncturePattern = PuncturePattern.empty()

    @property
    def field(self) -> FieldSpec:
        return self.mother.field

    @property
    def n(self) -> int:
        return self.mother.n

    @property
    def k(self) -> int:
        return self.mother.k

    @property
    def length(self) -> int:
        return self.T * self.mother.n

    @property
    def n_transmitted(self) -> int:
        return self.length - len(self.puncture)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n_transmitted)

    @property
    def info_bits(self) -> int:
        return self.k * self.field.m

    @property
    def transmitted_bits(self) -> int:
        return self.n_transmitted * self.field.m

    @cached_property
    def transmitted_positions(self) -> np.ndarray:
        mask = np.ones(self.length, dtype=bool)
        mask[self.puncture.positions] = False
        return np.nonzero(mask)[0]

    def structurally_equal(self, other: "RepCode") -> bool:
        a, b = self.mother, other.mother
        return (
            a.field.m == b.field.m
            and (a.n, a.n_checks, a.dv, a.dc, a.seed) == (b.n, b.n_checks, b.dv, b.dc, b.seed)
            and np.array_equal(a.check_idx, b.check_idx)
            and np.array_equal(a.var_idx, b.var_idx)
            and np.array_equal(a.labels, b.labels)
            and self.T == other.T
            and np.array_equal(self.coeffs, other.coeffs)
            and np.array_equal(self.puncture.positions, other.puncture.positions)
        )


# ---------------------------------------------------------------------------
# Linear algebra over GF(2^m)
# ---------------------------------------------------------------------------

def _eliminate(gf: FieldSpec, matrix: np.ndarray) -> Tuple[int, List[int], np.ndarray]:
    """Gauss-Jordan elimination; returns (rank, pivot columns, reduced matrix)."""
    a = np.array(matrix, dtype=np.int64, copy=True)
    rows, cols = a.shape
    pivots: List[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nonzero = np.nonzero(a[r:, c])[0]
        if nonzero.size == 0:
            continue
        p = r + int(nonzero[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = gf.mul_table[gf.inv_table[a[r, c]], a[r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        if others.size:
            a[others] ^= gf.mul_table[a[others, c][:, None], a[r][None, :]]
        pivots.append(c)
        r += 1
    return r, pivots, a


def rank(gf: FieldSpec, matrix: np.ndarray) -> int:
    return _eliminate(gf, matrix)[0]


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------

def _parallel_sockets(check_of: np.ndarray, var_of: np.ndarray, n: int) -> np.ndarray:
    keys = check_of * n + var_of
    _, first = np.unique(keys, return_index=True)
    dup = np.ones(keys.size, dtype=bool)
    dup[first] = False
    return np.nonzero(dup)[0]


def _four_cycle_sockets(check_of: np.ndarray, var_of: np.ndarray) -> np.ndarray:
    """One socket of every variable that shares two checks with an earlier variable."""
    sockets_by_var: Dict[int, List[int]] = {}
    for s, v in enumerate(var_of.tolist()):
        sockets_by_var.setdefault(v, []).append(s)
    seen: Dict[Tuple[int, int], int] = {}
    bad: List[int] = []
    for v, sockets in sockets_by_var.items():
        checks = sorted(check_of[sockets].tolist())
        clash = False
        for i in range(len(checks)):
            for j in range(i + 1, len(checks)):
                pair = (checks[i], checks[j])
                if pair in seen and seen[pair] != v:
                    clash = True
                seen.setdefault(pair, v)
        if clash:
            bad.append(sockets[0])
    return np.asarray(bad, dtype=np.int64)


def _random_graph(
    n: int, n_checks: int, dv: int, dc: int, rng: np.random.Generator, avoid_4cycles: bool
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    var_of = np.repeat(np.arange(n, dtype=np.int64), dv)
    check_of = np.repeat(np.arange(n_checks, dtype=np.int64), dc)
    rng.shuffle(check_of)
    n_sockets = var_of.size

    for _ in range(MAX_SWAP_ROUNDS):
        bad = _parallel_sockets(check_of, var_of, n)
        if avoid_4cycles:
            bad = np.union1d(bad, _four_cycle_sockets(check_of, var_of))
        if bad.size == 0:
            break
        for s in bad.tolist():
            t = int(rng.integers(n_sockets))
            check_of[s], check_of[t] = check_of[t], check_of[s]

    if _parallel_sockets(check_of, var_of, n).size:
        return None
    if avoid_4cycles and _four_cycle_sockets(check_of, var_of).size:
        logger.warning("could not remove every 4-cycle (N=%d); keeping the graph", n)

    order = np.lexsort((var_of, check_of))
    return check_of[order], var_of[order]


def _assemble_mother(
    gf: FieldSpec,
    n: int,
    n_checks: int,
    dv: int,
    dc: int,
    seed: int,
    check_idx: np.ndarray,
    var_idx: np.ndarray,
    labels: np.ndarray,
) -> Optional[MotherCode]:
    """Attach the encoder to a graph; None when H is rank deficient."""
    h = np.zeros((n_checks, n), dtype=np.int64)
    h[check_idx, var_idx] = labels
    r, pivots, reduced = _eliminate(gf, h)
    if r < n_checks:
        return None
    parity_positions = np.asarray(pivots, dtype=np.int64)
    info_mask = np.ones(n, dtype=bool)
    info_mask[parity_positions] = False
    info_positions = np.nonzero(info_mask)[0]
    parity_map = reduced[:n_checks][:, info_positions]
    for arr in (check_idx, var_idx, labels, info_positions, parity_positions, parity_map):
        arr.setflags(write=False)
    return MotherCode(
        field=gf,
        n=n,
        n_checks=n_checks,
        dv=dv,
        dc=dc,
        seed=seed,
        check_idx=check_idx,
        var_idx=var_idx,
        labels=labels,
        info_positions=info_positions,
        parity_positions=parity_positions,
        parity_map=parity_map,
    )


def build_mother(
    field: FieldSpec,
    n: int,
    dv: int,
    dc: int,
    seed: int,
    avoid_4cycles: Optional[bool] = None,
) -> MotherCode:
    """Random (d_v, d_c)-regular code with uniform nonzero labels and full rank H."""
    if dv < 1 or dc < 2 or dv >= dc:
        raise ConstructionError(f"need 1 <= dv < dc, got dv={dv} dc={dc}")
    if n < dc:
        raise ConstructionError(f"N={n} is smaller than dc={dc}")
    if (n * dv) % dc:
        raise ConstructionError(f"dv*N = {dv * n} is not divisible by dc={dc}")
    n_checks = n * dv // dc
    if avoid_4cycles is None:
        avoid_4cycles = n >= 2 * dc * dc

    rng = np.random.default_rng(seed)
    attempts = 0
    while attempts < MAX_BUILD_ATTEMPTS:
        graph = _random_graph(n, n_checks, dv, dc, rng, avoid_4cycles)
        if graph is None:
            attempts += 1
            logger.info("graph draw %d left parallel edges; redrawing", attempts)
            continue
        check_idx, var_idx = graph
        # over GF(2) the only label is 1, so redrawing labels cannot help
        label_tries = MAX_LABEL_RETRIES if field.q > 2 else 1
        for _ in range(label_tries):
            attempts += 1
            labels = rng.integers(1, field.q, size=check_idx.size, dtype=np.int64)
            mother = _assemble_mother(
                field, n, n_checks, dv, dc, seed, check_idx.copy(), var_idx.copy(), labels
            )
            if mother is not None:
                logger.info(
                    "built (%d,%d) mother code over GF(2^%d): N=%d M=%d K=%d after %d attempt(s)",
                    dv, dc, field.m, n, n_checks, mother.k, attempts,
                )
                return mother
            logger.info("rank-deficient H on attempt %d; redrawing labels", attempts)
            if attempts >= MAX_BUILD_ATTEMPTS:
                break
    raise ConstructionError(
        f"no full-rank (dv={dv}, dc={dc}) code over GF(2^{field.m}) with N={n} "
        f"after {MAX_BUILD_ATTEMPTS} attempts"
    )


def extend(
    mother: MotherCode,
    T: int,
    coeff_domain: str = DEFAULT_COEFF_DOMAIN,
    seed: int = 0,
) -> RepCode:
    """C_T from C_1 with i.i.d. uniform repetition coefficients."""
    if T < 1:
        raise ConfigError(f"repetition parameter T must be >= 1, got {T}")
    if coeff_domain not in COEFF_DOMAINS:
        raise ConfigError(f"unknown coefficient domain {coeff_domain!r}; expected one of {COEFF_DOMAINS}")
    q = mother.field.q
    shape = (T - 1, mother.n)
    rng = np.random.default_rng(seed)
    if coeff_domain == "all-ones":
        coeffs = np.ones(shape, dtype=np.int64)
    elif coeff_domain == "exclude-zero":
        coeffs = rng.integers(1, q, size=shape, dtype=np.int64)
    else:
        if q <= 2:
            raise ConfigError("GF(2) has no coefficients outside {0, 1}")
        coeffs = rng.integers(2, q, size=shape, dtype=np.int64)
    coeffs.setflags(write=False)
    return RepCode(mother=mother, T=T, coeffs=coeffs)


def _as_fraction(rate: Union[Fraction, float, str, int]) -> Fraction:
    if isinstance(rate, float):
        return Fraction(rate).limit_denominator(1000)
    return Fraction(rate)


def random_puncture(mother: MotherCode, target_rate, seed: int) -> PuncturePattern:
    """Uniformly random mother positions raising the rate to target_rate."""
    target = _as_fraction(target_rate)
    if target < mother.rate or target >= 1:
        raise ConfigError(
            f"rate {target} is unreachable by puncturing a rate-{mother.rate} mother code"
        )
    count = math.ceil(mother.n * (1 - mother.rate / target))
    if count == 0:
        return PuncturePattern.empty()
    rng = np.random.default_rng(seed)
    positions = np.sort(rng.choice(mother.n, size=count, replace=False)).astype(np.int64)
    return PuncturePattern(positions)


def with_puncture(code: RepCode, pattern: PuncturePattern) -> RepCode:
    if pattern.positions.size and (pattern.positions.min() < 0 or pattern.positions.max() >= code.n):
        raise ConfigError("puncture positions must index mother-code symbols")
    return replace(code, puncture=pattern)


def build_code(
    m: int,
    n: int,
    dv: int,
    dc: int,
    T: int,
    seed: int,
    coeff_domain: str = DEFAULT_COEFF_DOMAIN,
    puncture_rate=None,
) -> RepCode:
    """Mother, repetition and puncturing from one seed."""
    field = build_field(m)
    mother = build_mother(field, n, dv, dc, seed)
    code = extend(mother, T, coeff_domain, derive_seed(seed, 1))
    if puncture_rate is not None:
        code = with_puncture(code, random_puncture(mother, puncture_rate, derive_seed(seed, 2)))
    return code


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def encode(code: RepCode, info) -> np.ndarray:
    """K information symbols -> T*N codeword symbols."""
    info = np.asarray(info, dtype=np.int64).reshape(-1)
    mother = code.mother
    gf = code.field
    if info.size != mother.k:
        raise ConfigError(f"expected {mother.k} information symbols, got {info.size}")
    if info.size and (info.min() < 0 or info.max() >= gf.q):
        raise ConfigError(f"information symbols must lie in [0, {gf.q})")

    x = np.zeros(mother.n, dtype=np.int64)
    x[mother.info_positions] = info
    products = gf.mul_table[mother.parity_map, info[None, :]]
    x[mother.parity_positions] = np.bitwise_xor.reduce(products, axis=1)
    copies = gf.mul_table[code.coeffs, x[None, :]]
    return np.concatenate([x, copies.reshape(-1)])


def extract_info(code: RepCode, x) -> np.ndarray:
    return np.asarray(x, dtype=np.int64)[code.mother.info_positions]


def syndrome(mother: MotherCode, x) -> np.ndarray:
    """Value of every mother check on the first N symbols of x."""
    x = np.asarray(x, dtype=np.int64)
    products = mother.field.mul_table[mother.check_labels, x[mother.check_vars]]
    return np.bitwise_xor.reduce(products, axis=1)


def is_codeword(code: RepCode, x) -> bool:
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size != code.length:
        return False
    n = code.n
    if np.any(syndrome(code.mother, x[:n])):
        return False
    expected = code.field.mul_table[code.coeffs, x[None, :n]]
    return bool(np.array_equal(expected.reshape(-1), x[n:]))


# ---------------------------------------------------------------------------
# Code files
# ---------------------------------------------------------------------------

_HEADER = re.compile(
    r"^m=(\d+) poly=0x([0-9a-f]+) N=(\d+) M=(\d+) dv=(\d+) dc=(\d+) T=(\d+) seed=(\d+)$"
)
_CRC = re.compile(r"^crc32=0x([0-9a-f]{8})$")


def serialize_code(code: RepCode) -> str:
    mother = code.mother
    gf = code.field
    lines = [
        CODE_FILE_MAGIC,
        f"m={gf.m} poly=0x{gf.poly:x} N={mother.n} M={mother.n_checks} "
        f"dv={mother.dv} dc={mother.dc} T={code.T} seed={mother.seed}",
    ]
    for c, v, h in zip(mother.check_idx.tolist(), mother.var_idx.tolist(), mother.labels.tolist()):
        lines.append(f"e {c} {v} 0x{h:x}")
    for t in range(1, code.T):
        for v, r in enumerate(code.coeffs[t - 1].tolist()):
            lines.append(f"r {t} {v} 0x{r:x}")
    for v in code.puncture.positions.tolist():
        lines.append(f"p {v}")
    body = "\n".join(lines) + "\n"
    crc = zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF
    return body + f"crc32=0x{crc:08x}\n"


def code_checksum(code: RepCode) -> str:
    return serialize_code(code).rstrip("\n").rsplit("\n", 1)[1].split("=", 1)[1]


def parse_code(text: str) -> RepCode:
    lines = text.splitlines(keepends=True)
    if len(lines) < 3:
        raise CodeFileError("code file is truncated")
    crc_match = _CRC.match(lines[-1].rstrip("\n"))
    if crc_match is None:
        raise CodeFileError("code file is truncated: missing crc32 line")
    body = "".join(lines[:-1])
    crc = zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF
    if crc != int(crc_match.group(1), 16):
        raise CodeFileError(f"crc32 mismatch: file says 0x{crc_match.group(1)}, content is 0x{crc:08x}")

    if lines[0].rstrip("\n") != CODE_FILE_MAGIC:
        raise CodeFileError(f"not a code file (expected {CODE_FILE_MAGIC!r})")
    header = _HEADER.match(lines[1].rstrip("\n"))
    if header is None:
        raise CodeFileError(f"malformed header: {lines[1].strip()!r}")
    m, poly, n, n_checks, dv, dc, T, seed = (
        int(g, 16) if i == 1 else int(g) for i, g in enumerate(header.groups())
    )
    try:
        gf = build_field(m)
    except ConfigError as exc:
        raise CodeFileError(str(exc)) from exc
    if gf.poly != poly:
        raise CodeFileError(f"polynomial 0x{poly:x} does not match GF(2^{m}) (0x{gf.poly:x})")
    if T < 1:
        raise CodeFileError("T must be >= 1")
    if not 1 <= dv < dc or n < dc or n * dv != n_checks * dc:
        raise CodeFileError(
            f"inconsistent header: N={n} M={n_checks} dv={dv} dc={dc} (need 1 <= dv < dc, N >= dc, N*dv = M*dc)"
        )

    edges: List[Tuple[int, int, int]] = []
    coeffs = np.zeros((T - 1, n), dtype=np.int64)
    seen_coeffs = np.zeros((T - 1, n), dtype=bool)
    punctured: List[int] = []
    for lineno, raw in enumerate(lines[2:-1], start=3):
        parts = raw.split()
        try:
            if parts[0] == "e" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2]), int(parts[3], 16)))
            elif parts[0] == "r" and len(parts) == 4:
                t, v = int(parts[1]), int(parts[2])
                if not (1 <= t < T and 0 <= v < n):
                    raise ValueError(raw)
                coeffs[t - 1, v] = int(parts[3], 16)
                seen_coeffs[t - 1, v] = True
            elif parts[0] == "p" and len(parts) == 2:
                punctured.append(int(parts[1]))
            else:
                raise ValueError(raw)
        except (ValueError, IndexError) as exc:
            raise CodeFileError(f"line {lineno}: cannot parse {raw.strip()!r}") from exc

    if len(edges) != n * dv:
        raise CodeFileError(f"expected {n * dv} edges for N={n} dv={dv}, found {len(edges)}")
    if not seen_coeffs.all():
        raise CodeFileError("missing repetition coefficients")
    if np.any(coeffs == 0) or np.any(coeffs >= gf.q):
        raise CodeFileError("repetition coefficients must be nonzero field elements")

    arr = np.asarray(edges, dtype=np.int64)
    check_idx, var_idx, labels = arr[:, 0], arr[:, 1], arr[:, 2]
    if (
        check_idx.min() < 0 or check_idx.max() >= n_checks
        or var_idx.min() < 0 or var_idx.max() >= n
        or labels.min() < 1 or labels.max() >= gf.q
    ):
        raise CodeFileError("edge index or label out of range")
    if np.any(np.bincount(var_idx, minlength=n) != dv) or np.any(
        np.bincount(check_idx, minlength=n_checks) != dc
    ):
        raise CodeFileError("graph is not regular")
    if _parallel_sockets(check_idx, var_idx, n).size:
        raise CodeFileError("graph has parallel edges")
    order = np.lexsort((var_idx, check_idx))
    mother = _assemble_mother(
        gf, n, n_checks, dv, dc, seed,
        check_idx[order].copy(), var_idx[order].copy(), labels[order].copy(),
    )
    if mother is None:
        raise CodeFileError("parity-check matrix is rank deficient")
    coeffs.setflags(write=False)
    code = RepCode(mother=mother, T=T, coeffs=coeffs)
    if punctured:
        code = with_puncture(code, PuncturePattern.of(punctured))
    return code


def save_code(code: RepCode, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_code(code), encoding="utf-8")
    return path


def load_code(path: Union[str, Path]) -> RepCode:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CodeFileError(f"{path}: not UTF-8 text") from exc
    return parse_code(text)
