import zlib
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from errors import CodeFileError, ConfigError, ConstructionError
from services.code import (
    CODE_FILE_MAGIC,
    PuncturePattern,
    build_code,
    build_mother,
    code_checksum,
    encode,
    extend,
    extract_info,
    is_codeword,
    load_code,
    parse_code,
    random_puncture,
    rank,
    save_code,
    serialize_code,
    syndrome,
    with_puncture,
)
from services.gf import build_field


def _resign(body: str) -> str:
    """Attach a valid crc32 line to a hand-edited code file body."""
    crc = zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF
    return body + f"crc32=0x{crc:08x}\n"


def _body(code) -> str:
    text = serialize_code(code)
    return text[: text.rindex("crc32=")]


class TestMotherConstruction:
    def test_regular_degrees(self, rate_sixth_code):
        mother = rate_sixth_code.mother
        assert np.all(np.bincount(mother.var_idx, minlength=mother.n) == 2)
        assert np.all(np.bincount(mother.check_idx, minlength=mother.n_checks) == 3)
        assert mother.n_checks == 48

    def test_no_parallel_edges(self, rate_sixth_code):
        mother = rate_sixth_code.mother
        pairs = set(zip(mother.check_idx.tolist(), mother.var_idx.tolist()))
        assert len(pairs) == mother.n_edges

    def test_labels_nonzero_and_full_rank(self, rate_sixth_code):
        mother = rate_sixth_code.mother
        assert mother.labels.min() >= 1
        assert mother.labels.max() < mother.field.q
        assert rank(mother.field, mother.H) == mother.n_checks

    def test_same_seed_same_code(self):
        a = build_code(m=4, n=30, dv=2, dc=3, T=2, seed=11)
        b = build_code(m=4, n=30, dv=2, dc=3, T=2, seed=11)
        assert a.structurally_equal(b)
        assert code_checksum(a) == code_checksum(b)

    def test_different_seed_different_code(self):
        a = build_code(m=4, n=30, dv=2, dc=3, T=2, seed=11)
        b = build_code(m=4, n=30, dv=2, dc=3, T=2, seed=12)
        assert code_checksum(a) != code_checksum(b)

    def test_divisibility(self):
        with pytest.raises(ConstructionError):
            build_mother(build_field(4), 10, 2, 3, seed=0)

    def test_degrees_must_give_positive_rate(self):
        with pytest.raises(ConstructionError):
            build_mother(build_field(4), 12, 3, 3, seed=0)

    def test_binary_cycle_codes_are_rank_deficient(self):
        # every row of a dv=2 binary H sums to the all-zero row
        with pytest.raises(ConstructionError):
            build_mother(build_field(1), 12, 2, 3, seed=0)

    def test_four_cycles_avoided_on_long_codes(self):
        mother = build_code(m=6, n=120, dv=2, dc=3, T=1, seed=5).mother
        pairs = set()
        for v in range(mother.n):
            checks = tuple(sorted(mother.check_idx[mother.var_idx == v].tolist()))
            assert checks not in pairs
            pairs.add(checks)


class TestRepetition:
    def test_rates(self, rate_sixth_code):
        assert rate_sixth_code.k == 24
        assert rate_sixth_code.info_bits == 192
        assert rate_sixth_code.rate == Fraction(1, 6)
        assert rate_sixth_code.length == 144

    def test_T1_is_the_mother_code(self):
        code = build_code(m=8, n=72, dv=2, dc=3, T=1, seed=7)
        assert code.rate == Fraction(1, 3)
        assert code.coeffs.shape == (0, 72)

    @pytest.mark.parametrize("T", [2, 3, 5])
    def test_rate_ladder(self, T):
        code = build_code(m=4, n=30, dv=2, dc=3, T=T, seed=2)
        assert code.rate == Fraction(1, 3 * T)

    def test_coefficient_domains(self, rate_sixth_code):
        mother = rate_sixth_code.mother
        assert rate_sixth_code.coeffs.min() >= 2
        ones = extend(mother, 3, "all-ones", seed=1)
        assert np.all(ones.coeffs == 1)
        nonzero = extend(mother, 3, "exclude-zero", seed=1)
        assert nonzero.coeffs.min() >= 1

    def test_binary_field_has_no_coefficients_outside_zero_one(self):
        mother = build_code(m=2, n=9, dv=2, dc=3, T=1, seed=3).mother
        binary = build_field(1)
        with pytest.raises(ConfigError):
            extend(replace(mother, field=binary), 2, "exclude-zero-one")

    def test_unknown_domain(self, small_code):
        with pytest.raises(ConfigError):
            extend(small_code.mother, 2, "everything")


class TestEncoding:
    def test_codeword_properties(self, rate_sixth_code, rng):
        code = rate_sixth_code
        info = rng.integers(0, 256, size=code.k)
        x = encode(code, info)
        assert x.size == code.length
        assert is_codeword(code, x)
        assert not np.any(syndrome(code.mother, x[: code.n]))
        copies = code.field.mul_vec(code.coeffs[0], x[: code.n])
        assert_array_equal(x[code.n:], copies)
        assert_array_equal(extract_info(code, x), info)

    def test_zero_info_gives_zero_word(self, small_code):
        assert not np.any(encode(small_code, np.zeros(small_code.k, dtype=int)))

    def test_linear(self, small_code, rng):
        a, b = rng.integers(0, 4, size=(2, small_code.k))
        assert_array_equal(encode(small_code, a ^ b), encode(small_code, a) ^ encode(small_code, b))

    def test_corrupted_word_is_rejected(self, small_code, rng):
        x = encode(small_code, rng.integers(0, 4, size=small_code.k))
        x[0] ^= 1
        assert not is_codeword(small_code, x)
        assert not is_codeword(small_code, x[:-1])

    def test_wrong_info_length(self, small_code):
        with pytest.raises(ConfigError):
            encode(small_code, [0] * (small_code.k + 1))


class TestPuncturing:
    def test_count_and_rate(self):
        mother = build_code(m=8, n=72, dv=2, dc=3, T=1, seed=7).mother
        pattern = random_puncture(mother, Fraction(1, 2), seed=4)
        assert len(pattern) == 24
        code = with_puncture(extend(mother, 1), pattern)
        assert code.rate == Fraction(1, 2)
        assert code.n_transmitted == 48
        assert np.intersect1d(code.transmitted_positions, pattern.positions).size == 0

    def test_float_target(self):
        mother = build_code(m=8, n=72, dv=2, dc=3, T=1, seed=7).mother
        assert len(random_puncture(mother, 0.5, seed=4)) == 24

    def test_unreachable_rate(self, rate_sixth_code):
        with pytest.raises(ConfigError):
            random_puncture(rate_sixth_code.mother, Fraction(1, 4), seed=0)
        with pytest.raises(ConfigError):
            random_puncture(rate_sixth_code.mother, 1, seed=0)

    def test_repeated_copies_are_never_punctured(self, small_code):
        with pytest.raises(ConfigError):
            with_puncture(small_code, PuncturePattern.of([small_code.n]))

    def test_build_with_puncture_target(self):
        code = build_code(m=4, n=30, dv=2, dc=3, T=2, seed=9, puncture_rate=0.5)
        assert len(code.puncture) == 10
        assert code.rate == Fraction(10, 50)


class TestCodeFile:
    def test_round_trip(self, rate_sixth_code, tmp_path):
        code = with_puncture(rate_sixth_code, PuncturePattern.of([3, 5, 70]))
        path = save_code(code, tmp_path / "nested" / "c2.code")
        loaded = load_code(path)
        assert loaded.structurally_equal(code)
        assert serialize_code(loaded) == path.read_text()

    def test_layout(self, small_code):
        lines = serialize_code(small_code).splitlines()
        assert lines[0] == CODE_FILE_MAGIC
        assert lines[1] == "m=2 poly=0x7 N=9 M=6 dv=2 dc=3 T=2 seed=3"
        assert sum(line.startswith("e ") for line in lines) == 18
        assert sum(line.startswith("r 1 ") for line in lines) == 9
        assert lines[-1].startswith("crc32=0x")

    def test_crc_mismatch(self, small_code):
        text = serialize_code(small_code)
        tampered = text.replace("e 0 ", "e 1 ", 1)
        with pytest.raises(CodeFileError, match="crc32"):
            parse_code(tampered)

    def test_truncated(self, small_code):
        lines = serialize_code(small_code).splitlines(keepends=True)
        with pytest.raises(CodeFileError, match="truncated"):
            parse_code("".join(lines[:-3]))
        with pytest.raises(CodeFileError):
            parse_code("")

    def test_bad_magic(self, small_code):
        body = _body(small_code).replace(CODE_FILE_MAGIC, "some-other-format v9")
        with pytest.raises(CodeFileError, match="not a code file"):
            parse_code(_resign(body))

    def test_polynomial_mismatch(self, small_code):
        body = _body(small_code).replace("poly=0x7", "poly=0x5")
        with pytest.raises(CodeFileError, match="polynomial"):
            parse_code(_resign(body))

    def test_zero_coefficient(self, small_code):
        lines = _body(small_code).splitlines(keepends=True)
        i = next(i for i, line in enumerate(lines) if line.startswith("r "))
        t, v = lines[i].split()[1:3]
        lines[i] = f"r {t} {v} 0x0\n"
        with pytest.raises(CodeFileError, match="nonzero"):
            parse_code(_resign("".join(lines)))

    def test_out_of_range_repetition_index(self, small_code):
        body = _body(small_code) + "r 2 0 0x1\n"
        with pytest.raises(CodeFileError, match="cannot parse"):
            parse_code(_resign(body))

    @pytest.mark.parametrize(
        "header",
        [
            "m=2 poly=0x7 N=0 M=0 dv=2 dc=3 T=1 seed=0",
            "m=2 poly=0x7 N=9 M=6 dv=0 dc=3 T=1 seed=0",
            "m=2 poly=0x7 N=9 M=0 dv=2 dc=3 T=1 seed=0",
            "m=2 poly=0x7 N=9 M=9 dv=3 dc=3 T=1 seed=0",
        ],
    )
    def test_inconsistent_header(self, header):
        with pytest.raises(CodeFileError, match="inconsistent header"):
            parse_code(_resign(f"{CODE_FILE_MAGIC}\n{header}\n"))

    def test_missing_edge(self, small_code):
        lines = _body(small_code).splitlines(keepends=True)
        i = next(i for i, line in enumerate(lines) if line.startswith("e "))
        del lines[i]
        with pytest.raises(CodeFileError, match="edges"):
            parse_code(_resign("".join(lines)))
