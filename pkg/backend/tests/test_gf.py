import importlib

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from errors import ConfigError, FieldError
from services.gf import MAX_M, PRIMITIVE_POLYS, build_field


def _slow_mul(a: int, b: int, m: int, poly: int) -> int:
    """Shift-and-add multiplication modulo the field polynomial."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return out


class TestFieldTables:
    @pytest.mark.parametrize("m", range(1, MAX_M + 1))
    def test_alpha_generates_the_multiplicative_group(self, m):
        gf = build_field(m)
        assert sorted(gf.exp_table.tolist()) == list(range(1, gf.q))
        assert gf.log_table[0] == -1

    @pytest.mark.parametrize("m", [2, 3, 4, 8])
    def test_products_match_polynomial_multiplication(self, m):
        gf = build_field(m)
        for a in range(gf.q):
            for b in range(0, gf.q, max(1, gf.q // 16)):
                assert gf.mul(a, b) == _slow_mul(a, b, m, PRIMITIVE_POLYS[m])
                assert gf.mul_table[a, b] == gf.mul(a, b)

    def test_field_is_cached(self):
        assert build_field(5) is build_field(5)

    def test_unsupported_degree(self):
        with pytest.raises(ConfigError):
            build_field(0)
        with pytest.raises(ConfigError):
            build_field(MAX_M + 1)

    def test_tables_are_read_only(self):
        gf = build_field(3)
        with pytest.raises(ValueError):
            gf.mul_table[1, 1] = 0


class TestArithmetic:
    @pytest.mark.parametrize("m", [1, 3, 8, 10])
    def test_inverse(self, m):
        gf = build_field(m)
        for a in range(1, gf.q, max(1, gf.q // 64)):
            assert gf.mul(a, gf.inv(a)) == 1
            assert gf.inv_table[a] == gf.inv(a)

    def test_inverse_of_zero(self):
        gf = build_field(4)
        with pytest.raises(FieldError):
            gf.inv(0)
        with pytest.raises(ValueError):
            gf.div(3, 0)

    def test_addition_is_xor(self):
        gf = build_field(8)
        assert gf.add(0x53, 0xCA) == 0x53 ^ 0xCA
        assert gf.add(7, 7) == 0

    def test_division_undoes_multiplication(self):
        gf = build_field(6)
        for a, b in [(1, 1), (5, 9), (63, 2), (17, 40)]:
            assert gf.div(gf.mul(a, b), b) == a

    def test_alpha_powers_wrap(self):
        gf = build_field(4)
        assert gf.alpha_pow(0) == 1
        assert gf.alpha_pow(1) == 2
        assert gf.alpha_pow(gf.order) == 1
        assert gf.alpha_pow(-1) == gf.inv(2)

    def test_gf8_by_hand(self):
        # x^3 = x + 1 over GF(2)
        gf = build_field(3)
        assert gf.poly == 0xB
        assert_array_equal(gf.to_bits([gf.alpha_pow(3)]), [1, 1, 0])
        assert_array_equal(gf.to_bits([gf.alpha_pow(4)]), [0, 1, 1])
        assert_array_equal(gf.to_bits([gf.alpha_pow(6)]), [1, 0, 1])
        assert gf.add(gf.alpha_pow(1), gf.alpha_pow(0)) == gf.alpha_pow(3)
        assert gf.inv(gf.alpha_pow(1)) == gf.alpha_pow(6) == 5
        assert gf.mul(gf.alpha_pow(3), gf.alpha_pow(5)) == gf.alpha_pow(1) == 2

    def test_distributive(self, rng):
        gf = build_field(7)
        a, b, c = rng.integers(0, gf.q, size=(3, 200))
        assert_array_equal(gf.mul_vec(a, b ^ c), gf.mul_vec(a, b) ^ gf.mul_vec(a, c))

    def test_times_perm_is_a_permutation(self):
        gf = build_field(5)
        for h in (1, 2, 17, 31):
            assert sorted(gf.times_perm(h).tolist()) == list(range(gf.q))


class TestBits:
    def test_bit_order_is_least_significant_first(self):
        gf = build_field(4)
        assert_array_equal(gf.to_bits([0b0110, 0b0001]), [0, 1, 1, 0, 1, 0, 0, 0])

    @pytest.mark.parametrize("m", [1, 2, 8])
    def test_bits_back_to_symbols(self, m, rng):
        gf = build_field(m)
        symbols = rng.integers(0, gf.q, size=50)
        bits = gf.to_bits(symbols)
        assert bits.size == 50 * m
        assert_array_equal(gf.from_bits(bits), symbols)


@pytest.mark.parametrize(
    "name",
    [
        "models",
        "services.gf",
        "services.code",
        "services.channel",
        "services.decoder",
        "services.reference_bp",
        "services.density",
        "services.simulation",
    ],
)
def test_module_docstrings(name):
    assert importlib.import_module(name).__doc__
