import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from errors import ConfigError, DecodeError
from services.channel import ERASED, ChannelKind, Observations, noiseless, transmit_awgn, transmit_bec
from services.code import PuncturePattern, build_code, encode, with_puncture
from services.decoder import (
    channel_posteriors,
    check_to_variable,
    decide,
    decode,
    expand_posteriors,
    fwht,
    initialize,
    tentative_decision,
    variable_to_check,
    xor_convolve,
)
from services.reference_bp import FullGraphDecoder, direct_convolve, full_graph_decode


def _random_probs(rng, shape):
    p = rng.random(shape)
    return p / p.sum(axis=-1, keepdims=True)


def _transmit(code, rng, channel, point, info=None):
    if info is None:
        info = rng.integers(0, code.field.q, size=code.k)
    x = encode(code, info)
    bits = code.field.to_bits(x[code.transmitted_positions])
    if channel is ChannelKind.BEC:
        return x, transmit_bec(bits, point, rng)
    return x, transmit_awgn(bits, point, float(code.rate), rng)


class TestTransform:
    @pytest.mark.parametrize("m", range(1, 11))
    def test_double_transform_scales_by_q(self, m, rng):
        a = _random_probs(rng, (3, 1 << m))
        assert np.max(np.abs(fwht(fwht(a)) - (1 << m) * a)) <= 1e-12

    @pytest.mark.parametrize("m", range(1, 7))
    def test_convolution_matches_direct_sum(self, m, rng):
        q = 1 << m
        p1, p2 = _random_probs(rng, (2, q))
        assert np.max(np.abs(xor_convolve(p1, p2) - direct_convolve(p1, p2))) <= 1e-10

    def test_point_masses_add(self):
        q = 8
        out = xor_convolve(np.eye(q)[3], np.eye(q)[6])
        assert_allclose(out, np.eye(q)[3 ^ 6], atol=1e-15)


class TestInitialize:
    def test_T1_matches_channel_posterior(self, rng):
        code = build_code(m=3, n=12, dv=2, dc=3, T=1, seed=4)
        _, obs = _transmit(code, rng, ChannelKind.AWGN, 1.0)
        state = initialize(code, obs)
        assert_allclose(state.var_init, channel_posteriors(code, obs), rtol=1e-12)

    def test_erased_first_copy_uses_rotated_second_copy(self, small_code, rng):
        x, _ = _transmit(small_code, rng, ChannelKind.BEC, 0.0)
        bits = small_code.field.to_bits(x).astype(np.int8)
        bits[: small_code.n * small_code.field.m] = ERASED
        state = initialize(small_code, Observations(ChannelKind.BEC, bits))
        assert_array_equal(state.var_init, np.eye(4)[x[: small_code.n]])

    def test_product_with_rotated_copies(self, small_code, rng):
        gf = small_code.field
        n = small_code.n
        post = _random_probs(rng, (2 * n, 4))
        state = initialize(small_code, post)
        for v in range(n):
            r = int(small_code.coeffs[0, v])
            expected = np.array([post[v, x] * post[n + v, gf.mul(r, x)] for x in range(4)])
            assert_allclose(state.var_init[v], expected / expected.sum(), rtol=1e-12)

    def test_punctured_positions_are_uniform(self, small_code, rng):
        code = with_puncture(small_code, PuncturePattern.of([0, 4]))
        post = _random_probs(rng, (code.n_transmitted, 4))
        full = expand_posteriors(code, post)
        assert_allclose(full[[0, 4]], 0.25)
        assert_allclose(full[code.transmitted_positions], post)

    def test_posterior_count_mismatch(self, small_code, rng):
        with pytest.raises(DecodeError):
            initialize(small_code, _random_probs(rng, (small_code.length - 1, 4)))

    def test_pattern_override(self, small_code, rng):
        pattern = PuncturePattern.of([2])
        post = _random_probs(rng, (small_code.length - 1, 4))
        state = initialize(small_code, post, pattern)
        assert state.var_init.shape == (small_code.n, 4)


class TestMessageUpdates:
    def test_check_forces_parity(self, small_code):
        gf = small_code.field
        state = initialize(small_code, np.full((small_code.length, 4), 0.25))
        e0, e1, e2 = small_code.mother.check_edges[0]
        h0, h1, h2 = small_code.mother.labels[[e0, e1, e2]]
        a, b = 1, 3
        state.v2c[e0] = np.eye(4)[a]
        state.v2c[e1] = np.eye(4)[b]
        c2v = check_to_variable(state)
        expected = gf.mul(gf.inv(int(h2)), gf.mul(int(h0), a) ^ gf.mul(int(h1), b))
        assert_allclose(c2v[e2], np.eye(4)[expected], atol=1e-12)

    def test_tiny_probabilities_survive(self, small_code):
        state = initialize(small_code, np.full((small_code.length, 4), 0.25))
        e0, e1, e2 = small_code.mother.check_edges[0]
        state.v2c[e0] = [1 - 3e-13, 1e-13, 1e-13, 1e-13]
        state.v2c[e1] = np.eye(4)[0]
        c2v = check_to_variable(state)
        # the output is the first message under a relabelling that fixes 0
        assert np.all(c2v[e2] >= 0)
        assert c2v[e2][0] == pytest.approx(1 - 3e-13)
        assert_allclose(c2v[e2][1:], 1e-13, rtol=1e-2)

    def test_uniform_inputs_give_uniform_output(self, small_code):
        state = initialize(small_code, np.full((small_code.length, 4), 0.25))
        assert_allclose(check_to_variable(state), 0.25)

    def test_uniform_incoming_returns_initial_message(self, small_code, rng):
        state = initialize(small_code, _random_probs(rng, (small_code.length, 4)))
        v2c = variable_to_check(state)
        assert_allclose(v2c, state.var_init[small_code.mother.var_idx], rtol=1e-12)

    def test_variable_product(self, small_code, rng):
        state = initialize(small_code, _random_probs(rng, (small_code.length, 4)))
        state.c2v = _random_probs(rng, state.c2v.shape)
        v2c = variable_to_check(state)
        mother = small_code.mother
        for v in range(mother.n):
            e_a, e_b = mother.var_edges[v]
            expected = state.var_init[v] * state.c2v[e_b]
            assert_allclose(v2c[e_a], expected / expected.sum(), rtol=1e-12)

    def test_messages_stay_normalised(self, rate_sixth_code, rng):
        _, obs = _transmit(rate_sixth_code, rng, ChannelKind.AWGN, 0.0)
        state = initialize(rate_sixth_code, obs)
        for _ in range(5):
            check_to_variable(state)
            variable_to_check(state)
            assert np.all(np.isfinite(state.v2c))
            assert_allclose(state.v2c.sum(axis=1), 1.0)
            assert_allclose(state.c2v.sum(axis=1), 1.0)


class TestDecisions:
    def test_ties_go_to_the_smallest_symbol(self):
        assert_array_equal(decide(np.array([[0.0, 0.5, 0.5, 0.0], [0.25, 0.25, 0.25, 0.25]])), [1, 0])

    def test_noiseless_exits_before_iterating(self, rate_sixth_code, rng):
        x = encode(rate_sixth_code, rng.integers(0, 256, size=rate_sixth_code.k))
        bits = rate_sixth_code.field.to_bits(x)
        for kind in ChannelKind:
            result = decode(rate_sixth_code, noiseless(bits, kind))
            assert result.success
            assert result.iterations == 0
            assert result.syndrome_trace == [0]
            assert_array_equal(result.codeword, x[: rate_sixth_code.n])

    def test_bec_below_threshold_recovers(self, rng):
        code = build_code(m=8, n=300, dv=2, dc=3, T=1, seed=21)
        x, obs = _transmit(code, rng, ChannelKind.BEC, 0.3)
        result = decode(code, obs)
        assert result.success
        assert_array_equal(result.estimate, x[: code.n])
        assert result.contradictions == 0

    def test_iteration_cap(self, rate_sixth_code, rng):
        _, obs = _transmit(rate_sixth_code, rng, ChannelKind.AWGN, -10.0)
        result = decode(rate_sixth_code, obs, max_iter=1)
        assert not result.success
        assert result.codeword is None
        assert result.iterations == 1
        assert len(result.syndrome_trace) == 2

    def test_max_iter_must_be_positive(self, small_code):
        with pytest.raises(ConfigError):
            decode(small_code, np.full((small_code.length, 4), 0.25), max_iter=0)

    def test_active_checks_do_not_grow_with_T(self):
        for T in (1, 2, 4):
            code = build_code(m=3, n=24, dv=2, dc=3, T=T, seed=8)
            state = initialize(code, np.full((code.length, 8), 1 / 8))
            assert state.active_checks == 16
            assert state.c2v.shape == (48, 8)

    def test_bec_supports_only_shrink(self, rate_sixth_code, rng):
        _, obs = _transmit(rate_sixth_code, rng, ChannelKind.BEC, 0.75)
        state = initialize(rate_sixth_code, obs)
        # transform rounding leaves ~1e-16 where BP gives exact zeros
        support = state.v2c > 1e-9
        for _ in range(10):
            check_to_variable(state)
            variable_to_check(state)
            now = state.v2c > 1e-9
            assert np.all(support[now])
            support = now


class TestReducedGraphEquivalence:
    """Reduced decoder against BP on the complete Tanner graph of C_T."""

    ITERATIONS = 6

    @pytest.mark.parametrize("seed", range(100))
    def test_iteration_by_iteration(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 4))
        n = int(rng.choice([6, 9, 12, 15]))
        T = int(rng.integers(1, 4))
        code = build_code(m=m, n=n, dv=2, dc=3, T=T, seed=seed)
        if seed % 2:
            _, obs = _transmit(code, rng, ChannelKind.BEC, 0.5)
        else:
            _, obs = _transmit(code, rng, ChannelKind.AWGN, -1.0)

        state = initialize(code, obs)
        channel = expand_posteriors(code, channel_posteriors(code, obs))
        reference = FullGraphDecoder(code, channel)
        reference.start()
        assert_allclose(state.v2c, reference.mother_v2c(), atol=1e-9)
        assert_array_equal(tentative_decision(state)[0], reference.tentative()[0])

        for _ in range(self.ITERATIONS):
            check_to_variable(state)
            variable_to_check(state)
            reference.iterate()
            assert_allclose(state.c2v, reference.mother_c2v(), atol=1e-9)
            assert_allclose(state.v2c, reference.mother_v2c(), atol=1e-9)
            reduced_hat, reduced_ok, _ = tentative_decision(state)
            full_hat, full_ok, _ = reference.tentative()
            assert_array_equal(reduced_hat, full_hat)
            assert reduced_ok == full_ok

    def test_decode_results_agree(self, small_code, rng):
        _, obs = _transmit(small_code, rng, ChannelKind.BEC, 0.5)
        fast = decode(small_code, obs, max_iter=20)
        slow = full_graph_decode(small_code, obs, max_iter=20)
        assert fast.success == slow.success
        assert fast.iterations == slow.iterations
        assert fast.syndrome_trace == slow.syndrome_trace
        assert_array_equal(fast.estimate, slow.estimate)
