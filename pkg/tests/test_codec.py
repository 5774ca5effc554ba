import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdmr import codec, oracle
from tdmr.codec import (INNER_CODE, OUTER_CODE, Codec, ConvCodeSpec, DecoderSchedule, Interleaver, RateAdapter,
                        map_decode, outer_impulse, sccc_decode)


def prob_one(llr):
    return 1.0 / (1.0 + np.exp(-np.asarray(llr)))


def test_code_shapes():
    for code in (OUTER_CODE, INNER_CODE):
        nxt, out = code.trellis()
        assert code.n_states == 8 and code.n_out == 2
        assert nxt.shape == (2, 8) and out.shape == (2, 8, 2)
        # each state has two distinct successors and is entered twice
        assert np.all(np.bincount(nxt.ravel(), minlength=8) == 2)
    assert not OUTER_CODE.recursive and INNER_CODE.recursive


def test_spec_validation():
    with pytest.raises(ValueError):
        ConvCodeSpec(numerators=(0b10011,))
    with pytest.raises(ValueError):
        ConvCodeSpec(numerators=(0b11,), denominator=0b10)


def test_outer_impulse_response():
    a, b = outer_impulse([1, 0, 0, 0, 0, 0])
    assert a.tolist() == [1, 1, 0, 0, 0, 0]
    assert b.tolist() == [1, 1, 0, 1, 0, 0]


def test_outer_superposition_and_zero():
    a, b = outer_impulse([1, 1, 0, 0, 0, 0])
    assert a.tolist() == [1, 0, 1, 0, 0, 0]
    assert b.tolist() == [1, 0, 1, 1, 1, 0]
    a, b = outer_impulse(np.zeros(7, dtype=int))
    assert not a.any() and not b.any()


def test_inner_code_is_systematic(rng):
    u = rng.integers(0, 2, 40)
    _, c = INNER_CODE.encode_trellis(u)
    assert np.array_equal(c.reshape(-1, 2)[:, 0], u)
    # parity = (1+X+X^3)/(1+X) applied to u
    w = np.cumsum(u) % 2
    wp = np.concatenate([[0, 0, 0], w])
    assert np.array_equal(c.reshape(-1, 2)[:, 1], (wp[3:] + wp[2:-1] + wp[:-3]) % 2)


@pytest.mark.parametrize("code", [OUTER_CODE, INNER_CODE], ids=["outer", "inner"])
def test_termination_returns_to_zero(code, rng):
    u, c = code.encode_trellis(rng.integers(0, 2, 20), terminate=True)
    nxt, _ = code.trellis()
    s = 0
    for b in u:
        s = nxt[b, s]
    assert s == 0 and u.size == 23 and c.size == 46


def test_interleaver(rng):
    pi = Interleaver.from_seed(100, 3)
    x = rng.normal(size=100)
    np.testing.assert_array_equal(pi.deinterleave(pi.interleave(x)), x)
    assert np.array_equal(Interleaver.from_seed(100, 3).permutation, pi.permutation)
    with pytest.raises(ValueError):
        Interleaver(np.array([0, 0, 1]))


@pytest.mark.parametrize("n_out", [70, 100, 130, 250])
def test_rate_adapter_adjoint(n_out, rng):
    ad = RateAdapter.from_seed(100, n_out, seed=1)
    assert ad.n_out == n_out
    copies = ad.copies()
    if n_out <= 100:
        assert set(np.unique(copies)) <= {0, 1} and copies.sum() == n_out
        assert np.all(np.diff(ad.source) > 0)
    else:
        assert copies.min() == n_out // 100 and copies.max() == -(-n_out // 100)
    x = rng.normal(size=100)
    back = ad.combine(ad.adapt(x))
    np.testing.assert_allclose(back, x * copies)
    np.testing.assert_array_equal(back[copies == 0], 0.0)


def test_rate_adapter_extrinsic_fans_back(rng):
    ad = RateAdapter.from_seed(10, 25, seed=2)
    ch = rng.normal(size=25)
    post = ad.combine(ch) + 1.0
    ext = ad.extrinsic(post, ch)
    for j in range(25):
        others = ch[(ad.source == ad.source[j]) & (np.arange(25) != j)].sum()
        assert ext[j] == pytest.approx(others + 1.0)


@pytest.mark.parametrize("rate, length", [(1 / 4, 131072), (1 / 3, 98304), (1 / 5, 163840), (1 / 2, 65536)])
def test_output_lengths(rate, length):
    c = Codec.build(rate, seed=0)
    assert c.output_len == length
    assert len(c.pi1) == 2 * (32768 + 3) and len(c.pi2) == 4 * (32768 + 3)


def test_zero_input_gives_zero_output():
    for rate in (0.2, 0.25, 0.4):
        c = Codec.build(rate, seed=1)
        assert not c.encode(np.zeros(32768, dtype=int)).any()


def test_encode_length_check():
    with pytest.raises(ValueError):
        Codec.build(0.25, seed=0).encode(np.zeros(100))
    with pytest.raises(ValueError):
        Codec.build(1.5)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_encoder_linearity(seed):
    rng = np.random.default_rng(seed)
    c = Codec.build(0.3, seed=4, user_len=256)
    a, b = rng.integers(0, 2, 256), rng.integers(0, 2, 256)
    ea, eb, eab = c.encode_stages(a), c.encode_stages(b), c.encode_stages(a ^ b)
    for key in ("outer", "inner", "coded"):
        np.testing.assert_array_equal(eab[key], ea[key] ^ eb[key])


@pytest.mark.parametrize("code, terminated", [(OUTER_CODE, True), (INNER_CODE, False), (OUTER_CODE, False)])
def test_map_matches_enumeration(code, terminated, rng):
    T = 12 + (code.memory if terminated else 0)
    cl = rng.normal(0, 2, size=(T, 2))
    il = rng.normal(0, 1, size=T)
    post_u, ext_u, post_c, ext_c = map_decode(code, cl, il, terminated)
    pu, pc = oracle.exact_codeword_posteriors(code, cl, il, terminated)
    np.testing.assert_allclose(prob_one(post_u), pu, atol=1e-9)
    np.testing.assert_allclose(prob_one(post_c), pc, atol=1e-9)
    np.testing.assert_allclose(ext_u, np.clip(post_u - il, -100, 100), atol=1e-12)
    np.testing.assert_allclose(ext_c, np.clip(post_c - cl, -100, 100), atol=1e-12)


def test_map_zero_llrs_give_zero_extrinsic():
    _, ext_u, _, ext_c = map_decode(INNER_CODE, np.zeros((30, 2)))
    assert not ext_u.any() and not ext_c.any()


def test_map_noiseless(rng):
    u = rng.integers(0, 2, 200)
    _, c = OUTER_CODE.encode_trellis(u, terminate=True)
    llr = 30.0 * (2 * c - 1)
    post_u, *_ = map_decode(OUTER_CODE, llr, None, True)
    np.testing.assert_array_equal((post_u[:200] > 0).astype(int), u)


@pytest.mark.parametrize("rate", [1 / 5, 1 / 4, 1 / 3, 1 / 2])
def test_noiseless_sccc(rate, rng):
    c = Codec.build(rate, seed=7)
    u = rng.integers(0, 2, 32768)
    x = c.encode(u)
    res = sccc_decode(100.0 * (2 * x - 1.0), DecoderSchedule.for_mode(codec.ITERATIVE), c, known=u)
    assert res.errors == 0
    np.testing.assert_array_equal(res.bits, u)


def test_clean_codeword_stops_after_first_iteration(rng):
    c = Codec.build(0.25, seed=7, user_len=1024)
    u = rng.integers(0, 2, 1024)
    x = c.encode(u)
    res = sccc_decode(20.0 * (2 * x - 1.0), 30, c, known=u)
    assert res.iterations == 1 and res.errors == 0
    res = sccc_decode(20.0 * (2 * x - 1.0), 5, c)
    assert res.iterations == 5 and res.errors is None


def test_zero_channel_gives_zero_messages():
    c = Codec.build(0.2, seed=1, user_len=512)
    res = sccc_decode(np.zeros(c.output_len), 3, c)
    # only the known-zero code bits of the outer termination tail carry information
    tail = np.zeros(len(c.pi1), dtype=bool)
    tail[-2 * OUTER_CODE.memory:] = True
    assert not res.outer_extrinsic[~tail].any()
    assert np.all(res.outer_extrinsic[tail] <= 0)
    inner_pos = np.flatnonzero(c.pi1.interleave(tail))
    marked = np.zeros(len(c.pi2), dtype=bool)
    marked[2 * inner_pos] = True
    allowed = c.adapter.adapt(c.pi2.interleave(marked))
    assert not res.feedback[~allowed].any()
    assert np.all(res.feedback[allowed] <= 0)


def test_punctured_positions_get_extrinsic_only(rng):
    c = Codec.build(0.4, seed=3, user_len=512)
    u = rng.integers(0, 2, 512)
    x = c.encode(u)
    res = sccc_decode(4.0 * (2 * x - 1.0) + rng.normal(0, 2, x.size), 4, c)
    assert res.feedback.shape == (c.output_len,)
    assert np.all(np.abs(res.feedback) <= codec.LLR_CAP)


def test_channel_length_check():
    c = Codec.build(0.3, seed=1, user_len=64)
    with pytest.raises(ValueError):
        sccc_decode(np.zeros(c.output_len + 1), 1, c)


def test_schedules():
    assert DecoderSchedule.for_mode(codec.NON_ITERATIVE) == DecoderSchedule(codec.NON_ITERATIVE, 30, 1)
    assert DecoderSchedule.for_mode(codec.ITERATIVE) == DecoderSchedule(codec.ITERATIVE, 8, 30)
    for bad in [(codec.NON_ITERATIVE, 8, 1), (codec.ITERATIVE, 8, 31), (codec.ITERATIVE, 30, 5), ("turbo", 8, 8)]:
        with pytest.raises(ValueError):
            DecoderSchedule(*bad)
