import numpy as np
import pytest

from tcfec.block_codes import encode_systematic, hard_decode_bch
from tcfec.channel import ChannelConfig, add_awgn, channel_llr, modulate, substream
from tcfec.trellis import (
    TrellisError, bcjr_decode, bcjr_posteriors, build_wolf_trellis, viterbi_batch, viterbi_decode,
)

from conftest import codebook, exact_marginals, ml_decode


def noisy(code, ebn0, frames, seed):
    rng = substream(seed, 0)
    info = rng.integers(0, 2, (frames, code.k))
    cw = encode_systematic(code, info)
    cfg = ChannelConfig(ebn0, code.rate)
    return cw, channel_llr(add_awgn(modulate(cw), cfg, rng), cfg)


def test_spc_states(spc32):
    tr = build_wolf_trellis(spc32)
    assert tr.max_states == 2
    assert tr.state_profile[0] == tr.state_profile[-1] == 1


def test_bch63_has_128_states(bch63):
    assert build_wolf_trellis(bch63).max_states == 128


def test_paths_are_the_codebook(hamming84):
    tr = build_wolf_trellis(hamming84)
    assert tr.count_paths() == 16
    _, book = codebook(hamming84)
    paths = {tuple(p) for p in tr.iter_paths()}
    assert paths == {tuple(c) for c in book}


def test_refuses_huge_trellis(ebch128):
    with pytest.raises(TrellisError):
        build_wolf_trellis(ebch128)


def test_viterbi_noiseless(bch63):
    tr = build_wolf_trellis(bch63)
    cw, _ = noisy(bch63, 0.0, 5, 1)
    for c in cw:
        out = viterbi_decode(tr, 10.0 * modulate(c))
        assert out.ok and np.array_equal(out.codeword, c)


def test_viterbi_matches_ml(bch15):
    tr = build_wolf_trellis(bch15)
    _, book = codebook(bch15)
    _, llr = noisy(bch15, 3.0, 10**4, 2)
    assert np.array_equal(viterbi_batch(tr, llr), ml_decode(book, llr))


def test_viterbi_rejects_bad_llr(bch15):
    tr = build_wolf_trellis(bch15)
    with pytest.raises(TrellisError):
        viterbi_decode(tr, np.zeros(14))
    with pytest.raises(TrellisError):
        viterbi_decode(tr, np.full(15, np.nan))


def test_bcjr_strong_llrs(hamming84):
    tr = build_wolf_trellis(hamming84)
    llr = 3.0 * modulate(encode_systematic(hamming84, [1, 0, 1, 1]))
    post, out = bcjr_decode(tr, llr)
    assert np.array_equal(np.sign(post), np.sign(llr))
    assert np.all(np.abs(post) > np.abs(llr))
    assert out.ok


@pytest.mark.parametrize("seed", range(5))
def test_bcjr_exact_marginals(hamming84, seed):
    tr = build_wolf_trellis(hamming84)
    _, book = codebook(hamming84)
    llr = np.random.default_rng(seed).normal(0.5, 2.0, 8)
    post, _ = bcjr_posteriors(tr, llr, exact=True)
    assert np.allclose(post, exact_marginals(book, llr), rtol=1e-9, atol=1e-12)


def test_maxlog_sign_equals_viterbi(bch15):
    tr = build_wolf_trellis(bch15)
    _, llr = noisy(bch15, 2.0, 300, 3)
    vit = viterbi_batch(tr, llr)
    for row, v in zip(llr, vit):
        post, _ = bcjr_posteriors(tr, row, exact=False)
        assert np.array_equal((post < 0).astype(np.uint8), v)


def test_bcjr_flags_non_codeword(bch15):
    tr = build_wolf_trellis(bch15)
    _, llr = noisy(bch15, -2.0, 400, 4)
    statuses = {bcjr_decode(tr, row)[1].status for row in llr}
    assert "detected_failure" in statuses


@pytest.mark.slow
def test_bcjr_close_to_viterbi_bch63(bch63):
    # about 0.1 dB of the soft-decision slope near CER 1e-3 is a 30% CER change
    tr = build_wolf_trellis(bch63)
    cw, llr = noisy(bch63, 5.0, 25000, 5)
    v_err = (viterbi_batch(tr, llr) != cw).any(1).sum()
    b_err = sum(not np.array_equal((bcjr_posteriors(tr, row)[0] < 0), c) for row, c in zip(llr, cw))
    assert v_err > 30
    assert abs(b_err / v_err - 1) < 0.3


def test_soft_beats_hard_same_frames(bch63):
    tr = build_wolf_trellis(bch63)
    cw, llr = noisy(bch63, 5.0, 3000, 6)
    v_err = (viterbi_batch(tr, llr) != cw).any(1).sum()
    h_err = 0
    for row, c in zip(llr, cw):
        out = hard_decode_bch(bch63, (row < 0).astype(np.uint8))
        h_err += not (out.ok and np.array_equal(out.codeword, c))
    assert v_err < h_err
