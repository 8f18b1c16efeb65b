import numpy as np
import pytest
from scipy.special import erfc

from tcfec.channel import ChannelConfig, add_awgn, channel_llr, hard_decision, modulate, substream


def test_modulate_mapping():
    assert modulate([0])[0] == 1.0
    assert modulate([1])[0] == -1.0
    bits = np.random.default_rng(0).integers(0, 2, 100)
    assert np.array_equal(hard_decision(modulate(bits)), bits)


def test_noise_variance_formula():
    cfg = ChannelConfig(3.0, 0.5)
    assert cfg.noise_variance == pytest.approx(1 / (2 * 0.5 * 10**0.3))
    with pytest.raises(ValueError):
        ChannelConfig(1.0, 0.0)


def test_noiseless_limit():
    cfg = ChannelConfig(300.0, 0.5)
    x = modulate(np.array([0, 1, 1, 0]))
    assert np.allclose(add_awgn(x, cfg, substream(1, 0)), x, atol=1e-10)


def test_sample_variance():
    cfg = ChannelConfig(1.0, 0.5)
    y = add_awgn(np.zeros(10**6), cfg, substream(2, 0))
    assert abs(y.var() / cfg.noise_variance - 1) < 0.01


def test_llr_basics():
    assert channel_llr(np.zeros(3), 0.7).tolist() == [0, 0, 0]
    y = np.array([0.3, -1.2])
    assert np.allclose(channel_llr(y, 2.0), channel_llr(y, 1.0) / 2)
    with pytest.raises(ValueError):
        channel_llr(y, 0.0)


def test_mean_llr_given_zero():
    cfg = ChannelConfig(2.0, 0.5)
    y = add_awgn(np.ones(10**6), cfg, substream(3, 0))
    assert abs(channel_llr(y, cfg).mean() / (2 / cfg.noise_variance) - 1) < 0.01


def test_uncoded_ber_closed_form():
    cfg = ChannelConfig(4.0, 1.0)
    n = 2 * 10**6
    y = add_awgn(np.ones(n), cfg, substream(4, 0))
    errs = int((hard_decision(channel_llr(y, cfg)) != 0).sum())
    p = 0.5 * erfc(np.sqrt(10**0.4))
    sd = np.sqrt(n * p * (1 - p))
    assert abs(errs - n * p) < 3 * sd


def test_substreams_independent_of_creation_order():
    a = substream(7, 2, 5).standard_normal(4)
    substream(7, 0).standard_normal(100)
    b = substream(7, 2, 5).standard_normal(4)
    c = substream(7, 2, 6).standard_normal(4)
    d = substream(8, 2, 5).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    with pytest.raises(ValueError):
        substream(1, 1, 2, 3, 4)
