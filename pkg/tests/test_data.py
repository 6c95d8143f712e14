import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncsr.data import (KINDS, DegradationParams, blur, degrade, downsample, gaussian_kernel1d,
                          make_toy_dataset, quantize, upsample_condition)
from truncsr.metrics import band_energy


@pytest.mark.parametrize("kind,size", [("textures2d", 32), ("signals1d", 64), ("gaussians", 8)])
def test_corpus_deterministic(kind, size):
    p = DegradationParams()
    a = make_toy_dataset(kind, 4, size, p, seed=11)
    b = make_toy_dataset(kind, 4, size, p, seed=11)
    for x, y in zip(a, b):
        assert x.hr.tobytes() == y.hr.tobytes() and x.lr.tobytes() == y.lr.tobytes()
        assert x.hr.min() >= 0 and x.hr.max() <= 1 and x.lr.min() >= 0 and x.lr.max() <= 1
        assert all(h == l * p.factor for h, l in zip(x.hr.shape, x.lr.shape))


def test_identity_degradation():
    for pair in make_toy_dataset("textures2d", 3, 16, DegradationParams.identity(), seed=0):
        np.testing.assert_array_equal(pair.lr, pair.hr)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_toy_dataset("photos", 2, 16, DegradationParams(), 0)
    with pytest.raises(ValueError):
        make_toy_dataset(KINDS[0], 0, 16, DegradationParams(), 0)


def test_default_corpus_is_blurred():
    pairs = make_toy_dataset("textures2d", 30, 64, DegradationParams(), seed=1)
    assert pairs[0].lr.shape == (16, 16)
    hr = np.mean([band_energy(p.hr) for p in pairs])
    up = np.mean([band_energy(upsample_condition(p.lr, 4)) for p in pairs])
    assert up < hr


def test_constant_image_survives():
    p = DegradationParams(blur_sigma=(1.2, 1.2), factor=4, noise_sigma=(0, 0))
    out = degrade(np.full((32, 32), 0.37), p, np.random.default_rng(0))
    np.testing.assert_allclose(out, 0.37, atol=1e-15)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.6])
def test_impulse_center_weight(sigma):
    img = np.zeros((31, 31))
    img[15, 15] = 1.0
    k = gaussian_kernel1d(sigma)
    r = len(k) // 2
    assert r == max(int(3 * sigma + 0.5), 1)
    taps = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    assert blur(img, sigma)[15, 15] == pytest.approx((taps[r] / taps.sum()) ** 2, rel=1e-12)


def test_noise_only_variance():
    p = DegradationParams(blur_sigma=(0, 0), factor=1, noise_sigma=(0.1, 0.1))
    out = degrade(np.full((300, 300), 0.5), p, np.random.default_rng(0))
    assert out.var() == pytest.approx(0.01, rel=0.02)


def test_quantization_levels():
    p = DegradationParams(blur_sigma=(0, 0), factor=1, noise_sigma=(0, 0), quant_levels=5)
    out = degrade(np.linspace(0, 1, 64).reshape(8, 8), p, np.random.default_rng(0))
    assert set(np.round(out.ravel() * 4, 9)) <= {0.0, 1.0, 2.0, 3.0, 4.0}
    np.testing.assert_array_equal(quantize(np.array([0.49, 0.51]), 2), [0.0, 1.0])


def test_params_validation():
    with pytest.raises(ValueError):
        DegradationParams(blur_sigma=(1.0, 0.5))
    with pytest.raises(ValueError):
        DegradationParams(factor=0)
    with pytest.raises(ValueError):
        DegradationParams(noise_sigma=(-0.1, 0.1))
    with pytest.raises(ValueError):
        downsample(np.zeros((6, 6)), 4)


def test_upsample_cases():
    np.testing.assert_array_equal(upsample_condition(np.array([1.0, 2.0]), 2), [1, 1, 2, 2])
    x = np.random.default_rng(0).random((3, 3))
    np.testing.assert_array_equal(upsample_condition(x, 1), x)


@given(seed=st.integers(0, 10_000), s=st.sampled_from([2, 4]), one_d=st.booleans())
def test_pool_then_upsample_error_is_block_variance(seed, s, one_d):
    rng = np.random.default_rng(seed)
    hr = rng.random(8 * s) if one_d else rng.random((4 * s, 4 * s))
    p = DegradationParams(blur_sigma=(0, 0), factor=s, noise_sigma=(0, 0))
    back = upsample_condition(degrade(hr, p, rng), s)
    if one_d:
        blocks = hr.reshape(-1, s)
    else:
        blocks = hr.reshape(4, s, 4, s).transpose(0, 2, 1, 3).reshape(16, -1)
    assert np.mean((back - hr) ** 2) == pytest.approx(np.mean(blocks.var(axis=1)), abs=1e-12)
