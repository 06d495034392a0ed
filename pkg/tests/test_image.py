import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edgenode.pipeline.image import (
    BAYER_PATTERNS,
    ImageError,
    RawBayerImage,
    RgbImage,
    auto_white_balance,
    debayer,
    downscale,
    preprocess,
    white_balance_gains,
)
from oracles import demosaic_oracle


@pytest.mark.parametrize("pattern", sorted(BAYER_PATTERNS))
def test_debayer_matches_neighbour_average_oracle(pattern):
    rng = np.random.default_rng(sorted(BAYER_PATTERNS).index(pattern))
    for shape in [(2, 2), (4, 6), (8, 8), (10, 4)]:
        m = rng.integers(0, 256, shape).astype(np.uint8)
        np.testing.assert_array_equal(debayer(RawBayerImage(m, pattern)).planes, demosaic_oracle(m, pattern))


def test_single_red_pixel_stencil():
    m = np.zeros((4, 4), np.uint8)
    m[0, 0] = 255
    r = debayer(RawBayerImage(m, "RGGB")).planes[0]
    # horizontal and vertical neighbours average one red sample with one zero; the
    # diagonal blue site averages one of four. 127.5 rounds to 128, 63.75 to 64.
    expected = np.zeros((4, 4))
    expected[0, 0], expected[0, 1], expected[1, 0], expected[1, 1] = 255, 128, 128, 64
    np.testing.assert_array_equal(r, expected)


@given(st.integers(0, 255), st.sampled_from(sorted(BAYER_PATTERNS)))
def test_uniform_mosaic_fixed_point(v, pattern):
    img = debayer(RawBayerImage(np.full((6, 8), v, np.uint8), pattern))
    assert np.all(img.planes == v)


def test_native_frame_shape():
    img = debayer(RawBayerImage(np.zeros((480, 640), np.uint8)))
    assert img.planes.shape == (3, 480, 640)


@pytest.mark.parametrize("shape", [(3, 4), (4, 5), (1, 2), (0, 2)])
def test_odd_or_tiny_mosaic_rejected(shape):
    with pytest.raises(ImageError):
        RawBayerImage(np.zeros(shape, np.uint8))


def test_unknown_pattern():
    with pytest.raises(ImageError):
        RawBayerImage(np.zeros((2, 2), np.uint8), "RGBG")


# white balance

def test_awb_grey_is_identity():
    p = np.random.default_rng(3).integers(0, 256, (1, 5, 7)).astype(np.uint8).repeat(3, axis=0)
    img = RgbImage(p)
    np.testing.assert_array_equal(auto_white_balance(img).planes, p)


def test_awb_equalises_means():
    planes = np.stack([np.full((8, 8), 100), np.full((8, 8), 50), np.full((8, 8), 200)]).astype(np.uint8)
    out = auto_white_balance(RgbImage(planes)).channel_means()
    assert out.max() - out.min() <= 1.0


def test_awb_black_stays_black():
    img = RgbImage(np.zeros((3, 4, 4), np.uint8))
    np.testing.assert_array_equal(white_balance_gains(img), [1, 1, 1])
    assert not auto_white_balance(img).planes.any()


def test_awb_gain_clamp():
    planes = np.zeros((3, 4, 4), np.uint8)
    planes[0] = 200
    planes[1] = 1
    g = white_balance_gains(RgbImage(planes))
    assert g.min() >= 0.25 and g.max() <= 4.0
    assert g[2] == 4.0  # empty channel with a nonzero scene


@given(arrays(np.uint8, (3, 6, 6)))
def test_awb_gains_bounded(p):
    g = white_balance_gains(RgbImage(p))
    assert np.all((g >= 0.25) & (g <= 4.0))


# downscale

@given(st.integers(0, 255), st.integers(1, 16))
def test_downscale_constant(v, side):
    img = RgbImage(np.full((3, 16, 20), v, np.uint8))
    assert np.all(downscale(img, side).planes == v)


def test_downscale_checkerboard_to_one_pixel():
    p = np.array([[0, 255], [255, 0]], np.uint8)[None].repeat(3, axis=0)
    # the single output sample sits at the centre: mean 127.5, ties-to-even gives 128
    assert np.all(downscale(RgbImage(p), 1).planes == 128)


def test_downscale_shape_and_errors():
    img = RgbImage(np.zeros((3, 480, 640), np.uint8))
    assert downscale(img, 192).planes.shape == (3, 192, 192)
    with pytest.raises(ImageError):
        downscale(img, 0)
    with pytest.raises(ImageError):
        downscale(img, 481)


def test_downscale_by_two_is_block_mean():
    rng = np.random.default_rng(9)
    p = rng.integers(0, 256, (3, 8, 8)).astype(np.uint8)
    got = downscale(RgbImage(p), 4).planes
    ref = np.rint(p.reshape(3, 4, 2, 4, 2).astype(float).mean(axis=(2, 4)))
    np.testing.assert_array_equal(got, ref)


def test_preprocess_deterministic():
    m = np.random.default_rng(4).integers(0, 256, (480, 640)).astype(np.uint8)
    a = preprocess(RawBayerImage(m), 192).planes
    b = preprocess(RawBayerImage(m.copy()), 192).planes
    assert a.tobytes() == b.tobytes()
