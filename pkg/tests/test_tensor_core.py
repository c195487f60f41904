import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demosaick.gradcheck import check_tensor_ops
from demosaick.tensor_core import (
    DimensionError,
    FilterBank,
    ShapeError,
    clip,
    clip_backward,
    conv2d,
    conv_transpose2d,
    prelu,
    reflexive_pad,
)


def rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


class TestReflexivePad:
    def test_row_example(self):
        x = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1)
        padded = reflexive_pad(x, 1)
        assert padded[1, :, 0].tolist() == [2.0, 1.0, 2.0, 3.0, 2.0]

    def test_constant_image(self):
        x = np.full((4, 5, 2), 7.0)
        assert np.all(reflexive_pad(x, 2) == 7.0)

    def test_pad_zero_identity(self):
        x = rng().normal(size=(4, 4, 3))
        assert np.array_equal(reflexive_pad(x, 0), x)

    def test_pad_too_large(self):
        with pytest.raises(DimensionError):
            reflexive_pad(np.zeros((3, 3, 1)), 3)


class TestConv2d:
    def test_constant_input_zero_mean_kernel(self):
        x = np.full((6, 6, 1), 3.0)
        w = rng(1).normal(size=(2, 1, 3, 3))
        w -= w.mean(axis=(1, 2, 3), keepdims=True)
        out = conv2d(x, FilterBank(w, np.zeros(2)))
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_single_pixel_average(self):
        x = np.array([[[5.0]]])
        fb = FilterBank(np.full((1, 1, 3, 3), 1.0 / 9.0), np.zeros(1))
        assert np.allclose(conv2d(x, fb), 5.0)

    def test_matches_naive_quadruple_loop(self):
        gen = rng(2)
        x = gen.normal(size=(4, 4, 2))
        w = gen.normal(size=(3, 2, 3, 3))
        b = gen.normal(size=3)
        out = conv2d(x, FilterBank(w, b))
        xp = reflexive_pad(x, 1)
        expected = np.zeros((4, 4, 3))
        for yy in range(4):
            for xx in range(4):
                for o in range(3):
                    acc = b[o]
                    for c in range(2):
                        for i in range(3):
                            for j in range(3):
                                acc += w[o, c, i, j] * xp[yy + i, xx + j, c]
                    expected[yy, xx, o] = acc
        assert np.allclose(out, expected, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((4, 4, 2)), FilterBank(np.zeros((1, 3, 3, 3)), np.zeros(1)))

    def test_preserves_spatial_size(self):
        x = rng(3).normal(size=(5, 7, 2))
        fb = FilterBank(rng(4).normal(size=(4, 2, 5, 5)), np.zeros(4))
        assert conv2d(x, fb).shape == (5, 7, 4)


class TestConvTranspose2d:
    def test_adjoint_identity(self):
        gen = rng(5)
        for _ in range(5):
            a = gen.normal(size=(6, 6, 2))
            b = gen.normal(size=(6, 6, 3))
            w = gen.normal(size=(3, 2, 3, 3))
            ka = conv2d(a, FilterBank(w, np.zeros(3)))
            ktb = conv_transpose2d(b, FilterBank(w, np.zeros(2)))
            assert abs((ka * b).sum() - (a * ktb).sum()) < 1e-10

    def test_zero_input(self):
        fb = FilterBank(rng(6).normal(size=(4, 3, 5, 5)), np.zeros(3))
        out = conv_transpose2d(np.zeros((5, 5, 4)), fb)
        assert np.all(out == 0.0)

    def test_one_by_one_kernel_channel_mixing(self):
        gen = rng(7)
        x = gen.normal(size=(4, 4, 3))
        w = gen.normal(size=(3, 2, 1, 1))
        out = conv_transpose2d(x, FilterBank(w, np.zeros(2)))
        expected = x @ w[:, :, 0, 0]
        assert np.allclose(out, expected, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv_transpose2d(np.zeros((4, 4, 2)), FilterBank(np.zeros((3, 1, 3, 3)), np.zeros(1)))


class TestPrelu:
    def test_point_examples(self):
        x = np.array([[[3.0, -2.0]]])
        out = prelu(x, np.array([0.25, 0.25]))
        assert out[0, 0, 0] == 3.0
        assert out[0, 0, 1] == -0.5

    @given(st.floats(-100, 100, allow_nan=False))
    @settings(max_examples=30, deadline=None)
    def test_unit_slope_is_identity(self, v):
        x = np.full((2, 2, 1), v)
        assert np.array_equal(prelu(x, np.ones(1)), x)

    def test_slope_length_mismatch(self):
        with pytest.raises(ShapeError):
            prelu(np.zeros((2, 2, 2)), np.ones(3))


class TestClip:
    @pytest.mark.parametrize("value,expected", [(300.0, 255.0), (-4.0, 0.0), (128.0, 128.0)])
    def test_examples(self, value, expected):
        assert clip(np.array([[[value]]]), 0.0, 255.0)[0, 0, 0] == expected

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            clip(np.zeros((1, 1, 1)), 5.0, 5.0)

    def test_gradient_zero_when_saturated(self):
        g = clip_backward(np.ones((1, 1, 1)), np.array([[[300.0]]]), 0.0, 255.0)
        assert g[0, 0, 0] == 0.0


def test_forward_ops_pure():
    gen = rng(8)
    x = gen.normal(size=(5, 5, 2))
    fb = FilterBank(gen.normal(size=(2, 2, 3, 3)), gen.normal(size=2))
    assert np.array_equal(conv2d(x, fb), conv2d(x, fb))
    assert np.array_equal(prelu(x, np.array([0.1, 0.2])), prelu(x, np.array([0.1, 0.2])))


def test_finite_difference_all_ops():
    errs = check_tensor_ops(seed=0)
    for name, err in errs.items():
        assert err < 1e-6, f"{name}: {err}"
