import numpy as np
import pytest

from demosaick.pnm import FormatError, read_image, write_image


def rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def test_ppm_roundtrip_8bit(tmp_path):
    img = np.round(rng(1).uniform(0, 255, size=(5, 7, 3)))
    path = tmp_path / "x.ppm"
    write_image(path, img)
    assert np.array_equal(read_image(path), img)


def test_pgm_roundtrip_8bit(tmp_path):
    img = np.round(rng(2).uniform(0, 255, size=(4, 6, 1)))
    path = tmp_path / "x.pgm"
    write_image(path, img)
    assert np.array_equal(read_image(path), img)


def test_roundtrip_16bit_precision(tmp_path):
    img = rng(3).uniform(0, 255, size=(4, 4, 3))
    path = tmp_path / "x.ppm"
    write_image(path, img, bitdepth=16)
    back = read_image(path)
    # quantization step is 255/65535
    assert np.allclose(back, img, atol=255.0 / 65535.0)


def test_npy_roundtrip_exact(tmp_path):
    img = rng(4).uniform(-10, 300, size=(3, 3, 3))
    path = tmp_path / "x.npy"
    write_image(path, img)
    assert np.array_equal(read_image(path), img)


def test_npy_2d_gets_channel_axis(tmp_path):
    path = tmp_path / "x.npy"
    np.save(path, np.ones((4, 5)))
    assert read_image(path).shape == (4, 5, 1)


def test_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n# another\n255\n\x00\x7f\xff\x01")
    img = read_image(path)
    assert img.shape == (2, 2, 1)
    assert img[0, 1, 0] == 127.0


def test_16bit_read_is_scaled(tmp_path):
    path = tmp_path / "w.pgm"
    payload = np.array([0, 65535, 32768, 100], dtype=">u2").tobytes()
    path.write_bytes(b"P5\n2 2\n65535\n" + payload)
    img = read_image(path)
    assert img[0, 0, 0] == 0.0
    assert img[0, 1, 0] == 255.0
    assert np.isclose(img[1, 0, 0], 32768 * 255.0 / 65535.0)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P3\n2 2\n255\n")
    with pytest.raises(FormatError):
        read_image(path)


def test_truncated_pixels(tmp_path):
    path = tmp_path / "short.ppm"
    path.write_bytes(b"P6\n2 2\n255\n\x00\x01")
    with pytest.raises(FormatError):
        read_image(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "h.ppm"
    path.write_bytes(b"P6\n2")
    with pytest.raises(FormatError):
        read_image(path)


def test_write_clips(tmp_path):
    path = tmp_path / "clip.pgm"
    write_image(path, np.array([[[-5.0], [300.0]]]))
    img = read_image(path)
    assert img[0, 0, 0] == 0.0 and img[0, 1, 0] == 255.0


def test_write_bad_channels(tmp_path):
    with pytest.raises(FormatError):
        write_image(tmp_path / "x.ppm", np.zeros((2, 2, 2)))


def test_write_bad_bitdepth(tmp_path):
    with pytest.raises(ValueError):
        write_image(tmp_path / "x.ppm", np.zeros((2, 2, 3)), bitdepth=12)
