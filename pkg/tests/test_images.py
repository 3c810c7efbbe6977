"""Image and raw-array file I/O round trips."""

import numpy as np
import pytest

from pcrender import images


# ---------------------------------------------------------------------------
# uint8 conversion
# ---------------------------------------------------------------------------

def test_to_uint8_scales_rounds_and_clips():
    vals = np.array([-0.5, 0.0, 0.2, 1.0, 2.0])
    out = images.to_uint8(vals)
    assert out.dtype == np.uint8
    assert out.tolist() == [0, 0, 51, 255, 255]


def test_from_uint8_maps_endpoints_to_unit_interval():
    raw = np.array([0, 51, 255], dtype=np.uint8)
    out = images.from_uint8(raw)
    assert out.dtype == np.float64
    np.testing.assert_allclose(out, [0.0, 0.2, 1.0])


def test_uint8_round_trip_error_is_at_most_half_a_step():
    rng = np.random.default_rng(0)
    x = rng.random((40, 30))
    back = images.from_uint8(images.to_uint8(x))
    assert np.max(np.abs(back - x)) <= 0.5 / 255.0 + 1e-12


def test_uint8_is_idempotent_on_quantized_values():
    rng = np.random.default_rng(1)
    x = images.from_uint8(rng.integers(0, 256, size=(8, 9), dtype=np.uint8))
    assert np.array_equal(images.to_uint8(x), images.to_uint8(images.from_uint8(images.to_uint8(x))))


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("shape", [(12, 17), (12, 17, 3)])
def test_png_round_trip_is_exact_after_quantization(tmp_path, shape):
    rng = np.random.default_rng(2)
    img = rng.random(shape)
    path = tmp_path / "img.png"
    images.save_png(img, path)
    back = images.load_png(path)
    assert back.shape == img.shape
    np.testing.assert_array_equal(back, images.from_uint8(images.to_uint8(img)))
    assert np.max(np.abs(back - img)) <= 0.5 / 255.0 + 1e-12


def test_png_grayscale_loads_as_2d_and_color_as_3d(tmp_path):
    images.save_png(np.full((5, 6), 0.5), tmp_path / "g.png")
    images.save_png(np.full((5, 6, 3), 0.5), tmp_path / "c.png")
    assert images.load_png(tmp_path / "g.png").ndim == 2
    assert images.load_png(tmp_path / "c.png").shape == (5, 6, 3)


# ---------------------------------------------------------------------------
# PPM / PGM
# ---------------------------------------------------------------------------

def test_ppm_color_header_and_payload(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.random((3, 4, 3))
    path = tmp_path / "img.ppm"
    images.save_ppm(img, path)
    raw = path.read_bytes()
    header = b"P6\n4 3\n255\n"
    assert raw.startswith(header)
    assert raw[len(header):] == images.to_uint8(img).tobytes()


def test_pgm_grayscale_header_and_payload(tmp_path):
    rng = np.random.default_rng(4)
    img = rng.random((5, 2))
    path = tmp_path / "img.pgm"
    images.save_ppm(img, path)
    raw = path.read_bytes()
    header = b"P5\n2 5\n255\n"
    assert raw.startswith(header)
    assert raw[len(header):] == images.to_uint8(img).tobytes()


# ---------------------------------------------------------------------------
# raw float dumps
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("shape", [(7,), (3, 4), (2, 3, 4)])
def test_float_raw_round_trip_preserves_shape_and_f32_values(tmp_path, shape):
    rng = np.random.default_rng(5)
    arr = rng.standard_normal(shape) * 100.0
    path = tmp_path / "a.f32"
    images.save_float_raw(arr, path)
    back = images.load_float_raw(path)
    assert back.shape == shape
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back, arr.astype("<f4").astype(np.float64))


def test_float_raw_is_exact_for_f32_representable_input(tmp_path):
    rng = np.random.default_rng(6)
    arr = rng.standard_normal((6, 5)).astype(np.float32).astype(np.float64)
    images.save_float_raw(arr, tmp_path / "b.f32")
    np.testing.assert_array_equal(images.load_float_raw(tmp_path / "b.f32"), arr)
