"""Image file I/O at the toolkit boundary.

Arrays are float64 in [0, 1] inside the toolkit; files are 8-bit. PNG goes
through Pillow; PPM/PGM are written directly. Raw float32 dumps preserve
exact values for cross-checking rendered spectra.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def from_uint8(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / 255.0


def save_png(image: np.ndarray, path) -> None:
    """Write an H x W (grayscale) or H x W x 3 float image in [0, 1]."""
    arr = to_uint8(image)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(Path(path), format="PNG")


def load_png(path) -> np.ndarray:
    img = Image.open(Path(path))
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return from_uint8(np.asarray(img))


def save_ppm(image: np.ndarray, path) -> None:
    """Binary PPM (color) or PGM (grayscale)."""
    arr = to_uint8(image)
    h, w = arr.shape[:2]
    magic, channels = ("P5", 1) if arr.ndim == 2 else ("P6", 3)
    with open(path, "wb") as fh:
        fh.write(f"{magic}\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def save_float_raw(array: np.ndarray, path) -> None:
    """Little-endian float32 dump with a u4 shape header for exact
    comparisons."""
    arr = np.asarray(array, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(np.asarray([arr.ndim] + list(arr.shape), dtype="<u4").tobytes())
        fh.write(arr.astype("<f4").tobytes())


def load_float_raw(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    ndim = int(np.frombuffer(raw, dtype="<u4", count=1)[0])
    shape = tuple(int(v) for v in np.frombuffer(raw, dtype="<u4", count=ndim, offset=4))
    data = np.frombuffer(raw, dtype="<f4", offset=4 * (1 + ndim))
    return data.astype(np.float64).reshape(shape)
