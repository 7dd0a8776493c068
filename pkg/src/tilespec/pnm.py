"""Binary PGM (P5) and PPM (P6) encoding, maxval 255."""

import numpy as np


def encode_pgm(pixels: np.ndarray) -> bytes:
    """Rows are written top row first, as the format requires."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def encode_ppm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("PPM needs an (h, w, 3) array")
    h, w, _ = pixels.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def decode_pnm(data: bytes) -> np.ndarray:
    """Inverse of the encoders above (single whitespace after each header field)."""
    magic, rest = data[:2], data[3:]
    w, rest = rest.split(b" ", 1)
    h, rest = rest.split(b"\n", 1)
    maxval, body = rest.split(b"\n", 1)
    if maxval != b"255":
        raise ValueError("only maxval 255 is supported")
    arr = np.frombuffer(body, dtype=np.uint8)
    if magic == b"P5":
        return arr.reshape(int(h), int(w))
    if magic == b"P6":
        return arr.reshape(int(h), int(w), 3)
    raise ValueError(f"unsupported magic {magic!r}")


def false_color(gray: np.ndarray) -> np.ndarray:
    """Map 0..255 gray levels to a fixed black-red-yellow-white ramp."""
    g = np.asarray(gray, dtype=np.float64) / 255.0
    r = np.clip(3 * g, 0, 1)
    gg = np.clip(3 * g - 1, 0, 1)
    b = np.clip(3 * g - 2, 0, 1)
    return np.rint(np.stack([r, gg, b], axis=-1) * 255).astype(np.uint8)
