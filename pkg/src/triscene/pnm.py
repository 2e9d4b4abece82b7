"""Binary PPM (P6) and PGM (P5) readers and writers, maxval 255."""

import numpy as np

from .errors import DataError


def _read_tokens(f, n):
    """Read n whitespace-separated header tokens, skipping # comments."""
    tokens = []
    while len(tokens) < n:
        line = f.readline()
        if not line:
            raise DataError("pnm: truncated header")
        text = line.split(b"#", 1)[0]
        tokens.extend(text.split())
    return tokens[:n]


def write_ppm(path, image):
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError("pnm: PPM payload must be (h, w, 3)")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(image).tobytes())


def write_pgm(path, gray):
    gray = np.asarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise DataError("pnm: PGM payload must be (h, w)")
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(gray).tobytes())


def _read_pnm(path, magic, channels):
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag != magic:
            raise DataError(f"pnm: {path}: expected {magic.decode()}, got {tag!r}")
        w, h, maxval = (int(t) for t in _read_tokens(f, 3))
        if maxval != 255:
            raise DataError(f"pnm: {path}: unsupported maxval {maxval}")
        data = f.read(w * h * channels)
    if len(data) != w * h * channels:
        raise DataError(f"pnm: {path}: truncated pixel data")
    arr = np.frombuffer(data, dtype=np.uint8)
    shape = (h, w, channels) if channels > 1 else (h, w)
    return arr.reshape(shape).copy()


def read_ppm(path):
    return _read_pnm(path, b"P6", 3)


def read_pgm(path):
    return _read_pnm(path, b"P5", 1)
