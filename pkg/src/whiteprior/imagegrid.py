"""Image container conventions, PGM I/O and finite-difference operators.

Images are plain 2-D ``float64`` numpy arrays indexed ``[row, col]``.
Observations and signal estimates live in ``[0, 1]``; noise and gradient
fields are unbounded.
"""

from __future__ import annotations

import os
import re

import numpy as np
from scipy import ndimage

from ._validation import check_image


class PGMError(ValueError):
    """Base class for PGM decoding problems."""


class PGMHeaderError(PGMError):
    """The header is missing, truncated or carries invalid fields."""


class PGMPixelCountError(PGMError):
    """The payload does not hold width * height samples."""


_TOKEN = re.compile(rb"\S+")


def _read_header(data):
    """Parse magic, width, height, maxval; return them and the payload offset."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMHeaderError("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = n if end < 0 else end + 1
            continue
        m = _TOKEN.match(data, pos)
        tok = m.group()
        # a comment may follow a token without separating whitespace
        hash_at = tok.find(b"#")
        if hash_at > 0:
            tok = tok[:hash_at]
        tokens.append(tok)
        pos += len(tok)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise PGMHeaderError(f"unsupported magic number {magic!r}; expected P2 or P5")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMHeaderError(f"non-integer header field: {exc}") from None
    if width <= 0 or height <= 0:
        raise PGMHeaderError(f"invalid dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise PGMHeaderError(f"maxval must be in 1..65535, got {maxval}")
    return magic, width, height, maxval, pos


def load_pgm(path):
    """Read a P2 or P5 PGM file and return pixels scaled to ``[0, 1]``.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    PGMHeaderError
        For a malformed header.
    PGMPixelCountError
        If the payload holds the wrong number of samples.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic, width, height, maxval, pos = _read_header(data)
    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise PGMPixelCountError("P5 payload is empty")
        payload = data[pos + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(payload) != count * dtype.itemsize:
            raise PGMPixelCountError(
                f"expected {count} samples ({count * dtype.itemsize} bytes), "
                f"payload has {len(payload)} bytes"
            )
        values = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        text = re.sub(rb"#[^\n]*", b" ", data[pos:])
        try:
            values = np.array([int(t) for t in text.split()], dtype=np.float64)
        except ValueError:
            raise PGMHeaderError("non-integer sample in P2 payload") from None
        if values.size != count:
            raise PGMPixelCountError(f"expected {count} samples, found {values.size}")
    if values.size and values.max() > maxval:
        raise PGMHeaderError(f"sample value exceeds maxval {maxval}")
    return (values / maxval).reshape(height, width)


def quantize(image, maxval=255):
    """Integer codes written by :func:`save_pgm` (round half up, clamped)."""
    codes = np.floor(np.asarray(image, dtype=np.float64) * maxval + 0.5)
    return np.clip(codes, 0, maxval).astype(np.int64)


def save_pgm(image, path, maxval=255):
    """Write ``image`` (values in ``[0, 1]``) as a binary P5 PGM."""
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    arr = check_image(image, bounded=True)
    codes = quantize(arr, maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    with open(os.fspath(path), "wb") as fh:
        fh.write(header)
        fh.write(codes.astype(dtype).tobytes())


def forward_diff_x(image):
    """Horizontal forward difference; the last column is zero."""
    u = np.asarray(image, dtype=np.float64)
    out = np.zeros_like(u)
    out[:, :-1] = u[:, 1:] - u[:, :-1]
    return out


def forward_diff_y(image):
    """Vertical forward difference; the last row is zero."""
    u = np.asarray(image, dtype=np.float64)
    out = np.zeros_like(u)
    out[:-1, :] = u[1:, :] - u[:-1, :]
    return out


def forward_diff_x_adjoint(field):
    """Exact adjoint of :func:`forward_diff_x` (a negative divergence)."""
    v = np.asarray(field, dtype=np.float64)
    out = np.zeros_like(v)
    out[:, 1:] += v[:, :-1]
    out[:, :-1] -= v[:, :-1]
    return out


def forward_diff_y_adjoint(field):
    """Exact adjoint of :func:`forward_diff_y`."""
    v = np.asarray(field, dtype=np.float64)
    out = np.zeros_like(v)
    out[1:, :] += v[:-1, :]
    out[:-1, :] -= v[:-1, :]
    return out


def contrast_stretch(image):
    """Affinely map ``[min, max]`` onto ``[0, 1]``; a flat image maps to 0.5."""
    u = np.asarray(image, dtype=np.float64)
    lo, hi = u.min(), u.max()
    if hi == lo:
        return np.full_like(u, 0.5)
    out = (u - lo) / (hi - lo)
    # guard against 1 + ulp from the division
    return np.clip(out, 0.0, 1.0)


def box_blur3(image):
    """3x3 mean filter with mirrored borders."""
    return ndimage.uniform_filter(np.asarray(image, dtype=np.float64), size=3, mode="reflect")
