"""Binary PGM (P5) input/output and rendering of fitted models and label maps."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from armafield.core import as_field, zero_mean
from armafield.errors import PGMFormatError
from armafield.ywls import ArmaFit

_WS = b" \t\n\r\v\f"


@dataclass(frozen=True)
class GrayImage:
    """Grayscale raster; ``samples`` has shape ``(height, width)``."""

    samples: np.ndarray
    maxval: int = 255

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 2:
            raise ValueError("samples must be a 2D grid")
        if not 0 < self.maxval <= 65535:
            raise ValueError(f"maxval must lie in 1..65535, got {self.maxval}")
        if s.size and (s.min() < 0 or s.max() > self.maxval):
            raise ValueError(f"samples outside [0, {self.maxval}]")
        object.__setattr__(self, "samples", s.astype(np.uint16 if self.maxval > 255 else np.uint8))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def depth(self) -> int:
        return 16 if self.maxval > 255 else 8


def _header_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated tokens, skipping ``#`` comments."""
    pos, tokens = 0, []
    while len(tokens) < count:
        while pos < len(data) and data[pos] in _WS:
            pos += 1
        if pos >= len(data):
            raise PGMFormatError("truncated PGM header")
        if data[pos] == ord("#"):
            end = data.find(b"\n", pos)
            if end < 0:
                raise PGMFormatError("truncated PGM header")
            pos = end + 1
            continue
        m = re.compile(rb"[^ \t\n\r\v\f#]+").match(data, pos)
        tokens.append(m.group())
        pos = m.end()
    if pos >= len(data) or data[pos] not in _WS:
        raise PGMFormatError("missing whitespace after PGM header")
    return tokens, pos + 1


def read_pgm(data: bytes) -> GrayImage:
    """Decode a binary (P5) PGM. 16-bit samples are big-endian."""
    if data[:2] != b"P5":
        if data[:2] in (b"P2", b"P1", b"P3", b"P4", b"P6"):
            raise PGMFormatError(f"unsupported Netpbm format {data[:2].decode()}; only binary P5 is read")
        raise PGMFormatError("not a PGM file (bad magic number)")
    tokens, start = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMFormatError(f"non-numeric PGM header field in {tokens[1:]}") from exc
    if width < 1 or height < 1:
        raise PGMFormatError(f"invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise PGMFormatError(f"invalid PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    nbytes = width * height * dtype.itemsize
    payload = data[start:start + nbytes]
    if len(payload) < nbytes:
        raise PGMFormatError(f"truncated PGM payload: {len(payload)} of {nbytes} bytes")
    samples = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if samples.max() > maxval:
        raise PGMFormatError(f"sample value exceeds maxval {maxval}")
    return GrayImage(samples, maxval)


def write_pgm(img: GrayImage) -> bytes:
    """Encode with the canonical header ``P5\\n<w> <h>\\n<maxval>\\n``."""
    dtype = ">u2" if img.maxval > 255 else "u1"
    header = f"P5\n{img.width} {img.height}\n{img.maxval}\n".encode("ascii")
    return header + img.samples.astype(dtype).tobytes()


def load_pgm(path) -> GrayImage:
    return read_pgm(Path(path).read_bytes())


def save_pgm(path, img: GrayImage) -> None:
    Path(path).write_bytes(write_pgm(img))


def to_field(img: GrayImage):
    """Samples as ``float64``, centred; returns ``(field, mean)``."""
    return zero_mean(img.samples.astype(np.float64))


def quantize(values, maxval: int = 255) -> GrayImage:
    """Round and clamp real values into ``[0, maxval]``."""
    q = np.clip(np.rint(np.asarray(values, dtype=float)), 0, maxval)
    return GrayImage(q.astype(np.uint16), maxval)


def field_to_image(field, maxval: int = 65535):
    """Map a real field linearly onto ``[0, maxval]``.

    ``pixel = round(offset + (x - mean) * scale)`` with the scale chosen so the
    largest deviation lands one level inside the range. Returns the image and
    ``{"mean", "scale", "offset"}``; :func:`image_to_field` inverts it to
    within ``0.5 / scale``.
    """
    x = as_field(field)
    mean = float(x.mean())
    offset = (maxval + 1) // 2
    span = float(np.max(np.abs(x - mean)))
    scale = (offset - 1) / span if span > 0 else 1.0
    img = quantize(offset + (x - mean) * scale, maxval)
    return img, {"mean": mean, "scale": scale, "offset": offset}


def image_to_field(img: GrayImage, mean: float, scale: float, offset: int) -> np.ndarray:
    return (img.samples.astype(float) - offset) / scale + mean


def predict_block(block, fit: ArmaFit, variant: str = "innovation") -> np.ndarray:
    """Model output of one fitted block; ``block`` must be the centred block.

    Inside the regression region the value is
    ``-sum a x[n-i,m-j] + sum b w[n-i,m-j]`` (plus ``w[n,m]`` for the
    ``"innovation"`` variant), with ``w`` the stored stage-one innovation
    estimate. Outside it the block is returned unchanged.
    """
    if variant not in ("innovation", "zero"):
        raise ValueError(f"unknown reconstruction variant {variant!r}")
    x = np.asarray(block, dtype=float)
    order = fit.order
    K1, K2 = order.K1, order.K2
    L, M = order.margins
    n1, n2 = x.shape
    w = fit.noise
    if w.shape != (n1 - K1, n2 - K2):
        raise ValueError(f"fit noise {w.shape} does not belong to a {n1}x{n2} block")

    def w_at(i, j):
        return w[L + 1 - i - K1: n1 - i - K1, M + 1 - j - K2: n2 - j - K2]

    pred = np.zeros((n1 - 1 - L, n2 - 1 - M))
    for (i, j) in order.ar_lags:
        pred -= fit.params.a[(i, j)] * x[L + 1 - i: n1 - i, M + 1 - j: n2 - j]
    for (i, j) in order.ma_lags:
        pred += fit.params.b[(i, j)] * w_at(i, j)
    if variant == "innovation":
        pred += w_at(0, 0)
    out = x.copy()
    out[L + 1:, M + 1:] = pred
    return out


def render_reconstruction(
    field,
    fits: Sequence[Optional[ArmaFit]],
    block_size: int,
    *,
    valid: Optional[Sequence[bool]] = None,
    variant: str = "innovation",
    maxval: int = 255,
) -> GrayImage:
    """Replace every fitted block by its model output.

    ``field`` holds the raw (uncentred) intensities and ``fits`` the
    per-block results of a non-overlapping tiling in row-major order. Each
    block is centred with its own mean, predicted, and shifted back. Pixels
    outside all blocks or outside a block's regression region keep their
    original value.
    """
    x = as_field(field)
    gh, gw = x.shape[0] // block_size, x.shape[1] // block_size
    if len(fits) != gh * gw:
        raise ValueError(f"expected {gh * gw} block fits, got {len(fits)}")
    if valid is None:
        valid = [f is not None for f in fits]
    out = x.copy()
    for idx, fit in enumerate(fits):
        r, c = divmod(idx, gw)
        sl = (slice(r * block_size, (r + 1) * block_size), slice(c * block_size, (c + 1) * block_size))
        if fit is None:
            if valid[idx]:
                raise ValueError(f"block {idx} is valid but has no fit")
            continue
        centred, bmean = zero_mean(x[sl])
        out[sl] = predict_block(centred, fit, variant) + bmean
    return quantize(out, maxval)


def label_levels(n_classes: int) -> np.ndarray:
    """Gray level per label: classes at ``255 (c+1) / K``, the invalid label at 0."""
    levels = np.rint(255.0 * np.arange(1, n_classes + 1) / n_classes).astype(np.uint8)
    return np.append(levels, np.uint8(0))


def render_labels(seg) -> GrayImage:
    """Pixel-level label image of a :class:`~armafield.segmenter.SegmentationMap`."""
    levels = label_levels(seg.n_classes)
    return GrayImage(levels[seg.pixel_labels], 255)


def psnr(reference, test, peak: float = 255.0) -> float:
    err = np.mean((np.asarray(reference, float) - np.asarray(test, float)) ** 2)
    return float("inf") if err == 0 else float(10 * np.log10(peak ** 2 / err))
