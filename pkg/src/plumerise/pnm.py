"""Netpbm reader/writer for binary plume masks.

Accepts the four single-channel netpbm flavors: P1/P2 (ASCII bitmap/graymap)
and P4/P5 (binary bitmap/graymap). Comments introduced by '#' are honored.
Graymap samples at or above a threshold (default 128) count as plume;
bitmap set bits (black) count as plume. Masks are written back out as
maxval-255 graymaps, P5 by default.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import numpy as np

MAX_MAXVAL = 65535
PLUME_THRESHOLD = 128

_WHITESPACE = b" \t\n\r\x0b\x0c"


class MalformedHeader(ValueError):
    """The file does not start with a valid netpbm header."""


class TruncatedPayload(ValueError):
    """The pixel payload ends before width * height samples."""


class UnsupportedMaxval(ValueError):
    """Graymap maxval outside the supported 1..65535 range."""


@dataclass(frozen=True)
class PlumeMask:
    """Binary raster with plume pixels True, raster coordinates (row, col)."""

    width_px: int
    height_px: int
    pixels: np.ndarray  # bool, shape (height_px, width_px)
    source_id: str = ""
    timestamp: Optional[datetime] = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=bool)
        if px.shape != (self.height_px, self.width_px):
            raise ValueError(
                f"pixel array shape {px.shape} does not match "
                f"{self.height_px}x{self.width_px} header"
            )
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def plume_pixel_count(self) -> int:
        return int(self.pixels.sum())

    def is_empty(self) -> bool:
        return not self.pixels.any()


def _skip_filler(data: bytes, pos: int) -> int:
    """Advance past whitespace and '#' comments."""
    while pos < len(data):
        byte = data[pos : pos + 1]
        if byte in _WHITESPACE:
            pos += 1
        elif byte == b"#":
            newline = data.find(b"\n", pos)
            if newline == -1:
                raise MalformedHeader("comment never terminated")
            pos = newline + 1
        else:
            break
    return pos


def _read_header_ints(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` decimal header fields after the magic.

    Returns the values and the offset of the first payload byte (one
    whitespace byte past the last field, per the format).
    """
    pos = 2
    values: list[int] = []
    while len(values) < count:
        pos = _skip_filler(data, pos)
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise MalformedHeader(f"expected integer header field at byte {start}")
        values.append(int(data[start:pos]))
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise MalformedHeader("missing whitespace after the header")
    return values, pos + 1


def _strip_ascii_comments(payload: bytes) -> bytes:
    lines = payload.split(b"\n")
    return b"\n".join(line.split(b"#", 1)[0] for line in lines)


def parse_pnm(
    data: bytes,
    source_id: str = "",
    timestamp: Optional[datetime] = None,
    threshold: int = PLUME_THRESHOLD,
) -> PlumeMask:
    """Decode a netpbm image into a PlumeMask.

    Args:
        data: raw file contents, P1/P2/P4/P5.
        source_id, timestamp: carried through onto the mask.
        threshold: graymap sample value at which a pixel counts as plume.

    Raises:
        MalformedHeader, TruncatedPayload, UnsupportedMaxval.
    """
    if len(data) < 2:
        raise MalformedHeader("file shorter than a magic token")
    magic = data[:2]
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise MalformedHeader(f"unsupported magic {magic!r}")

    is_bitmap = magic in (b"P1", b"P4")
    n_fields = 2 if is_bitmap else 3
    fields, offset = _read_header_ints(data, n_fields)
    width, height = fields[0], fields[1]
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"nonpositive dimensions {width}x{height}")
    if not is_bitmap:
        maxval = fields[2]
        if maxval <= 0:
            raise MalformedHeader("maxval must be positive")
        if maxval > MAX_MAXVAL:
            raise UnsupportedMaxval(f"maxval {maxval} exceeds {MAX_MAXVAL}")

    if magic == b"P4":
        row_bytes = (width + 7) // 8
        needed = row_bytes * height
        payload = data[offset : offset + needed]
        if len(payload) < needed:
            raise TruncatedPayload(f"need {needed} payload bytes, have {len(payload)}")
        bits = np.unpackbits(
            np.frombuffer(payload, dtype=np.uint8).reshape(height, row_bytes), axis=1
        )
        pixels = bits[:, :width].astype(bool)
    elif magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        needed = width * height * dtype.itemsize
        payload = data[offset : offset + needed]
        if len(payload) < needed:
            raise TruncatedPayload(f"need {needed} payload bytes, have {len(payload)}")
        samples = np.frombuffer(payload, dtype=dtype).reshape(height, width)
        pixels = samples >= threshold
    elif magic == b"P1":
        body = _strip_ascii_comments(data[offset - 1 :])
        digits = [c for c in body if c in b"01"]
        stray = [c for c in body if c not in b"01" and bytes([c]) not in _WHITESPACE]
        if stray:
            raise MalformedHeader(f"unexpected byte {bytes(stray[:1])!r} in bitmap data")
        if len(digits) < width * height:
            raise TruncatedPayload(f"need {width * height} bits, have {len(digits)}")
        bits = np.array(digits[: width * height], dtype=np.uint8) - ord("0")
        pixels = bits.reshape(height, width).astype(bool)
    else:  # P2
        body = _strip_ascii_comments(data[offset - 1 :])
        try:
            tokens = [int(tok) for tok in body.split()]
        except ValueError as exc:
            raise MalformedHeader(f"non-numeric graymap sample: {exc}") from None
        if len(tokens) < width * height:
            raise TruncatedPayload(f"need {width * height} samples, have {len(tokens)}")
        samples = np.array(tokens[: width * height]).reshape(height, width)
        pixels = samples >= threshold

    return PlumeMask(
        width_px=width,
        height_px=height,
        pixels=pixels,
        source_id=source_id,
        timestamp=timestamp,
    )


def encode_pnm(mask: PlumeMask, fmt: str = "P5") -> bytes:
    """Encode a mask as a maxval-255 graymap (plume 255, background 0)."""
    header = f"{fmt}\n{mask.width_px} {mask.height_px}\n255\n".encode("ascii")
    if fmt == "P5":
        return header + (mask.pixels.astype(np.uint8) * 255).tobytes()
    if fmt == "P2":
        rows = [
            " ".join("255" if v else "0" for v in row) for row in mask.pixels
        ]
        return header + ("\n".join(rows) + "\n").encode("ascii")
    raise ValueError(f"unsupported output format {fmt!r}")
