"""Binary NetPBM (P5 grayscale / P6 color) reading and writing.

Values are scaled to [0, 1] on read (dividing by maxval) and quantized by
rounding on write, so write -> read is exact on the 1/maxval grid.
Maxval 255 uses one byte per sample, maxval 65535 two bytes big-endian.
"""

from __future__ import annotations

import numpy as np

from .buffer import ImageBuffer
from .errors import ParseError

_WHITESPACE = b" \t\r\n"


def read_netpbm(path) -> ImageBuffer:
    with open(path, "rb") as fh:
        blob = fh.read()
    return parse_netpbm(blob)


def parse_netpbm(blob: bytes) -> ImageBuffer:
    pos = 0
    magic, pos = _token(blob, pos)
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}", 0)
    channels = 1 if magic == b"P5" else 3

    width, pos = _int_token(blob, pos, "width")
    height, pos = _int_token(blob, pos, "height")
    maxval, pos = _int_token(blob, pos, "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"bad dimensions {width}x{height}", pos)
    if maxval not in (255, 65535):
        raise ParseError(f"unsupported maxval {maxval}", pos)

    # single whitespace byte separates header from payload
    if pos >= len(blob) or blob[pos:pos + 1] not in (b" ", b"\t", b"\r", b"\n"):
        raise ParseError("missing whitespace before payload", pos)
    pos += 1

    bytes_per = 1 if maxval == 255 else 2
    need = width * height * channels * bytes_per
    payload = blob[pos:pos + need]
    if len(payload) < need:
        raise ParseError(
            f"truncated payload: need {need} bytes, have {len(payload)}", pos + len(payload))
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    arr = raw.reshape(height, width, channels) / float(maxval)
    return ImageBuffer(arr)


def write_netpbm(img: ImageBuffer, path, maxval: int = 255) -> None:
    if maxval not in (255, 65535):
        raise ParseError(f"unsupported maxval {maxval}")
    if img.channels == 1:
        magic = b"P5"
    elif img.channels == 3:
        magic = b"P6"
    else:
        raise ParseError(f"NetPBM supports 1 or 3 channels, got {img.channels}")
    q = np.clip(np.rint(img.data * maxval), 0, maxval)
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    header = b"%s\n%d %d\n%d\n" % (magic, img.width, img.height, maxval)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.astype(dtype).tobytes())


def _skip_space_and_comments(blob: bytes, pos: int) -> int:
    n = len(blob)
    while pos < n:
        b = blob[pos:pos + 1]
        if b in (b" ", b"\t", b"\r", b"\n"):
            pos += 1
        elif b == b"#":
            while pos < n and blob[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    return pos


def _token(blob: bytes, pos: int) -> tuple[bytes, int]:
    pos = _skip_space_and_comments(blob, pos)
    start = pos
    n = len(blob)
    while pos < n and blob[pos:pos + 1] not in (b" ", b"\t", b"\r", b"\n", b"#"):
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of header", start)
    return blob[start:pos], pos


def _int_token(blob: bytes, pos: int, name: str) -> tuple[int, int]:
    tok, newpos = _token(blob, pos)
    try:
        return int(tok), newpos
    except ValueError:
        raise ParseError(f"invalid {name} field {tok!r}", pos) from None
