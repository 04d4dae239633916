"""Metadata stripping for byte-level render comparisons."""

from __future__ import annotations

import re
import struct

__all__ = ["strip_metadata"]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_ANCILLARY_TEXT = {b"tEXt", b"zTXt", b"iTXt", b"tIME"}


def _strip_png(data: bytes) -> bytes:
    out = [data[:8]]
    pos = 8
    while pos < len(data):
        length = struct.unpack(">I", data[pos : pos + 4])[0]
        ctype = data[pos + 4 : pos + 8]
        chunk = data[pos : pos + 12 + length]
        if ctype not in _ANCILLARY_TEXT:
            out.append(chunk)
        pos += 12 + length
    return b"".join(out)


def _strip_svg(data: bytes) -> bytes:
    text = data.decode("utf-8", errors="replace")
    text = re.sub(r"<metadata>.*?</metadata>", "", text, flags=re.S)
    text = re.sub(r"<dc:date>.*?</dc:date>", "", text, flags=re.S)
    return text.encode()


def strip_metadata(data: bytes) -> bytes:
    """Drop text/time metadata from a PNG or SVG byte string."""
    if data.startswith(_PNG_MAGIC):
        return _strip_png(data)
    if b"<svg" in data[:500] or data.lstrip().startswith(b"<?xml"):
        return _strip_svg(data)
    return data
