"""Bit-exact readers/writers: SHC buffer container, PFM, Radiance HDR, SH text.

SHC is the engine's own container for multi-channel linear buffers:

    magic "SHC1"
    u32le width, height, channel_count
    channel_count x (u32le name_length, UTF-8 name bytes)
    payload: float32le, plane-sequential (plane 0 fully row-major, then 1, ...)

Planes are stored sequentially so relighting can stream one coefficient
plane at a time.
"""

from __future__ import annotations

import struct

import numpy as np


class ParseError(ValueError):
    """Malformed file; `offset` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


# ---------------------------------------------------------------------------
# SHC container
# ---------------------------------------------------------------------------

SHC_MAGIC = b"SHC1"


def write_shc(width: int, height: int, channels: dict[str, np.ndarray]) -> bytes:
    """Serialize named (height, width) float planes."""
    if not channels:
        raise ValueError("SHC container needs at least one channel")
    names = list(channels.keys())
    if len(set(names)) != len(names):
        raise ValueError("duplicate channel names")
    out = [SHC_MAGIC, struct.pack("<III", width, height, len(names))]
    for name in names:
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
    for name in names:
        plane = np.asarray(channels[name], dtype=np.float32)
        if plane.shape != (height, width):
            raise ValueError(f"channel {name!r} has shape {plane.shape}, expected {(height, width)}")
        out.append(plane.astype("<f4").tobytes())
    return b"".join(out)


def read_shc(data: bytes) -> tuple[int, int, dict[str, np.ndarray]]:
    """Inverse of write_shc; byte-exact round trip."""
    if data[:4] != SHC_MAGIC:
        raise ParseError(f"bad magic {data[:4]!r}", 0)
    if len(data) < 16:
        raise ParseError("truncated header", len(data))
    width, height, nch = struct.unpack_from("<III", data, 4)
    if nch == 0:
        raise ParseError("container has no channels", 12)
    pos = 16
    names = []
    for _ in range(nch):
        if pos + 4 > len(data):
            raise ParseError("truncated channel name table", pos)
        (nlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + nlen > len(data):
            raise ParseError("truncated channel name", pos)
        names.append(data[pos : pos + nlen].decode("utf-8"))
        pos += nlen
    if len(set(names)) != len(names):
        raise ParseError("duplicate channel names", pos)
    plane_bytes = width * height * 4
    channels = {}
    for name in names:
        if pos + plane_bytes > len(data):
            raise ParseError(f"truncated payload for channel {name!r}", pos)
        plane = np.frombuffer(data[pos : pos + plane_bytes], dtype="<f4")
        channels[name] = plane.reshape(height, width).copy()
        pos += plane_bytes
    return width, height, channels


# ---------------------------------------------------------------------------
# PFM (portable float map)
# ---------------------------------------------------------------------------


def write_pfm(image: np.ndarray, little_endian: bool = True) -> bytes:
    """RGB (H, W, 3) or gray (H, W) float image; rows stored bottom-up."""
    image = np.asarray(image, dtype=np.float32)
    color = image.ndim == 3
    if color and image.shape[2] != 3:
        raise ValueError("PFM color images must have 3 channels")
    h, w = image.shape[:2]
    header = b"PF\n" if color else b"Pf\n"
    scale = -1.0 if little_endian else 1.0
    dt = "<f4" if little_endian else ">f4"
    body = image[::-1].astype(dt).tobytes()
    return header + f"{w} {h}\n".encode() + f"{scale:.1f}\n".encode() + body


def read_pfm(data: bytes) -> np.ndarray:
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("unexpected end of PFM header", pos)
        return data[start:pos]

    kind = token()
    if kind not in (b"PF", b"Pf"):
        raise ParseError(f"not a PFM stream: {kind!r}", 0)
    w = int(token())
    h = int(token())
    scale = float(token())
    pos += 1  # single whitespace after the scale line
    nch = 3 if kind == b"PF" else 1
    need = w * h * nch * 4
    if len(data) - pos < need:
        raise ParseError("truncated PFM payload", pos)
    dt = "<f4" if scale < 0 else ">f4"
    img = np.frombuffer(data[pos : pos + need], dtype=dt).reshape(h, w, nch)[::-1]
    if abs(scale) not in (0.0, 1.0):
        img = img * abs(scale)
    return np.ascontiguousarray(img[..., 0] if nch == 1 else img).astype(np.float32)


# ---------------------------------------------------------------------------
# Radiance HDR (RGBE)
# ---------------------------------------------------------------------------


def _rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    rgbe = rgbe.astype(np.float64)
    exp = rgbe[..., 3]
    scale = np.where(exp == 0, 0.0, np.ldexp(1.0 / 256.0, (exp - 128).astype(np.int64)))
    return rgbe[..., :3] * scale[..., None]


def read_hdr(data: bytes) -> np.ndarray:
    """Decode a Radiance .hdr stream to linear RGB (H, W, 3).

    Accepts new-style RLE and flat scanlines, `-Y H +X W` orientation only.
    """
    if not (data.startswith(b"#?RADIANCE") or data.startswith(b"#?RGBE")):
        raise ParseError("missing #?RADIANCE / #?RGBE signature", 0)
    pos = 0
    fmt_ok = False
    resolution = None
    while pos < len(data):
        eol = data.find(b"\n", pos)
        if eol < 0:
            raise ParseError("header never ends", pos)
        line = data[pos:eol]
        pos = eol + 1
        if line.startswith(b"FORMAT="):
            if line.strip() != b"FORMAT=32-bit_rle_rgbe":
                raise ParseError(f"unsupported format {line!r}", pos - len(line) - 1)
            fmt_ok = True
        elif line == b"":
            # blank line ends the header; next line is the resolution
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise ParseError("missing resolution line", pos)
            resolution = data[pos:eol]
            pos = eol + 1
            break
    if not fmt_ok:
        raise ParseError("FORMAT=32-bit_rle_rgbe line not found", pos)
    if resolution is None:
        raise ParseError("missing resolution line", pos)
    parts = resolution.split()
    if len(parts) != 4 or parts[0] != b"-Y" or parts[2] != b"+X":
        raise ParseError(f"unsupported orientation {resolution!r}", pos - len(resolution) - 1)
    height = int(parts[1])
    width = int(parts[3])

    pixels = np.empty((height, width, 4), dtype=np.uint8)
    for row in range(height):
        if pos + 4 > len(data):
            raise ParseError(f"truncated scanline {row}", pos)
        b0, b1, b2, b3 = data[pos : pos + 4]
        if b0 == 2 and b1 == 2 and (b2 << 8 | b3) == width and width >= 8:
            pos += 4
            for comp in range(4):
                x = 0
                while x < width:
                    if pos >= len(data):
                        raise ParseError(f"truncated RLE scanline {row}", pos)
                    count = data[pos]
                    pos += 1
                    if count > 128:  # run
                        run = count - 128
                        if pos >= len(data) or x + run > width:
                            raise ParseError(f"bad RLE run in scanline {row}", pos)
                        pixels[row, x : x + run, comp] = data[pos]
                        pos += 1
                        x += run
                    else:  # literals
                        if count == 0 or x + count > width or pos + count > len(data):
                            raise ParseError(f"bad RLE literals in scanline {row}", pos)
                        pixels[row, x : x + count, comp] = np.frombuffer(
                            data[pos : pos + count], dtype=np.uint8
                        )
                        pos += count
                        x += count
        elif b0 == 1 and b1 == 1 and b2 == 1:
            raise ParseError("old-style RLE scanlines are not supported", pos)
        else:
            need = width * 4
            if pos + need > len(data):
                raise ParseError(f"truncated flat scanline {row}", pos)
            pixels[row] = np.frombuffer(data[pos : pos + need], dtype=np.uint8).reshape(width, 4)
            pos += need
    return _rgbe_to_float(pixels)


# ---------------------------------------------------------------------------
# SH coefficient text format
# ---------------------------------------------------------------------------


def write_sh_text(blocks: list[np.ndarray]) -> str:
    """Each block: one `SH <N>` line then (N+1)^2 floats (repr round-trips)."""
    import math

    out = []
    for c in blocks:
        c = np.asarray(c, dtype=np.float64)
        n = int(round(math.sqrt(c.size))) - 1
        if (n + 1) ** 2 != c.size:
            raise ValueError(f"{c.size} is not a valid coefficient count")
        out.append(f"SH {n}")
        out.append(" ".join(repr(float(v)) for v in c))
    return "\n".join(out) + "\n"


def read_sh_text(text: str) -> list[np.ndarray]:
    tokens = text.split()
    blocks = []
    i = 0
    while i < len(tokens):
        if tokens[i] != "SH":
            raise ValueError(f"expected 'SH', got {tokens[i]!r}")
        n = int(tokens[i + 1])
        count = (n + 1) ** 2
        vals = tokens[i + 2 : i + 2 + count]
        if len(vals) != count:
            raise ValueError(f"SH {n} block needs {count} values, found {len(vals)}")
        blocks.append(np.array([float(v) for v in vals]))
        i += 2 + count
    if not blocks:
        raise ValueError("no SH blocks found")
    return blocks


# ---------------------------------------------------------------------------
# PNG display images (via Pillow)
# ---------------------------------------------------------------------------


def encode_png(rgba: np.ndarray) -> bytes:
    """uint8 (H, W, 3|4) array to PNG bytes."""
    from io import BytesIO

    from PIL import Image

    img = Image.fromarray(rgba, "RGBA" if rgba.shape[-1] == 4 else "RGB")
    buf = BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    from io import BytesIO

    from PIL import Image

    return np.asarray(Image.open(BytesIO(data)))
