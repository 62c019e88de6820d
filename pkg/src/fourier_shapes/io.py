"""File formats: coefficient JSON, raw float grids, PGM/PNG masks, SVG paths."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .contour import FourierCoefficients, InvalidInputError

RAW_MAGIC = b"WNDR"
_RAW_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """Malformed file; ``offset`` is the byte/character position when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


# -- coefficients -----------------------------------------------------------

def coefficients_to_json(c: FourierCoefficients) -> dict:
    return {"K": c.K, "coeffs": c.params.reshape(-1, 2).tolist()}


def coefficients_from_json(doc) -> FourierCoefficients:
    if not isinstance(doc, dict) or "K" not in doc or "coeffs" not in doc:
        raise FormatError('coefficient document needs keys "K" and "coeffs"')
    K = doc["K"]
    if not isinstance(K, int) or isinstance(K, bool) or K < 0:
        raise FormatError(f"K must be a non-negative integer, got {K!r}")
    pairs = doc["coeffs"]
    if not isinstance(pairs, list) or len(pairs) != 2 * K + 1:
        n = len(pairs) if isinstance(pairs, list) else "non-list"
        raise FormatError(f"expected {2 * K + 1} coefficient pairs for K={K}, got {n}")
    for i, p in enumerate(pairs):
        if not (isinstance(p, list) and len(p) == 2
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)):
            raise FormatError(f"coefficient entry {i} (k={i - K}) is not an [a, b] pair of numbers")
    try:
        return FourierCoefficients(K, np.asarray(pairs, dtype=np.float64).reshape(-1))
    except InvalidInputError as e:
        raise FormatError(str(e)) from e


def save_coefficients(c: FourierCoefficients, path) -> None:
    Path(path).write_text(json.dumps(coefficients_to_json(c)) + "\n")


def load_coefficients(path) -> FourierCoefficients:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e.msg}", offset=e.pos) from e
    return coefficients_from_json(doc)


# -- raw float grids --------------------------------------------------------

def write_raw(values, path) -> None:
    v = np.asarray(values, dtype="<f4")
    if v.ndim != 2:
        raise InvalidInputError(f"raw grids are 2-D, got shape {v.shape}")
    H, W = v.shape
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, H, W, 0))
        fh.write(np.ascontiguousarray(v).tobytes())


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _RAW_HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(data))
    magic, H, W, _ = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    expected = _RAW_HEADER.size + 4 * H * W
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {H}x{W}, got {len(data)}",
                          offset=min(len(data), expected))
    return np.frombuffer(data, dtype="<f4", offset=_RAW_HEADER.size).reshape(H, W).astype(np.float64)


# -- masks and images -------------------------------------------------------

def to_u8(mask) -> np.ndarray:
    v = np.asarray(mask, dtype=np.float64)
    return np.round(255.0 * np.clip(v, 0.0, 1.0)).astype(np.uint8)


def write_pgm(mask, path) -> None:
    u8 = to_u8(mask)
    H, W = u8.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (W, H))
        fh.write(u8.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header", offset=pos)
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM", offset=0)
    W, H, maxval = (int(t) for t in tokens[1:])
    body = data[pos + 1: pos + 1 + W * H]
    if maxval != 255 or len(body) != W * H:
        raise FormatError(f"{path}: unsupported or truncated PGM body", offset=pos + 1)
    return np.frombuffer(body, dtype=np.uint8).reshape(H, W).astype(np.float64) / 255.0


def write_png(image, path) -> None:
    from PIL import Image

    v = np.asarray(image, dtype=np.float64)
    if v.ndim == 3 and v.shape[2] == 1:
        v = v[:, :, 0]
    Image.fromarray(to_u8(v)).save(path, format="PNG")


def read_image(path) -> np.ndarray:
    """Read a PNG/PGM into an ``(H, W, C)`` float array in ``[0, 1]``, C in {1, 3}."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if "A" in im.mode or im.mode in ("P", "CMYK") else "L")
        arr = np.asarray(im)
    if arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = arr.astype(np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def save_mask(mask, path) -> None:
    """Dispatch on suffix: ``.pgm``, ``.png`` (8-bit) or ``.wndr``/``.raw`` (float32)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        write_pgm(mask, path)
    elif suffix == ".png":
        write_png(mask, path)
    elif suffix in (".wndr", ".raw", ".bin"):
        write_raw(mask, path)
    else:
        raise InvalidInputError(f"unsupported mask format {suffix!r}")


# -- vector export ----------------------------------------------------------

def svg_path(vertices) -> str:
    v = np.asarray(vertices, dtype=np.float64)
    parts = [f"M {v[0, 0]:.6f} {v[0, 1]:.6f}"]
    parts += [f"L {x:.6f} {y:.6f}" for x, y in v[1:]]
    parts.append("Z")
    return " ".join(parts)


def write_svg(vertices, path, view=(-1.0, -1.0, 2.0, 2.0)) -> None:
    x, y, w, h = view
    doc = (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x} {y} {w} {h}">\n'
        f'  <path d="{svg_path(vertices)}" fill="black" fill-rule="nonzero" stroke="none"/>\n'
        "</svg>\n"
    )
    Path(path).write_text(doc)
