"""File formats: Radiance RGBE, binary PPM, PNG, stack manifests, CRF tables.

Every writer is deterministic (same input, same bytes).  The RGBE codec
follows the classic Radiance picture format: a shared 8-bit exponent per
pixel, adaptive run-length encoded scanlines for widths in [8, 32767] and
flat 4-byte pixels otherwise; the reader additionally accepts the old-style
run-length scheme.  Decoding places each mantissa at the center of its
quantization bin (m + 0.5), which bounds the round-trip error by one part
in 256 of the dominant channel and makes write(read(file)) byte-identical.
"""

import json
import os
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .calibration import NUM_LEVELS, ResponseCurve
from .errors import InvalidArgumentError, ParseError, UnsupportedFormatError
from .image import ExposureStack, HdrImage, LdrImage, LN2

_RGBE_HEADER_MAGIC = b"#?"
_RGBE_FORMAT = b"FORMAT=32-bit_rle_rgbe"
_RESOLUTION_RE = re.compile(rb"^-Y (\d+) \+X (\d+)$")
_MIN_RLE_WIDTH = 8
_MAX_RLE_WIDTH = 32767
_MIN_RUN = 4


# ---------------------------------------------------------------------------
# RGBE


def _encode_rgbe_pixels(data: np.ndarray) -> np.ndarray:
    """Map float RGB to (r, g, b, e) bytes with a shared exponent."""
    dominant = data.max(axis=-1)
    frac, exponent = np.frexp(dominant)          # dominant = frac * 2**exponent
    if np.any(exponent > 127):
        raise InvalidArgumentError("radiance exceeds the RGBE exponent range")
    live = dominant > 1e-32
    scale = np.ldexp(1.0, 8 - exponent)          # component * 2**(8 - exponent)
    mantissas = np.minimum(np.floor(data * scale[..., None]), 255.0)
    out = np.zeros(data.shape[:-1] + (4,), dtype=np.uint8)
    out[..., :3] = np.where(live[..., None], mantissas, 0.0).astype(np.uint8)
    out[..., 3] = np.where(live, exponent + 128, 0).astype(np.uint8)
    return out


def _decode_rgbe_pixels(rgbe: np.ndarray) -> np.ndarray:
    exponent = rgbe[..., 3].astype(np.int64)
    scale = np.where(exponent != 0, np.ldexp(1.0, exponent - 136), 0.0)
    return (rgbe[..., :3].astype(np.float64) + 0.5) * scale[..., None]


def _rle_encode_component(row: np.ndarray) -> bytes:
    """Adaptive RLE for one component of one scanline.

    Greedy left-to-right: literals are flushed in chunks of up to 128 bytes
    until a run of at least four equal bytes starts; runs are emitted in
    chunks of up to 127.
    """
    out = bytearray()
    n = row.size
    pos = 0
    while pos < n:
        run_start = pos
        run_len = 1
        while run_start < n:
            run_len = 1
            while (run_start + run_len < n and run_len < _MIN_RUN
                   and row[run_start + run_len] == row[run_start]):
                run_len += 1
            if run_len >= _MIN_RUN or run_start + run_len >= n:
                break
            run_start += run_len
        if run_len < _MIN_RUN:
            run_start = n  # no run worth encoding; everything is literal
        lit = pos
        while lit < run_start:
            count = min(128, run_start - lit)
            out.append(count)
            out += row[lit:lit + count].tobytes()
            lit += count
        if run_start < n:
            value = row[run_start]
            total = _MIN_RUN
            while run_start + total < n and row[run_start + total] == value:
                total += 1
            done = 0
            while done < total:
                count = min(127, total - done)
                out += bytes((128 + count, int(value)))
                done += count
            pos = run_start + total
        else:
            pos = n
    return bytes(out)


def write_rgbe(hdr: HdrImage, path: str | os.PathLike) -> None:
    """Write a Radiance .hdr file (adaptive RLE when the width allows)."""
    h, w = hdr.data.shape[:2]
    rgbe = _encode_rgbe_pixels(hdr.data)
    chunks = [b"#?RADIANCE\n", _RGBE_FORMAT + b"\n", b"\n",
              b"-Y %d +X %d\n" % (h, w)]
    if _MIN_RLE_WIDTH <= w <= _MAX_RLE_WIDTH:
        for y in range(h):
            chunks.append(bytes((2, 2, w >> 8, w & 0xFF)))
            for c in range(4):
                chunks.append(_rle_encode_component(rgbe[y, :, c]))
    else:
        chunks.append(rgbe.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def _read_rgbe_header(blob: bytes) -> tuple[int, int, int]:
    """Returns (height, width, offset of pixel data)."""
    if not blob.startswith(_RGBE_HEADER_MAGIC):
        raise ParseError("not a Radiance file: missing '#?' magic", offset=0)
    pos = 0
    saw_format = False
    while True:
        end = blob.find(b"\n", pos)
        if end < 0:
            raise ParseError("unterminated header", offset=pos)
        line = blob[pos:end]
        if pos == 0:
            pass  # program signature line, already validated
        elif line == b"":
            pos = end + 1
            break
        elif line.startswith(b"#"):
            pass
        elif line.startswith(b"FORMAT="):
            if line != _RGBE_FORMAT:
                raise UnsupportedFormatError(f"unsupported pixel format {line[7:].decode(errors='replace')!r}")
            saw_format = True
        elif line.startswith(b"EXPOSURE=") or line.startswith(b"GAMMA=") or line.startswith(b"COLORCORR="):
            raise UnsupportedFormatError(f"unsupported header directive {line.split(b'=')[0].decode()!r}")
        pos = end + 1
    if not saw_format:
        raise UnsupportedFormatError("header missing FORMAT=32-bit_rle_rgbe")
    end = blob.find(b"\n", pos)
    if end < 0:
        raise ParseError("missing resolution line", offset=pos)
    match = _RESOLUTION_RE.match(blob[pos:end])
    if not match:
        raise UnsupportedFormatError(
            f"unsupported resolution line {blob[pos:end].decode(errors='replace')!r} "
            "(only '-Y H +X W' orientation)")
    return int(match.group(1)), int(match.group(2)), end + 1


def _decode_adaptive_scanline(blob: bytes, pos: int, width: int, where: str) -> tuple[np.ndarray, int]:
    row = np.empty((4, width), dtype=np.uint8)
    for c in range(4):
        filled = 0
        while filled < width:
            if pos >= len(blob):
                raise ParseError(f"truncated scanline ({where})", offset=pos)
            count = blob[pos]
            pos += 1
            if count > 128:  # run packet
                count -= 128
                if filled + count > width or pos >= len(blob):
                    raise ParseError(f"run overflows scanline ({where})", offset=pos)
                row[c, filled:filled + count] = blob[pos]
                pos += 1
            else:
                if count == 0 or filled + count > width or pos + count > len(blob):
                    raise ParseError(f"bad literal packet ({where})", offset=pos)
                row[c, filled:filled + count] = np.frombuffer(blob, np.uint8, count, pos)
                pos += count
            filled += count
    return row.T, pos


def _decode_flat_pixels(blob: bytes, pos: int, height: int, width: int) -> np.ndarray:
    """Flat 4-byte pixels, with old-style (1,1,1,n) repeat shortcuts."""
    total = height * width
    out = np.empty((total, 4), dtype=np.uint8)
    filled = 0
    shift = 0
    while filled < total:
        if pos + 4 > len(blob):
            raise ParseError("truncated pixel data", offset=pos)
        r, g, b, e = blob[pos:pos + 4]
        if r == 1 and g == 1 and b == 1:
            if filled == 0:
                raise ParseError("repeat marker before any pixel", offset=pos)
            count = e << shift
            if filled + count > total:
                raise ParseError("old-style run overflows image", offset=pos)
            out[filled:filled + count] = out[filled - 1]
            filled += count
            shift += 8
        else:
            out[filled] = (r, g, b, e)
            filled += 1
            shift = 0
        pos += 4
    return out.reshape(height, width, 4)


def read_rgbe(path: str | os.PathLike) -> HdrImage:
    """Read a Radiance .hdr file (flat, adaptive RLE, or old-style RLE)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    height, width, pos = _read_rgbe_header(blob)
    first = blob[pos:pos + 4]
    if (len(first) == 4 and first[0] == 2 and first[1] == 2
            and (first[2] << 8 | first[3]) == width and _MIN_RLE_WIDTH <= width <= _MAX_RLE_WIDTH):
        rows = []
        for y in range(height):
            marker = blob[pos:pos + 4]
            if len(marker) < 4 or marker[0] != 2 or marker[1] != 2 or (marker[2] << 8 | marker[3]) != width:
                raise ParseError(f"bad scanline marker at row {y}", offset=pos)
            row, pos = _decode_adaptive_scanline(blob, pos + 4, width, f"row {y}")
            rows.append(row)
        rgbe = np.stack(rows)
    else:
        rgbe = _decode_flat_pixels(blob, pos, height, width)
    return HdrImage(_decode_rgbe_pixels(rgbe))


# ---------------------------------------------------------------------------
# LDR images


def _write_ppm(img: LdrImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        fh.write(img.data.tobytes())


def _read_ppm(blob: bytes, path) -> LdrImage:
    if blob[:2] != b"P6":
        if blob[:1] == b"P":
            raise UnsupportedFormatError(f"{path}: only binary P6 PPM is supported")
        raise ParseError(f"{path}: not a PPM file", offset=0)
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(blob):
            raise ParseError(f"{path}: truncated PPM header", offset=pos)
        ch = blob[pos:pos + 1]
        if ch == b"#":
            pos = blob.find(b"\n", pos)
            if pos < 0:
                raise ParseError(f"{path}: unterminated comment", offset=len(blob))
            pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(blob) and not blob[pos:pos + 1].isspace():
                pos += 1
            token = blob[start:pos]
            if not token.isdigit():
                raise ParseError(f"{path}: bad header token {token!r}", offset=start)
            fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormatError(f"{path}: maxval {maxval} not supported (need 255)")
    pos += 1  # single whitespace byte after maxval
    need = width * height * 3
    if len(blob) - pos < need:
        raise ParseError(f"{path}: pixel data truncated", offset=len(blob))
    data = np.frombuffer(blob, np.uint8, need, pos).reshape(height, width, 3)
    return LdrImage(data.copy())


def write_ldr(img: LdrImage, path: str | os.PathLike) -> None:
    """Write PPM (bit-exact) or PNG, chosen by file extension."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".ppm":
        _write_ppm(img, path)
    elif ext == ".png":
        Image.fromarray(img.data, "RGB").save(path, format="PNG")
    else:
        raise UnsupportedFormatError(f"unsupported LDR extension {ext!r} (use .ppm or .png)")


def read_ldr(path: str | os.PathLike) -> LdrImage:
    """Read a PPM or PNG image; the format is sniffed from the file bytes."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] == b"P6" or head[:1] == b"P":
        with open(path, "rb") as fh:
            return _read_ppm(fh.read(), path)
    if head == b"\x89PNG\r\n\x1a\n":
        with Image.open(path) as im:
            if im.mode != "RGB":
                raise UnsupportedFormatError(
                    f"{path}: PNG mode {im.mode!r} not supported (need 8-bit RGB)")
            return LdrImage(np.asarray(im))
    raise UnsupportedFormatError(f"{path}: not a PPM or PNG file")


# ---------------------------------------------------------------------------
# Stack manifests


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    ev: float
    unit: str  # "stops" | "ln"

    def __post_init__(self):
        if not self.path:
            raise InvalidArgumentError("manifest entry path must be non-empty")
        if self.unit not in ("stops", "ln"):
            raise InvalidArgumentError(f"unknown EV unit {self.unit!r} (use 'stops' or 'ln')")
        if not np.isfinite(self.ev):
            raise InvalidArgumentError("EV must be finite")

    @property
    def ev_ln(self) -> float:
        return self.ev * LN2 if self.unit == "stops" else self.ev


@dataclass(frozen=True)
class StackManifest:
    entries: tuple
    base_dir: str = "."

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise InvalidArgumentError("manifest needs at least one entry")
        evs = [e.ev_ln for e in entries]
        if len(evs) > 1 and not all(b > a for a, b in zip(evs, evs[1:])):
            raise InvalidArgumentError(
                f"EVs must be strictly increasing after unit normalization, got {evs}")
        object.__setattr__(self, "entries", entries)


def parse_manifest(path: str | os.PathLike) -> StackManifest:
    """Parse the JSON schema {entries: [{path, ev, unit}]} without loading pixels."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "entries" not in doc or not isinstance(doc["entries"], list):
        raise ParseError(f"{path}: manifest must be an object with an 'entries' list")
    entries = []
    for i, item in enumerate(doc["entries"]):
        if not isinstance(item, dict) or not {"path", "ev", "unit"} <= set(item):
            raise ParseError(f"{path}: entry {i} must have path, ev, and unit fields")
        try:
            entries.append(ManifestEntry(str(item["path"]), float(item["ev"]), str(item["unit"])))
        except (TypeError, ValueError, InvalidArgumentError) as exc:
            raise ParseError(f"{path}: entry {i}: {exc}") from exc
    try:
        return StackManifest(tuple(entries), os.path.dirname(os.path.abspath(path)))
    except InvalidArgumentError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_manifest(manifest: StackManifest, path: str | os.PathLike) -> None:
    doc = {"entries": [{"path": e.path, "ev": e.ev, "unit": e.unit}
                       for e in manifest.entries]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_manifest(path: str | os.PathLike) -> ExposureStack:
    """Load a manifest and its images into a stack with natural-log EVs."""
    manifest = parse_manifest(path)
    images = []
    for entry in manifest.entries:
        img_path = entry.path
        if not os.path.isabs(img_path):
            img_path = os.path.join(manifest.base_dir, img_path)
        if not os.path.exists(img_path):
            raise FileNotFoundError(f"{path}: image {entry.path!r} not found")
        images.append(read_ldr(img_path))
    shapes = {im.data.shape for im in images}
    if len(shapes) > 1:
        raise InvalidArgumentError(f"{path}: images disagree on shape: {sorted(shapes)}")
    return ExposureStack(tuple(images), [e.ev_ln for e in manifest.entries])


# ---------------------------------------------------------------------------
# Response curve tables


def write_crf(curve: ResponseCurve, path: str | os.PathLike) -> None:
    """Write the tabulated response as CSV with full float64 precision."""
    lines = ["z,g_r,g_g,g_b"]
    for z in range(NUM_LEVELS):
        row = ",".join(format(curve.g[z, c], ".17g") for c in range(3))
        lines.append(f"{z},{row}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_crf(path: str | os.PathLike) -> ResponseCurve:
    """Read a CSV response table; exact inverse of ``write_crf``.

    The anchor index is recovered as the all-zero row nearest to 128 (the
    written curve always has one by construction).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "z,g_r,g_g,g_b":
        raise ParseError(f"{path}: missing 'z,g_r,g_g,g_b' header")
    rows = [ln for ln in lines[1:] if ln]
    if len(rows) != NUM_LEVELS:
        raise ParseError(f"{path}: expected {NUM_LEVELS} rows, found {len(rows)}")
    g = np.empty((NUM_LEVELS, 3))
    for z, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != 4 or parts[0] != str(z):
            raise ParseError(f"{path}: malformed row {z}: {line!r}")
        try:
            g[z] = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}: row {z}: {exc}") from exc
    zero_rows = np.flatnonzero(np.all(g == 0.0, axis=1))
    if zero_rows.size == 0:
        raise ParseError(f"{path}: no anchor row (all-zero g) present")
    anchor = int(zero_rows[np.argmin(np.abs(zero_rows - 128))])
    return ResponseCurve(g, anchor)
