"""Minimal PGM (P2/P5) and PPM (P6) reader/writer."""

import numpy as np

from .errors import UnreadableImage


def _read_tokens(data, count):
    """Yield whitespace/comment-separated header tokens, return rest offset."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        if i == j:
            raise UnreadableImage("truncated header")
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1  # single whitespace after the last header token


def read_image(path):
    """Read a PGM/PPM file; returns (array, maxval).

    Gray images come back as (h, w), color as (h, w, 3), dtype uint8 for
    maxval <= 255 and uint16 otherwise.
    """
    try:
        data = open(path, "rb").read()
    except OSError as e:
        raise UnreadableImage(str(e)) from None
    if len(data) < 2:
        raise UnreadableImage("file too short")
    magic = data[:2]
    if magic not in (b"P2", b"P5", b"P6"):
        raise UnreadableImage(f"unsupported magic {magic!r}; need P2, P5 or P6")
    try:
        (_, w, h, maxval), offset = _read_tokens(data, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (ValueError, UnreadableImage) as e:
        raise UnreadableImage(f"bad header: {e}") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise UnreadableImage("bad dimensions or maxval")
    channels = 3 if magic == b"P6" else 1
    if magic == b"P2":
        try:
            vals = np.array(data[offset - 1:].split(), dtype=np.int64)
        except ValueError:
            raise UnreadableImage("bad ASCII sample") from None
        if vals.size != w * h:
            raise UnreadableImage("wrong ASCII sample count")
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        need = w * h * channels * dtype.itemsize
        raw = data[offset:offset + need]
        if len(raw) != need:
            raise UnreadableImage("truncated pixel data")
        vals = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    if vals.min() < 0 or vals.max() > maxval:
        raise UnreadableImage("sample outside [0, maxval]")
    out_dtype = np.uint8 if maxval <= 255 else np.uint16
    arr = vals.astype(out_dtype).reshape((h, w, 3) if channels == 3 else (h, w))
    return arr, maxval


def write_image(path, arr, maxval=255, ascii_pgm=False):
    """Write a gray (h, w) array as PGM or a color (h, w, 3) array as PPM."""
    a = np.asarray(arr)
    if a.ndim == 2:
        magic = b"P2" if ascii_pgm else b"P5"
    elif a.ndim == 3 and a.shape[2] == 3:
        if ascii_pgm:
            raise ValueError("ASCII output is only supported for gray images")
        magic = b"P6"
    else:
        raise ValueError("array must be (h, w) or (h, w, 3)")
    if a.min() < 0 or a.max() > maxval:
        raise ValueError("samples outside [0, maxval]")
    h, w = a.shape[:2]
    header = b"%s\n%d %d\n%d\n" % (magic, w, h, maxval)
    with open(path, "wb") as fh:
        fh.write(header)
        if magic == b"P2":
            body = "\n".join(" ".join(str(v) for v in row) for row in a.astype(np.int64))
            fh.write(body.encode("ascii") + b"\n")
        else:
            fh.write(a.astype(np.uint8 if maxval <= 255 else ">u2").tobytes())


def to_unit(arr, maxval):
    """Map integer samples to [0, 1] floats."""
    return np.asarray(arr, dtype=float) / float(maxval)


def from_unit(arr, maxval=255):
    """Map [0, 1] floats back to integer samples (round-half-away clamp)."""
    return np.clip(np.rint(np.asarray(arr) * maxval), 0, maxval).astype(
        np.uint8 if maxval <= 255 else np.uint16)
