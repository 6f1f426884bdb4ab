"""Text and binary file formats.

Annotation files (DOTA style)
    one object per line: ``x1 y1 x2 y2 x3 y3 x4 y4 category difficult``.
    Blank lines and the DOTA ``imagesource:`` / ``gsd:`` headers are skipped.

Detection files
    one detection per line: ``category score x1 y1 x2 y2 x3 y3 x4 y4``.

Tensor files (``.obbt``)
    ``b"OBBT"``, u32 rank, ``rank`` x u64 dims, then float32 data in
    row-major order; everything little-endian.
"""
import struct

import numpy as np

from .evaluation import Detections, GtInstance

TENSOR_MAGIC = b"OBBT"
_HEADER_KEYS = ("imagesource:", "gsd:")


def fmt(value):
    """Fixed six-decimal rendering that never prints a negative zero."""
    text = f"{float(value):.6f}"
    return "0.000000" if text == "-0.000000" else text


def fmt_row(values):
    return " ".join(fmt(v) for v in np.asarray(values, dtype=np.float64).reshape(-1))


class FormatError(ValueError):
    """Malformed input file; ``lineno`` is 1-based when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


class ClassIndex:
    """Bidirectional category-name <-> id mapping.

    With ``frozen=True`` unknown names are rejected instead of appended.
    """

    def __init__(self, names=(), frozen=False):
        self.names = list(names)
        self._ids = {n: i for i, n in enumerate(self.names)}
        self.frozen = frozen

    def __len__(self):
        return len(self.names)

    def id(self, name):
        if name not in self._ids:
            if self.frozen:
                raise KeyError(name)
            self._ids[name] = len(self.names)
            self.names.append(name)
        return self._ids[name]

    def name(self, idx):
        return self.names[idx]


def _floats(tokens, lineno):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"expected numbers, got {' '.join(tokens)!r}", lineno) from None
    if not np.all(np.isfinite(vals)):
        raise FormatError("non-finite coordinate", lineno)
    return vals


def parse_annotations(text, classes=None):
    """Parse DOTA-style annotation text into :class:`GtInstance` records.

    ``classes`` is a :class:`ClassIndex`; a fresh one interning names in
    first-seen order is used when omitted (and filled in place when given
    unfrozen).
    """
    classes = ClassIndex() if classes is None else classes
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith(_HEADER_KEYS):
            continue
        tok = line.split()
        if len(tok) != 10:
            raise FormatError(f"expected 10 fields, got {len(tok)}", lineno)
        coords = _floats(tok[:8], lineno)
        if tok[9] not in ("0", "1"):
            raise FormatError(f"difficult flag must be 0 or 1, got {tok[9]!r}", lineno)
        try:
            cid = classes.id(tok[8])
        except KeyError:
            raise FormatError(f"unknown category {tok[8]!r}", lineno) from None
        out.append(GtInstance(np.array(coords).reshape(4, 2), cid, tok[9] == "1"))
    return out


def format_annotations(instances, classes):
    lines = []
    for g in instances:
        lines.append(f"{fmt_row(g.quad)} {classes.name(g.class_id)} {int(bool(g.difficult))}")
    return "".join(line + "\n" for line in lines)


def parse_detections(text, classes=None):
    classes = ClassIndex() if classes is None else classes
    quads, scores, labels = [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) != 10:
            raise FormatError(f"expected 10 fields, got {len(tok)}", lineno)
        vals = _floats(tok[1:], lineno)
        try:
            labels.append(classes.id(tok[0]))
        except KeyError:
            raise FormatError(f"unknown category {tok[0]!r}", lineno) from None
        scores.append(vals[0])
        quads.append(vals[1:])
    if not scores:
        return Detections.empty()
    return Detections(np.array(quads).reshape(-1, 4, 2), np.array(scores),
                      np.array(labels, dtype=np.int64))


def format_detections(dets, classes):
    lines = []
    for q, s, c in zip(dets.quads, dets.scores, dets.labels):
        lines.append(f"{classes.name(int(c))} {fmt(s)} {fmt_row(q)}")
    return "".join(line + "\n" for line in lines)


def parse_rows(text, width, what="row"):
    """Whitespace-separated numeric rows of exactly ``width`` values."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) != width:
            raise FormatError(f"{what} needs {width} values, got {len(tok)}", lineno)
        rows.append(_floats(tok, lineno))
    return np.array(rows, dtype=np.float64).reshape(-1, width)


def write_tensor(array, path):
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_tensor(path):
    """Read a ``.obbt`` file into a float32 array.

    Raises:
        FormatError: bad magic, truncated header or payload length mismatch.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != TENSOR_MAGIC:
        raise FormatError("bad tensor magic")
    if len(raw) < 8:
        raise FormatError("truncated tensor header")
    (rank,) = struct.unpack_from("<I", raw, 4)
    head = 8 + 8 * rank
    if len(raw) < head:
        raise FormatError("truncated tensor header")
    dims = struct.unpack_from(f"<{rank}Q", raw, 8)
    expected = 4 * int(np.prod(dims, dtype=np.int64))
    if len(raw) - head != expected:
        raise FormatError(f"payload is {len(raw) - head} bytes, dims {dims} need {expected}")
    return np.frombuffer(raw, dtype="<f4", offset=head).reshape(dims).copy()
