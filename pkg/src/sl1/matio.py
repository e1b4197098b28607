"""File formats for matrices, vectors and JSON documents.

Binary matrices use the "SL1M" container: 4-byte magic, little-endian
u32 rows and cols, then rows*cols little-endian float64 values in
row-major order.  CSV files carry one matrix row per line (vectors are
stored as a single column) with shortest round-trip decimal floats, so
a write/read cycle is bit-exact.  All writers go through a
write-temp-then-rename step so partial files are never observed.
"""

import json
import os
import struct
import tempfile

import numpy as np

from . import core

MAGIC = b"SL1M"


class FormatError(Exception):
    """Raised when a file's content does not match its expected format."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sl1-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    """Canonical JSON rendering (sorted keys) so outputs are byte-stable."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def write_matrix_bin(path, a) -> None:
    a = core.as_matrix(a)
    rows, cols = a.shape
    header = MAGIC + struct.pack("<II", rows, cols)
    atomic_write_bytes(path, header + a.astype("<f8").tobytes(order="C"))


def read_matrix_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not an SL1M matrix file")
    rows, cols = struct.unpack("<II", blob[4:12])
    expected = 12 + 8 * rows * cols
    if rows < 1 or cols < 1 or len(blob) != expected:
        raise FormatError(f"{path}: truncated or inconsistent SL1M payload")
    a = np.frombuffer(blob[12:], dtype="<f8").reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise FormatError(f"{path}: matrix contains non-finite entries")
    return a


def _format_row(row) -> str:
    return ",".join(repr(float(x)) for x in row)


def write_matrix_csv(path, a) -> None:
    a = core.as_matrix(a)
    atomic_write_text(path, "\n".join(_format_row(row) for row in a) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: invalid float ({exc})") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise FormatError(f"{path}: empty or ragged CSV matrix")
    a = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise FormatError(f"{path}: matrix contains non-finite entries")
    return a


def write_vector_csv(path, v) -> None:
    v = core.as_vector(v)
    atomic_write_text(path, "\n".join(repr(float(x)) for x in v) + "\n")


def read_vector_csv(path) -> np.ndarray:
    a = read_matrix_csv(path)
    if a.shape[1] != 1:
        raise FormatError(f"{path}: expected a single-column vector CSV")
    return a[:, 0]
