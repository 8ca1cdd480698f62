"""Operator files.

``qmat-v1`` is JSON::

    {"kind": "unitary" | "hermitian" | "measurement",
     "shape": [d, d]  or  [2, d, d] for a measurement,
     "data": [[re, im], ...]}          # row-major

``QMAT1`` is the raw binary variant: the 5 magic bytes ``QMAT1``, one kind
byte (0 unitary, 1 hermitian, 2 measurement), a little-endian ``uint32`` d,
then little-endian float64 ``(re, im)`` pairs in the same order as the JSON.

Loaded operators live on placeholder qubits ``x0, x1, ...``; programs rebind
them to their own variables.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .operators import (
    TOL,
    LabeledOperator,
    ProjectiveMeasurement,
    QuantumPredicate,
    is_unitary,
)

KINDS = ("unitary", "hermitian", "measurement")
MAGIC = b"QMAT1"
_HEADER = struct.Struct("<5sBI")


def _placeholder(d: int) -> tuple:
    n = d.bit_length() - 1
    return tuple(f"x{i}" for i in range(n))


def _build(kind: str, arr: np.ndarray):
    d = arr.shape[-1]
    if d < 2 or d & (d - 1):
        raise ValidationError(f"dimension {d} is not a power of two (at least 2)")
    vars = _placeholder(d)
    if kind == "unitary":
        if not is_unitary(arr, TOL.herm):
            raise ValidationError("unitary file: U^dagger U differs from the identity")
        return LabeledOperator(vars, arr)
    if kind == "hermitian":
        return QuantumPredicate(vars, arr)
    return ProjectiveMeasurement(vars, arr[0], arr[1])


def _key_offset(raw: bytes, key: str) -> int:
    i = raw.find(f'"{key}"'.encode())
    return max(i, 0)


def _parse_json(raw: bytes):
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError("file is not UTF-8 text", exc.start) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", len(text[: exc.pos].encode())) from exc
    if not isinstance(obj, dict):
        raise FormatError("top-level JSON value must be an object", 0)
    for key in ("kind", "shape", "data"):
        if key not in obj:
            raise FormatError(f"missing key {key!r}", 0)
    kind = obj["kind"]
    if kind not in KINDS:
        raise FormatError(f"unknown kind {kind!r}", _key_offset(raw, "kind"))
    shape = obj["shape"]
    want_ndim = 3 if kind == "measurement" else 2
    if (not isinstance(shape, list) or len(shape) != want_ndim
            or not all(isinstance(x, int) and x > 0 for x in shape)
            or shape[-1] != shape[-2] or (want_ndim == 3 and shape[0] != 2)):
        raise FormatError(f"bad shape {shape!r} for kind {kind!r}", _key_offset(raw, "shape"))
    data = obj["data"]
    n = int(np.prod(shape))
    at = _key_offset(raw, "data")
    if not isinstance(data, list) or len(data) != n:
        raise FormatError(f"expected {n} entries in 'data'", at)
    try:
        pairs = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError("entries must be [re, im] number pairs", at) from exc
    if pairs.shape != (n, 2):
        raise FormatError("entries must be [re, im] number pairs", at)
    return kind, (pairs[:, 0] + 1j * pairs[:, 1]).reshape(shape)


def _parse_binary(raw: bytes):
    if len(raw) < _HEADER.size:
        raise FormatError("truncated header", len(raw))
    magic, kind_byte, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError("bad magic", 0)
    if kind_byte >= len(KINDS):
        raise FormatError(f"unknown kind byte {kind_byte}", 5)
    kind = KINDS[kind_byte]
    shape = (2, d, d) if kind == "measurement" else (d, d)
    need = int(np.prod(shape)) * 16
    body = raw[_HEADER.size:]
    if len(body) < need:
        raise FormatError(f"data ends early ({len(body)} of {need} bytes)", len(raw))
    if len(body) > need:
        raise FormatError("trailing bytes after data", _HEADER.size + need)
    vals = np.frombuffer(body, dtype="<f8").reshape(-1, 2)
    return kind, (vals[:, 0] + 1j * vals[:, 1]).reshape(shape)


def decode(raw: bytes):
    """Operator from file contents (either format)."""
    kind, arr = _parse_binary(raw) if raw.startswith(MAGIC) else _parse_json(raw)
    return _build(kind, arr)


def load_operator(path):
    """Load and validate a ``qmat-v1`` or ``QMAT1`` file.

    Returns a :class:`LabeledOperator` (unitary), :class:`QuantumPredicate`
    (hermitian) or :class:`ProjectiveMeasurement`.
    """
    return decode(Path(path).read_bytes())


def kind_of(op) -> str:
    if isinstance(op, ProjectiveMeasurement):
        return "measurement"
    if isinstance(op, QuantumPredicate):
        return "hermitian"
    return "unitary"


def _array(op) -> np.ndarray:
    if isinstance(op, ProjectiveMeasurement):
        return np.stack([op.p0, op.p1])
    return np.asarray(op.matrix if isinstance(op, LabeledOperator) else op)


def encode_json(kind: str, arr) -> str:
    arr = np.asarray(arr, dtype=complex)
    data = [[float(z.real), float(z.imag)] for z in arr.reshape(-1)]
    return json.dumps({"kind": kind, "shape": list(arr.shape), "data": data})


def encode_binary(kind: str, arr) -> bytes:
    arr = np.asarray(arr, dtype=complex)
    head = _HEADER.pack(MAGIC, KINDS.index(kind), arr.shape[-1])
    pairs = np.stack([arr.real.reshape(-1), arr.imag.reshape(-1)], axis=1)
    return head + pairs.astype("<f8").tobytes()


def save_operator(path, op, kind: str | None = None, binary: bool = False) -> None:
    """Write ``op`` (an operator object or a bare array with ``kind``)."""
    kind = kind or kind_of(op)
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    arr = _array(op)
    if binary:
        Path(path).write_bytes(encode_binary(kind, arr))
    else:
        Path(path).write_text(encode_json(kind, arr) + "\n")


def env_value(op):
    """The form :func:`nqverify.syntax.typecheck` expects in its environment."""
    return _array(op)
