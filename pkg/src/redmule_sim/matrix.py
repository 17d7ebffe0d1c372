"""Dense row-major operand/result matrices and their on-disk formats."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fparith import (
    Fp8Format,
    cast_fp8_to_fp16,
    cast_fp16_to_fp8,
    fp16_from_float,
    fp16_to_float,
)

MAGIC = b"RMLM"
_HEADER = struct.Struct("<4sBBxxII")


class Role(enum.Enum):
    X = 0
    W = 1
    Y = 2
    Z = 3


# fmt byte of the binary header
_FMT_CODES = {None: 0, Fp8Format.E4M3: 1, Fp8Format.E5M2: 2}
_FMT_FROM_CODE = {v: k for k, v in _FMT_CODES.items()}


class DimensionError(ValueError):
    """Operand shapes do not line up for Z = (X o W) * Y."""


@dataclass
class MatrixBuf:
    """A matrix of raw codes.

    ``fmt`` is ``None`` for binary16 codes, or the FP8 format when the buffer
    holds compressed 8-bit codes.
    """

    role: Role
    rows: int
    cols: int
    data: list[int] = field(repr=False)
    fmt: Fp8Format | None = None

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"matrix dims must be positive, got {self.rows}x{self.cols}")
        if len(self.data) != self.rows * self.cols:
            raise ValueError(
                f"data length {len(self.data)} != {self.rows}*{self.cols}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, idx: tuple[int, int]) -> int:
        r, c = idx
        return self.data[r * self.cols + c]

    def row(self, r: int) -> list[int]:
        return self.data[r * self.cols : (r + 1) * self.cols]

    @classmethod
    def from_floats(
        cls,
        role: Role,
        values: Sequence[Sequence[float]] | np.ndarray,
        fmt: Fp8Format | None = None,
    ) -> "MatrixBuf":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array of values")
        codes = [fp16_from_float(float(v)) for v in arr.ravel()]
        if fmt is not None:
            codes = [cast_fp16_to_fp8(c, fmt) for c in codes]
        return cls(role, arr.shape[0], arr.shape[1], codes, fmt)

    @classmethod
    def filled(cls, role: Role, rows: int, cols: int, code: int) -> "MatrixBuf":
        return cls(role, rows, cols, [code] * (rows * cols))

    def to_fp16(self) -> "MatrixBuf":
        """Widen FP8 codes to binary16 (identity for binary16 buffers)."""
        if self.fmt is None:
            return self
        return MatrixBuf(
            self.role, self.rows, self.cols,
            [cast_fp8_to_fp16(c, self.fmt) for c in self.data],
        )

    def to_fp8(self, fmt: Fp8Format) -> "MatrixBuf":
        src = self.to_fp16()
        return MatrixBuf(
            self.role, self.rows, self.cols,
            [cast_fp16_to_fp8(c, fmt) for c in src.data], fmt,
        )

    def to_numpy(self) -> np.ndarray:
        """Decoded values as float64."""
        src = self.to_fp16()
        vals = [fp16_to_float(c) for c in src.data]
        return np.array(vals, dtype=np.float64).reshape(self.rows, self.cols)

    def codes(self) -> np.ndarray:
        dtype = np.uint16 if self.fmt is None else np.uint8
        return np.array(self.data, dtype=dtype).reshape(self.rows, self.cols)

    def transpose(self, role: Role | None = None) -> "MatrixBuf":
        data = [self.data[r * self.cols + c] for c in range(self.cols) for r in range(self.rows)]
        return MatrixBuf(role or self.role, self.cols, self.rows, data, self.fmt)

    def crop(self, rows: int, cols: int) -> "MatrixBuf":
        data: list[int] = []
        for r in range(rows):
            data.extend(self.data[r * self.cols : r * self.cols + cols])
        return MatrixBuf(self.role, rows, cols, data, self.fmt)

    def pad(self, rows: int, cols: int, fill: int) -> "MatrixBuf":
        """Grow to ``rows x cols``, filling new elements with ``fill``."""
        if rows < self.rows or cols < self.cols:
            raise ValueError("pad target smaller than matrix")
        data: list[int] = []
        extra = [fill] * (cols - self.cols)
        for r in range(self.rows):
            data.extend(self.data[r * self.cols : (r + 1) * self.cols])
            data.extend(extra)
        data.extend([fill] * (cols * (rows - self.rows)))
        return MatrixBuf(self.role, rows, cols, data, self.fmt)


def check_dims(x: MatrixBuf, w: MatrixBuf, y: MatrixBuf) -> tuple[int, int, int]:
    """Return (M, N, K) or raise DimensionError."""
    m, n = x.shape
    if w.rows != n:
        raise DimensionError(f"X is {m}x{n} but W has {w.rows} rows")
    k = w.cols
    if y.shape != (m, k):
        raise DimensionError(f"Y must be {m}x{k}, got {y.rows}x{y.cols}")
    return m, n, k


def save_matrix(buf: MatrixBuf, path: str | Path) -> None:
    header = _HEADER.pack(MAGIC, buf.role.value, _FMT_CODES[buf.fmt], buf.rows, buf.cols)
    if buf.fmt is None:
        payload = np.array(buf.data, dtype="<u2").tobytes()
    else:
        payload = bytes(buf.data)
    Path(path).write_bytes(header + payload)


def load_matrix(path: str | Path) -> MatrixBuf:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, role, fmt_code, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if fmt_code not in _FMT_FROM_CODE:
        raise ValueError(f"{path}: unknown fmt byte {fmt_code}")
    fmt = _FMT_FROM_CODE[fmt_code]
    body = raw[_HEADER.size :]
    width = 2 if fmt is None else 1
    if len(body) != rows * cols * width:
        raise ValueError(f"{path}: payload is {len(body)} bytes, expected {rows * cols * width}")
    if fmt is None:
        data = np.frombuffer(body, dtype="<u2").astype(int).tolist()
    else:
        data = list(body)
    return MatrixBuf(Role(role), rows, cols, data, fmt)


def parse_text_matrix(lines: Iterable[str], role: Role) -> MatrixBuf:
    """One row per line, decimal values separated by spaces or commas."""
    rows = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        rows.append([float(tok) for tok in line.replace(",", " ").split()])
    if not rows:
        raise ValueError("empty matrix text")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged matrix text")
    return MatrixBuf.from_floats(role, rows)


def load_text_matrix(path: str | Path, role: Role) -> MatrixBuf:
    with open(path) as fh:
        return parse_text_matrix(fh, role)
