"""Seeded synthetic operands and GEMM shape lists."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..fparith import Fp8Format, fp16_from_float
from ..matrix import MatrixBuf, Role
from .prng import XorShift64Star

DISTRIBUTIONS = ("unit", "int8")


def gen_matrix(
    seed: int,
    rows: int,
    cols: int,
    distribution: str = "unit",
    role: Role = Role.X,
    fmt: Fp8Format | None = None,
) -> MatrixBuf:
    """Deterministic matrix of binary16 codes (optionally cast to FP8).

    ``unit`` draws uniformly from [-1, 1]; ``int8`` draws integers from
    [-128, 127], which binary16 holds exactly.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"dims must be >= 1, got {rows}x{cols}")
    rng = XorShift64Star(seed)
    if distribution == "unit":
        codes = [fp16_from_float(rng.uniform(-1.0, 1.0)) for _ in range(rows * cols)]
    elif distribution == "int8":
        codes = [fp16_from_float(float(rng.randint(-128, 127))) for _ in range(rows * cols)]
    else:
        raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    buf = MatrixBuf(role, rows, cols, codes)
    return buf.to_fp8(fmt) if fmt is not None else buf


def gen_operands(
    seed: int,
    M: int,
    N: int,
    K: int,
    distribution: str = "unit",
    fmt: Fp8Format | None = None,
) -> tuple[MatrixBuf, MatrixBuf, MatrixBuf]:
    """X, W, Y drawn from three sub-streams of ``seed``."""
    return (
        gen_matrix(3 * seed, M, N, distribution, Role.X, fmt),
        gen_matrix(3 * seed + 1, N, K, distribution, Role.W, fmt),
        gen_matrix(3 * seed + 2, M, K, distribution, Role.Y, fmt),
    )


@dataclass(frozen=True)
class Shape:
    M: int
    N: int
    K: int
    label: str = ""

    def __str__(self) -> str:
        return f"{self.M}x{self.N}x{self.K}"


def parse_dims(text: str) -> tuple[int, int, int]:
    """Parse ``MxNxK``; every dimension must be a positive integer."""
    parts = text.lower().replace("*", "x").split("x")
    if len(parts) != 3:
        raise ValueError(f"dims must look like MxNxK, got {text!r}")
    try:
        m, n, k = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"dims must be integers, got {text!r}") from None
    if min(m, n, k) < 1:
        raise ValueError(f"dims must be >= 1, got {text!r}")
    return m, n, k


def parse_shapes(lines: Iterable[str]) -> list[Shape]:
    """Shape list: ``M,N,K[,label]`` per line, ``#`` starts a comment."""
    shapes = []
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        fields = [f.strip() for f in body.split(",")]
        if len(fields) not in (3, 4):
            raise ValueError(f"line {lineno}: expected M,N,K[,label], got {line.strip()!r}")
        try:
            m, n, k = (int(f) for f in fields[:3])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer dimension in {line.strip()!r}") from None
        if min(m, n, k) < 1:
            raise ValueError(f"line {lineno}: dims must be >= 1")
        shapes.append(Shape(m, n, k, fields[3] if len(fields) == 4 else ""))
    return shapes


def load_shapes(path: str | Path) -> list[Shape]:
    with open(path) as fh:
        return parse_shapes(fh)


def resnet8_like_shapes() -> list[Shape]:
    """Bundled illustrative shape list (see the header of the data file)."""
    text = resources.files(__package__).joinpath("data/resnet8_like_shapes.txt").read_text()
    return parse_shapes(text.splitlines())
