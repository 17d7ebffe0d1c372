"""Array configuration, tile decomposition and arithmetic-intensity models."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator


class ConfigError(ValueError):
    """An ArrayConfig violates a design-time constraint."""


class IOPrecision(enum.Enum):
    FP16 = "fp16"
    FP8_COMPRESSED = "fp8"

    @property
    def elem_bits(self) -> int:
        return 16 if self is IOPrecision.FP16 else 8


@dataclass(frozen=True)
class ArrayConfig:
    """Design-time parameters of the CE array.

    L rows of H cascaded CEs, each CE holding P pipeline registers.  One
    memory beat carries a full buffer line of H*(P+1) elements.
    """

    L: int = 12
    H: int = 4
    P: int = 3
    port_bits: int = 288
    io_precision: IOPrecision = IOPrecision.FP16
    elem_bits: int = 16

    def __post_init__(self) -> None:
        if self.L < 1 or self.H < 1:
            raise ConfigError(f"L and H must be >= 1 (got L={self.L}, H={self.H})")
        if self.P < 0:
            raise ConfigError(f"P must be >= 0 (got {self.P})")
        if self.port_bits <= 0 or self.port_bits % 32:
            raise ConfigError(f"port_bits must be a positive multiple of 32 (got {self.port_bits})")
        if self.elem_bits != 16:
            raise ConfigError("internal precision is fixed at 16 bits")
        if self.beat_bits > self.port_bits:
            raise ConfigError(
                f"one buffer line is {self.row_stages} x {self.io_bits} = {self.beat_bits} bits, "
                f"wider than the {self.port_bits}-bit port"
            )

    @property
    def depth(self) -> int:
        """Cycles per CE pipeline (P registers plus the operation itself)."""
        return self.P + 1

    @property
    def row_stages(self) -> int:
        """Pipeline stages along one row; also the Z-tile width."""
        return self.H * (self.P + 1)

    @property
    def io_bits(self) -> int:
        return self.io_precision.elem_bits

    @property
    def beat_bits(self) -> int:
        return self.row_stages * self.io_bits

    @property
    def n_ces(self) -> int:
        return self.L * self.H

    @property
    def peak_ops_per_cycle(self) -> int:
        return 2 * self.L * self.H

    def label(self) -> str:
        return f"{self.L}x{self.H}/P{self.P}/{self.io_precision.value}"


@dataclass(frozen=True)
class Tile:
    index: int
    row_block: int
    col_block: int
    m0: int
    k0: int
    rows_valid: int
    cols_valid: int


@dataclass(frozen=True)
class TilePlan:
    M: int
    N: int
    K: int
    L: int
    H: int
    width: int
    row_blocks: int
    col_blocks: int
    passes_per_tile: int
    x_chunks: int

    @property
    def M_pad(self) -> int:
        return self.row_blocks * self.L

    @property
    def K_pad(self) -> int:
        return self.col_blocks * self.width

    @property
    def N_pad(self) -> int:
        return self.passes_per_tile * self.H

    @property
    def n_tiles(self) -> int:
        return self.row_blocks * self.col_blocks

    @property
    def rows_leftover(self) -> int:
        """Valid rows in the last row block (L when it fits exactly)."""
        return self.M - (self.row_blocks - 1) * self.L

    @property
    def cols_leftover(self) -> int:
        return self.K - (self.col_blocks - 1) * self.width

    @property
    def n_leftover(self) -> int:
        """Valid reduction steps in the last pass."""
        return self.N - (self.passes_per_tile - 1) * self.H

    @property
    def has_leftovers(self) -> bool:
        return (self.M_pad, self.N_pad, self.K_pad) != (self.M, self.N, self.K)

    def tiles(self) -> Iterator[Tile]:
        """Walk order: row blocks outer, column blocks inner."""
        idx = 0
        for rb in range(self.row_blocks):
            for cb in range(self.col_blocks):
                m0, k0 = rb * self.L, cb * self.width
                yield Tile(
                    idx, rb, cb, m0, k0,
                    min(self.L, self.M - m0), min(self.width, self.K - k0),
                )
                idx += 1


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def plan_tiles(cfg: ArrayConfig, M: int, N: int, K: int) -> TilePlan:
    if min(M, N, K) < 1:
        raise ValueError(f"dims must be >= 1, got {M}x{N}x{K}")
    width = cfg.row_stages
    passes = _ceil_div(N, cfg.H)
    return TilePlan(
        M=M, N=N, K=K, L=cfg.L, H=cfg.H, width=width,
        row_blocks=_ceil_div(M, cfg.L),
        col_blocks=_ceil_div(K, width),
        passes_per_tile=passes,
        # one X beat covers `width` reduction indices, i.e. P+1 passes
        x_chunks=_ceil_div(passes, cfg.depth),
    )


def ideal_cycles(cfg: ArrayConfig, plan: TilePlan) -> int:
    """Zero-overhead compute cycles: every pass issues for H*(P+1) cycles."""
    return plan.row_blocks * plan.col_blocks * plan.passes_per_tile * cfg.row_stages


def intensity_1d(N: int) -> Fraction:
    """OPs per load/store of a length-N scalar dot product."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return Fraction(2 * N, 2 * N + 2)


def intensity_2d(L: int, H: int, N: int) -> Fraction:
    """OPs per load/store of an L x H outer-product array over N steps."""
    if min(L, H, N) < 1:
        raise ValueError("L, H, N must be >= 1")
    return Fraction(2 * L * H * N, (L + H) * N + 2 * L * H)
