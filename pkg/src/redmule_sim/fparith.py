"""Bit-exact binary16 and FP8 scalar arithmetic on raw integer codes.

Every value handled here is a plain ``int`` holding the bit pattern of a
binary16 (16-bit) or FP8 (8-bit) number.  Arithmetic never touches host
floating point: finite codes are mapped to exact integers scaled by a fixed
power of two, combined exactly with Python integers, and rounded once
(round-to-nearest-even) back to the destination format.

Conventions
-----------
- Invalid operations return the canonical quiet NaN ``0x7E00``.
- MIN/MAX are NaN-suppressing and order ``-0 < +0``.
- Subnormals are kept (no flush-to-zero).
- FP8 follows the OCP/NVIDIA conventions: E4M3 has bias 7, no infinities,
  a single NaN pattern per sign and max finite 448; E5M2 has bias 15,
  IEEE-style inf/NaN and max finite 57344.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "QNAN16",
    "POS_INF16",
    "NEG_INF16",
    "POS_ZERO16",
    "NEG_ZERO16",
    "Fp8Format",
    "CompOp",
    "RoundingMode",
    "fp16_from_float",
    "fp16_to_float",
    "fp16_to_fraction",
    "is_nan16",
    "is_inf16",
    "neg16",
    "fma16",
    "add16",
    "mul16",
    "fncomp16",
    "min16",
    "max16",
    "cast_fp8_to_fp16",
    "cast_fp16_to_fp8",
    "fp8_to_float",
    "format_fp16",
    "format_fp8",
]

QNAN16 = 0x7E00
POS_INF16 = 0x7C00
NEG_INF16 = 0xFC00
POS_ZERO16 = 0x0000
NEG_ZERO16 = 0x8000

# Finite binary16 values are integer multiples of 2**-24 (smallest subnormal).
_SCALE16 = 24


class RoundingMode(enum.Enum):
    RNE = "rne"


class CompOp(enum.Enum):
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class _Layout:
    name: str
    exp_bits: int
    man_bits: int
    bias: int
    # Largest biased exponent that still encodes finite values.
    max_biased: int
    # Largest mantissa field allowed at max_biased (E4M3 reserves S.1111.111).
    max_man_at_top: int
    saturate: bool

    @property
    def min_normal_exp(self) -> int:
        return 1 - self.bias

    @property
    def quantum_exp(self) -> int:
        # exponent of the least significant bit of a subnormal
        return self.min_normal_exp - self.man_bits


_FP16 = _Layout("fp16", 5, 10, 15, 30, 0x3FF, saturate=False)
_E5M2 = _Layout("e5m2", 5, 2, 15, 30, 0x3, saturate=False)
_E4M3 = _Layout("e4m3", 4, 3, 7, 15, 0x6, saturate=True)


class Fp8Format(enum.Enum):
    E4M3 = "e4m3"
    E5M2 = "e5m2"

    @property
    def layout(self) -> _Layout:
        return _E4M3 if self is Fp8Format.E4M3 else _E5M2

    @property
    def nan_code(self) -> int:
        return 0x7F if self is Fp8Format.E4M3 else 0x7E

    @property
    def max_finite_code(self) -> int:
        return 0x7E if self is Fp8Format.E4M3 else 0x7B


def _build_fp16_table() -> list[int | None]:
    table: list[int | None] = []
    for code in range(1 << 16):
        e = (code >> 10) & 0x1F
        m = code & 0x3FF
        if e == 0x1F:
            table.append(None)
            continue
        mag = m if e == 0 else (m | 0x400) << (e - 1)
        table.append(-mag if code & 0x8000 else mag)
    return table


# VAL24[code] == value * 2**24 as an exact int, or None for inf/NaN.
_VAL24 = _build_fp16_table()


def _round_scaled(sign: int, mag: int, scale: int, lay: _Layout) -> int:
    """Round ``(-1)**sign * mag * 2**-scale`` (mag > 0) into ``lay`` with RNE.

    Returns the destination bit code.  Overflow yields inf, or the largest
    finite value for saturating layouts.
    """
    width = 1 + lay.exp_bits + lay.man_bits
    sbit = sign << (width - 1)
    bl = mag.bit_length()
    e = bl - 1 - scale
    if e < lay.min_normal_exp:
        shift = lay.quantum_exp + scale
    else:
        shift = bl - 1 - lay.man_bits
    if shift > 0:
        q = mag >> shift
        rem = mag & ((1 << shift) - 1)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and q & 1):
            q += 1
    else:
        q = mag << -shift
    if e < lay.min_normal_exp:
        # q == 1 << man_bits lands exactly on the smallest normal code
        biased, man = q >> lay.man_bits, q & ((1 << lay.man_bits) - 1)
    else:
        biased = e + lay.bias
        if q >> (lay.man_bits + 1):
            biased += 1
            q >>= 1
        man = q - (1 << lay.man_bits)
    if biased > lay.max_biased or (biased == lay.max_biased and man > lay.max_man_at_top):
        if lay.saturate:
            biased, man = lay.max_biased, lay.max_man_at_top
        else:
            return sbit | (((1 << lay.exp_bits) - 1) << lay.man_bits)
    return sbit | (biased << lay.man_bits) | man


def is_nan16(a: int) -> bool:
    return (a & 0x7C00) == 0x7C00 and (a & 0x3FF) != 0


def is_inf16(a: int) -> bool:
    return (a & 0x7FFF) == 0x7C00


def neg16(a: int) -> int:
    return a ^ 0x8000


def fma16(a: int, b: int, c: int) -> int:
    """Fused ``a*b + c`` with a single RNE rounding."""
    va, vb, vc = _VAL24[a], _VAL24[b], _VAL24[c]
    if va is not None and vb is not None and vc is not None:
        n = va * vb + (vc << _SCALE16)
        if n:
            return _round_scaled(n < 0, abs(n), 2 * _SCALE16, _FP16)
        if va == 0 or vb == 0:
            if vc == 0:
                psign = (a ^ b) & 0x8000
                return psign & c
        return POS_ZERO16
    if is_nan16(a) or is_nan16(b) or is_nan16(c):
        return QNAN16
    psign = (a ^ b) & 0x8000
    if is_inf16(a) or is_inf16(b):
        if (a & 0x7FFF) == 0 or (b & 0x7FFF) == 0:
            return QNAN16
        if is_inf16(c) and (c & 0x8000) != psign:
            return QNAN16
        return psign | POS_INF16
    return c


def add16(a: int, b: int) -> int:
    va, vb = _VAL24[a], _VAL24[b]
    if va is not None and vb is not None:
        n = va + vb
        if n:
            return _round_scaled(n < 0, abs(n), _SCALE16, _FP16)
        if va == 0 and vb == 0:
            return a & b & 0x8000
        return POS_ZERO16
    if is_nan16(a) or is_nan16(b):
        return QNAN16
    if is_inf16(a) and is_inf16(b):
        return a if a == b else QNAN16
    return a if is_inf16(a) else b


def mul16(a: int, b: int) -> int:
    va, vb = _VAL24[a], _VAL24[b]
    sign = (a ^ b) & 0x8000
    if va is not None and vb is not None:
        n = va * vb
        if n:
            return _round_scaled(n < 0, abs(n), 2 * _SCALE16, _FP16)
        return sign
    if is_nan16(a) or is_nan16(b):
        return QNAN16
    if (a & 0x7FFF) == 0 or (b & 0x7FFF) == 0:
        return QNAN16
    return sign | POS_INF16


def _order_key(a: int) -> int:
    # Monotone integer key for non-NaN codes; -0 sorts just below +0.
    return -(a & 0x7FFF) - 1 if a & 0x8000 else a


def fncomp16(a: int, b: int, op: CompOp) -> int:
    """NaN-suppressing MIN/MAX with -0 < +0."""
    an, bn = is_nan16(a), is_nan16(b)
    if an or bn:
        if an and bn:
            return QNAN16
        return b if an else a
    ka, kb = _order_key(a), _order_key(b)
    if op is CompOp.MIN:
        return a if ka <= kb else b
    return a if ka >= kb else b


def min16(a: int, b: int) -> int:
    return fncomp16(a, b, CompOp.MIN)


def max16(a: int, b: int) -> int:
    return fncomp16(a, b, CompOp.MAX)


def _fp8_fields(x: int, fmt: Fp8Format) -> tuple[int, int, int]:
    lay = fmt.layout
    sign = (x >> 7) & 1
    e = (x >> lay.man_bits) & ((1 << lay.exp_bits) - 1)
    m = x & ((1 << lay.man_bits) - 1)
    return sign, e, m


def _fp8_is_nan(x: int, fmt: Fp8Format) -> bool:
    if fmt is Fp8Format.E4M3:
        return (x & 0x7F) == 0x7F
    return (x & 0x7C) == 0x7C and (x & 0x3) != 0


def _build_up_table(fmt: Fp8Format) -> list[int]:
    lay = fmt.layout
    out = []
    for x in range(256):
        sign, e, m = _fp8_fields(x, fmt)
        sbit = sign << 15
        if _fp8_is_nan(x, fmt):
            out.append(QNAN16)
        elif fmt is Fp8Format.E5M2 and e == 0x1F:
            out.append(sbit | POS_INF16)
        elif e == 0 and m == 0:
            out.append(sbit)
        else:
            # exact: every FP8 value fits the binary16 grid
            mag = m if e == 0 else (m | (1 << lay.man_bits)) << (e - 1)
            scale = -lay.quantum_exp
            out.append(_round_scaled(sign, mag, scale, _FP16))
    return out


_UP = {fmt: _build_up_table(fmt) for fmt in Fp8Format}


def cast_fp8_to_fp16(x: int, fmt: Fp8Format) -> int:
    """Lossless FP8 -> binary16; NaN maps to the canonical quiet NaN."""
    return _UP[fmt][x & 0xFF]


def cast_fp16_to_fp8(x: int, fmt: Fp8Format) -> int:
    """binary16 -> FP8 with RNE; E4M3 saturates, E5M2 overflows to inf."""
    sign = (x >> 15) & 1
    if is_nan16(x):
        return fmt.nan_code | (sign << 7)
    if is_inf16(x):
        if fmt is Fp8Format.E4M3:
            return (sign << 7) | fmt.max_finite_code
        return (sign << 7) | 0x7C
    v = _VAL24[x]
    if v == 0:
        return sign << 7
    return _round_scaled(sign, abs(v), _SCALE16, fmt.layout)


def fp8_to_float(x: int, fmt: Fp8Format) -> float:
    return fp16_to_float(cast_fp8_to_fp16(x, fmt))


def fp16_to_fraction(a: int) -> Fraction:
    """Exact rational value of a finite code."""
    v = _VAL24[a]
    if v is None:
        raise ValueError(f"code {a:#06x} is not finite")
    return Fraction(v, 1 << _SCALE16)


def fp16_to_float(a: int) -> float:
    v = _VAL24[a]
    if v is None:
        if is_nan16(a):
            return float("nan")
        return float("-inf") if a & 0x8000 else float("inf")
    if v == 0 and a & 0x8000:
        return -0.0
    return v / (1 << _SCALE16)


def fp16_from_float(x: float) -> int:
    """Encode a Python float into binary16 with RNE (test/IO helper)."""
    if x != x:
        return QNAN16
    if x in (float("inf"), float("-inf")):
        return NEG_INF16 if x < 0 else POS_INF16
    fr = Fraction(x)
    if fr == 0:
        return NEG_ZERO16 if math.copysign(1.0, x) < 0 else POS_ZERO16
    sign = fr < 0
    fr = abs(fr)
    # fr = num / den with den a power of two (binary float)
    den_exp = fr.denominator.bit_length() - 1
    return _round_scaled(sign, fr.numerator, den_exp, _FP16)


def format_fp16(a: int) -> str:
    return f"0x{a:04x} ({fp16_to_float(a)!r})"


def format_fp8(x: int, fmt: Fp8Format) -> str:
    return f"0x{x:02x}/{fmt.value} ({fp8_to_float(x, fmt)!r})"
