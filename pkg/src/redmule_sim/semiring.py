"""GEMM-Op kernels Z = (X o W) * Y and their golden evaluators.

The seven supported kernels pair an element-wise operator ``circ`` applied
to X and W with a reduction operator ``star`` that folds the results into
the Y accumulator.  :func:`gemm_op_reference` fixes the reduction order
(ascending N) and is the bit-exact model the cycle-level engine must match.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fparith as fp
from .matrix import MatrixBuf, Role, check_dims


class Op(enum.Enum):
    MUL = "*"
    ADD = "+"
    MIN = "min"
    MAX = "max"


class Group(enum.Enum):
    MATMUL = "matmul"
    GROUP1 = "group1"
    GROUP2 = "group2"


_ONE = 0x3C00


@dataclass(frozen=True)
class SemiringKernel:
    name: str
    title: str
    circ: Op
    star: Op
    group: Group
    pad_x: int
    pad_w: int
    pad_y: int

    @property
    def uses_fma(self) -> bool:
        """Stage 1 runs on the FMA unit (otherwise on the FNCOMP unit)."""
        return self.circ in (Op.MUL, Op.ADD)


def _k(name, title, circ, star, group, pad_x, pad_w, pad_y) -> SemiringKernel:
    return SemiringKernel(name, title, circ, star, group, pad_x, pad_w, pad_y)


_KERNELS = (
    # A -0 X-pad makes the padded product -0, so fma(-0, +0, acc) == acc
    # bit-exactly for every non-NaN acc including -0.
    _k("matmul", "Matmul", Op.MUL, Op.ADD, Group.MATMUL,
       fp.NEG_ZERO16, fp.POS_ZERO16, fp.POS_ZERO16),
    _k("max_critical_path", "Maximum Critical Path", Op.ADD, Op.MAX, Group.GROUP1,
       fp.NEG_INF16, fp.NEG_INF16, fp.NEG_INF16),
    _k("all_pairs_shortest_paths", "All-Pairs Shortest Paths", Op.ADD, Op.MIN, Group.GROUP1,
       fp.POS_INF16, fp.POS_INF16, fp.POS_INF16),
    # 1.0 on the X side avoids inf*0 on padded steps.
    _k("max_reliability_path", "Maximum Reliability Path", Op.MUL, Op.MAX, Group.GROUP1,
       _ONE, fp.NEG_INF16, fp.NEG_INF16),
    _k("min_reliability_path", "Minimum Reliability Path", Op.MUL, Op.MIN, Group.GROUP1,
       _ONE, fp.POS_INF16, fp.POS_INF16),
    _k("min_spanning_tree", "Minimum Spanning Tree", Op.MAX, Op.MIN, Group.GROUP2,
       fp.POS_INF16, fp.POS_INF16, fp.POS_INF16),
    _k("max_capacity_path", "Maximum Capacity Path", Op.MIN, Op.MAX, Group.GROUP2,
       fp.NEG_INF16, fp.NEG_INF16, fp.NEG_INF16),
)

_BY_NAME = {k.name: k for k in _KERNELS}
_ALIASES = {
    "gemm": "matmul",
    "apsp": "all_pairs_shortest_paths",
    "mcp": "max_critical_path",
    "maxrel": "max_reliability_path",
    "minrel": "min_reliability_path",
    "mst": "min_spanning_tree",
    "maxcap": "max_capacity_path",
}


def kernel_table() -> tuple[SemiringKernel, ...]:
    return _KERNELS


def get_kernel(name: str) -> SemiringKernel:
    key = name.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    try:
        return _BY_NAME[key]
    except KeyError:
        choices = ", ".join(sorted(_BY_NAME) + sorted(_ALIASES))
        raise KeyError(f"unknown kernel {name!r}; choose from {choices}") from None


def _circ_fn(kernel: SemiringKernel) -> Callable[[int, int], int]:
    return {
        Op.MUL: fp.mul16,
        Op.ADD: fp.add16,
        Op.MIN: fp.min16,
        Op.MAX: fp.max16,
    }[kernel.circ]


def _star_fn(kernel: SemiringKernel) -> Callable[[int, int], int]:
    return fp.min16 if kernel.star is Op.MIN else fp.max16


def ce_stage1(kernel: SemiringKernel, x: int, w: int, acc: int) -> int:
    """First CE stage: the o-operator (with + fused in for matmul)."""
    if kernel.group is Group.MATMUL:
        return fp.fma16(x, w, acc)
    return _circ_fn(kernel)(x, w)


def ce_stage2(kernel: SemiringKernel, t: int, acc: int) -> int:
    """Second CE stage: combinational min/max against the accumulator."""
    if kernel.group is Group.MATMUL:
        return t
    return _star_fn(kernel)(t, acc)


def ce_op(kernel: SemiringKernel) -> Callable[[int, int, int], int]:
    """Both CE stages folded into one ``(x, w, acc) -> acc'`` callable."""
    if kernel.group is Group.MATMUL:
        return fp.fma16
    circ = _circ_fn(kernel)
    star = _star_fn(kernel)

    def op(x: int, w: int, acc: int) -> int:
        return star(circ(x, w), acc)

    return op


def gemm_op_reference(
    kernel: SemiringKernel, x: MatrixBuf, w: MatrixBuf, y: MatrixBuf
) -> MatrixBuf:
    """Golden Z with ascending-N reduction order, on binary16 codes."""
    m_dim, n_dim, k_dim = check_dims(x, w, y)
    x, w, y = x.to_fp16(), w.to_fp16(), y.to_fp16()
    op = ce_op(kernel)
    wcols = [w.data[k::k_dim] for k in range(k_dim)]
    z: list[int] = []
    for m in range(m_dim):
        xrow = x.data[m * n_dim : (m + 1) * n_dim]
        for k in range(k_dim):
            acc = y.data[m * k_dim + k]
            for xv, wv in zip(xrow, wcols[k]):
                acc = op(xv, wv, acc)
            z.append(acc)
    return MatrixBuf(Role.Z, m_dim, k_dim, z)


def wide_oracle(
    kernel: SemiringKernel, x: MatrixBuf, w: MatrixBuf, y: MatrixBuf
) -> np.ndarray:
    """Same recurrence in float64 on decoded inputs (tolerance reference)."""
    check_dims(x, w, y)
    xv, wv, acc = x.to_numpy(), w.to_numpy(), y.to_numpy().copy()
    star = {Op.ADD: np.add, Op.MIN: np.fmin, Op.MAX: np.fmax}[kernel.star]
    circ = {Op.MUL: np.multiply, Op.ADD: np.add, Op.MIN: np.fmin, Op.MAX: np.fmax}[kernel.circ]
    with np.errstate(invalid="ignore", over="ignore"):
        for n in range(xv.shape[1]):
            t = circ(xv[:, n : n + 1], wv[n : n + 1, :])
            acc = star(t, acc)
    return acc


def matmul_error_scale(x: MatrixBuf, w: MatrixBuf, y: MatrixBuf) -> np.ndarray:
    """Per-element magnitude sum |y| + sum_n |x*w| used to normalise errors."""
    xv, wv, yv = x.to_numpy(), w.to_numpy(), y.to_numpy()
    return np.abs(yv) + np.abs(xv) @ np.abs(wv)
