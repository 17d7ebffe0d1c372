"""Self-check suite behind ``redmule-sim verify`` and its brute-force oracles.

The oracles here avoid the rounding code under test: they enumerate the
destination format's values and pick the nearest one directly.
"""

from __future__ import annotations

import random
import time
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import fparith as fp
from .datapath import run
from .matrix import MatrixBuf, Role
from .semiring import gemm_op_reference, kernel_table
from .tiling import ArrayConfig, IOPrecision
from .workloads import Problem, closure, oracle, random_graph
from .workloads.graphs import _to_floats

# -- nearest-value oracles --------------------------------------------------

_FINITE16 = sorted(
    (fp.fp16_to_fraction(c), c)
    for c in range(0x7C00)  # positive finite codes, +0 included
)
_FINITE16_VALUES = [v for v, _ in _FINITE16]
_MAX16 = _FINITE16_VALUES[-1]
_ULP_MAX16 = _MAX16 - _FINITE16_VALUES[-2]


def nearest_fp16(x: Fraction, zero_sign: int = 0) -> int:
    """Round an exact rational to binary16 by search over all positive codes.

    Ties go to the even code; magnitudes at or beyond max + half an ulp
    become infinity.  ``zero_sign`` supplies the sign of an exact zero.
    """
    sign = 1 if x < 0 else 0
    a = abs(x)
    if a == 0:
        return zero_sign << 15
    if a >= _MAX16 + _ULP_MAX16 / 2:
        return (sign << 15) | fp.POS_INF16
    i = bisect_left(_FINITE16_VALUES, a)
    if i < len(_FINITE16) and _FINITE16_VALUES[i] == a:
        return (sign << 15) | _FINITE16[i][1]
    lo_v, lo_c = _FINITE16[i - 1]
    hi_v, hi_c = _FINITE16[i]
    if a - lo_v < hi_v - a:
        code = lo_c
    elif a - lo_v > hi_v - a:
        code = hi_c
    else:
        code = lo_c if lo_c % 2 == 0 else hi_c
    return (sign << 15) | code


def fp8_candidates(fmt: fp.Fp8Format) -> tuple[np.ndarray, np.ndarray]:
    """Positive non-NaN codes of ``fmt`` and their values.

    E5M2 infinity is entered as the virtual finite value 65536 (the next
    binade step), which makes IEEE overflow fall out of nearest-even.
    """
    codes, vals = [], []
    for c in range(0x80):
        v = fp.fp8_to_float(c, fmt)
        if v != v:
            continue
        codes.append(c)
        vals.append(65536.0 if v == float("inf") else v)
    return np.array(codes), np.array(vals)


def brute_force_fp8(fmt: fp.Fp8Format) -> list[int]:
    """Expected FP8 code for every binary16 input (index = input code)."""
    codes, vals = fp8_candidates(fmt)
    mags = np.array([fp.fp16_to_float(c) for c in range(0x8000)])
    nan = np.isnan(mags)
    # infinity is farther than any finite value: the largest candidate wins
    safe = np.where(nan, 0.0, np.where(np.isinf(mags), 2 * vals.max(), mags))
    dist = np.abs(vals[None, :] - safe[:, None])
    best = dist.min(axis=1, keepdims=True)
    tie = dist == best
    # among equally near candidates prefer an even code
    score = np.where(tie, np.where(codes % 2 == 0, 0, 1), 2)
    pick = codes[np.argmin(score, axis=1)]
    pos = np.where(nan, fmt.nan_code, pick).astype(int).tolist()
    return pos + [c | 0x80 for c in pos]


# -- properties -------------------------------------------------------------

@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def check_fp8_roundtrip() -> tuple[bool, str]:
    bad = []
    for fmt in fp.Fp8Format:
        for c in range(256):
            if fp.fp8_to_float(c, fmt) != fp.fp8_to_float(c, fmt):
                continue
            if fp.cast_fp16_to_fp8(fp.cast_fp8_to_fp16(c, fmt), fmt) != c:
                bad.append((fmt.value, c))
    return not bad, f"{len(bad)} codes failed" if bad else "512 codes round-trip"


def check_fp8_exhaustive() -> tuple[bool, str]:
    bad = 0
    for fmt in fp.Fp8Format:
        expect = brute_force_fp8(fmt)
        bad += sum(fp.cast_fp16_to_fp8(c, fmt) != expect[c] for c in range(1 << 16))
    return bad == 0, f"{bad} mismatches over 2 x 65536 inputs"


def check_fma_oracle(n: int, seed: int) -> tuple[bool, str]:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        a, b, c = (rng.randrange(0x7C00) | (rng.getrandbits(1) << 15) for _ in range(3))
        exact = fp.fp16_to_fraction(a) * fp.fp16_to_fraction(b) + fp.fp16_to_fraction(c)
        prod_neg = (a ^ b) >> 15
        # exact zero: same-sign addends keep their sign, otherwise +0
        zs = prod_neg if prod_neg == (c >> 15) else 0
        if fp.fma16(a, b, c) != nearest_fp16(exact, zs):
            bad += 1
    return bad == 0, f"{bad} mismatches over {n} finite triples"


def _random_case(rng: random.Random, max_dim: int, fp8: bool):
    M, N, K = (rng.randint(1, max_dim) for _ in range(3))

    def mat(role, r, c):
        codes = [fp.fp16_from_float(rng.uniform(-4.0, 4.0)) for _ in range(r * c)]
        buf = MatrixBuf(role, r, c, codes)
        return buf.to_fp8(fp.Fp8Format.E4M3) if fp8 else buf

    return mat(Role.X, M, N), mat(Role.W, N, K), mat(Role.Y, M, K)


def check_engine_equivalence(
    cases: int, max_dim: int, seed: int, fault_op: int | None = None
) -> tuple[bool, str]:
    rng = random.Random(seed)
    kernels = kernel_table()
    failures = []
    for i in range(cases):
        kernel = kernels[i % len(kernels)]
        fp8 = i % 5 == 4
        cfg = ArrayConfig(io_precision=IOPrecision.FP8_COMPRESSED if fp8 else IOPrecision.FP16)
        x, w, y = _random_case(rng, max_dim, fp8)
        z = run(cfg, kernel, x, w, y, fault_op=fault_op).z
        ref = gemm_op_reference(kernel, x, w, y)
        if fp8:
            ref = ref.to_fp8(z.fmt)
        if z.data != ref.data:
            failures.append(f"{kernel.name} {x.rows}x{x.cols}x{w.cols}")
    if failures:
        return False, f"{len(failures)}/{cases} cases differ, first: {failures[0]}"
    return True, f"{cases} random cases bit-identical"


def check_graph_oracles(count: int, n_apsp: int, n_cap: int, seed: int,
                        engine: str = "reference") -> tuple[bool, str]:
    bad = []
    for i in range(count):
        for problem, n in ((Problem.APSP, n_apsp), (Problem.MAX_CAPACITY, n_cap),
                           (Problem.MST_STYLE, n_cap)):
            g = random_graph(seed + i, n, problem)
            if _to_floats(closure(g, engine)) != oracle(g):
                bad.append(f"{problem.value}#{i}")
    return not bad, (f"{len(bad)} instances differ: {bad[:3]}" if bad
                     else f"{3 * count} instances match the oracles")


def run_verify(quick: bool = False, fault_op: int | None = None, seed: int = 0,
               echo: Callable[[str], None] | None = None) -> list[PropertyResult]:
    """Run every property; ``quick`` shrinks case counts to stay well under a minute."""
    props: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
        ("fp8_roundtrip", check_fp8_roundtrip),
        ("fp8_cast_exhaustive", check_fp8_exhaustive),
        ("fma_exact_oracle", lambda: check_fma_oracle(2000 if quick else 20000, seed)),
        ("engine_vs_reference", lambda: check_engine_equivalence(
            14 if quick else 70, 16 if quick else 40, seed, fault_op)),
        ("graph_oracles", lambda: check_graph_oracles(
            2 if quick else 5, 16 if quick else 32, 12 if quick else 24, seed,
            "reference")),
        ("graph_oracles_datapath", lambda: check_graph_oracles(
            1, 12 if quick else 24, 10 if quick else 16, seed + 100, "datapath")),
    ]
    results = []
    for name, fn in props:
        t0 = time.perf_counter()
        ok, detail = fn()
        res = PropertyResult(name, ok, detail, time.perf_counter() - t0)
        results.append(res)
        if echo:
            echo(res.line())
    return results
