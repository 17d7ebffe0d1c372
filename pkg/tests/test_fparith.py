from fractions import Fraction

import numpy as np
import pytest

from redmule_sim import fparith as fp
from redmule_sim.fparith import Fp8Format, fp16_from_float as h, fp16_to_float as f

from .oracles import Fp8Table, decode16, decode8, fma16_numpy, is_nan

E4M3, E5M2 = Fp8Format.E4M3, Fp8Format.E5M2


def same(a: int, b: int) -> bool:
    """Bit equality, treating any two NaNs as equal."""
    return a == b or (fp.is_nan16(a) and fp.is_nan16(b))


class TestEncoding:
    def test_decode_matches_bitfield_oracle_for_all_codes(self):
        for c in range(1 << 16):
            ref = decode16(c)
            if is_nan(ref):
                assert fp.is_nan16(c)
            elif isinstance(ref, float):
                assert f(c) == ref
            else:
                assert fp.fp16_to_fraction(c) == ref

    def test_encode_decode_identity_on_finite_codes(self):
        for c in range(0, 1 << 16, 7):
            if not fp.is_nan16(c):
                assert h(f(c)) == c

    def test_signed_zero_encoding(self):
        assert h(0.0) == fp.POS_ZERO16
        assert h(-0.0) == fp.NEG_ZERO16

    def test_debug_formatter_shows_hex_and_value(self):
        assert fp.format_fp16(h(1.5)) == "0x3e00 (1.5)"
        assert fp.format_fp8(0x38, E4M3).startswith("0x38/e4m3 (1.0)")


class TestFma:
    def test_small_integers(self):
        assert fp.fma16(h(1.0), h(1.0), h(1.0)) == h(2.0)

    @pytest.mark.parametrize("x", [1.0, -3.5, 65504.0, 2.0**-24])
    @pytest.mark.parametrize("c", [0.5, -7.0, 1000.0])
    def test_zero_annihilates_product(self, x, c):
        assert fp.fma16(h(0.0), h(x), h(c)) == h(c)

    def test_point_one_squared_single_rounding(self):
        a = h(0.1)
        assert a == 0x2E66  # 0.0999755859375
        exact = decode16(a) ** 2
        assert exact == Fraction(0.0999755859375) ** 2
        # frozen from the vectorized TwoSum oracle
        assert fp.fma16(a, a, fp.POS_ZERO16) == 0x211E
        assert int(fma16_numpy(*(np.array([v], dtype=np.uint16) for v in (a, a, 0)))[0]) == 0x211E

    def test_overflow_and_invalid(self):
        assert fp.fma16(h(256.0), h(256.0), h(0.0)) == fp.POS_INF16
        assert fp.fma16(fp.POS_INF16, h(0.0), h(1.0)) == fp.QNAN16
        assert fp.fma16(fp.POS_INF16, h(1.0), fp.NEG_INF16) == fp.QNAN16
        assert fp.fma16(fp.QNAN16 | 0x8001, h(1.0), h(1.0)) == fp.QNAN16

    def test_exact_zero_sign_rules(self):
        assert fp.fma16(h(-0.0), h(1.0), h(-0.0)) == fp.NEG_ZERO16
        assert fp.fma16(h(-0.0), h(1.0), h(0.0)) == fp.POS_ZERO16
        assert fp.fma16(h(2.0), h(3.0), h(-6.0)) == fp.POS_ZERO16

    def test_midpoint_tie_cases_against_oracle(self):
        # 1 + 2**-11 is the midpoint between 1 and its successor: even wins
        assert fp.fma16(h(2.0**-11), h(1.0), h(1.0)) == h(1.0)
        # tiny extra term breaks the tie upwards
        assert fp.fma16(h(2.0**-11 + 2.0**-21), h(1.0), h(1.0)) == 0x3C01
        a, b, c = (np.array([v], dtype=np.uint16) for v in (h(2.0**-11 + 2.0**-21), h(1.0), h(1.0)))
        assert int(fma16_numpy(a, b, c)[0]) == 0x3C01

    def test_million_random_triples_against_oracle(self):
        rng = np.random.default_rng(2024)
        n = 1_000_000
        a, b, c = (rng.integers(0, 1 << 16, n, dtype=np.uint16) for _ in range(3))
        expect = fma16_numpy(a, b, c).tolist()
        fma = fp.fma16
        bad = [
            i for i, (x, y, z) in enumerate(zip(a.tolist(), b.tolist(), c.tolist()))
            if not same(fma(x, y, z), expect[i])
        ]
        assert bad == []

    def test_rational_oracle_on_finite_triples(self):
        rng = np.random.default_rng(7)
        for _ in range(3000):
            a, b, c = (int(v) for v in rng.integers(0, 0x7C00, 3))
            a |= int(rng.integers(0, 2)) << 15
            exact = decode16(a) * decode16(b) + decode16(c)
            got = fp.fma16(a, b, c)
            if fp.is_inf16(got):
                assert abs(exact) >= 65520
            else:
                # the result is the nearest binary16 value
                err = abs(decode16(got) - exact)
                for nb in (got - 1, got + 1):
                    if 0 <= nb < 1 << 16 and not fp.is_nan16(nb) and not fp.is_inf16(nb) \
                            and (nb ^ got) < 0x8000:
                        assert err <= abs(decode16(nb) - exact)

    def test_fma_with_zero_addend_equals_mul(self):
        rng = np.random.default_rng(11)
        a = rng.integers(0, 1 << 16, 1_000_000).tolist()
        b = rng.integers(0, 1 << 16, 1_000_000).tolist()
        fma, mul = fp.fma16, fp.mul16
        # -0 is the exact additive identity, so this holds for every pair
        bad = [i for i in range(len(a)) if not same(fma(a[i], b[i], fp.NEG_ZERO16), mul(a[i], b[i]))]
        assert bad == []

    def test_fma_with_plus_zero_equals_mul_for_nonzero_products(self):
        for a in range(0x3C00, 0x3C00 + 1024, 3):
            for b in (0x3555, 0x4001, 0x0003, 0x7BFF, 0xC3FF):
                m = fp.mul16(a, b)
                if m & 0x7FFF:
                    assert fp.fma16(a, b, fp.POS_ZERO16) == m

    def test_exact_product_pairs(self):
        # short significands multiply exactly, so fma(a,b,-0) is the exact product
        for ma in range(8):
            for mb in range(8):
                a, b = h(1 + ma / 8), h(-(1 + mb / 8))
                expect = h(float(decode16(a) * decode16(b)))
                assert fp.mul16(a, b) == expect == fp.fma16(a, b, fp.NEG_ZERO16)


class TestAddMul:
    def test_examples(self):
        assert fp.add16(h(1.5), h(2.5)) == h(4.0)
        assert fp.mul16(h(-0.0), h(5.0)) == fp.NEG_ZERO16
        # 68192 exceeds the largest finite binary16 (65504)
        assert fp.add16(h(60000.0), h(8192.0)) == fp.POS_INF16

    def test_add_is_commutative_on_samples(self):
        rng = np.random.default_rng(3)
        for a, b in rng.integers(0, 1 << 16, (20000, 2)).tolist():
            assert same(fp.add16(a, b), fp.add16(b, a))
            assert same(fp.mul16(a, b), fp.mul16(b, a))

    def test_inf_minus_inf_is_nan(self):
        assert fp.add16(fp.POS_INF16, fp.NEG_INF16) == fp.QNAN16
        assert fp.mul16(fp.POS_INF16, fp.POS_ZERO16) == fp.QNAN16


_VALUES16 = [decode16(c) for c in range(1 << 16)]


def _cmp_oracle(a: int, b: int, want_max: bool) -> int:
    va, vb = _VALUES16[a], _VALUES16[b]
    if is_nan(va) and is_nan(vb):
        return fp.QNAN16
    if is_nan(va):
        return b
    if is_nan(vb):
        return a
    if va == vb:
        # only zeros of opposite sign compare equal with distinct codes
        neg = a if a & 0x8000 else b
        pos = b if neg == a else a
        return pos if want_max else neg
    return (a if va > vb else b) if want_max else (a if va < vb else b)


class TestFncomp:
    def test_examples(self):
        assert fp.fncomp16(h(3.0), h(-1.0), fp.CompOp.MIN) == h(-1.0)
        assert fp.fncomp16(fp.QNAN16, h(7.0), fp.CompOp.MAX) == h(7.0)
        assert fp.fncomp16(h(-0.0), h(0.0), fp.CompOp.MAX) == fp.POS_ZERO16

    def test_all_zero_pairings(self):
        zeros = (fp.POS_ZERO16, fp.NEG_ZERO16)
        for a in zeros:
            for b in zeros:
                assert fp.min16(a, b) == (fp.NEG_ZERO16 if fp.NEG_ZERO16 in (a, b) else fp.POS_ZERO16)
                assert fp.max16(a, b) == (fp.POS_ZERO16 if fp.POS_ZERO16 in (a, b) else fp.NEG_ZERO16)

    def test_every_code_against_boundary_set(self):
        probes = [0x0000, 0x8000, 0x0001, 0x8001, 0x03FF, 0x0400, 0x3C00, 0xBC00,
                  0x7BFF, 0xFBFF, 0x7C00, 0xFC00, 0x7E00, 0x7C01, 0xFE00, 0x5555]
        for a in range(1 << 16):
            for b in probes:
                assert fp.min16(a, b) == _cmp_oracle(a, b, False)
                assert fp.max16(a, b) == _cmp_oracle(a, b, True)

    def test_symmetry_and_sign_duality_on_random_pairs(self):
        rng = np.random.default_rng(5)
        for a, b in rng.integers(0, 1 << 16, (200000, 2)).tolist():
            assert same(fp.min16(a, b), fp.min16(b, a))
            mx = fp.max16(a, b)
            dual = fp.min16(fp.neg16(a), fp.neg16(b))
            assert same(mx, fp.neg16(dual) if not fp.is_nan16(dual) else dual)

    def test_both_nan_gives_quiet_nan(self):
        assert fp.min16(0x7C01, 0xFE00) == fp.QNAN16


class TestFp8Casts:
    def test_examples(self):
        assert fp.cast_fp8_to_fp16(0x3C, E5M2) == h(1.0)
        assert fp.cast_fp8_to_fp16(0x7E, E4M3) == h(448.0)  # S=0 E=1111 M=110
        assert fp.cast_fp16_to_fp8(h(1.0), E4M3) == 0x38
        assert fp.cast_fp16_to_fp8(h(65504.0), E4M3) == 0x7E
        # 0.300048828125 sits between 0.25 and 0.3125 in E5M2
        assert fp.cast_fp16_to_fp8(h(0.3), E5M2) == 0x35

    def test_e4m3_value_table(self):
        finite = [decode8(c, "e4m3") for c in range(0x80) if not is_nan(decode8(c, "e4m3"))]
        assert max(finite) == 448
        assert len(finite) == 127

    @pytest.mark.parametrize("fmt", list(Fp8Format))
    def test_up_cast_is_exact_for_every_code(self, fmt):
        for c in range(256):
            ref = decode8(c, fmt.value)
            got = fp.cast_fp8_to_fp16(c, fmt)
            if is_nan(ref):
                assert got == fp.QNAN16
            else:
                assert decode16(got) == ref
                assert (got >> 15) == (c >> 7)

    @pytest.mark.parametrize("fmt", list(Fp8Format))
    def test_round_trip_every_code(self, fmt):
        for c in range(256):
            if not is_nan(decode8(c, fmt.value)):
                assert fp.cast_fp16_to_fp8(fp.cast_fp8_to_fp16(c, fmt), fmt) == c

    @pytest.mark.parametrize("fmt", list(Fp8Format))
    def test_down_cast_exhaustive_against_table_oracle(self, fmt):
        table = Fp8Table(fmt.value)
        bad = [c for c in range(1 << 16) if fp.cast_fp16_to_fp8(c, fmt) != table.round(c)]
        assert bad == []

    def test_overflow_policies(self):
        assert fp.cast_fp16_to_fp8(fp.POS_INF16, E4M3) == 0x7E
        assert fp.cast_fp16_to_fp8(fp.NEG_INF16, E4M3) == 0xFE
        assert fp.cast_fp16_to_fp8(h(61440.0), E5M2) == 0x7C  # tie goes to inf
        assert fp.cast_fp16_to_fp8(h(60000.0), E5M2) == 0x7B
        assert fp.cast_fp16_to_fp8(fp.QNAN16, E5M2) == 0x7E

    def test_subnormal_results(self):
        # smallest E4M3 subnormal is 2**-9, E5M2 is 2**-16
        assert fp.cast_fp16_to_fp8(h(2.0**-9), E4M3) == 0x01
        assert fp.cast_fp16_to_fp8(h(2.0**-16), E5M2) == 0x01
        assert fp.cast_fp16_to_fp8(h(-(2.0**-11)), E4M3) == 0x80
