import random

import numpy as np
import pytest

from redmule_sim import fparith as fp
from redmule_sim.fparith import fp16_from_float as h
from redmule_sim.matrix import DimensionError, MatrixBuf, Role
from redmule_sim.semiring import (
    Group,
    Op,
    ce_stage1,
    ce_stage2,
    gemm_op_reference,
    get_kernel,
    kernel_table,
    matmul_error_scale,
    wide_oracle,
)

from .oracles import decode16


def mat(role, rows, cols, rng, lo=-4.0, hi=4.0, ints=False):
    vals = [[float(rng.randint(int(lo), int(hi))) if ints else rng.uniform(lo, hi)
             for _ in range(cols)] for _ in range(rows)]
    return MatrixBuf.from_floats(role, vals)


def operands(rng, M, N, K, **kw):
    return mat(Role.X, M, N, rng, **kw), mat(Role.W, N, K, rng, **kw), mat(Role.Y, M, K, rng, **kw)


def decoded(buf):
    return np.array([fp.fp16_to_float(c) for c in buf.data]).reshape(buf.rows, buf.cols)


class TestKernelTable:
    def test_exactly_seven_operator_pairs(self):
        pairs = {(k.circ, k.star) for k in kernel_table()}
        assert pairs == {
            (Op.MUL, Op.ADD), (Op.ADD, Op.MAX), (Op.ADD, Op.MIN), (Op.MUL, Op.MAX),
            (Op.MUL, Op.MIN), (Op.MAX, Op.MIN), (Op.MIN, Op.MAX),
        }
        assert len(kernel_table()) == 7

    def test_named_rows(self):
        assert (get_kernel("matmul").circ, get_kernel("matmul").star) == (Op.MUL, Op.ADD)
        apsp = get_kernel("All-Pairs_Shortest_Paths")
        assert (apsp.circ, apsp.star) == (Op.ADD, Op.MIN)
        cap = get_kernel("max_capacity_path")
        assert (cap.circ, cap.star, cap.title) == (Op.MIN, Op.MAX, "Maximum Capacity Path")

    def test_groups_follow_operators(self):
        for k in kernel_table():
            if k.group is Group.GROUP1:
                assert k.circ in (Op.ADD, Op.MUL) and k.star in (Op.MIN, Op.MAX)
            elif k.group is Group.GROUP2:
                assert k.circ in (Op.MIN, Op.MAX)
            else:
                assert (k.circ, k.star) == (Op.MUL, Op.ADD)

    def test_padding_identities(self):
        star_identity = {Op.ADD: fp.POS_ZERO16, Op.MIN: fp.POS_INF16, Op.MAX: fp.NEG_INF16}
        for k in kernel_table():
            assert k.pad_y == star_identity[k.star]
            if k.circ is Op.MUL and k.group is Group.GROUP1:
                assert k.pad_x == h(1.0) and k.pad_w == k.pad_y

    def test_aliases_and_unknown(self):
        assert get_kernel("apsp").name == "all_pairs_shortest_paths"
        with pytest.raises(KeyError, match="unknown kernel"):
            get_kernel("boolean")


class TestStages:
    def test_stage1(self):
        assert ce_stage1(get_kernel("matmul"), h(2.0), h(3.0), h(1.0)) == h(7.0)
        assert ce_stage1(get_kernel("apsp"), h(2.0), h(3.0), h(100.0)) == h(5.0)
        assert ce_stage1(get_kernel("mst"), h(2.0), h(3.0), h(100.0)) == h(3.0)

    def test_stage2(self):
        assert ce_stage2(get_kernel("matmul"), h(7.0), h(-9.0)) == h(7.0)
        assert ce_stage2(get_kernel("apsp"), h(5.0), h(4.0)) == h(4.0)
        assert ce_stage2(get_kernel("max_critical_path"), h(5.0), h(4.0)) == h(5.0)


class TestReference:
    def test_one_by_one(self):
        x = MatrixBuf.from_floats(Role.X, [[2.0]])
        w = MatrixBuf.from_floats(Role.W, [[3.0]])
        y = MatrixBuf.from_floats(Role.Y, [[1.0]])
        assert gemm_op_reference(get_kernel("matmul"), x, w, y).data == [h(7.0)]

    def test_two_node_apsp_matches_two_hop_brute_force(self):
        adj = [[0.0, 5.0], [5.0, 0.0]]
        x = MatrixBuf.from_floats(Role.X, adj)
        z = gemm_op_reference(get_kernel("apsp"), x, MatrixBuf.from_floats(Role.W, adj),
                              MatrixBuf.from_floats(Role.Y, adj))
        brute = [[min([adj[i][j]] + [adj[i][k] + adj[k][j] for k in range(2)]) for j in range(2)]
                 for i in range(2)]
        assert decoded(z).tolist() == brute == [[0, 5], [5, 0]]

    def test_identity_weight_returns_x(self):
        rng = random.Random(1)
        x = mat(Role.X, 6, 5, rng)
        eye = MatrixBuf.from_floats(Role.W, np.eye(5))
        y = MatrixBuf.filled(Role.Y, 6, 5, fp.POS_ZERO16)
        assert gemm_op_reference(get_kernel("matmul"), x, eye, y).data == x.data

    def test_dimension_mismatch(self):
        rng = random.Random(0)
        with pytest.raises(DimensionError):
            gemm_op_reference(get_kernel("matmul"), mat(Role.X, 2, 3, rng),
                              mat(Role.W, 2, 3, rng), mat(Role.Y, 2, 3, rng))

    def test_ascending_reduction_order(self):
        # 2048 + 1 + 1: left-to-right loses both ones, any other order keeps 2
        x = MatrixBuf.from_floats(Role.X, [[1.0, 1.0]])
        w = MatrixBuf.from_floats(Role.W, [[1.0], [1.0]])
        y = MatrixBuf.from_floats(Role.Y, [[2048.0]])
        assert gemm_op_reference(get_kernel("matmul"), x, w, y).data == [h(2048.0)]


class TestWideOracle:
    @pytest.mark.parametrize("k", [k.name for k in kernel_table()])
    def test_exact_integers_agree(self, k):
        rng = random.Random(3)
        x, w, y = operands(rng, 5, 6, 7, lo=-8, hi=8, ints=True)
        ref = decoded(gemm_op_reference(get_kernel(k), x, w, y))
        assert np.array_equal(ref, wide_oracle(get_kernel(k), x, w, y))

    def test_matmul_relative_error_bound(self):
        rng = random.Random(16)
        x, w, y = operands(rng, 16, 16, 16, lo=-1, hi=1)
        kern = get_kernel("matmul")
        dev = np.abs(decoded(gemm_op_reference(kern, x, w, y)) - wide_oracle(kern, x, w, y))
        rel = dev / matmul_error_scale(x, w, y)
        assert rel.max() <= 16 * 2.0**-8

    @pytest.mark.parametrize("k", ["min_spanning_tree", "max_capacity_path"])
    def test_group2_is_exact(self, k):
        rng = random.Random(9)
        for _ in range(5):
            x, w, y = operands(rng, 7, 9, 4, lo=-1000, hi=1000)
            ref = decoded(gemm_op_reference(get_kernel(k), x, w, y))
            assert np.array_equal(ref, wide_oracle(get_kernel(k), x, w, y))


class TestProperties:
    @pytest.mark.parametrize("idx", range(7))
    def test_padding_n_is_a_no_op(self, idx):
        kern = kernel_table()[idx]
        rng = random.Random(idx)
        x, w, y = operands(rng, 4, 5, 3)
        xp = x.pad(4, 9, kern.pad_x)
        wp = w.pad(9, 3, kern.pad_w)
        assert gemm_op_reference(kern, xp, wp, y) == gemm_op_reference(kern, x, w, y)

    def test_matmul_plain_zero_padding_without_negative_zero(self):
        kern = get_kernel("matmul")
        rng = random.Random(21)
        x, w, y = operands(rng, 5, 4, 6, lo=0.25, hi=3)
        z = gemm_op_reference(kern, x, w, y)
        padded = gemm_op_reference(kern, x.pad(5, 8, 0), w.pad(8, 6, 0), y)
        assert padded == z

    def test_output_padding_is_cropped_away(self):
        # padding M and K with pad_y leaves the original block untouched
        for kern in kernel_table():
            rng = random.Random(4)
            x, w, y = operands(rng, 3, 4, 5)
            z = gemm_op_reference(kern, x, w, y)
            zp = gemm_op_reference(kern, x.pad(6, 4, kern.pad_x), w.pad(4, 8, kern.pad_w),
                                   y.pad(6, 8, kern.pad_y))
            assert zp.crop(3, 5) == z

    @pytest.mark.parametrize("k", ["min_spanning_tree", "max_capacity_path"])
    def test_group2_transpose_symmetry(self, k):
        kern = get_kernel(k)
        rng = random.Random(8)
        for _ in range(3):
            x, w, y = operands(rng, 8, 8, 8)
            z = gemm_op_reference(kern, x, w, y)
            zt = gemm_op_reference(kern, w.transpose(Role.X), x.transpose(Role.W),
                                   y.transpose(Role.Y))
            assert zt == z.transpose()

    def test_min_plus_powering_reaches_shortest_paths(self):
        inf = float("inf")
        n = 6
        adj = [[inf] * n for _ in range(n)]
        for i in range(n):
            adj[i][i] = 0.0
        for u, v, wt in [(0, 1, 4), (1, 2, 1), (2, 3, 7), (3, 4, 2), (4, 5, 3), (0, 5, 20), (1, 4, 9)]:
            adj[u][v] = adj[v][u] = float(wt)
        d = MatrixBuf.from_floats(Role.X, adj)
        kern = get_kernel("apsp")
        for _ in range(3):
            d = gemm_op_reference(kern, d, MatrixBuf(Role.W, n, n, d.data), MatrixBuf(Role.Y, n, n, d.data))
        fw = [row[:] for row in adj]
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    fw[i][j] = min(fw[i][j], fw[i][k] + fw[k][j])
        assert decoded(d).tolist() == fw

    def test_decoded_values_match_bitfield_oracle(self):
        rng = random.Random(12)
        x, w, y = operands(rng, 3, 3, 3)
        for c in gemm_op_reference(get_kernel("matmul"), x, w, y).data:
            assert float(decode16(c)) == fp.fp16_to_float(c)
