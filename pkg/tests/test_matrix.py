import struct

import pytest

from redmule_sim.fparith import Fp8Format
from redmule_sim.matrix import (
    DimensionError,
    MatrixBuf,
    Role,
    check_dims,
    load_matrix,
    load_text_matrix,
    parse_text_matrix,
    save_matrix,
)


def test_shape_checks():
    x = MatrixBuf.filled(Role.X, 3, 4, 0)
    w = MatrixBuf.filled(Role.W, 4, 5, 0)
    y = MatrixBuf.filled(Role.Y, 3, 5, 0)
    assert check_dims(x, w, y) == (3, 4, 5)
    with pytest.raises(DimensionError):
        check_dims(x, MatrixBuf.filled(Role.W, 3, 5, 0), y)
    with pytest.raises(DimensionError):
        check_dims(x, w, MatrixBuf.filled(Role.Y, 5, 3, 0))


def test_data_length_and_positive_dims():
    with pytest.raises(ValueError):
        MatrixBuf(Role.X, 2, 2, [0, 0, 0])
    with pytest.raises(ValueError):
        MatrixBuf(Role.X, 0, 2, [])


class TestBinaryFormat:
    def test_header_is_sixteen_bytes(self, tmp_path):
        buf = MatrixBuf.from_floats(Role.W, [[1.0, -2.0, 0.5]])
        path = tmp_path / "w.rmlm"
        save_matrix(buf, path)
        raw = path.read_bytes()
        assert len(raw) == 16 + 3 * 2
        magic, role, fmt, rows, cols = struct.unpack("<4sBBxxII", raw[:16])
        assert (magic, role, fmt, rows, cols) == (b"RMLM", 1, 0, 1, 3)
        assert raw[16:18] == bytes([0x00, 0x3C])  # 1.0 little-endian

    @pytest.mark.parametrize("fmt", [None, Fp8Format.E4M3, Fp8Format.E5M2])
    def test_round_trip(self, tmp_path, fmt):
        buf = MatrixBuf.from_floats(Role.Y, [[1.0, 2.5], [-3.0, 0.125], [7.0, -0.0]], fmt)
        save_matrix(buf, tmp_path / "m")
        back = load_matrix(tmp_path / "m")
        assert back == buf

    def test_rejects_bad_magic_and_size(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"XXXX" + bytes(12))
        with pytest.raises(ValueError, match="magic"):
            load_matrix(tmp_path / "bad")
        buf = MatrixBuf.from_floats(Role.X, [[1.0, 2.0]])
        save_matrix(buf, tmp_path / "short")
        (tmp_path / "short").write_bytes((tmp_path / "short").read_bytes()[:-1])
        with pytest.raises(ValueError, match="payload"):
            load_matrix(tmp_path / "short")


class TestTextFormat:
    def test_parse_commas_spaces_and_comments(self):
        buf = parse_text_matrix(["# header", "1, 2 3", "", "4 5,6  # tail"], Role.X)
        assert buf.shape == (2, 3)
        assert buf.to_numpy().tolist() == [[1, 2, 3], [4, 5, 6]]

    def test_ragged_rejected(self):
        with pytest.raises(ValueError, match="ragged"):
            parse_text_matrix(["1 2", "3"], Role.X)

    def test_load_from_file(self, tmp_path):
        (tmp_path / "m.txt").write_text("0.5 -1\n2 3\n")
        assert load_text_matrix(tmp_path / "m.txt", Role.W).to_numpy().tolist() == [[0.5, -1], [2, 3]]


def test_pad_crop_transpose():
    buf = MatrixBuf.from_floats(Role.X, [[1.0, 2.0], [3.0, 4.0]])
    padded = buf.pad(3, 4, 0x7C00)
    assert padded.shape == (3, 4)
    assert padded.crop(2, 2) == buf
    assert buf.transpose().to_numpy().tolist() == [[1, 3], [2, 4]]
