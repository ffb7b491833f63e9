import struct
import zlib

import numpy as np
import pytest

from conftest import make_weights
from macodec.errors import ChecksumError, FormatError
from macodec.weights import (
    TENSOR_ORDER,
    ModelWeights,
    expected_shapes,
    load_weights,
    save_weights,
)


def reseal(data):
    """Replace the trailing CRC so structural edits stay checksum-valid."""
    body = data[:-4]
    return body + struct.pack("<I", zlib.crc32(body))


class TestShapes:
    def test_flat_width_tracks_block_size(self):
        assert expected_shapes(8)["W3"] == (919, 256)
        assert expected_shapes(16)["W3"] == (919, 1024)

    def test_bad_block_size(self):
        for n in (0, 3, 6, -8):
            with pytest.raises(ValueError):
                expected_shapes(n)

    def test_wrong_tensor_shape_rejected(self):
        w = make_weights(8, seed=1)
        bad = {k.lower(): getattr(w, k.lower()) for k in TENSOR_ORDER}
        bad["b4"] = np.zeros(34, dtype=np.float32)
        with pytest.raises(ValueError):
            ModelWeights(8, **bad)

    def test_arrays_read_only(self):
        w = make_weights(8, seed=2)
        with pytest.raises(ValueError):
            w.b4[0] = 1.0


class TestRoundtrip:
    def test_save_load_identity(self, tmp_path):
        for n in (8, 16):
            w = make_weights(n, seed=n)
            path = tmp_path / f"w{n}.macw"
            save_weights(path, w)
            loaded = load_weights(path)
            assert loaded.block_size == n
            for name in TENSOR_ORDER:
                a = getattr(w, name.lower())
                b = getattr(loaded, name.lower())
                assert a.tobytes() == b.tobytes(), name

    def test_header_fields(self, tmp_path):
        w = make_weights(8, seed=3)
        path = tmp_path / "w.macw"
        save_weights(path, w)
        data = path.read_bytes()
        assert data[:4] == b"MACW"
        assert struct.unpack_from("<III", data, 4) == (1, 8, 8)
        assert data[-4:] == struct.pack("<I", zlib.crc32(data[:-4]))


class TestRejection:
    @pytest.fixture()
    def saved(self, tmp_path):
        path = tmp_path / "w.macw"
        save_weights(path, make_weights(8, seed=4))
        return path, path.read_bytes()

    def test_flipped_byte(self, saved):
        path, data = saved
        corrupt = bytearray(data)
        corrupt[100] ^= 0xFF
        path.write_bytes(bytes(corrupt))
        with pytest.raises(ChecksumError):
            load_weights(path)

    def test_truncated(self, saved):
        path, data = saved
        path.write_bytes(reseal(data[: len(data) // 2]))
        with pytest.raises(FormatError):
            load_weights(path)

    def test_bad_magic(self, saved):
        path, data = saved
        path.write_bytes(reseal(b"XXXX" + data[4:]))
        with pytest.raises(FormatError):
            load_weights(path)

    def test_bad_version(self, saved):
        path, data = saved
        patched = bytearray(data)
        struct.pack_into("<I", patched, 4, 2)
        path.write_bytes(reseal(bytes(patched)))
        with pytest.raises(FormatError):
            load_weights(path)

    def test_trailing_garbage(self, saved):
        path, data = saved
        path.write_bytes(reseal(data[:-4] + b"\x00\x00"))
        with pytest.raises(FormatError):
            load_weights(path)

    def test_wrong_tensor_name(self, saved):
        path, data = saved
        patched = bytearray(data)
        idx = patched.index(b"W1", 16)
        patched[idx : idx + 2] = b"Q1"
        path.write_bytes(reseal(bytes(patched)))
        with pytest.raises(FormatError):
            load_weights(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.macw"
        path.write_bytes(b"")
        with pytest.raises(FormatError):
            load_weights(path)
