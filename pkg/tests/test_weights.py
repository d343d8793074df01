import struct

import numpy as np
import pytest

from gyrocal import model, weights
from gyrocal.errors import (
    BadMagicError,
    NonFiniteWeightError,
    TruncatedFileError,
    VersionMismatchError,
)


def f32_exact_params(seed):
    """Parameter sets whose values are exactly representable in binary32."""
    calib = model.CalibNetParams.init_default()
    denoise = model.DenoiseNetParams.random_init(seed)
    for _, a in model.calib_param_items(calib) + model.denoise_param_items(denoise):
        a[...] = a.astype(np.float32).astype(np.float64)
    return calib, denoise


class TestRoundTrip:
    def test_identical_parameters(self, tmp_path):
        calib, denoise = f32_exact_params(0)
        path = tmp_path / "w.tgcn"
        weights.export_weights(calib, denoise, path)
        calib2, denoise2 = weights.import_weights(path)
        for (_, a), (_, b) in zip(
            model.calib_param_items(calib), model.calib_param_items(calib2)
        ):
            np.testing.assert_array_equal(a, b)
        for (_, a), (_, b) in zip(
            model.denoise_param_items(denoise), model.denoise_param_items(denoise2)
        ):
            np.testing.assert_array_equal(a, b)

    def test_bytes_idempotent(self, tmp_path):
        # float64 params get rounded to f32 once; after that the file is a fixed point
        calib = model.CalibNetParams.init_default()
        calib.lbn1.matrix[0, 0] = 1.0000001234567
        denoise = model.DenoiseNetParams.random_init(1)
        p1 = tmp_path / "a.tgcn"
        p2 = tmp_path / "b.tgcn"
        weights.export_weights(calib, denoise, p1)
        weights.export_weights(*weights.import_weights(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_import_is_f32_rounding_of_export(self, tmp_path):
        calib = model.CalibNetParams.init_default()
        denoise = model.DenoiseNetParams.random_init(2)
        path = tmp_path / "w.tgcn"
        weights.export_weights(calib, denoise, path)
        _, denoise2 = weights.import_weights(path)
        np.testing.assert_array_equal(
            denoise2.conv1_w, denoise.conv1_w.astype(np.float32).astype(np.float64)
        )


class TestFileLayout:
    def test_exact_size(self, tmp_path):
        path = tmp_path / "w.tgcn"
        weights.export_weights(
            model.CalibNetParams.init_default(), model.DenoiseNetParams.random_init(3), path
        )
        # magic + u16 version + 2 u32 counts + 4*(27+168) payload bytes
        assert path.stat().st_size == 4 + 2 + 8 + 4 * 195 == weights.FILE_SIZE == 794

    def test_canonical_order(self, tmp_path):
        calib, denoise = f32_exact_params(4)
        path = tmp_path / "w.tgcn"
        weights.export_weights(calib, denoise, path)
        buf = path.read_bytes()
        assert buf[:4] == b"TGCN"
        assert struct.unpack("<H", buf[4:6]) == (1,)
        assert struct.unpack("<I", buf[6:10]) == (27,)
        calib_vals = np.frombuffer(buf[10 : 10 + 108], dtype="<f4").astype(np.float64)
        np.testing.assert_array_equal(calib_vals[:9], calib.lbn1.matrix.ravel())
        np.testing.assert_array_equal(calib_vals[9:12], calib.lbn1.bias)
        np.testing.assert_array_equal(calib_vals[24:27], calib.prelu_slopes)
        assert struct.unpack("<I", buf[118:122]) == (168,)
        denoise_vals = np.frombuffer(buf[122:], dtype="<f4").astype(np.float64)
        np.testing.assert_array_equal(denoise_vals[:28], denoise.conv1_w.ravel())
        np.testing.assert_array_equal(denoise_vals[28:32], denoise.conv1_b)


class TestErrors:
    def _export(self, tmp_path):
        path = tmp_path / "w.tgcn"
        weights.export_weights(
            model.CalibNetParams.init_default(), model.DenoiseNetParams.random_init(5), path
        )
        return path

    def test_bad_magic(self, tmp_path):
        path = self._export(tmp_path)
        buf = bytearray(path.read_bytes())
        buf[:4] = b"XXXX"
        path.write_bytes(bytes(buf))
        with pytest.raises(BadMagicError):
            weights.import_weights(path)

    def test_version_mismatch(self, tmp_path):
        path = self._export(tmp_path)
        buf = bytearray(path.read_bytes())
        buf[4:6] = struct.pack("<H", 99)
        path.write_bytes(bytes(buf))
        with pytest.raises(VersionMismatchError):
            weights.import_weights(path)

    def test_truncated(self, tmp_path):
        path = self._export(tmp_path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(TruncatedFileError):
            weights.import_weights(path)

    def test_trailing_garbage(self, tmp_path):
        path = self._export(tmp_path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(TruncatedFileError):
            weights.import_weights(path)

    def test_non_finite_export_refused(self, tmp_path):
        calib = model.CalibNetParams.init_default()
        calib.lbn2.bias[1] = np.nan
        with pytest.raises(NonFiniteWeightError):
            weights.export_weights(calib, model.DenoiseNetParams.random_init(6), tmp_path / "w")

    def test_non_finite_import_rejected(self, tmp_path):
        path = self._export(tmp_path)
        buf = bytearray(path.read_bytes())
        buf[10:14] = struct.pack("<f", np.inf)
        path.write_bytes(bytes(buf))
        with pytest.raises(NonFiniteWeightError):
            weights.import_weights(path)
