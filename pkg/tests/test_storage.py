"""Tests for archives, digests and config schemas."""

import numpy as np
import pytest


class TestArchive:
    def test_roundtrip_preserves_dtypes(self):
        from wakesleep.base.storage import decode_archive, encode_archive
        tensors = {
            "weights": np.arange(6.0).reshape(2, 3),
            "labels": np.array([[-1, 2, 0]], dtype=np.int64),
            "pixels": np.array([0, 255], dtype=np.uint8),
            "mask": np.array([True, False]),
        }
        decoded, meta = decode_archive(encode_archive(tensors, {"kind": "test"}))
        assert meta == {"kind": "test"}
        assert list(decoded) == list(tensors)
        for name, value in tensors.items():
            np.testing.assert_array_equal(decoded[name], value)
            assert decoded[name].dtype == value.dtype

    def test_encoding_is_deterministic(self):
        from wakesleep.base.storage import encode_archive
        tensors = {"a": np.ones(3), "b": np.zeros((2, 2), dtype=np.int64)}
        assert encode_archive(tensors, {"x": 1, "y": [1, 2]}) == encode_archive(dict(tensors), {"y": [1, 2], "x": 1})

    def test_bad_magic(self):
        from wakesleep.base.exceptions import DataFormatError
        from wakesleep.base.storage import decode_archive, encode_archive
        data = bytearray(encode_archive({"a": np.ones(2)}))
        data[0:4] = b"NOPE"
        with pytest.raises(DataFormatError) as info:
            decode_archive(bytes(data))
        assert info.value.offset == 0

    def test_corrupt_payload_detected(self):
        from wakesleep.base.exceptions import DataFormatError
        from wakesleep.base.storage import decode_archive, encode_archive
        data = bytearray(encode_archive({"a": np.ones(4)}))
        data[-1] ^= 0xFF
        with pytest.raises(DataFormatError, match="digest"):
            decode_archive(bytes(data))

    @pytest.mark.parametrize("keep", [3, 10, 40])
    def test_truncated(self, keep):
        from wakesleep.base.exceptions import DataFormatError
        from wakesleep.base.storage import decode_archive, encode_archive
        data = encode_archive({"a": np.ones(4)})
        with pytest.raises(DataFormatError):
            decode_archive(data[:keep])

    def test_unsupported_dtype(self):
        from wakesleep.base.exceptions import DataFormatError
        from wakesleep.base.storage import encode_archive
        with pytest.raises(DataFormatError):
            encode_archive({"s": np.array(["a", "b"])})

    def test_write_read(self, tmp_path):
        from wakesleep.base.storage import read_archive, write_archive
        path = write_archive(tmp_path / "nested" / "t.wsar", {"a": np.eye(2)}, {"step": 3})
        tensors, meta = read_archive(path)
        np.testing.assert_array_equal(tensors["a"], np.eye(2))
        assert meta["step"] == 3
        assert [p.name for p in path.parent.iterdir()] == ["t.wsar"]


class TestDigest:
    def test_sha256_hex(self):
        from wakesleep.base.storage import sha256_hex
        assert sha256_hex(b"abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_config_digest_tracks_values(self):
        from wakesleep.base.schemas import TrainConfig
        from wakesleep.base.storage import config_digest
        base = TrainConfig()
        assert config_digest(base) == config_digest(TrainConfig())
        assert config_digest(base) != config_digest(base.model_copy(update={"K": 11}))
        assert config_digest(base, exclude=("epochs",)) == config_digest(
            base.model_copy(update={"epochs": 99}), exclude=("epochs",)
        )


class TestTrainConfig:
    def test_defaults(self):
        from wakesleep.base.schemas import TrainConfig
        config = TrainConfig()
        assert config.objective == "cws"
        assert config.K == 10
        assert config.model.kind == "sequential"
        assert config.dataset.kind == "hmm"
        assert config.supervision.mode == "per-sequence-all-or-none"

    def test_unknown_key_rejected(self):
        from pydantic import ValidationError
        from wakesleep.base.schemas import TrainConfig
        with pytest.raises(ValidationError):
            TrainConfig.model_validate({"learning_rate": 0.1})
        with pytest.raises(ValidationError):
            TrainConfig.model_validate({"model": {"layers": 3}})

    @pytest.mark.parametrize("data", [
        {"objective": "m1m2"},
        {"objective": "reinforce-m1m2", "K": 1},
        {"adam_betas": [0.9]},
        {"adam_betas": [0.9, 1.0]},
        {"eval_topk": [0, 1]},
        {"model": {"kind": "static"}, "dataset": {"kind": "hmm"}},
        {"lr_theta": 0.0},
        {"supervision": {"rate": 1.5}},
    ])
    def test_invalid(self, data):
        from pydantic import ValidationError
        from wakesleep.base.schemas import TrainConfig
        with pytest.raises(ValidationError):
            TrainConfig.model_validate(data)

    def test_m1m2_with_static_model(self):
        from wakesleep.base.schemas import TrainConfig
        config = TrainConfig.model_validate(
            {"objective": "m1m2", "model": {"kind": "static"}, "dataset": {"kind": "mnist"}}
        )
        assert config.model.kind == "static"

    def test_metric_row_allows_missing_ess(self):
        from wakesleep.base.schemas import MetricRow
        row = MetricRow(step=1, epoch=0, wall_time=0.5, loss_p=1.0, loss_phi=2.0,
                        grad_norm_theta=0.1, grad_norm_phi=0.2)
        assert row.ess_mean is None
        assert MetricRow.model_validate_json(row.model_dump_json()) == row
