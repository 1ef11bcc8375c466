import numpy as np
import pytest
import torch

from fourllie import (
    ConfigMismatchError,
    CorruptCheckpointError,
    ModelConfig,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from fourllie.checkpoint import read_container, write_container


class TestContainer:
    def test_round_trip_arrays_and_meta(self, tmp_path):
        path = tmp_path / "c.ckpt"
        arrays = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.float32(1.5)}
        write_container(path, arrays, model_config={"nc": 4}, meta={"iteration": 7})
        c = read_container(path)
        assert np.array_equal(c.arrays["a"], arrays["a"])
        assert c.arrays["b"].shape == ()
        assert float(c.arrays["b"]) == 1.5
        assert c.model_config == {"nc": 4}
        assert c.meta == {"iteration": 7}

    def test_writes_are_byte_deterministic(self, tmp_path):
        arrays = {"w": np.ones((3, 3), dtype=np.float32)}
        write_container(tmp_path / "a.ckpt", arrays, meta={"k": 1})
        write_container(tmp_path / "b.ckpt", arrays, meta={"k": 1})
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        with pytest.raises(CorruptCheckpointError):
            read_container(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        write_container(path, {"a": np.ones(8, dtype=np.float32)})
        raw = path.read_bytes()
        for cut in (4, len(raw) - 20, len(raw) - 1):
            path.write_bytes(raw[:cut])
            with pytest.raises(CorruptCheckpointError):
                read_container(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "c.ckpt"
        write_container(path, {"a": np.ones(4, dtype=np.float32)})
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(CorruptCheckpointError):
            read_container(path)


class TestModelCheckpoint:
    def test_save_load_bitwise_round_trip(self, tmp_path):
        model = build_model(ModelConfig(nc=8), seed=3)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        loaded, container = load_checkpoint(path)
        assert container.model_config == model.config.to_dict()
        for (na, a), (nb, b) in zip(model.state_dict().items(), loaded.state_dict().items()):
            assert na == nb
            assert torch.equal(a, b), na

    def test_load_into_existing_model(self, tmp_path):
        model = build_model(ModelConfig(nc=8), seed=3)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        target = build_model(ModelConfig(nc=8), seed=99)
        load_checkpoint(path, target)
        for a, b in zip(model.parameters(), target.parameters()):
            assert torch.equal(a, b)

    def test_config_mismatch_rejected(self, tmp_path):
        model = build_model(ModelConfig(nc=8), seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        other = build_model(ModelConfig(nc=4), seed=0)
        with pytest.raises(ConfigMismatchError):
            load_checkpoint(path, other)

    def test_truncated_checkpoint_rejected(self, tmp_path):
        model = build_model(ModelConfig(nc=8), seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_missing_parameter_rejected(self, tmp_path):
        model = build_model(ModelConfig(nc=8), seed=0)
        path = tmp_path / "m.ckpt"
        # write a container with the right config but no parameter arrays
        write_container(path, {"unrelated": np.zeros(1, dtype=np.float32)}, model_config=model.config.to_dict())
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_extra_arrays_and_meta_travel_along(self, tmp_path):
        model = build_model(ModelConfig(nc=8), seed=0)
        path = tmp_path / "m.ckpt"
        extra = {"optim.exp_avg.x": torch.ones(3)}
        save_checkpoint(model, path, extra_arrays=extra, meta={"iteration": 41})
        _, container = load_checkpoint(path)
        assert container.meta["iteration"] == 41
        assert np.array_equal(container.arrays["optim.exp_avg.x"], np.ones(3, dtype=np.float32))
