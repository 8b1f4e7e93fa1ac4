"""Checkpoint persistence: round trips, hashes, corruption handling."""

import json

import numpy as np
import pytest

from spikeq.checkpoint import (
    Checkpoint,
    CheckpointError,
    config_hash,
    content_hash,
    decode_tensor,
    encode_tensor,
    file_content_hash,
    load_checkpoint,
    save_checkpoint,
)
from spikeq.encoding import (
    LearnedEncoder,
    LogScaleEncoder,
    TernaryEncoder,
    init_encoder,
    normalize_matrices,
)
from spikeq.rng import substream
from spikeq.snn import init_snn
from spikeq.training import AdamMoments


def make_pair(seed=0):
    enc_model = init_encoder(16, 4, 5, substream(seed, "e"), q_range=(-2.0, 2.0))
    normalize_matrices(enc_model)
    encoder = LearnedEncoder(enc_model)
    model = init_snn(4 * 7, 10, 4, substream(seed, "s"))
    return encoder, model


class TestTensorCodec:
    def test_round_trip_at_float32(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=(3, 4, 5))
        decoded = decode_tensor(encode_tensor(w))
        np.testing.assert_array_equal(decoded, w.astype("<f4").astype(float))

    def test_float32_values_are_fixed_points(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=100).astype("<f4").astype(float)
        once = encode_tensor(w)
        twice = encode_tensor(decode_tensor(once))
        assert once == twice

    def test_shape_mismatch_detected(self):
        obj = encode_tensor(np.zeros((2, 3)))
        obj["shape"] = [2, 4]
        with pytest.raises(CheckpointError):
            decode_tensor(obj)


class TestSaveLoad:
    def test_save_load_save_byte_identical(self, tmp_path):
        encoder, model = make_pair()
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_checkpoint(p1, {"seed": 1}, encoder, model, training_step=7)
        loaded = load_checkpoint(p1)
        save_checkpoint(
            p2, loaded.config, loaded.build_encoder(), loaded.build_snn(), training_step=7
        )
        assert p1.read_bytes() == p2.read_bytes()

    def test_numeric_fields_round_trip(self, tmp_path):
        encoder, model = make_pair()
        path = tmp_path / "m.json"
        save_checkpoint(path, {}, encoder, model)
        loaded = load_checkpoint(path)
        enc2, snn2 = loaded.build_encoder(), loaded.build_snn()
        np.testing.assert_array_equal(
            enc2.model.matrices, encoder.model.matrices.astype("<f4").astype(float)
        )
        np.testing.assert_array_equal(snn2.w_ih, model.w_ih.astype("<f4").astype(float))
        assert enc2.model.q_range == encoder.model.q_range
        assert snn2.lif == model.lif
        assert snn2.readout == model.readout
        assert snn2.readout_statistic == model.readout_statistic

    def test_moments_stored_and_typed(self, tmp_path):
        encoder, model = make_pair()
        params = {"w_ih": model.w_ih, "w_ho": model.w_ho}
        moments = AdamMoments.zeros_like(params)
        moments.m["w_ih"] += 0.25
        path = tmp_path / "m.json"
        save_checkpoint(path, {}, encoder, model, moments=moments)
        loaded = load_checkpoint(path)
        np.testing.assert_allclose(decode_tensor(loaded.optimizer["m"]["w_ih"]), 0.25)

    def test_benchmark_encoders_round_trip(self, tmp_path):
        model = init_snn(10 * 7, 10, 4, substream(3, "s"))
        for encoder in (LogScaleEncoder((0.0, 1.0)), TernaryEncoder((0.0, 1.0))):
            path = tmp_path / f"{encoder.kind}.json"
            save_checkpoint(path, {}, encoder, model)
            loaded = load_checkpoint(path).build_encoder()
            assert type(loaded) is type(encoder)
            assert loaded.q_range == encoder.q_range
            assert (loaded.m_neurons, loaded.t_steps) == (encoder.m_neurons, encoder.t_steps)

    def test_training_step_preserved(self, tmp_path):
        encoder, model = make_pair()
        path = tmp_path / "m.json"
        save_checkpoint(path, {}, encoder, model, training_step=123)
        assert load_checkpoint(path).training_step == 123


class TestIntegrity:
    def test_truncated_file_rejected_without_partial_model(self, tmp_path):
        encoder, model = make_pair()
        path = tmp_path / "m.json"
        save_checkpoint(path, {}, encoder, model)
        path.write_text(path.read_text()[: len(path.read_text()) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_hash_mismatch_detected(self, tmp_path):
        encoder, model = make_pair()
        path = tmp_path / "m.json"
        save_checkpoint(path, {"note": "x"}, encoder, model)
        payload = json.loads(path.read_text())
        payload["training_step"] = 999  # tamper without rehashing
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError, match="hash"):
            load_checkpoint(path)

    def test_foreign_format_version_named_in_error(self, tmp_path):
        encoder, model = make_pair()
        path = tmp_path / "m.json"
        save_checkpoint(path, {}, encoder, model)
        payload = json.loads(path.read_text())
        payload["format_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError, match="99"):
            load_checkpoint(path)

    def test_content_hash_excludes_itself(self):
        payload = {"a": 1, "content_hash": "sha256:bogus"}
        assert content_hash(payload) == content_hash({"a": 1})

    def test_file_content_hash_reads_stored_value(self, tmp_path):
        encoder, model = make_pair()
        path = tmp_path / "m.json"
        written = save_checkpoint(path, {}, encoder, model)
        assert file_content_hash(path) == written

    def test_config_hash_stable_under_key_order(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
