"""Command-line interface: subcommands, overrides, errors, artifacts."""

import json
import os

import numpy as np
import pytest

from spikeq.checkpoint import load_checkpoint
from spikeq.cli import main

SMOKE_YAML = """\
# smoke-scale experiment
seed: 21
link:
  fiber_length_km: 1.0
  rrc_span_symbols: 16
  d_tap: 11
encoder:
  n_classes: 32
  m_neurons: 4
  t_steps: 6
snn:
  n_hidden: 10
train:
  batch_size: 64
  batches_per_epoch: 10
  epochs: 1
  validation_symbols: 1500
sweep:
  sigma2_dB_list: [-14.0, -17.0]
  min_bit_errors: 10
  max_symbols: 800
  chunk_symbols: 400
  alpha_list: [1.0e-2, 1.0e-9]
  graded_bits_list: [4, null]
"""


@pytest.fixture()
def smoke(tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(SMOKE_YAML)
    return cfg, tmp_path


def run_cli(*argv):
    return main(list(argv))


class TestTrainCommand:
    def test_smoke_train_writes_artifacts(self, smoke, capsys):
        cfg, tmp = smoke
        out = tmp / "run1"
        code = run_cli("train", "--config", str(cfg), "--output-dir", str(out))
        assert code == 0
        assert (out / "model.json").exists()
        assert (out / "checkpoint_epoch000.json").exists()
        history = (out / "history.csv").read_text().strip().splitlines()
        assert len(history) == 11  # header + 10 steps
        assert "val_ber" in capsys.readouterr().out

    def test_determinism_identical_checkpoint_hashes(self, smoke):
        cfg, tmp = smoke
        hashes = []
        for name in ("a", "b"):
            out = tmp / name
            assert run_cli("train", "--config", str(cfg), "--output-dir", str(out)) == 0
            hashes.append(json.loads((out / "model.json").read_text())["content_hash"])
        assert hashes[0] == hashes[1]

    def test_alpha_validation_names_field(self, smoke, capsys):
        cfg, tmp = smoke
        code = run_cli(
            "train", "--config", str(cfg), "--output-dir", str(tmp / "x"),
            "--train.alpha", "2.0",
        )
        assert code == 3
        assert "config-error" in capsys.readouterr().err

    def test_lock_file_excludes_second_process(self, smoke, capsys):
        cfg, tmp = smoke
        out = tmp / "locked"
        out.mkdir()
        (out / ".lock").write_text("1")
        code = run_cli("train", "--config", str(cfg), "--output-dir", str(out))
        assert code == 6
        assert "io-error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        code = run_cli("train", "--config", str(tmp_path / "nope.yaml"))
        assert code == 6
        assert "io-error" in capsys.readouterr().err


class TestEvalCommand:
    @pytest.fixture()
    def trained(self, smoke):
        cfg, tmp = smoke
        out = tmp / "trained"
        assert run_cli("train", "--config", str(cfg), "--output-dir", str(out)) == 0
        return cfg, tmp, out / "model.json"

    def test_eval_reproducible_csvs(self, trained):
        cfg, tmp, model = trained
        outs = []
        for name in ("e1", "e2"):
            out = tmp / name
            code = run_cli(
                "eval", "--config", str(cfg), "--output-dir", str(out),
                "--checkpoint", str(model),
            )
            assert code == 0
            outs.append((out / "curves.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_eval_leaves_checkpoint_untouched(self, trained):
        cfg, tmp, model = trained
        before = model.read_bytes()
        assert run_cli(
            "eval", "--config", str(cfg), "--output-dir", str(tmp / "e3"),
            "--checkpoint", str(model),
        ) == 0
        assert model.read_bytes() == before

    def test_spike_rate_table(self, trained, capsys):
        cfg, tmp, model = trained
        out = tmp / "tbl"
        code = run_cli(
            "eval", "--config", str(cfg), "--output-dir", str(out),
            "--checkpoint", str(model), "--sigma2", "-19", "--table",
            "--table-symbols", "400",
        )
        assert code == 0
        table = (out / "spike_rate_table.csv").read_text().splitlines()
        assert table[0].startswith("label,")
        assert len(table) >= 3  # learned + quantized variants
        assert "spike_rate" in capsys.readouterr().out

    def test_corrupted_checkpoint_refused(self, trained, capsys):
        cfg, tmp, model = trained
        payload = json.loads(model.read_text())
        payload["training_step"] = 10**6
        bad = tmp / "bad.json"
        bad.write_text(json.dumps(payload))
        code = run_cli(
            "eval", "--config", str(cfg), "--output-dir", str(tmp / "e4"),
            "--checkpoint", str(bad),
        )
        assert code == 4
        assert "checkpoint-error" in capsys.readouterr().err

    def test_missing_checkpoint_reported(self, smoke, capsys):
        cfg, tmp = smoke
        code = run_cli(
            "eval", "--config", str(cfg), "--output-dir", str(tmp / "e5"),
            "--checkpoint", str(tmp / "ghost.json"),
        )
        assert code == 6
        assert "not found" in capsys.readouterr().err


class TestSweepCommands:
    def test_sweep_alpha_emits_models_and_combined_csv(self, smoke):
        cfg, tmp = smoke
        out = tmp / "alpha"
        code = run_cli(
            "sweep-alpha", "--config", str(cfg), "--output-dir", str(out),
            "--train.batches_per_epoch", "4", "--train.validation_symbols", "800",
            "--sweep.encodings", '["learned"]',
        )
        assert code == 0
        assert (out / "model_alpha1e-02.json").exists()
        assert (out / "model_alpha1e-09.json").exists()
        rows = (out / "alpha_sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2 * 2  # two alphas x two sigma points
        sidecar = json.loads((out / "alpha_sweep.json").read_text())
        assert "shared_data_seeds" in sidecar

    def test_sweep_alpha_requires_learned(self, smoke, capsys):
        cfg, tmp = smoke
        code = run_cli(
            "sweep-alpha", "--config", str(cfg), "--output-dir", str(tmp / "a2"),
            "--encoder.type", "ternary",
        )
        assert code == 3
        assert "config-error" in capsys.readouterr().err

    def test_sweep_quant(self, smoke):
        cfg, tmp = smoke
        out = tmp / "trained_q"
        assert run_cli("train", "--config", str(cfg), "--output-dir", str(out)) == 0
        qout = tmp / "quant"
        code = run_cli(
            "sweep-quant", "--config", str(cfg), "--output-dir", str(qout),
            "--checkpoint", str(out / "model.json"),
        )
        assert code == 0
        rows = (qout / "quant_sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2 * 2  # bits {4, float} x two sigma points


class TestBaselineAndHistogram:
    def test_baseline_with_csv_dump(self, smoke, capsys):
        cfg, tmp = smoke
        out = tmp / "base"
        code = run_cli(
            "baseline", "--config", str(cfg), "--output-dir", str(out),
            "--sigma2", "-17", "--symbols", "3000", "--dump-csv",
        )
        assert code == 0
        assert "slicer baseline" in capsys.readouterr().out
        dump = (out / "symbols.csv").read_text().splitlines()
        assert dump[0] == "k,b0,b1,a,y"
        sidecar = json.loads((out / "baseline.json").read_text())
        assert 0.0 <= sidecar["slicer_ber"] <= 1.0

    def test_histogram(self, smoke):
        cfg, tmp = smoke
        out = tmp / "trained_h"
        assert run_cli("train", "--config", str(cfg), "--output-dir", str(out)) == 0
        hout = tmp / "hist"
        code = run_cli(
            "histogram", "--config", str(cfg), "--output-dir", str(hout),
            "--checkpoint", str(out / "model.json"), "--bins", "21",
        )
        assert code == 0
        lines = (hout / "weight_histogram.csv").read_text().strip().splitlines()
        assert len(lines) == 22


class TestArgumentHandling:
    def test_unknown_flag_is_usage_error(self, smoke, capsys):
        cfg, tmp = smoke
        code = run_cli("train", "--config", str(cfg), "--frobnicate")
        assert code == 2
        assert "usage-error" in capsys.readouterr().err

    def test_equals_style_override(self, smoke):
        cfg, tmp = smoke
        out = tmp / "eq"
        code = run_cli(
            "baseline", "--config", str(cfg), "--output-dir", str(out),
            "--link.fiber_length_km=0", "--sigma2", "-17", "--symbols", "2000",
        )
        assert code == 0

    def test_config_free_invocation(self, tmp_path):
        out = tmp_path / "nofile"
        code = run_cli(
            "baseline", "--output-dir", str(out), "--symbols", "2000",
            "--link.fiber_length_km", "1.0", "--link.rrc_span_symbols", "16",
            "--link.d_tap", "11", "--sigma2", "-14",
        )
        assert code == 0
