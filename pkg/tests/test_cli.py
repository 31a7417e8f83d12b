import csv
import json

import numpy as np
import pytest

from sknakit import cli
from sknakit.dataset import SegmentLabel, load_dataset, save_dataset
from sknakit.nn import save_checkpoint
from sknakit.recording import load_recording

from test_trainer import TOY_ARCH, constant_value_dataset, value_decoder_params


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def small_corpus_dir(tmp_path_factory):
    """Two short-protocol subjects written through the CLI."""
    out = tmp_path_factory.mktemp("corpus")
    cfg_file = out / "config.json"
    cfg_file.write_text(
        json.dumps(
            {
                "phase_durations_s": [10.0, 25.0, 10.0, 25.0, 12.0],
                "flexions_per_stroop_phase": 3,
                "flexions_post_task": 3,
            }
        )
    )
    code = run_cli(
        "synth", "--subjects", "2", "--seed", "5", "--out", str(out), "--config", str(cfg_file)
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def small_dataset_file(small_corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "corpus.sknads"
    code = run_cli(
        "preprocess", "--in", str(small_corpus_dir), "--out", str(out),
        "--folds", "2", "--seed", "5",
    )
    assert code == 0
    return out


class TestSynthCommand:
    def test_deterministic_rerun(self, small_corpus_dir, tmp_path):
        cfg_file = small_corpus_dir / "config.json"
        code = run_cli(
            "synth", "--subjects", "2", "--seed", "5",
            "--out", str(tmp_path), "--config", str(cfg_file),
        )
        assert code == 0
        for name in ("subj00.skna", "subj01.skna"):
            assert (tmp_path / name).read_bytes() == (small_corpus_dir / name).read_bytes()

    def test_manifest_written_with_seeds(self, small_corpus_dir):
        manifest = json.loads((small_corpus_dir / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seeds"]["seed"] == 5
        assert len(manifest["seeds"]["subject_seeds"]) == 2
        assert manifest["tool_version"]

    def test_recordings_parse(self, small_corpus_dir):
        rec = load_recording(small_corpus_dir / "subj00.skna")
        assert rec.subject_id == "subj00"
        assert rec.n_channels == 2


class TestPreprocessCommand:
    def test_dataset_and_timeline_written(self, small_dataset_file):
        ds = load_dataset(small_dataset_file)
        assert len(ds.subjects) == 2
        assert ds.spectrograms.shape[1:] == (51, 199)
        timeline = small_dataset_file.with_suffix(".labels.csv")
        with open(timeline) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["label"] for r in rows} >= {"BASELINE", "STROOP", "REST_FLEX"}

    def test_default_subject_baseline_count_in_study_range(self, tmp_path):
        rec_dir = tmp_path / "rec"
        code = run_cli("synth", "--subjects", "1", "--seed", "1", "--out", str(rec_dir))
        assert code == 0
        ds_path = tmp_path / "one.sknads"
        code = run_cli("preprocess", "--in", str(rec_dir), "--out", str(ds_path), "--seed", "1")
        assert code == 0
        counts = load_dataset(ds_path).class_counts()
        assert 220 <= counts[SegmentLabel.BASELINE] <= 260


class TestAnalysisCommands:
    def test_psd_outputs(self, small_corpus_dir, tmp_path):
        code = run_cli("psd", "--in", str(small_corpus_dir), "--out", str(tmp_path))
        assert code == 0
        with open(tmp_path / "psd_signal.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and "freq_hz" in rows[0]
        report = json.loads((tmp_path / "band_report.json").read_text())
        assert 500.0 <= report["signal_band_hz"][0] < report["signal_band_hz"][1] <= 1000.0
        assert "band_power_ratio_db" in report

    def test_smir_output(self, small_corpus_dir, tmp_path):
        out = tmp_path / "smir.csv"
        code = run_cli("smir", "--in", str(small_corpus_dir), "--out", str(out))
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        freqs = [float(r["freq_hz"]) for r in rows]
        assert min(freqs) >= 500.0 and max(freqs) <= 1000.0


@pytest.fixture(scope="module")
def trained_dir(small_dataset_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    code = run_cli(
        "train", "--data", str(small_dataset_file), "--subject", "subj00",
        "--folds", "2", "--epochs", "2", "--seed", "3", "--out", str(out),
    )
    assert code == 0
    return out


class TestTrainEvalClassify:

    def test_checkpoints_and_history_written(self, trained_dir):
        models = sorted(trained_dir.glob("*.sknamodel"))
        assert len(models) == 2
        history = json.loads((trained_dir / "subj00_history.json").read_text())
        assert len(history["folds"]) == 2
        assert all(len(f["history"]) == 2 for f in history["folds"])

    def test_eval_writes_metrics_and_confusion(self, trained_dir, small_dataset_file, tmp_path):
        code = run_cli(
            "eval", "--models", str(trained_dir), "--data", str(small_dataset_file),
            "--out", str(tmp_path),
        )
        assert code == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert "subj00" in metrics["per_subject_accuracy"]
        assert 0.0 <= metrics["pooled_accuracy"] <= 1.0
        rows = np.asarray(metrics["pooled_confusion_normalized"], dtype=float)
        present = rows.sum(axis=1) > 0
        assert np.allclose(rows[present].sum(axis=1), 1.0, atol=1e-9)

    def test_classify_emits_one_row_per_second(self, trained_dir, small_corpus_dir, tmp_path):
        model = sorted(trained_dir.glob("*.sknamodel"))[0]
        out = tmp_path / "stream.csv"
        code = run_cli(
            "classify", "--model", str(model), "--recording",
            str(small_corpus_dir / "subj00.skna"), "--channel", "1", "--out", str(out),
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 82  # floor(total duration)
        assert all(r["label"] in {"BASELINE", "STROOP", "STROOP_FLEX"} for r in rows)
        probs = [float(rows[0][k]) for k in rows[0] if k.startswith("p_")]
        assert sum(probs) == pytest.approx(1.0, abs=1e-5)

    def test_eval_on_perfect_oracle_stub(self, tmp_path):
        ds = constant_value_dataset()
        ds_path = tmp_path / "toy.sknads"
        save_dataset(ds, ds_path)
        model_dir = tmp_path / "stub"
        model_dir.mkdir()
        save_checkpoint(
            value_decoder_params(),
            model_dir / "toy.sknamodel",
            extra={"subject_id": "toy", "fold": None, "norm_stats": {"toy": (0.0, 1.0)}},
        )
        out = tmp_path / "eval"
        code = run_cli("eval", "--models", str(model_dir), "--data", str(ds_path), "--out", str(out))
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["pooled_accuracy"] == 1.0
        assert np.array_equal(np.asarray(metrics["pooled_confusion_normalized"]), np.eye(3))


class TestErrorChannel:
    def test_missing_input_exits_2(self, tmp_path, capsys):
        code = run_cli("preprocess", "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "x.sknads"))
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["code"] == 2 and "not found" in err["message"]

    def test_bad_flag_value_exits_3(self, capsys):
        code = run_cli("synth", "--subjects", "three", "--out", "/tmp/x")
        assert code == 3
        err = json.loads(capsys.readouterr().err.strip())
        assert err["code"] == 3

    def test_unknown_subject_exits_3(self, small_dataset_file, tmp_path, capsys):
        code = run_cli(
            "train", "--data", str(small_dataset_file), "--subject", "ghost",
            "--out", str(tmp_path),
        )
        assert code == 3
        err = json.loads(capsys.readouterr().err.strip())
        assert "ghost" in err["message"]

    def test_version_mismatch_exits_4(self, small_dataset_file, tmp_path, capsys):
        stale = tmp_path / "stale.sknads"
        data = bytearray(small_dataset_file.read_bytes())
        data[8] = 99
        stale.write_bytes(data)
        code = run_cli("train", "--data", str(stale), "--subject", "subj00", "--out", str(tmp_path))
        assert code == 4
        err = json.loads(capsys.readouterr().err.strip())
        assert err["code"] == 4

    def test_bad_channel_exits_3(self, small_corpus_dir, tmp_path, capsys):
        model = tmp_path / "m.sknamodel"
        save_checkpoint(value_decoder_params(TOY_ARCH), model, extra={})
        code = run_cli(
            "classify", "--model", str(model), "--recording",
            str(small_corpus_dir / "subj00.skna"), "--channel", "7",
            "--out", str(tmp_path / "s.csv"),
        )
        assert code == 3


class TestPipelineComposition:
    def test_file_pipeline_equals_in_process(self, small_corpus_dir, small_dataset_file):
        """synth -> preprocess via files matches the in-process build."""
        from sknakit.dataset import build_dataset
        from sknakit.synth import SynthConfig, corpus_configs, synth_recording

        base = SynthConfig(
            phase_durations_s=(10.0, 25.0, 10.0, 25.0, 12.0),
            flexions_per_stroop_phase=3,
            flexions_post_task=3,
        )
        recs = [synth_recording(c) for c in corpus_configs(2, seed=5, base=base)]
        ds_mem = build_dataset(recs, k_folds=2, seed=5)
        ds_file = load_dataset(small_dataset_file)
        assert np.array_equal(
            ds_mem.spectrograms.view(np.uint32), ds_file.spectrograms.view(np.uint32)
        )
        assert np.array_equal(ds_mem.fold_ids, ds_file.fold_ids)
        assert np.array_equal(ds_mem.labels, ds_file.labels)
