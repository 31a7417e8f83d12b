"""Acceptance suite: every criterion checked at its stated tolerance,
one [PASS]/[FAIL] line per criterion (run with -s to see them live).

Criterion 1 is the expensive one: the full default 12-subject corpus,
subject-specific 5-fold cross-validation in reduced-epoch mode (40-epoch
cap, justified by the recorded validation-loss plateaus). Its 45-minute
wall budget is defined for a 4-core desktop; on smaller machines the
budget scales by the missing cores.
"""

import json
import os
import time

import numpy as np
import pytest

from sknakit import analysis, cli, dsp
from sknakit.dataset import (
    LabelRules,
    SegmentLabel,
    class_weights,
    flexion_window,
    label_segments,
    segment_channel,
)
from sknakit.experiment import run_corpus
from sknakit.recording import AnnotationEvent, Phase, Recording
from sknakit.synth import corpus_configs, synth_recording
from sknakit.trainer import TrainConfig

from test_dataset import protocol_recording
from test_dsp_spectrogram import dft_frame_oracle
from test_nn_gradcheck import analytic_grads, draw_safe_instance, loss_of, rel_err

pytestmark = pytest.mark.acceptance

N_SUBJECTS = 12
CORPUS_SEED = 1
EPOCH_CAP = 40
PATIENCE = 10
WALL_BUDGET_S = 45 * 60.0


def report(criterion: int, passed: bool, detail: str):
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    assert passed, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def corpus_recordings():
    return [synth_recording(c) for c in corpus_configs(N_SUBJECTS, CORPUS_SEED)]


@pytest.fixture(scope="module")
def interference(corpus_recordings):
    return analysis.interference_report(corpus_recordings)


@pytest.fixture(scope="module")
def corpus_cv():
    jobs = min(4, os.cpu_count() or 1)
    t0 = time.time()
    summary = run_corpus(
        N_SUBJECTS,
        CORPUS_SEED,
        TrainConfig(epochs=EPOCH_CAP, seed=CORPUS_SEED, early_stop_patience=PATIENCE),
        jobs=jobs,
        with_audit=True,
    )
    summary["wall_s"] = time.time() - t0
    summary["jobs"] = jobs
    return summary


class TestCriterion1Classification:
    def test_headline_substitute_accuracy_and_confusion(self, corpus_cv):
        acc = corpus_cv["mean_of_subject_means"]
        diag = np.diag(corpus_cv["pooled_normalized"])
        wall = corpus_cv["wall_s"]
        cores = os.cpu_count() or 1
        budget = WALL_BUDGET_S * max(1.0, 4.0 / cores)
        best = np.asarray(corpus_cv["best_epochs"])
        stopped = np.asarray(corpus_cv["stopped_epochs"])
        plateaued = np.mean(stopped - best >= PATIENCE)
        detail = (
            f"mean-of-subject-means accuracy {acc:.4f} (>= 0.85), pooled diag "
            f"{np.round(diag, 3).tolist()} (all >= 0.80), wall {wall / 60:.1f} min on "
            f"{cores} cores with {corpus_cv['jobs']} jobs (budget {budget / 60:.0f} min, "
            f"45 min on 4 cores); reduced-epoch mode: cap {EPOCH_CAP}, median best epoch "
            f"{int(np.median(best))}, {plateaued:.0%} of folds hit a {PATIENCE}-epoch plateau"
        )
        passed = (
            acc >= 0.85
            and bool(np.all(diag >= 0.80))
            and wall <= budget
        )
        report(1, passed, detail)

    def test_pooled_confusion_covers_every_segment(self, corpus_cv):
        total = corpus_cv["pooled_confusion"].sum()
        per_subject_n = total / N_SUBJECTS
        assert 700 <= per_subject_n <= 1000  # ~840 classifier segments each


class TestCriterion2Interference:
    def test_band_power_within_10_db_and_smir_rises(self, interference):
        ratio = interference.band_power_ratio_db()
        low = interference.smir.mean_db((500.0, 700.0))
        high = interference.smir.mean_db((700.0, 1000.0))
        detail = (
            f"band power ratio {ratio:+.2f} dB (|.| <= 10), mean SMIR "
            f"{low:.2f} dB in 500-700 < {high:.2f} dB in 700-1000"
        )
        report(2, abs(ratio) <= 10.0 and low < high, detail)


class TestCriterion3EnergyBands:
    def test_uniform_fixture_quantiles(self):
        res = 10.0
        freqs = np.arange(0.0, 5000.0 + res, res)
        density = np.where((freqs >= 500.0) & (freqs <= 1000.0), 1.0, 0.0)
        psd = dsp.Psd(freq_axis_hz=freqs, power_density=density, resolution_hz=res)
        f_lo, f_hi = dsp.energy_band(psd)
        assert abs(f_lo - 512.5) <= res and abs(f_hi - 987.5) <= res

    def test_synthetic_signal_band_interior_and_narrower(self, interference):
        rep = interference
        s_lo, s_hi = rep.signal_band
        n_lo, n_hi = rep.noise_band
        detail = (
            f"signal band ({s_lo:.0f}, {s_hi:.0f}) Hz strictly inside (500, 1000), "
            f"width {s_hi - s_lo:.0f} < noise width {n_hi - n_lo:.0f} "
            f"(noise band ({n_lo:.0f}, {n_hi:.0f}))"
        )
        passed = 500.0 < s_lo < s_hi < 1000.0 and (s_hi - s_lo) < (n_hi - n_lo)
        report(3, passed, detail)


class TestCriterion4DspOracles:
    def test_spectrogram_welch_filter_oracles(self, rng):
        segment = rng.normal(size=300)
        power, _, _ = dsp.stft_power(segment, 10000.0)
        worst = 0.0
        for t in range(power.shape[1]):
            expected = dft_frame_oracle(segment[t * 50 : t * 50 + 100])
            scale = np.maximum(np.abs(expected), 1e-30)
            worst = max(worst, float(np.max(np.abs(power[:, t] - expected) / scale)))

        noise = np.random.default_rng(0).normal(size=int(100 * 10000))
        psd = dsp.welch_psd(noise, 10000.0)
        integral = float(
            np.sum(np.diff(psd.freq_axis_hz) * (psd.power_density[1:] + psd.power_density[:-1]) / 2)
        )

        spec = dsp.design_bandpass(10000.0)
        t_ax = np.arange(20000) / 10000.0
        pass_amp = float(
            np.max(np.abs(dsp.filter_zero_phase(np.sin(2 * np.pi * 750 * t_ax), spec)[5000:15000]))
        )
        stop_amp = float(
            np.max(np.abs(dsp.filter_zero_phase(np.sin(2 * np.pi * 100 * t_ax), spec)[5000:15000]))
        )
        detail = (
            f"spectrogram vs direct DFT worst rel err {worst:.2e} (< 1e-9); white-noise "
            f"PSD integral {integral:.4f} (1 +- 5%); 750 Hz gain {pass_amp:.4f} "
            f"(1 +- 2%), 100 Hz residue {stop_amp:.2e} (< 1e-3)"
        )
        passed = (
            worst < 1e-9
            and abs(integral - 1.0) <= 0.05
            and abs(pass_amp - 1.0) <= 0.02
            and stop_amp < 1e-3
        )
        report(4, passed, detail)


class TestCriterion5Gradients:
    def test_twenty_seed_gradient_suite(self):
        h = 1e-3
        worst = 0.0
        for seed in range(20):
            params, x = draw_safe_instance(seed)
            grads = analytic_grads(params, x)
            for name, tensor in params.tensors.items():
                flat = tensor.ravel()
                for j in range(flat.size):
                    orig = flat[j]
                    flat[j] = orig + h
                    up = loss_of(params, x)
                    flat[j] = orig - h
                    down = loss_of(params, x)
                    flat[j] = orig
                    fd = (up - down) / (2 * h)
                    worst = max(worst, float(rel_err(fd, grads[name].ravel()[j])))
        detail = f"20 seeds, every parameter: worst FD rel err {worst:.2e} (< 1e-3)"
        report(5, worst < 1e-3, detail)


class TestCriterion6LabelingAndWeights:
    def test_overlap_fixtures_and_study_weights(self):
        rules = LabelRules()
        rec20 = protocol_recording(flexions=(123.3,))
        seg20 = next(
            s
            for s in label_segments(segment_channel(rec20, 1), rec20, rules)[0]
            if s.t_start_s == 122.0
        )
        rec40 = protocol_recording(flexions=(123.1,))
        seg40 = next(
            s
            for s in label_segments(segment_channel(rec40, 1), rec40, rules)[0]
            if s.t_start_s == 122.0
        )
        rest = _phase5_flex_segment()
        weights = class_weights((2937, 5393, 1538))
        detail = (
            f"20% overlap -> {seg20.label.name}, 40% -> {seg40.label.name}, phase-5 "
            f"60% -> {rest.label.name}; weights {np.round(weights, 4).tolist()} "
            f"(1.1199, 0.6099, 2.1387 +- 1e-4)"
        )
        passed = (
            seg20.label == SegmentLabel.STROOP
            and seg40.label == SegmentLabel.STROOP_FLEX
            and rest.label == SegmentLabel.REST_FLEX
            and np.allclose(weights, (1.1199, 0.6099, 2.1387), atol=1e-4)
        )
        report(6, passed, detail)


def _phase5_flex_segment():
    fs = 10000.0
    anns = [
        AnnotationEvent.phase_start(0.0, Phase.BASELINE1),
        AnnotationEvent.phase_start(10.0, Phase.POST_TASK_FLEX),
        AnnotationEvent.flexion(15.1, 1),  # window (14.6, 16.1): 60% of [15,16)
    ]
    rec = Recording(
        subject_id="p5",
        sample_rate_hz=fs,
        channel_names=("still", "moving"),
        samples=np.zeros((2, int(20.0 * fs)), dtype=np.float32),
        annotations=tuple(anns),
        duration_s=20.0,
    )
    labeled, _ = label_segments(segment_channel(rec, 1), rec, LabelRules())
    return next(s for s in labeled if s.t_start_s == 15.0)


class TestCriterion7Determinism:
    def test_full_pipeline_rerun_is_bitwise_identical(self, tmp_path):
        def run(root):
            rec_dir, ds_path = root / "rec", root / "d.sknads"
            model_dir, eval_dir = root / "models", root / "eval"
            cfg_file = root / "cfg.json"
            root.mkdir(parents=True, exist_ok=True)
            cfg_file.write_text(
                json.dumps(
                    {
                        "phase_durations_s": [10.0, 25.0, 10.0, 25.0, 12.0],
                        "flexions_per_stroop_phase": 3,
                        "flexions_post_task": 3,
                    }
                )
            )
            for argv in (
                ["synth", "--subjects", "1", "--seed", "9", "--out", str(rec_dir), "--config", str(cfg_file)],
                ["preprocess", "--in", str(rec_dir), "--out", str(ds_path), "--folds", "2", "--seed", "9"],
                ["train", "--data", str(ds_path), "--subject", "subj00", "--folds", "2",
                 "--epochs", "2", "--seed", "9", "--out", str(model_dir)],
                ["eval", "--models", str(model_dir), "--data", str(ds_path), "--out", str(eval_dir)],
            ):
                assert cli.main(argv) == 0
            return {
                "recording": (rec_dir / "subj00.skna").read_bytes(),
                "dataset": ds_path.read_bytes(),
                "checkpoints": b"".join(
                    p.read_bytes() for p in sorted(model_dir.glob("*.sknamodel"))
                ),
                "metrics": (eval_dir / "metrics.json").read_bytes(),
            }

        first = run(tmp_path / "run1")
        second = run(tmp_path / "run2")
        mismatched = [k for k in first if first[k] != second[k]]
        detail = (
            "identical bytes for recordings, dataset, checkpoints, and metrics JSON"
            if not mismatched
            else f"byte mismatch in: {mismatched}"
        )
        report(7, not mismatched, detail)


class TestCriterion8LeakageGuard:
    def test_no_test_index_in_training_or_normalization(self, corpus_cv):
        violations = 0
        fold_count = 0
        for run in corpus_cv["runs"]:
            for entry in run.audit:
                fold_count += 1
                violations += len(entry["grad_indices"] & entry["test_indices"])
                violations += len(entry["norm_fit_indices"] & entry["test_indices"])
                violations += len(entry["val_indices"] & entry["test_indices"])
        detail = (
            f"{fold_count} instrumented folds across {N_SUBJECTS} subjects: "
            f"{violations} violations (gradient/normalization/validation vs test)"
        )
        report(8, fold_count == N_SUBJECTS * 5 and violations == 0, detail)
