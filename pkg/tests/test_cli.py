import json

import numpy as np
import pytest

from spdalign.cli import main
from spdalign.dataio import (ContinuousRecording, read_store, write_recording)


def write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def synth_config(tmp_path, **over):
    payload = {"synth": dict({"n_subjects": 3, "trials_per_class": 8,
                              "n_channels": 6, "n_samples": 48}, **over)}
    return write_config(tmp_path / "synth.json", payload)


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestSynthCommand:
    def test_writes_stores_lock_and_manifest(self, tmp_path):
        cfg = synth_config(tmp_path)
        out = tmp_path / "out"
        assert run_cli("synth", "--config", cfg, "--out", out, "--seed", 7) == 0
        lock = json.loads((out / "run.lock").read_text())
        assert lock["seed"] == 7
        assert lock["command"] == "synth"
        assert len(lock["dataset_sha256"]) == 64
        manifest = json.loads((out / "manifest.json").read_text())
        assert "run.lock" in manifest["artifacts"]
        store = read_store(out / "stores" / "S01")
        assert store.n_channels == 6

    def test_no_orphan_artifacts(self, tmp_path):
        cfg = synth_config(tmp_path)
        out = tmp_path / "out"
        run_cli("synth", "--config", cfg, "--out", out, "--seed", 7)
        manifest = json.loads((out / "manifest.json").read_text())
        on_disk = {str(p.relative_to(out)) for p in out.rglob("*")
                   if p.is_file()} - {"manifest.json"}
        assert on_disk == set(manifest["artifacts"])


@pytest.fixture
def stores(tmp_path):
    cfg = synth_config(tmp_path)
    out = tmp_path / "data"
    assert run_cli("synth", "--config", cfg, "--out", out, "--seed", 3) == 0
    return [str(out / "stores" / f"S{i + 1:02d}") for i in range(3)]


class TestRunLosoCommand:
    def test_end_to_end_and_determinism(self, tmp_path, stores):
        cfg = write_config(tmp_path / "loso.json", {
            "data": {"stores": stores},
            "pipeline": {"fusion": "sequential", "alignment": "itsa"},
        })
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run-loso", "--config", cfg, "--out", out_a,
                       "--seed", 5) == 0
        assert run_cli("run-loso", "--config", cfg, "--out", out_b,
                       "--seed", 5) == 0
        bytes_a = (out_a / "report.json").read_bytes()
        bytes_b = (out_b / "report.json").read_bytes()
        assert bytes_a == bytes_b
        report = json.loads(bytes_a)
        assert report["seed"] == 5
        assert len(report["per_subject_f1"]) == 3
        csv = (out_a / "per_subject.csv").read_text()
        assert csv.splitlines()[0] == "subject_id,fold_a_f1,fold_b_f1,f1"

    def test_inline_synth_data(self, tmp_path):
        cfg = write_config(tmp_path / "loso.json", {
            "data": {"synth": {"n_subjects": 3, "trials_per_class": 8,
                               "n_channels": 6, "n_samples": 48}},
            "pipeline": {"alignment": "ts"},
        })
        assert run_cli("run-loso", "--config", cfg, "--out",
                       tmp_path / "out", "--seed", 1) == 0

    def test_threads_do_not_change_report(self, tmp_path, stores):
        cfg = write_config(tmp_path / "loso.json", {
            "data": {"stores": stores}, "pipeline": {"alignment": "ts"}})
        out_a, out_b = tmp_path / "t1", tmp_path / "t2"
        run_cli("run-loso", "--config", cfg, "--out", out_a, "--seed", 2)
        run_cli("run-loso", "--config", cfg, "--out", out_b, "--seed", 2,
                "--threads", 3)
        assert (out_a / "report.json").read_bytes() == \
            (out_b / "report.json").read_bytes()


class TestAblationCommand:
    def test_four_arm_table(self, tmp_path, stores):
        cfg = write_config(tmp_path / "abl.json", {
            "data": {"stores": stores}, "fusion": "sequential"})
        out = tmp_path / "out"
        assert run_cli("ablation", "--config", cfg, "--out", out,
                       "--seed", 4) == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report["strategies"]) == {"none", "adaptive_m", "ts", "itsa"}
        assert all(rep["seed"] == 4 for rep in report["strategies"].values())
        table = (out / "table.csv").read_text().splitlines()
        assert table[0] == "strategy,mean_f1,sd_f1,ci_lo,ci_hi"
        assert len(table) == 5


class TestCrossMontageCommand:
    def test_feasible_run(self, tmp_path, stores):
        cfg = write_config(tmp_path / "cm.json", {
            "data": {"stores": stores},
            "pipeline": {"alignment": "itsa", "pca_retain": 0.25},
            "test_montage": ["ch00", "ch01", "ch02"],
        })
        out = tmp_path / "out"
        assert run_cli("cross-montage", "--config", cfg, "--out", out,
                       "--seed", 9) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["montage_channels"] == 3
        assert "f1_drop" in summary
        assert (out / "report_full.json").exists()
        assert (out / "report_montage.json").exists()

    def test_infeasible_retain_fails_preflight(self, tmp_path, stores, capsys):
        cfg = write_config(tmp_path / "cm.json", {
            "data": {"stores": stores},
            "pipeline": {"alignment": "itsa", "pca_retain": 0.9},
            "test_montage": ["ch00", "ch01", "ch02"],
        })
        code = run_cli("cross-montage", "--config", cfg, "--out",
                       tmp_path / "out", "--seed", 9)
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()[-1]
        payload = json.loads(err)
        assert payload["error"] == "config"
        assert "pca_retain" in payload["message"]


class TestLearningCurveCommand:
    def test_small_curve(self, tmp_path, stores):
        cfg = write_config(tmp_path / "lc.json", {
            "data": {"stores": stores},
            "pipeline": {"alignment": "ts"},
            "sizes": [1, 2], "folds": 2,
        })
        out = tmp_path / "out"
        assert run_cli("learning-curve", "--config", cfg, "--out", out,
                       "--seed", 6) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["sizes"] == [1, 2]
        csv_lines = (out / "curve_points.csv").read_text().splitlines()
        assert csv_lines[0] == "subject_id,size,fold,f1"
        assert len(csv_lines) > 3


class TestStatsCommand:
    def test_inline_scores(self, tmp_path):
        cfg = write_config(tmp_path / "st.json", {
            "scores_a": [61.0, 58.5, 63.2, 55.1, 66.0, 59.9],
            "scores_b": [54.2, 55.0, 57.8, 50.3, 60.1, 52.2],
        })
        out = tmp_path / "out"
        assert run_cli("stats", "--config", cfg, "--out", out,
                       "--seed", 0) == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report) >= {"lilliefors_p", "t_p", "wilcoxon_p",
                               "chosen_test", "chosen_p"}

    def test_csv_scores(self, tmp_path, stores):
        loso_cfg = write_config(tmp_path / "loso.json", {
            "data": {"stores": stores}, "pipeline": {"alignment": "none"}})
        run_cli("run-loso", "--config", loso_cfg, "--out", tmp_path / "r1",
                "--seed", 2)
        # Too few subjects for the paired test: expect a clean data error.
        cfg = write_config(tmp_path / "st.json", {
            "csv_a": str(tmp_path / "r1" / "per_subject.csv"),
            "csv_b": str(tmp_path / "r1" / "per_subject.csv"),
        })
        code = run_cli("stats", "--config", cfg, "--out", tmp_path / "out",
                       "--seed", 0)
        assert code == 3


class TestSegmentCommand:
    def test_segments_recording(self, tmp_path):
        rng = np.random.default_rng(1)
        events = [(500, "advance_onset")]
        events += [(s, "heel_strike") for s in range(1000, 5501, 500)]
        rec = ContinuousRecording(
            "sub-09", ("c1", "c2"), rng.standard_normal((2, 9000)),
            tuple(events))
        write_recording(rec, tmp_path / "rec")
        cfg = write_config(tmp_path / "seg.json", {
            "recordings": [str(tmp_path / "rec")], "condition": "advance"})
        out = tmp_path / "out"
        assert run_cli("segment", "--config", cfg, "--out", out,
                       "--seed", 0) == 0
        store = read_store(out / "stores" / "sub-09_advance")
        assert store.condition == "advance"
        assert store.n_trials > 0


class TestErrors:
    def test_missing_config_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "bad.json", {"pipeline": {}})
        code = run_cli("run-loso", "--config", cfg, "--out", tmp_path / "o",
                       "--seed", 1)
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "config"
        assert "data" in err["message"]

    def test_invalid_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        code = run_cli("run-loso", "--config", bad, "--out", tmp_path / "o",
                       "--seed", 1)
        assert code == 2

    def test_missing_store_is_data_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", {
            "data": {"stores": [str(tmp_path / "nothing")]}})
        code = run_cli("run-loso", "--config", cfg, "--out", tmp_path / "o",
                       "--seed", 1)
        assert code == 3
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "data"

    def test_bad_field_type(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", {
            "data": {"synth": {"n_subjects": "three", "trials_per_class": 8,
                               "n_channels": 6, "n_samples": 48}}})
        assert run_cli("run-loso", "--config", cfg, "--out", tmp_path / "o",
                       "--seed", 1) == 2

    def test_bad_threads(self, tmp_path):
        cfg = synth_config(tmp_path)
        assert run_cli("synth", "--config", cfg, "--out", tmp_path / "o",
                       "--seed", 1, "--threads", 0) == 2
