"""Command line tests, each subcommand driven through main(argv).

The mix subcommand is checked against the library mix as oracle; sweep
and report outputs are parsed back and cross-checked rather than eyeballed.
"""

from __future__ import annotations

import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from soupkit.cli import main
from soupkit.datasets import load_dataset
from soupkit.mixer import MixtureWeights, mix
from soupkit.tensor_store import CheckpointMeta, load_checkpoint, save_checkpoint
from soupkit.toy_models import EncoderConfig, init_stock


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """Shared data and checkpoints for the subcommand tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main([
        "gen-data", "--out", str(root / "train.npz"), "--classes", "3",
        "--samples", "90", "--side", "8", "--seed", "1",
    ]) == 0
    assert main([
        "gen-data", "--out", str(root / "test.npz"), "--classes", "3",
        "--samples", "45", "--side", "8", "--split", "test", "--seed", "2",
    ]) == 0
    save_checkpoint(
        root / "stock.ckpt",
        init_stock(EncoderConfig(64, (16,), 8), 7),
        CheckpointMeta(role="stock"),
    )
    assert main([
        "train", "--stock", str(root / "stock.ckpt"), "--data", str(root / "train.npz"),
        "--out", str(root / "ft0.ckpt"), "--steps", "30", "--seed", "3",
    ]) == 0
    assert main([
        "inter-train", "--stock", str(root / "stock.ckpt"), "--data", str(root / "train.npz"),
        "--out", str(root / "it0.ckpt"), "--algorithm", "masked_recon",
        "--steps", "10", "--seed", "4",
    ]) == 0
    assert main([
        "train", "--stock", str(root / "it0.ckpt"), "--data", str(root / "train.npz"),
        "--out", str(root / "ft1.ckpt"), "--steps", "30", "--seed", "5",
    ]) == 0
    assert main([
        "train", "--stock", str(root / "stock.ckpt"), "--data", str(root / "train.npz"),
        "--out", str(root / "ft2.ckpt"), "--steps", "30", "--seed", "6",
    ]) == 0
    return root


class TestGenData:
    def test_dataset_round_trips(self, work):
        ds = load_dataset(work / "train.npz")
        assert ds.n == 90
        assert ds.input_dim == 64
        assert ds.num_classes == 3
        assert load_dataset(work / "test.npz").split == "test"

    def test_env_seed_matches_explicit_flag(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOUPKIT_SEED", "42")
        assert main(["gen-data", "--out", str(tmp_path / "env.npz"),
                     "--classes", "2", "--samples", "16", "--side", "8"]) == 0
        monkeypatch.delenv("SOUPKIT_SEED")
        assert main(["gen-data", "--out", str(tmp_path / "flag.npz"),
                     "--classes", "2", "--samples", "16", "--side", "8",
                     "--seed", "42"]) == 0
        a = load_dataset(tmp_path / "env.npz")
        b = load_dataset(tmp_path / "flag.npz")
        assert np.array_equal(a.inputs, b.inputs)

    def test_malformed_env_seed_is_an_error(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("SOUPKIT_SEED", "soup")
        assert main(["gen-data", "--out", str(tmp_path / "x.npz"),
                     "--classes", "2", "--samples", "16", "--side", "8"]) == 2
        assert "error:" in capsys.readouterr().err


class TestCorrupt:
    def test_list_prints_every_kind(self, capsys):
        assert main(["corrupt", "--list"]) == 0
        out = capsys.readouterr().out
        for kind in ("gaussian_noise", "box_blur", "contrast", "pixelate"):
            assert kind in out
        assert "0.05, 0.1, 0.2, 0.35, 0.5" in out

    def test_corrupts_a_dataset(self, work, tmp_path):
        out = tmp_path / "noisy.npz"
        assert main(["corrupt", "--data", str(work / "test.npz"), "--kind",
                     "gaussian_noise", "--severity", "2", "--out", str(out)]) == 0
        ds = load_dataset(out)
        assert ds.corruption == "gaussian_noise@2"
        assert not np.array_equal(ds.inputs, load_dataset(work / "test.npz").inputs)

    def test_without_args_or_list_is_an_error(self, capsys):
        assert main(["corrupt"]) == 2
        assert "error:" in capsys.readouterr().err


class TestTraining:
    def test_roles_recorded_in_checkpoints(self, work):
        _, meta = load_checkpoint(work / "ft0.ckpt")
        assert meta.role == "fine_tuned"
        _, meta = load_checkpoint(work / "it0.ckpt")
        assert meta.role == "inter_trained"
        assert meta.hyperparams["algorithm"] == "masked_recon"


class TestMix:
    def test_matches_the_library_mix(self, work, tmp_path):
        out = tmp_path / "soup.ckpt"
        assert main(["mix", "--ckpt", str(work / "ft0.ckpt"), "--ckpt",
                     str(work / "ft1.ckpt"), "--weights", "0.25,0.75",
                     "--out", str(out)]) == 0
        souped, meta = load_checkpoint(out)
        a, _ = load_checkpoint(work / "ft0.ckpt")
        b, _ = load_checkpoint(work / "ft1.ckpt")
        expected = mix([a, b], MixtureWeights(np.array([0.25, 0.75])))
        for name in expected.names:
            assert np.array_equal(souped[name], expected[name])
        assert meta.role == "soup"

    def test_bad_weights_are_an_error(self, work, tmp_path, capsys):
        assert main(["mix", "--ckpt", str(work / "ft0.ckpt"), "--ckpt",
                     str(work / "ft1.ckpt"), "--weights", "0.9,0.9",
                     "--out", str(tmp_path / "x.ckpt")]) == 2
        assert "error:" in capsys.readouterr().err


class TestEval:
    def test_prints_and_writes_the_same_value(self, work, tmp_path, capsys):
        out = tmp_path / "eval.json"
        assert main(["eval", "--ckpt", str(work / "ft0.ckpt"),
                     "--refs", str(work / "train.npz"),
                     "--queries", str(work / "test.npz"), "--k", "5",
                     "--out", str(out)]) == 0
        printed = capsys.readouterr().out.strip().split()
        results = json.loads(out.read_text(encoding="utf-8"))
        assert results[0]["split"] == "test" == printed[0]
        assert results[0]["value"] == float(printed[2])

    def test_knn_without_refs_is_an_error(self, work, capsys):
        assert main(["eval", "--ckpt", str(work / "ft0.ckpt"),
                     "--queries", str(work / "test.npz")]) == 2
        assert "error:" in capsys.readouterr().err


class TestSweepPair:
    def test_writes_metrics_and_reports(self, work, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sweep-pair", "--a", str(work / "ft0.ckpt"), "--b",
                     str(work / "ft1.ckpt"), "--num-points", "5",
                     "--refs", str(work / "train.npz"),
                     "--queries", str(work / "test.npz"), "--k", "5",
                     "--out-dir", str(out)]) == 0
        with (out / "metrics.csv").open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["mixture_id"] for r in rows] == [f"lambda_{i}" for i in range(5)]
        assert json.loads(rows[2]["weights"]) == [0.5, 0.5]
        with (out / "lmc_test.csv").open(newline="", encoding="utf-8") as fh:
            report = list(csv.DictReader(fh))
        assert len(report) == 5
        assert report[0]["satisfied"] == "true" and report[-1]["satisfied"] == "true"
        summary = json.loads((out / "lmc_test.json").read_text(encoding="utf-8"))
        assert summary["num_points"] == 5


class TestGreedy:
    def test_report_traces_a_winning_pool(self, work, tmp_path):
        out = tmp_path / "greedy.ckpt"
        report = tmp_path / "greedy.json"
        assert main(["greedy", "--ckpt", str(work / "ft0.ckpt"), "--ckpt",
                     str(work / "ft1.ckpt"), "--refs", str(work / "train.npz"),
                     "--select", str(work / "test.npz"), "--k", "5",
                     "--out", str(out), "--report", str(report)]) == 0
        trace = json.loads(report.read_text(encoding="utf-8"))
        assert trace["final_score"] >= max(trace["individual_scores"])
        assert sorted(trace["pool"]) == trace["pool"]


class TestSeason:
    def test_report_has_one_score_per_trial(self, work, tmp_path):
        out = tmp_path / "season.ckpt"
        report = tmp_path / "season.json"
        assert main(["season", "--ckpt", str(work / "ft0.ckpt"), "--ckpt",
                     str(work / "ft1.ckpt"), "--data", str(work / "train.npz"),
                     "--trials", "8", "--k", "5", "--seed", "0",
                     "--out", str(out), "--report", str(report)]) == 0
        payload = json.loads(report.read_text(encoding="utf-8"))
        assert len(payload["scores"]) == 8
        assert sum(payload["weights"]) == pytest.approx(1.0)
        assert payload["best_score"] == max(payload["scores"])


class TestSelfSeason:
    def test_report_has_one_entropy_per_epoch(self, work, tmp_path):
        out = tmp_path / "ss.ckpt"
        report = tmp_path / "ss.json"
        assert main(["self-season", "--ckpt", str(work / "ft0.ckpt"), "--ckpt",
                     str(work / "ft1.ckpt"), "--data", str(work / "train.npz"),
                     "--epochs", "3", "--batch-size", "64", "--k", "5",
                     "--out", str(out), "--report", str(report)]) == 0
        payload = json.loads(report.read_text(encoding="utf-8"))
        assert len(payload["entropy_by_epoch"]) == 3
        assert sum(payload["weights"]) == pytest.approx(1.0)


class TestSweepSimplexAndPlot:
    def test_simplex_metrics_feed_the_plot(self, work, tmp_path):
        out = tmp_path / "simplex"
        assert main(["sweep-simplex", "--ckpt", str(work / "ft0.ckpt"),
                     "--ckpt", str(work / "ft1.ckpt"), "--ckpt", str(work / "ft2.ckpt"),
                     "--resolution", "3", "--refs", str(work / "train.npz"),
                     "--queries", str(work / "test.npz"), "--k", "5",
                     "--out-dir", str(out)]) == 0
        with (out / "metrics.csv").open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3 + 9
        svg_path = tmp_path / "tern.svg"
        assert main(["plot", "--metrics", str(out / "metrics.csv"), "--split",
                     "test", "--out", str(svg_path), "--labels", "a,b,c"]) == 0
        root = ET.fromstring(svg_path.read_text(encoding="utf-8"))
        ns = "{http://www.w3.org/2000/svg}"
        assert len(root.findall(f"{ns}path")) == 9
        assert len(root.findall(f"{ns}circle")) == 3

    def test_wrong_label_count_is_an_error(self, work, tmp_path, capsys):
        out = tmp_path / "simplex2"
        assert main(["sweep-simplex", "--ckpt", str(work / "ft0.ckpt"),
                     "--ckpt", str(work / "ft1.ckpt"), "--ckpt", str(work / "ft2.ckpt"),
                     "--resolution", "1", "--refs", str(work / "train.npz"),
                     "--queries", str(work / "test.npz"), "--k", "5",
                     "--out-dir", str(out)]) == 0
        assert main(["plot", "--metrics", str(out / "metrics.csv"), "--split", "test",
                     "--out", str(tmp_path / "x.svg"), "--labels", "a,b"]) == 2
        assert "error:" in capsys.readouterr().err


class TestRun:
    def config(self, out_dir: Path) -> dict:
        train_ref = {"gen_patterns": {"num_classes": 3, "num_samples": 96, "side": 8}}
        return {
            "stock": {"init": {"input_dim": 64, "hidden_dims": [16], "embed_dim": 8}},
            "inter_trainings": [],
            "fine_tunings": [{"train": {"steps": 10}, "data": train_ref}],
            "mix_method": "uniform",
            "eval": {
                "scorer": "knn",
                "knn": {"k": 5},
                "train_ref": train_ref,
                "queries": [
                    {
                        "gen_patterns": {
                            "num_classes": 3,
                            "num_samples": 48,
                            "side": 8,
                            "split": "test",
                        },
                        "name": "test",
                    }
                ],
            },
            "out_dir": str(out_dir),
            "options": {},
        }

    def write_config(self, tmp_path: Path, raw: dict) -> Path:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        return path

    def test_runs_a_config_file(self, tmp_path, capsys):
        raw = self.config(tmp_path / "out")
        raw["seed"] = 0
        assert main(["run", "--config", str(self.write_config(tmp_path, raw))]) == 0
        assert (tmp_path / "out" / "metrics.csv").exists()
        assert (tmp_path / "out" / "manifest.json").exists()
        assert "2 rows" in capsys.readouterr().out

    def test_set_overrides_reach_the_experiment(self, tmp_path):
        raw = self.config(tmp_path / "out")
        raw["seed"] = 0
        config = self.write_config(tmp_path, raw)
        assert main(["run", "--config", str(config),
                     "--out-dir", str(tmp_path / "out2"),
                     "--set", "fine_tunings.0.train.steps=4"]) == 0
        written = json.loads((tmp_path / "out2" / "config.json").read_text(encoding="utf-8"))
        assert written["fine_tunings"][0]["train"]["steps"] == 4

    def test_env_seed_fills_a_missing_config_seed(self, tmp_path, monkeypatch):
        raw = self.config(tmp_path / "env_out")
        config = self.write_config(tmp_path, raw)
        monkeypatch.setenv("SOUPKIT_SEED", "9")
        assert main(["run", "--config", str(config)]) == 0
        written = json.loads((tmp_path / "env_out" / "config.json").read_text(encoding="utf-8"))
        assert written["seed"] == 9


class TestParser:
    def test_unknown_command_exits_nonzero(self):
        with pytest.raises(SystemExit):
            main(["simmer"])

    def test_no_command_exits_nonzero(self):
        with pytest.raises(SystemExit):
            main([])
