"""Test rctibench.harness and the command line."""
from contextlib import redirect_stderr, redirect_stdout
import io
import json
import math
import os
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest import TestCase, skipUnless

from filelock import FileLock
import numpy as np
import pandas as pd
import pytest

from rctibench.__main__ import EXIT_FAILURE, EXIT_USAGE, main
from rctibench.common import StageError
from rctibench.config import parse_config
from rctibench.harness import RctiBench
from rctibench.help import config_keys_help
from rctibench.tables import read_stats, span_kinds

from .synthetic import write_idx_files

TABLE2 = Path(__file__).parent / "data" / "table2.csv"
MNIST_DIR = os.environ.get("RCTIBENCH_MNIST_DIR")

TINY_RUN = [
    "data.train_size=120",
    "data.test_size=40",
    "train.epochs=1",
    "train.batch_size=20",
    "attack.kind=FG",
    "attack.epsilon_grid=0,0.1",
    "attack.steps=3",
    "hardware.ram_gb=8",
    "hardware.utilization=constant",
    "hardware.sample_interval_s=0.05",
    "seed=3",
]


class HarnessCase(TestCase):
    def setUp(self):
        self.tmp = TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.data = write_idx_files(self.root / "data")

    def tearDown(self):
        self.tmp.cleanup()

    def bench(self, name: str = "run", *overrides: str) -> RctiBench:
        settings = [f"{key}={value}" for key, value in self.data.items()]
        settings += TINY_RUN
        settings.append(f"output.directory={self.root / name}")
        return RctiBench(parse_config(overrides=settings + list(overrides)))


class TestExperiment(HarnessCase):
    def test_artifacts(self):
        bench = self.bench()
        manifest = bench.cmd_experiment()
        out = bench.output_dir
        self.assertEqual(manifest.status, "complete")
        for name in ("stats.csv", "spans.csv", "rcti.csv", "report.md", "manifest.json"):
            with self.subTest(artifact=name):
                self.assertTrue((out / name).is_file())
        for name in ("delta_r.csv", "delta_c.csv", "rcti.csv"):
            self.assertTrue((out / "figures" / name).is_file())
        self.assertEqual(set(manifest.models), {"baseline", "robust-FG-0.1"})
        for path in manifest.models.values():
            self.assertTrue(Path(path).is_file())
        written = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(written["status"], "complete")
        self.assertEqual(len(written["rcti"]), 2)

    def test_stats_structure(self):
        bench = self.bench()
        bench.cmd_experiment()
        stats = read_stats(bench.output_dir / "stats.csv")
        self.assertEqual(len(stats), 4)
        self.assertEqual(list(stats["model"]), ["baseline", "robust"] * 2)
        self.assertEqual(list(stats["epsilon"]), [0.0, 0.0, 0.1, 0.1])
        self.assertTrue(((stats["accuracy"] >= 0) & (stats["accuracy"] <= 1)).all())
        self.assertTrue((stats["total_kwh"] > 0).all())
        self.assertEqual(span_kinds(stats["spans"][0]), frozenset({"eval"}))
        self.assertEqual(span_kinds(stats["spans"][2]), frozenset({"attack", "eval"}))
        spans = pd.read_csv(bench.output_dir / "spans.csv")
        self.assertEqual(len(spans), 8)
        self.assertEqual(spans["span_label"][0], "train[baseline]")

    def test_rows_sum_their_spans(self):
        bench = self.bench()
        bench.cmd_experiment()
        stats = read_stats(bench.output_dir / "stats.csv")
        spans = pd.read_csv(bench.output_dir / "spans.csv", float_precision="round_trip")
        by_label = dict(zip(spans["span_label"], spans["total_kwh"]))
        for labels, total in zip(stats["spans"], stats["total_kwh"]):
            parts = [by_label[label] for label in labels.split(";")]
            self.assertAlmostEqual(math.fsum(parts), total, delta=1e-9)

    def test_deterministic(self):
        first = self.bench("first")
        second = self.bench("second")
        first.cmd_experiment()
        second.cmd_experiment()
        stats = [read_stats(bench.output_dir / "stats.csv") for bench in (first, second)]
        np.testing.assert_array_equal(stats[0]["accuracy"], stats[1]["accuracy"])
        rcti = [pd.read_csv(bench.output_dir / "rcti.csv") for bench in (first, second)]
        # both models may score 0 under attack, so dR can be nan
        np.testing.assert_array_equal(rcti[0]["delta_r"], rcti[1]["delta_r"])
        for name in ("baseline", "robust-FG-0.1"):
            model = Path("models") / f"{name}.rctimdl"
            self.assertEqual(
                (first.output_dir / model).read_bytes(), (second.output_dir / model).read_bytes()
            )

    def test_clean_grid_only(self):
        bench = self.bench("clean", "attack.epsilon_grid=0")
        manifest = bench.cmd_experiment()
        self.assertEqual(manifest.status, "complete")
        self.assertEqual(set(manifest.models), {"baseline"})
        self.assertEqual(list(read_stats(bench.output_dir / "stats.csv")["model"]), ["baseline"])
        self.assertFalse((bench.output_dir / "rcti.csv").exists())
        self.assertTrue((bench.output_dir / "report.md").is_file())
        self.assertEqual(manifest.rcti, [])

    def test_fixed_epsilon_sweep(self):
        bench = self.bench(
            "fixed", "attack.epsilon_grid=0,0.1,0.2", "attack.sweep_fixed_epsilon=0.1"
        )
        manifest = bench.cmd_experiment()
        self.assertEqual(set(manifest.models), {"baseline", "robust-FG-0.1"})
        self.assertEqual(len(read_stats(bench.output_dir / "stats.csv")), 6)
        self.assertEqual(len(manifest.rcti), 3)

    def test_training_energy(self):
        bench = self.bench("train-energy", "rcti.include_training_energy=true")
        manifest = bench.cmd_experiment()
        self.assertEqual(manifest.status, "complete")
        stats = read_stats(bench.output_dir / "stats.csv")
        for spans in stats["spans"]:
            self.assertIn("train", span_kinds(spans))

    def test_rcti_replay(self):
        bench = self.bench()
        bench.cmd_experiment()
        replay = self.root / "replay.csv"
        bench.cmd_rcti(bench.output_dir / "stats.csv", replay)
        self.assertEqual(replay.read_bytes(), (bench.output_dir / "rcti.csv").read_bytes())

    def test_failed_stage_recorded(self):
        Path(self.data["data.train_images"]).write_bytes(b"not an idx file")
        bench = self.bench()
        with self.assertRaises(StageError) as raised:
            bench.cmd_experiment()
        self.assertEqual(raised.exception.stage, "load-data")
        written = json.loads((bench.output_dir / "manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(written["status"], "failed")
        self.assertEqual(written["failed_stage"], "load-data")
        self.assertEqual(written["tables"], {})

    def test_output_in_use(self):
        bench = self.bench()
        bench.output_dir.mkdir(parents=True)
        with FileLock(str(bench.output_dir / ".rctibench.lock")):
            with self.assertRaises(StageError) as raised:
                bench.cmd_experiment()
        self.assertIn("in use", raised.exception.message)


class TestStandaloneCommands(HarnessCase):
    def test_train_then_attack(self):
        bench = self.bench("steps", "attack.epsilon=0.2")
        trained = bench.cmd_train_robust()
        self.assertEqual(trained.path.name, "robust-FG-0.2.rctimdl")
        self.assertTrue(trained.path.with_suffix(".energy.json").is_file())
        (measured,) = bench.cmd_attack_eval(trained.path)
        self.assertEqual(measured.epsilon, 0.2)
        self.assertTrue(0.0 <= measured.accuracy <= 1.0)
        self.assertEqual(
            [report.label for report in measured.reports],
            ["attack[robust-FG-0.2,FG,0.2]", "eval[robust-FG-0.2,FG,0.2]"],
        )

    def test_train_baseline(self):
        trained = self.bench("steps").cmd_train_baseline()
        self.assertEqual(trained.path.name, "baseline.rctimdl")
        self.assertEqual(trained.report.label, "train[baseline]")

    def test_figure_data(self):
        bench = self.bench("figures")
        records = bench.cmd_rcti(TABLE2)
        paths = bench.cmd_figure_data(bench.output_dir / "rcti.csv")
        self.assertEqual(len(records), 12)
        self.assertEqual(len(paths), 3)
        self.assertTrue(all(path.parent == bench.output_dir / "figures" for path in paths))

    def test_rcti_missing_file(self):
        with self.assertRaises(StageError) as raised:
            self.bench().cmd_rcti(self.root / "missing.csv")
        self.assertEqual(raised.exception.stage, "rcti")


class TestMain(TestCase):
    def setUp(self):
        self.tmp = TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_main(self, *argv: str):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(
                [*argv, "--output", str(self.root), "--set", "hardware.utilization=constant"]
            )
        return code, out.getvalue(), err.getvalue()

    def test_rcti(self):
        code, out, _ = self.run_main("rcti", str(TABLE2), "--log-level", "WARNING")
        self.assertEqual(code, 0)
        self.assertIn("PGD eps=0.3", out)
        self.assertTrue((self.root / "rcti.csv").is_file())

    def test_unknown_key(self):
        code, _, err = self.run_main("rcti", str(TABLE2), "--set", "rcti.bogus=1")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("rcti.bogus", err)

    def test_missing_stats(self):
        code, _, err = self.run_main("rcti", str(self.root / "missing.csv"), "--log-level", "ERROR")
        self.assertEqual(code, EXIT_FAILURE)
        self.assertIn("error: rcti:", err)

    def test_experiment_without_data(self):
        code, _, err = self.run_main("experiment", "--log-level", "ERROR")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("data.train_images", err)

    def test_help_lists_keys(self):
        text = config_keys_help()
        self.assertIn("[attack]", text)
        self.assertIn("attack.epsilon_grid = 0,0.1,0.2,0.3,0.4,0.5", text)


@pytest.mark.slow
@skipUnless(MNIST_DIR, "set RCTIBENCH_MNIST_DIR to the MNIST IDX files")
class TestDeskScale(TestCase):
    """The default FG experiment on MNIST at the default subset sizes."""

    def test_full_grid(self):
        directory = Path(MNIST_DIR)
        with TemporaryDirectory() as tmp:
            config = parse_config(
                overrides=[
                    f"data.train_images={directory / 'train-images-idx3-ubyte.gz'}",
                    f"data.train_labels={directory / 'train-labels-idx1-ubyte.gz'}",
                    f"data.test_images={directory / 't10k-images-idx3-ubyte.gz'}",
                    f"data.test_labels={directory / 't10k-labels-idx1-ubyte.gz'}",
                    "attack.kind=FG",
                    f"output.directory={tmp}",
                ]
            )
            bench = RctiBench(config)
            manifest = bench.cmd_experiment()
            stats = read_stats(bench.output_dir / "stats.csv")
        self.assertEqual(manifest.status, "complete")
        self.assertEqual(len(manifest.rcti), 6)
        self.assertEqual(len([row for row in manifest.rcti if row["epsilon"] == 0.0]), 1)
        accuracy = {
            (model, round(epsilon, 6)): value
            for model, epsilon, value in zip(stats["model"], stats["epsilon"], stats["accuracy"])
        }
        self.assertGreaterEqual(accuracy["baseline", 0.0], 0.95)
        self.assertLess(accuracy["baseline", 0.3], 0.45)
        self.assertGreaterEqual(accuracy["robust", 0.3] - accuracy["baseline", 0.3], 0.20)
        baseline = [
            value
            for model, value in zip(stats["model"], stats["accuracy"])
            if model == "baseline"
        ]
        rises = [b - a for a, b in zip(baseline, baseline[1:]) if b > a]
        self.assertLessEqual(len(rises), 1)
        self.assertTrue(all(rise <= 0.02 for rise in rises))
