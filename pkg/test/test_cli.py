import csv
import filecmp
import logging
import os
import tempfile
import unittest

import numpy as np
import torch
import yaml

from torchtrack.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main
from torchtrack.config import CONFIG_DIR, load_robot_config
from torchtrack.dataset import load_manifest, load_records
from torchtrack.env.trace import read_trace, replay_trace
from torchtrack.policy.evaluate import EPISODE_COLUMNS

TRAIN_FLAGS = ["--budget", "1", "--population", "2", "--paths-per-candidate", "1", "--workers", "1"]


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def _file(self, name):
        return os.path.join(self.tmp, name)

    def _dataset(self, name="paths.jsonl", count=3, seed=1):
        out = self._file(name)
        code = main(
            ["gen-dataset", "--robot", "planar3", "--kind", "waypoint", "--count", str(count),
             "--seed", str(seed), "--out", out, "--workers", "1"]
        )
        self.assertEqual(code, EXIT_OK)
        return out

    def _train(self, dataset, out, *extra):
        return main(["train", "--robot", "planar3", "--dataset", dataset, "--out", out, *TRAIN_FLAGS, *extra])

    def test_gen_dataset_reproducible(self):
        a = self._dataset("a.jsonl", count=10)
        b = self._dataset("b.jsonl", count=10)
        self.assertTrue(filecmp.cmp(a, b, shallow=False))
        self.assertEqual(len(load_records(a, dim=3)), 10)
        manifest = load_manifest(a)
        self.assertEqual((manifest["robot"], manifest["count"], manifest["seed"]), ("planar3", 10, 1))

    def test_random_kind(self):
        out = self._file("random.jsonl")
        code = main(["gen-dataset", "--robot", "planar3", "--count", "2", "--steps-per-path", "10", "--out", out])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual({r.generator for r in load_records(out)}, {"random"})

    def test_invalid_robot_file(self):
        with open(os.path.join(CONFIG_DIR, "planar3.yaml")) as f:
            doc = yaml.safe_load(f)
        doc["joints"][1]["limits"]["v_max"] = -2.0
        robot = self._file("broken.yaml")
        with open(robot, "w") as f:
            yaml.safe_dump(doc, f)
        with self.assertLogs("torchtrack", level="ERROR") as logs:
            code = main(["gen-dataset", "--robot", robot, "--count", "1", "--out", self._file("x.jsonl")])
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("joints[1].limits.v_max", "\n".join(logs.output))

    def test_missing_dataset(self):
        code = self._train(self._file("missing.jsonl"), self._file("policy.pt"))
        self.assertEqual(code, EXIT_RUNTIME)

    def test_train_writes_checkpoint_and_curve(self):
        dataset = self._dataset()
        ckpt = self._file("policy.pt")
        self.assertEqual(self._train(dataset, ckpt), EXIT_OK)
        payload = torch.load(ckpt, weights_only=True)
        self.assertEqual(payload["robot"], "planar3")
        self.assertEqual(payload["algo"], "cem")
        with open(f"{ckpt}.curve.csv") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 1)
        self.assertTrue(np.isfinite(float(rows[0]["mean_return"])))

    def test_train_curve_reproducible(self):
        dataset = self._dataset()
        curves = []
        for name in ("a", "b"):
            curve = self._file(f"{name}.csv")
            self.assertEqual(self._train(dataset, self._file(f"{name}.pt"), "--seed", "7", "--curve", curve), EXIT_OK)
            curves.append(curve)
        self.assertTrue(filecmp.cmp(*curves, shallow=False))

    def test_ball_beam_obs_dim_recorded(self):
        dataset = self._dataset()
        ckpt = self._file("ball.pt")
        self.assertEqual(self._train(dataset, ckpt, "--task", "ball-beam", "--budget", "0"), EXIT_OK)
        payload = torch.load(ckpt, weights_only=True)
        self.assertEqual(payload["task"], "ball_beam")
        self.assertEqual(payload["obs_dim"], 5 * 3 + 2 + 9 + 2)

    def test_eval_topp_trace(self):
        dataset = self._dataset()
        ckpt = self._file("policy.pt")
        self.assertEqual(self._train(dataset, ckpt, "--budget", "0"), EXIT_OK)

        report = self._file("report.csv")
        self.assertEqual(main(["eval", "--ckpt", ckpt, "--dataset", dataset, "--report", report]), EXIT_OK)
        with open(report) as f:
            reader = csv.DictReader(f)
            self.assertEqual(reader.fieldnames, EPISODE_COLUMNS)
            self.assertEqual(len(list(reader)), 3)

        topp = self._file("topp.csv")
        code = main(["topp", "--dataset", dataset, "--ckpt", ckpt, "--grid", "200", "--report", topp])
        self.assertEqual(code, EXIT_OK)
        with open(topp) as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 3)
        self.assertTrue(all(float(r["duration_topp"]) > 0.0 for r in rows))

        path_id = load_records(dataset)[0].id
        trace_file = self._file("trace.json")
        code = main(["trace", "--ckpt", ckpt, "--dataset", dataset, "--path-id", path_id, "--out", trace_file])
        self.assertEqual(code, EXIT_OK)
        trace = read_trace(trace_file)
        self.assertTrue(trace["braked"])
        state = replay_trace(trace, load_records(dataset)[0].to_path(), load_robot_config("planar3"))
        np.testing.assert_allclose(state.p, trace["end_state"]["p"], atol=1e-12, rtol=0)
        np.testing.assert_allclose(state.v, trace["end_state"]["v"], atol=1e-12, rtol=0)

        code = main(["trace", "--ckpt", ckpt, "--dataset", dataset, "--path-id", "nope", "--out", trace_file])
        self.assertEqual(code, EXIT_CONFIG)

    def test_eval_empty_dataset(self):
        dataset = self._dataset()
        ckpt = self._file("policy.pt")
        self.assertEqual(self._train(dataset, ckpt, "--budget", "0"), EXIT_OK)
        empty = self._file("empty.jsonl")
        open(empty, "w").close()
        report = self._file("report.csv")
        self.assertEqual(main(["eval", "--ckpt", ckpt, "--dataset", empty, "--report", report]), EXIT_OK)
        with open(report) as f:
            self.assertEqual(f.read().splitlines(), [",".join(EPISODE_COLUMNS)])

    def test_checkpoint_robot_mismatch(self):
        dataset = self._dataset()
        ckpt = self._file("policy.pt")
        self.assertEqual(self._train(dataset, ckpt, "--budget", "0"), EXIT_OK)
        code = main(["eval", "--ckpt", ckpt, "--dataset", dataset, "--robot", "iiwa7", "--report", self._file("r.csv")])
        self.assertEqual(code, EXIT_CONFIG)

    def test_topp_straight_line(self):
        dataset = self._file("line.jsonl")
        with open(dataset, "w") as f:
            f.write('{"id": "line", "dim": 3, "generator": "waypoint", "seed": 0, "knots": [[0, 0, 0], [1.5, 0, 0]]}\n')
        report = self._file("topp.csv")
        self.assertEqual(main(["topp", "--dataset", dataset, "--robot", "planar3", "--report", report]), EXIT_OK)
        with open(report) as f:
            row = next(csv.DictReader(f))
        # joint 0 of planar3: v_max 1.5, a_max 8, so 0.1875 s up, 0.8125 s cruise, 0.1875 s down
        self.assertAlmostEqual(float(row["duration_topp"]), 1.1875, delta=0.02 * 1.1875)
        self.assertEqual(row["duration_policy"], "")

    def test_split(self):
        dataset = self._dataset(count=10)
        train_file, test_file = self._file("train.jsonl"), self._file("test.jsonl")
        code = main(["split", "--dataset", dataset, "--ratio", "0.7", "--train", train_file, "--test", test_file])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual((len(load_records(train_file)), len(load_records(test_file))), (7, 3))
        code = main(["split", "--dataset", dataset, "--ratio", "1.5", "--train", train_file, "--test", test_file])
        self.assertEqual(code, EXIT_CONFIG)

    def test_topp_needs_robot_or_checkpoint(self):
        with self.assertRaises(SystemExit) as ctx:
            main(["topp", "--dataset", "x.jsonl", "--report", "y.csv"])
        self.assertEqual(ctx.exception.code, 2)

    def test_help_documents_flags(self):
        text = build_parser().format_help()
        for command in ("gen-dataset", "train", "eval", "topp", "trace", "split"):
            self.assertIn(command, text)


if __name__ == "__main__":
    unittest.main()
