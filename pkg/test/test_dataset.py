import json
import logging
import os
import tempfile
import unittest

import numpy as np
import pytest
from parameterized import parameterized

from torchtrack.config import load_robot_config
from torchtrack.dataset import (
    BOX_MARGIN,
    DEDUP_TOL,
    PathRecord,
    gen_random_paths,
    gen_waypoint_paths,
    load_manifest,
    load_records,
    manifest_path,
    save_records,
    split_records,
)
from torchtrack.errors import DatasetError

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)


def _record(i, dim=2):
    return PathRecord(
        id=f"r{i}", dim=dim, generator="waypoint", seed=i, knots=[[float(i)] * dim, [i + 1.0] * dim]
    )


class TestGenerators(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.robot = load_robot_config("planar3")

    def test_random_paths_respect_limits(self):
        limits = self.robot.limits
        records = gen_random_paths(self.robot, 4, steps_per_path=20, seed=1, num_workers=1)
        self.assertEqual(len(records), 4)
        for record in records:
            knots = record.knot_array()
            self.assertEqual(record.dim, 3)
            self.assertEqual(record.generator, "random")
            self.assertGreaterEqual(record.num_knots, 2)
            self.assertTrue(np.all(knots >= limits.p_min - 1e-9))
            self.assertTrue(np.all(knots <= limits.p_max + 1e-9))
            steps = np.abs(np.diff(knots, axis=0))
            self.assertTrue(np.all(steps <= limits.v_max * self.robot.env.dt + 1e-9))
            self.assertTrue(np.all(np.linalg.norm(np.diff(knots, axis=0), axis=1) > DEDUP_TOL))
            record.to_path()

    def test_waypoints_inside_shrunk_box(self):
        limits = self.robot.limits
        span = limits.p_max - limits.p_min
        records = gen_waypoint_paths(self.robot, 8, waypoints_per_path=5, seed=2, num_workers=1)
        for record in records:
            knots = record.knot_array()
            self.assertEqual(knots.shape, (5, 3))
            self.assertTrue(np.all(knots >= limits.p_min + BOX_MARGIN * span))
            self.assertTrue(np.all(knots <= limits.p_max - BOX_MARGIN * span))

    @parameterized.expand([("random", gen_random_paths), ("waypoint", gen_waypoint_paths)])
    def test_seeded(self, _, generate):
        a = generate(self.robot, 3, seed=5, num_workers=1)
        b = generate(self.robot, 3, seed=5, num_workers=2)
        c = generate(self.robot, 3, seed=6, num_workers=1)
        self.assertEqual(a, b)
        self.assertNotEqual(a, c)
        self.assertEqual(len({r.id for r in a}), 3)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            gen_random_paths(self.robot, 0)
        with self.assertRaises(ValueError):
            gen_waypoint_paths(self.robot, 2, waypoints_per_path=1)


class TestRecordFiles(unittest.TestCase):
    def test_save_and_load(self):
        records = [_record(i) for i in range(3)]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "paths.jsonl")
            save_records(records, path, manifest={"generator": "waypoint", "seed": 0})
            self.assertEqual(load_records(path, dim=2), records)
            self.assertEqual(load_manifest(path)["count"], 3)
            with open(path) as f:
                lines = f.read().splitlines()
            self.assertEqual(len(lines), 3)
            self.assertEqual(sorted(json.loads(lines[0])), ["dim", "generator", "id", "knots", "seed"])

    def test_no_manifest(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "paths.jsonl")
            save_records([_record(0)], path)
            self.assertFalse(os.path.exists(manifest_path(path)))

    def test_empty_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "empty.jsonl")
            save_records([], path)
            self.assertEqual(load_records(path), [])

    @parameterized.expand(
        [
            ("bad_json", "{not json"),
            ("extra_field", json.dumps({"id": "a", "dim": 1, "generator": "random", "seed": 0, "knots": [[0], [1]], "x": 1})),
            ("missing_field", json.dumps({"id": "a", "dim": 1, "generator": "random", "knots": [[0], [1]]})),
            ("generator", json.dumps({"id": "a", "dim": 1, "generator": "spiral", "seed": 0, "knots": [[0], [1]]})),
            ("one_knot", json.dumps({"id": "a", "dim": 1, "generator": "random", "seed": 0, "knots": [[0]]})),
            ("ragged", json.dumps({"id": "a", "dim": 2, "generator": "random", "seed": 0, "knots": [[0, 1], [1]]})),
        ]
    )
    def test_malformed(self, _, line):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bad.jsonl")
            with open(path, "w") as f:
                f.write(json.dumps({"id": "ok", "dim": 1, "generator": "random", "seed": 0, "knots": [[0], [1]]}))
                f.write("\n" + line + "\n")
            with self.assertRaisesRegex(DatasetError, "bad.jsonl:2"):
                load_records(path)

    def test_dim_mismatch(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "paths.jsonl")
            save_records([_record(0, dim=2)], path)
            with self.assertRaises(DatasetError):
                load_records(path, dim=3)

    def test_missing_file(self):
        with self.assertRaises(DatasetError):
            load_records("/nonexistent/paths.jsonl")


@pytest.mark.parametrize("n,ratio", [(10, 0.8), (7, 0.5), (2, 0.9), (50, 0.1)], ids=str)
def test_split_disjoint_and_ordered(n, ratio):
    records = [_record(i) for i in range(n)]
    train, test = split_records(records, ratio, seed=3)
    assert len(train) + len(test) == n
    assert len(train) >= 1 and len(test) >= 1
    assert not {r.id for r in train} & {r.id for r in test}
    for part in (train, test):
        ids = [int(r.id[1:]) for r in part]
        assert ids == sorted(ids)
    assert split_records(records, ratio, seed=3) == (train, test)


def test_split_tiny_and_invalid():
    assert split_records([_record(0)], 0.5) == ([_record(0)], [])
    with pytest.raises(ValueError):
        split_records([_record(0), _record(1)], 1.0)


if __name__ == "__main__":
    unittest.main()
