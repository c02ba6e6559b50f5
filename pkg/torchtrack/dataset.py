"""Reference path datasets.

Two generators:

* ``random``: joint positions visited by random-action rollouts through the
  safe action space, braked to rest at the end;
* ``waypoint``: a few knots drawn uniformly inside the (shrunk) position box.

Datasets are JSON-lines files, one record per line with exactly the fields
``id, dim, generator, seed, knots``; the generation parameters go to a
``<file>.manifest.json`` sidecar.
"""

import json
import logging
import os
from dataclasses import dataclass
from functools import partial

import numpy as np
from tqdm import tqdm

from torchtrack.errors import DatasetError
from torchtrack.limits import (
    KinematicState,
    SafeActionSpace,
    brake_to_rest,
    integrate_segment,
)
from torchtrack.spline import build_path
from torchtrack.utils import derive_seed, get_num_workers, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "PathRecord",
    "GENERATORS",
    "DEDUP_TOL",
    "BOX_MARGIN",
    "DEFAULT_STEPS_PER_PATH",
    "DEFAULT_WAYPOINTS_PER_PATH",
    "gen_random_paths",
    "gen_waypoint_paths",
    "save_records",
    "load_records",
    "load_manifest",
    "manifest_path",
    "split_records",
]

GENERATORS = ("random", "waypoint")
DEDUP_TOL = 1e-6
BOX_MARGIN = 0.05
DEFAULT_STEPS_PER_PATH = 50
DEFAULT_WAYPOINTS_PER_PATH = 4

_FIELDS = ("id", "dim", "generator", "seed", "knots")
_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class PathRecord:
    id: str
    dim: int
    generator: str
    seed: int
    knots: tuple

    def __post_init__(self):
        knots = tuple(tuple(float(x) for x in knot) for knot in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise DatasetError(f"record {self.id}: needs at least 2 knots, got {len(knots)}")
        if any(len(k) != self.dim for k in knots):
            raise DatasetError(f"record {self.id}: knot dimension differs from dim={self.dim}")

    @property
    def num_knots(self):
        return len(self.knots)

    def knot_array(self):
        return np.array(self.knots, dtype=np.float64)

    def to_path(self):
        return build_path(self.knot_array())

    def to_json(self):
        return json.dumps(
            {
                "id": self.id,
                "dim": self.dim,
                "generator": self.generator,
                "seed": self.seed,
                "knots": [list(k) for k in self.knots],
            }
        )


def _shrunk_box(limits, margin=BOX_MARGIN):
    span = limits.p_max - limits.p_min
    return limits.p_min + margin * span, limits.p_max - margin * span


def _dedup(points, tol=DEDUP_TOL):
    kept = [points[0]]
    for point in points[1:]:
        if np.linalg.norm(point - kept[-1]) > tol:
            kept.append(point)
    return np.array(kept)


def _random_knots(limits, dt, steps, rng):
    space = SafeActionSpace(limits, dt)
    lo, hi = _shrunk_box(limits)
    state = KinematicState.at_rest(rng.uniform(lo, hi))
    points = [state.p]
    for _ in range(steps):
        action = rng.uniform(-1.0, 1.0, size=limits.num_joints)
        a_next, _ = space.next_acceleration(state, action)
        _, state = integrate_segment(state, a_next, dt, substeps=1)
        points.append(state.p)
    for segment in brake_to_rest(state, limits, dt, substeps=1):
        points.append(segment.p[-1])
    return _dedup(np.array(points))


def _waypoint_knots(limits, waypoints, rng):
    lo, hi = _shrunk_box(limits)
    return _dedup(rng.uniform(lo, hi, size=(waypoints, limits.num_joints)))


def _generate_one(kind, limits, dt, size, master_seed, index):
    seed = derive_seed(master_seed, index)
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_ATTEMPTS):
        if kind == "random":
            knots = _random_knots(limits, dt, size, rng)
        else:
            knots = _waypoint_knots(limits, size, rng)
        if len(knots) >= 2:
            return PathRecord(
                id=f"{kind}-{master_seed}-{index:06d}",
                dim=limits.num_joints,
                generator=kind,
                seed=seed,
                knots=knots,
            )
    raise DatasetError(f"could not generate a non-degenerate {kind} path for index {index}")


def _generate(kind, robot, count, size, seed, num_workers, progress):
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    workers = get_num_workers(num_workers)
    logger.info(f"generating {count} {kind} paths for {robot.name} (seed {seed}, {workers} workers)")
    fn = partial(_generate_one, kind, robot.limits, robot.env.dt, size, seed)
    indices = range(count)
    if progress:
        indices = tqdm(indices, desc=f"{kind} paths")
    return parallel_map(fn, indices, workers)


def gen_random_paths(robot, count, steps_per_path=DEFAULT_STEPS_PER_PATH, seed=0, num_workers=None, progress=False):
    """Paths visited by uniformly random actions, at least 2 steps per rollout.

    Each rollout starts at rest at a random point of the position box shrunk by
    5% per side, runs ``steps_per_path`` decision steps and brakes to rest. The
    decision-step positions, without consecutive near-duplicates, are the knots.
    """
    return _generate("random", robot, count, max(int(steps_per_path), 2), seed, num_workers, progress)


def gen_waypoint_paths(
    robot, count, waypoints_per_path=DEFAULT_WAYPOINTS_PER_PATH, seed=0, num_workers=None, progress=False
):
    """Paths through ``waypoints_per_path`` knots drawn uniformly in the shrunk position box."""
    if waypoints_per_path < 2:
        raise ValueError(f"waypoints_per_path must be >= 2, got {waypoints_per_path}")
    return _generate("waypoint", robot, count, int(waypoints_per_path), seed, num_workers, progress)


def manifest_path(file_path):
    return f"{file_path}.manifest.json"


def save_records(records, file_path, manifest=None):
    """Write records as JSON lines, plus the sidecar manifest when ``manifest`` is given."""
    with open(file_path, "w") as f:
        for record in records:
            f.write(record.to_json())
            f.write("\n")
    if manifest is not None:
        with open(manifest_path(file_path), "w") as f:
            json.dump({**manifest, "count": len(records)}, f, indent=2, sort_keys=True)
    logger.info(f"wrote {len(records)} records to {file_path}")


def _parse_line(line, lineno, file_path):
    where = f"{file_path}:{lineno}"
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetError(f"{where}: invalid JSON ({e.msg})") from None
    if not isinstance(doc, dict) or set(doc) != set(_FIELDS):
        raise DatasetError(f"{where}: expected exactly the fields {', '.join(_FIELDS)}")
    if doc["generator"] not in GENERATORS:
        raise DatasetError(f"{where}: unknown generator {doc['generator']!r}")
    try:
        return PathRecord(
            id=str(doc["id"]),
            dim=int(doc["dim"]),
            generator=doc["generator"],
            seed=int(doc["seed"]),
            knots=doc["knots"],
        )
    except DatasetError as e:
        raise DatasetError(f"{where}: {e}") from None
    except (TypeError, ValueError) as e:
        raise DatasetError(f"{where}: malformed record ({e})") from None


def load_records(file_path, dim=None):
    """Read a JSON-lines dataset; ``dim`` checks every record's joint count."""
    if not os.path.exists(file_path):
        raise DatasetError(f"dataset not found: {file_path}")
    records = []
    with open(file_path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = _parse_line(line, lineno, file_path)
            if dim is not None and record.dim != dim:
                raise DatasetError(
                    f"{file_path}:{lineno}: record {record.id} has dim {record.dim}, robot has {dim}"
                )
            records.append(record)
    return records


def load_manifest(file_path):
    with open(manifest_path(file_path), "r") as f:
        return json.load(f)


def split_records(records, ratio, seed=0):
    """Deterministic disjoint ``(train, test)`` split; both keep the input order."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    records = list(records)
    n = len(records)
    if n < 2:
        return records, []
    n_train = min(max(int(round(ratio * n)), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    train_idx = set(order[:n_train].tolist())
    train = [r for i, r in enumerate(records) if i in train_idx]
    test = [r for i, r in enumerate(records) if i not in train_idx]
    return train, test
