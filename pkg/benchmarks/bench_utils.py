import math
import time

import numpy as np
import pandas as pd
from tabulate import tabulate

from torchtrack import _braking
from torchtrack.errors import InfeasibleStateError
from torchtrack.limits import (
    AUDIT_SUBSTEPS,
    KinematicState,
    SafeActionSpace,
    audit_segments,
    brake_to_rest,
    integrate_segment,
)
from torchtrack.utils import derive_seed


def shrunk_box(limits, margin=0.05):
    span = limits.p_max - limits.p_min
    return limits.p_min + margin * span, limits.p_max - margin * span


def random_action_episode(limits, dt, steps, seed, substeps=AUDIT_SUBSTEPS, brake_every=0):
    """One uniformly random action rollout from rest, braked at the end.

    Returns ``(worst_excess, brake_failures, empty_ranges)``. With
    ``brake_every > 0`` braking is also attempted from every
    ``brake_every``-th visited state.
    """
    rng = np.random.default_rng(seed)
    space = SafeActionSpace(limits, dt)
    lo, hi = shrunk_box(limits)
    state = KinematicState.at_rest(rng.uniform(lo, hi))
    segments = []
    brake_failures = empty_ranges = 0
    for step in range(steps):
        try:
            a_next, _ = space.next_acceleration(state, rng.uniform(-1.0, 1.0, limits.num_joints))
        except InfeasibleStateError:
            empty_ranges += 1
            break
        segment, state = integrate_segment(state, a_next, dt, substeps)
        segments.append(segment)
        if brake_every and step % brake_every == 0:
            try:
                braked = brake_to_rest(state, limits, dt, substeps)
            except InfeasibleStateError:
                brake_failures += 1
                continue
            if braked and not braked[-1].end_state.is_at_rest():
                brake_failures += 1
    try:
        segments.extend(brake_to_rest(state, limits, dt, substeps))
    except InfeasibleStateError:
        brake_failures += 1
    worst = audit_segments(segments, limits)
    return max(worst.values(), default=float("-inf")), brake_failures, empty_ranges


def extreme_tree_ok(p, v, a, a_next, b, dt, depth):
    """Whether some chain of ``depth`` full-jerk actions after ``a_next`` stays inside the limits."""
    ok = _braking.interval_ok(p, v, a, a_next, b, dt)
    p, v = _braking.advance(p, v, a, a_next, dt)
    a = a_next
    if depth == 0:
        return ok
    down = np.maximum(b.a_min, a + b.j_min * dt)
    up = np.minimum(b.a_max, a + b.j_max * dt)
    return ok & (
        extreme_tree_ok(p, v, a, down, b, dt, depth - 1)
        | extreme_tree_ok(p, v, a, up, b, dt, depth - 1)
    )


def oracle_range(state, limits, dt, depth=5, cell_fraction=1e-3):
    """Brute-force ``(lo, hi, cell)`` of a single joint on a grid over the jerk window."""
    b = limits.bounds()
    lo_w = max(b.a_min[0], state.a[0] + b.j_min[0] * dt)
    hi_w = min(b.a_max[0], state.a[0] + b.j_max[0] * dt)
    cell = cell_fraction * (b.a_max[0] - b.a_min[0])
    grid = np.linspace(lo_w, hi_w, int(math.ceil((hi_w - lo_w) / cell)) + 1)
    n = grid.size
    ok = extreme_tree_ok(
        np.full(n, state.p[0]), np.full(n, state.v[0]), np.full(n, state.a[0]), grid, b.tile(n), dt, depth
    )
    if not ok.any():
        return None, None, cell
    return float(grid[ok].min()), float(grid[ok].max()), cell


def seeds(master_seed, count):
    return [derive_seed(master_seed, i) for i in range(count)]


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def print_table(rows, headers, floatfmt=".4g"):
    df = pd.DataFrame(rows, columns=headers)
    print(tabulate(df, headers="keys", tablefmt="github", showindex=False, floatfmt=floatfmt))
    return df
