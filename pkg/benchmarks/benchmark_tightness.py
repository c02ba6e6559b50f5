"""Tightness of the single-joint feasible acceleration range.

Compares ``feasible_range`` with a brute-force search over chains of extreme
jerk actions on a grid of ``1e-3`` of the acceleration span. A computed bound
is tight if it lies within one grid cell of the brute-force bound and sound if
it does not exceed it by more than a cell.
"""

import argparse

import numpy as np
from bench_utils import Timer, oracle_range, print_table

from torchtrack.errors import InfeasibleStateError
from torchtrack.limits import JointLimits, KinematicState, feasible_range


def sample_state(limits, rng):
    p = rng.uniform(limits.p_min[0], limits.p_max[0])
    v = rng.uniform(limits.v_min[0], limits.v_max[0])
    a = rng.uniform(limits.a_min[0], limits.a_max[0])
    return KinematicState([p], [v], [a])


def run_bench(args):
    limits = JointLimits(
        [-args.p_max], [args.p_max], [-args.v_max], [args.v_max],
        [-args.a_max], [args.a_max], [-args.j_max], [args.j_max],
    )
    rng = np.random.default_rng(args.seed)
    rows = []
    skipped = 0
    with Timer() as timer:
        while len(rows) < args.states:
            state = sample_state(limits, rng)
            try:
                r = feasible_range(state, limits, args.dt)
            except InfeasibleStateError:
                skipped += 1
                continue
            lo, hi, cell = oracle_range(state, limits, args.dt, depth=args.depth)
            if lo is None:
                skipped += 1
                continue
            rows.append([state.p[0], state.v[0], state.a[0], r.lo[0], lo, r.hi[0], hi, cell])
    df = print_table(
        rows[: args.show],
        ["p", "v", "a", "lo", "oracle_lo", "hi", "oracle_hi", "cell"],
    )
    frame = np.array(rows)
    hi_gap = frame[:, 5] - frame[:, 6]
    lo_gap = frame[:, 4] - frame[:, 3]
    cell = frame[:, 7]
    within = (np.abs(hi_gap) <= cell + 1e-9) & (np.abs(lo_gap) <= cell + 1e-9)
    print_table(
        [[len(rows), skipped, float(within.mean()), float(np.max(hi_gap)), float(np.max(lo_gap)), timer.elapsed]],
        ["states", "skipped", "within_one_cell", "max_hi_excess", "max_lo_excess", "time(s)"],
    )
    return df


if __name__ == "__main__":
    parser = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--states", type=int, default=200)
    parser.add_argument("--depth", type=int, default=5, help="extreme actions after the candidate")
    parser.add_argument("--dt", type=float, default=0.1)
    parser.add_argument("--p_max", type=float, default=2.0)
    parser.add_argument("--v_max", type=float, default=1.0)
    parser.add_argument("--a_max", type=float, default=10.0)
    parser.add_argument("--j_max", type=float, default=100.0)
    parser.add_argument("--show", type=int, default=10, help="states printed individually")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    run_bench(args)
