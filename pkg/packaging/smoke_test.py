#!/usr/bin/env python3
import numpy as np

from torchtrack.config import load_robot_config
from torchtrack.limits import KinematicState, feasible_range


def main():
    """
    Import torchtrack, load a bundled robot and compute one safe acceleration range
    """
    robot = load_robot_config("planar3")
    state = KinematicState.at_rest(np.zeros(robot.num_joints))
    accel_range = feasible_range(state, robot.limits, robot.env.dt)
    print(robot.name, accel_range.lo, accel_range.hi)


if __name__ == "__main__":
    main()
