import numpy as np

from torchtrack.config import load_robot_config
from torchtrack.env import PathTrackingEnv
from torchtrack.limits import audit_segments
from torchtrack.spline import build_path

# Start from a bundled robot, the three-joint planar arm
robot = load_robot_config("planar3")
print(f"{robot.name}: {robot.num_joints} joints, dt {robot.env.dt} s")

# A reference path is a natural cubic spline through joint-space knots
knots = np.array([[0.0, 0.0, 0.0], [0.6, -0.3, 0.2], [1.0, 0.2, -0.4], [1.2, 0.6, 0.0]])
path = build_path(knots)
print(f"path length {path.total_length:.3f} rad")

# record_trace keeps the substep setpoints so we can audit them afterwards
env = PathTrackingEnv(robot, record_trace=True)
obs = env.reset(path)

# Any action in [-1, 1] is safe: it is mapped into the range of accelerations
# from which the robot can still brake to rest. Here we push every joint
# forward as hard as possible, which a trained policy would never do.
done = False
while not done and not env.at_path_end:
    obs, reward, done, info = env.step(np.ones(robot.num_joints))

env.brake()
print(f"stopped after {env.steps} steps, progress {env.progress:.3f} of {path.total_length:.3f}")

# Worst excess per limit family, negative means inside the limits
print(audit_segments(env.segments, robot.limits))
