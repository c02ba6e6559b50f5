"""Forward kinematics of serial chains of revolute joints.

Each joint rotates about a fixed axis of its frame, then a fixed translation
leads to the next frame. Orientations are scalar-last unit quaternions
``(x, y, z, w)`` as used by :class:`scipy.spatial.transform.Rotation`.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

__all__ = [
    "ChainSpec",
    "fk",
    "fk_batch",
    "orientation_angle",
    "quaternion_angle",
    "AXIS_NORM_TOL",
]

AXIS_NORM_TOL = 1e-9

_IDENTITY = (0.0, 0.0, 0.0, 1.0)


def _frozen(x, shape, name):
    arr = np.array(x, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChainSpec:
    """Serial chain description.

    Args:
        axes: ``(D, 3)`` unit rotation axes, one per joint, in the joint's frame.
        translations: ``(D, 3)`` offsets (m) from each joint frame to the next.
        base_position: position (m) of the first joint frame in the world.
        base_orientation: quaternion ``(x, y, z, w)`` of the first joint frame.
        tcp: reference point offset (m) in the last frame.
    """

    axes: np.ndarray
    translations: np.ndarray
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_orientation: np.ndarray = field(default_factory=lambda: np.array(_IDENTITY))
    tcp: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        axes = np.array(self.axes, dtype=np.float64)
        if axes.ndim != 2 or axes.shape[1] != 3 or axes.shape[0] < 1:
            raise ValueError(f"axes must have shape (D, 3), got {axes.shape}")
        norms = np.linalg.norm(axes, axis=1)
        if np.any(np.abs(norms - 1.0) > AXIS_NORM_TOL):
            joint = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"axis of joint {joint} is not unit-norm (|axis| = {norms[joint]})")
        object.__setattr__(self, "axes", _frozen(axes, None, "axes"))
        object.__setattr__(
            self, "translations", _frozen(self.translations, axes.shape, "translations")
        )
        object.__setattr__(self, "base_position", _frozen(self.base_position, (3,), "base_position"))
        quat = _frozen(self.base_orientation, (4,), "base_orientation")
        if abs(np.linalg.norm(quat) - 1.0) > 1e-6:
            raise ValueError("base_orientation must be a unit quaternion")
        object.__setattr__(self, "base_orientation", quat)
        object.__setattr__(self, "tcp", _frozen(self.tcp, (3,), "tcp"))

    @property
    def num_joints(self):
        return self.axes.shape[0]

    @property
    def reach(self):
        """Sum of link lengths including the reference point offset."""
        return float(np.linalg.norm(self.translations, axis=1).sum() + np.linalg.norm(self.tcp))


def fk_batch(chain, q):
    """Reference point positions ``(n, 3)`` and orientations ``(n, 4)`` for ``q`` of shape ``(n, D)``."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != chain.num_joints:
        raise ValueError(
            f"expected joint positions of shape (n, {chain.num_joints}), got {q.shape}"
        )
    n = q.shape[0]
    rot = Rotation.from_quat(np.tile(chain.base_orientation, (n, 1)))
    pos = np.tile(chain.base_position, (n, 1))
    for j in range(chain.num_joints):
        rot = rot * Rotation.from_rotvec(q[:, j : j + 1] * chain.axes[j])
        pos = pos + rot.apply(chain.translations[j])
    pos = pos + rot.apply(chain.tcp)
    quat = rot.as_quat()
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    return pos, quat


def fk(chain, q):
    """Reference point position (m) and unit orientation quaternion for one configuration."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (chain.num_joints,):
        raise ValueError(f"expected {chain.num_joints} joint positions, got shape {q.shape}")
    pos, quat = fk_batch(chain, q[None, :])
    return pos[0], quat[0]


def orientation_angle(orientation, reference_axis, body_axis=(0.0, 0.0, 1.0)):
    """Angle in ``[0, pi]`` between ``body_axis`` rotated by ``orientation`` and ``reference_axis``."""
    rotated = Rotation.from_quat(orientation).apply(np.asarray(body_axis, dtype=np.float64))
    ref = np.asarray(reference_axis, dtype=np.float64)
    cross = np.linalg.norm(np.cross(rotated, ref), axis=-1)
    dot = np.sum(rotated * ref, axis=-1)
    return np.arctan2(cross, dot)


def quaternion_angle(q1, q2):
    """Rotation angle in ``[0, pi]`` between two orientations."""
    return (Rotation.from_quat(q1).inv() * Rotation.from_quat(q2)).magnitude()
