"""Joint-space cubic spline paths parameterized by arc length.

A :class:`CubicPath` is a natural cubic spline through knots, parameterized by
cumulative chord length (or uniformly), plus an arc table mapping the spline
parameter ``u`` to joint-space arc length ``s``. Every public query takes arc
length; inversion of the arc table is done per query with safeguarded Newton
steps.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

logger = logging.getLogger(__name__)

__all__ = [
    "Parameterization",
    "SamplingStrategy",
    "CubicPath",
    "KnotWindow",
    "StateKnots",
    "build_path",
    "curvature",
    "sample_arc_lengths",
    "sample_knots",
    "resample",
    "state_knots",
    "knot_window",
]

# relative error target of every accepted arc table interval
ARC_TABLE_RTOL = 1e-10
# fixed grid for the integrated curvature K(s)
CURVATURE_GRID_SIZE = 1000
# K(L) below this is treated as a straight path
STRAIGHT_PATH_EPS = 1e-9

_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)
_INITIAL_SPLITS = 4
_MAX_REFINEMENTS = 40
_MAX_NEWTON_STEPS = 60


class Parameterization(Enum):
    CHORD = "chord"
    UNIFORM = "uniform"


class SamplingStrategy(Enum):
    DISTANCE = "distance"
    CURVATURE = "curvature"


def _gauss_legendre(fn, a, b, rule):
    """Integrate ``fn`` over each interval ``[a[i], b[i]]`` with a fixed rule."""
    nodes, weights = rule
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[..., None] + half[..., None] * nodes
    return half * (fn(x) * weights).sum(axis=-1)


class CubicPath:
    """Immutable natural cubic spline through ``knots`` with an arc-length table.

    Args:
        knots: ``(M, D)`` array of joint positions, ``M >= 2``.
        knot_params: strictly increasing spline parameters of the knots.
        spline: the fitted ``scipy.interpolate.CubicSpline``.

    Use :func:`build_path` to construct one.
    """

    def __init__(self, knots, knot_params, spline):
        self._knots = np.array(knots, dtype=np.float64)
        self._knot_params = np.array(knot_params, dtype=np.float64)
        self._spline = spline
        self._knots.setflags(write=False)
        self._knot_params.setflags(write=False)
        self._arc_u, self._arc_s = self._build_arc_table()
        self._knot_arc = np.interp(self._knot_params, self._arc_u, self._arc_s)
        # knot parameters are table breakpoints, pin the ends exactly
        self._knot_arc[0] = 0.0
        self._knot_arc[-1] = self._arc_s[-1]
        for arr in (self._arc_u, self._arc_s, self._knot_arc):
            arr.setflags(write=False)

    @property
    def knots(self):
        return self._knots

    @property
    def knot_params(self):
        return self._knot_params

    @property
    def coefficients(self):
        """Per-segment polynomial coefficients, shape ``(4, M - 1, D)``, highest power first."""
        return self._spline.c

    @property
    def arc_table(self):
        """``(u, s)`` breakpoints of the monotone arc-length table."""
        return self._arc_u, self._arc_s

    @property
    def knot_arc_lengths(self):
        return self._knot_arc

    @property
    def dim(self):
        return self._knots.shape[1]

    @property
    def num_knots(self):
        return self._knots.shape[0]

    @property
    def total_length(self):
        return float(self._arc_s[-1])

    def _speed(self, u):
        return np.linalg.norm(self._spline(u, 1), axis=-1)

    def _build_arc_table(self):
        # adaptive Gauss-Legendre: split until the 8 and 16 point rules agree
        edges = np.concatenate(
            [
                np.linspace(a, b, _INITIAL_SPLITS + 1)[:-1]
                for a, b in zip(self._knot_params[:-1], self._knot_params[1:])
            ]
            + [self._knot_params[-1:]]
        )
        pending_a, pending_b = edges[:-1], edges[1:]
        done_a, done_b, done_len = [], [], []
        for _ in range(_MAX_REFINEMENTS):
            if pending_a.size == 0:
                break
            coarse = _gauss_legendre(self._speed, pending_a, pending_b, _GL8)
            fine = _gauss_legendre(self._speed, pending_a, pending_b, _GL16)
            ok = np.abs(fine - coarse) <= ARC_TABLE_RTOL * np.abs(fine) + 1e-15
            done_a.append(pending_a[ok])
            done_b.append(pending_b[ok])
            done_len.append(fine[ok])
            a, b = pending_a[~ok], pending_b[~ok]
            mid = 0.5 * (a + b)
            pending_a = np.concatenate([a, mid])
            pending_b = np.concatenate([mid, b])
        else:
            if pending_a.size:
                logger.warning(
                    f"arc table refinement stopped with {pending_a.size} unconverged intervals"
                )
                done_a.append(pending_a)
                done_b.append(pending_b)
                done_len.append(_gauss_legendre(self._speed, pending_a, pending_b, _GL16))
        a = np.concatenate(done_a)
        b = np.concatenate(done_b)
        lengths = np.concatenate(done_len)
        order = np.argsort(a, kind="stable")
        u = np.concatenate([a[order][:1], b[order]])
        s = np.concatenate([[0.0], np.cumsum(lengths[order])])
        return u, s

    def _partial_arc(self, u0, u):
        return _gauss_legendre(self._speed, u0, u, _GL16)

    def param_at(self, s):
        """Spline parameter ``u`` with ``arc_table(u) = s``; ``s`` is clamped to ``[0, L]``."""
        s = np.asarray(s, dtype=np.float64)
        scalar = s.ndim == 0
        s = np.clip(np.atleast_1d(s), 0.0, self.total_length)
        u_tab, s_tab = self._arc_u, self._arc_s
        k = np.clip(np.searchsorted(s_tab, s, side="right") - 1, 0, len(s_tab) - 2)
        u0, u1 = u_tab[k], u_tab[k + 1]
        target = s - s_tab[k]
        width = s_tab[k + 1] - s_tab[k]
        frac = np.divide(target, width, out=np.zeros_like(target), where=width > 0)
        u = u0 + frac * (u1 - u0)
        lo, hi = u0.copy(), u1.copy()
        tol = 1e-12 * max(self.total_length, 1e-300)
        for _ in range(_MAX_NEWTON_STEPS):
            err = self._partial_arc(u0, u) - target
            active = np.abs(err) > tol
            if not active.any():
                break
            hi = np.where(active & (err > 0), u, hi)
            lo = np.where(active & (err < 0), u, lo)
            speed = self._speed(u)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = u - err / speed
            inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
            u = np.where(active, np.where(inside, newton, 0.5 * (lo + hi)), u)
        return u[0] if scalar else u

    def eval(self, s):
        """Joint position at arc length ``s`` (scalar -> ``(D,)``, array -> ``(n, D)``)."""
        return self._spline(self.param_at(s))

    def derivatives(self, s):
        """Return ``(q, dq/ds, d2q/ds2)`` at arc length ``s``."""
        s = np.asarray(s, dtype=np.float64)
        u = self.param_at(s)
        q = self._spline(u)
        du = np.atleast_2d(self._spline(u, 1))
        ddu = np.atleast_2d(self._spline(u, 2))
        speed = np.linalg.norm(du, axis=-1, keepdims=True)
        safe = np.where(speed > 0, speed, 1.0)
        tangent = np.where(speed > 0, du / safe, 0.0)
        normal_part = ddu - (ddu * tangent).sum(axis=-1, keepdims=True) * tangent
        second = np.where(speed > 0, normal_part / safe**2, 0.0)
        if s.ndim == 0:
            return q, tangent[0], second[0]
        return q, tangent, second

    def curvature(self, s):
        return np.linalg.norm(self.derivatives(s)[2], axis=-1)

    def __repr__(self):
        return (
            f"CubicPath(dim={self.dim}, num_knots={self.num_knots}, "
            f"total_length={self.total_length:.6g})"
        )


@dataclass(frozen=True)
class KnotWindow:
    """Sliding window of ``N`` state knots around the current path position.

    ``l_state`` is measured from the current path position to the last distinct
    window knot, ``offset`` from the first window knot to the current position.
    """

    knots: np.ndarray
    l_state: float
    offset: float
    start_index: int


@dataclass(frozen=True)
class StateKnots:
    """Knots placed on a path together with their arc lengths along that same path.

    :func:`knot_window` accepts it in place of a :class:`CubicPath`, so windows
    over state knots are indexed by the arc length of the path they came from.
    """

    knots: np.ndarray
    knot_arc_lengths: np.ndarray
    total_length: float

    @property
    def num_knots(self):
        return self.knots.shape[0]

    @property
    def dim(self):
        return self.knots.shape[1]


def build_path(knots, parameterization="chord"):
    """Natural cubic spline through ``knots``.

    Args:
        knots: sequence of ``M >= 2`` joint vectors of equal dimension ``D >= 1``.
        parameterization: ``"chord"`` (cumulative Euclidean knot distance) or ``"uniform"``.

    Raises:
        ValueError: fewer than 2 knots, ragged dimensions, or a zero-length chord
            under chord parameterization.
    """
    parameterization = Parameterization(parameterization)
    try:
        knots = np.array(knots, dtype=np.float64)
    except ValueError as e:
        raise ValueError(f"knots must share one dimension: {e}") from e
    if knots.ndim == 1:
        raise ValueError("knots must be a sequence of joint vectors, got a flat array")
    if knots.ndim != 2 or knots.shape[1] < 1:
        raise ValueError(f"knots must have shape (M, D) with D >= 1, got {knots.shape}")
    if knots.shape[0] < 2:
        raise ValueError(f"a path needs at least 2 knots, got {knots.shape[0]}")
    if not np.all(np.isfinite(knots)):
        raise ValueError("knots must be finite")

    if parameterization is Parameterization.CHORD:
        chords = np.linalg.norm(np.diff(knots, axis=0), axis=1)
        if np.any(chords == 0.0):
            bad = int(np.flatnonzero(chords == 0.0)[0])
            raise ValueError(
                f"knots {bad} and {bad + 1} are identical, chord parameterization needs distinct consecutive knots"
            )
        params = np.concatenate([[0.0], np.cumsum(chords)])
    else:
        params = np.arange(knots.shape[0], dtype=np.float64)

    spline = CubicSpline(params, knots, axis=0, bc_type="natural")
    return CubicPath(knots, params, spline)


def curvature(path, s):
    """Norm of the second arc-length derivative of the joint vector at ``s``."""
    return path.curvature(s)


def sample_arc_lengths(path, n, strategy="distance", grid_size=CURVATURE_GRID_SIZE):
    """Arc lengths of ``n`` knots placed by equal arc length or equal integrated curvature."""
    if n < 2:
        raise ValueError(f"need at least 2 knots, got n={n}")
    strategy = SamplingStrategy(strategy)
    length = path.total_length
    uniform = np.linspace(0.0, length, n)
    if strategy is SamplingStrategy.DISTANCE or length == 0.0:
        return uniform

    grid = np.linspace(0.0, length, max(int(grid_size), 2))
    integrated = cumulative_trapezoid(path.curvature(grid), grid, initial=0.0)
    total = integrated[-1]
    if total < STRAIGHT_PATH_EPS:
        logger.debug(f"integrated curvature {total:.3g} below threshold, sampling by distance")
        return uniform
    # flat stretches of K(s) would make the inverse ambiguous
    integrated = integrated + 1e-12 * total * grid / length
    targets = np.linspace(0.0, integrated[-1], n)
    s = np.interp(targets, integrated, grid)
    s[0], s[-1] = 0.0, length
    return s


def sample_knots(path, n, strategy="distance", grid_size=CURVATURE_GRID_SIZE):
    """``(n, D)`` knots on ``path``; the endpoints are always included."""
    return path.eval(sample_arc_lengths(path, n, strategy, grid_size))


def resample(path, n, strategy="distance", parameterization="chord"):
    """Rebuild ``path`` through ``n`` knots placed by ``strategy``."""
    return build_path(sample_knots(path, n, strategy), parameterization)


def state_knots(path, n, strategy="distance"):
    """``n`` knots on ``path`` keyed by their arc lengths along ``path`` itself."""
    s = sample_arc_lengths(path, n, strategy)
    knots = np.atleast_2d(path.eval(s))
    s = np.array(s, dtype=np.float64)
    knots.setflags(write=False)
    s.setflags(write=False)
    return StateKnots(knots, s, path.total_length)


def knot_window(path, progress, n):
    """Window of ``n`` knots starting at the last knot at or before ``progress``.

    Near the path end the final knot is repeated so the window length stays ``n``.
    """
    if n < 1:
        raise ValueError(f"window size must be positive, got {n}")
    s_knots = path.knot_arc_lengths
    num = len(s_knots)
    progress = min(max(float(progress), 0.0), path.total_length)
    start = int(np.searchsorted(s_knots, progress, side="right")) - 1
    start = min(max(start, 0), num - 2)
    idx = np.minimum(np.arange(start, start + n), num - 1)
    last = int(idx[-1])
    return KnotWindow(
        knots=path.knots[idx].copy(),
        l_state=max(float(s_knots[last]) - progress, 0.0),
        offset=max(progress - float(s_knots[start]), 0.0),
        start_index=start,
    )


def _polyline_length(points):
    return float(np.linalg.norm(np.diff(points, axis=0), axis=-1).sum())


def dense_length(path, s0, s1, segments=10000):
    """Polyline length of ``path`` sampled at ``segments`` steps between two arc lengths."""
    grid = np.linspace(s0, s1, segments + 1)
    return _polyline_length(path.eval(grid))