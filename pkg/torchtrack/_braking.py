# Array-level kernels behind ``torchtrack.limits``.
#
# Everything here works on flat per-joint arrays of equal shape ``(B,)`` so a
# whole robot, or several candidate accelerations per joint, are processed in
# one call. Joints never interact.
#
# Braking law
# -----------
# With w = v + a*dt/2 the piecewise-linear acceleration profile obeys
#     w[k+1] = w[k] + dt * a[k+1]
# so stopping in K steps (v = a = 0 at step K) means picking a[1..K] with
# a[K] = 0, sum(a) = -w/dt, accelerations inside [a_min, a_max] and increments
# inside [j_min*dt, j_max*dt]. For a fixed K the pointwise bounds L[i] <= a[i] <= H[i]
# are exact and any clip(c, L, H) is admissible, so the plan is found in closed
# form. Three nested families of caps on H are tried in order:
#   1. while a > 0 (after mirroring so the joint moves towards +), keep ramping
#      the acceleration down at full jerk through zero, then stay <= 0;
#   2. ramp down at least at full jerk while positive, then stay <= 0;
#   3. no cap.
# Family 1 reproduces the ramp-to-zero velocity peak v + a^2/(2|j_min|), family 2
# never reverses the velocity, family 3 always exists. Only the first action of
# the plan is applied; rolling the law forward gives the braking trajectory.
#
# Typical states brake within a few steps, so plans are searched over a short
# horizon first and only joints needing a longer or non-first-family plan go
# through the full search.

from typing import NamedTuple

import numpy as np

# |v|, |a| at or below this count as rest
REST_TOL = 1e-12
# slack of the safety test against the limits
SAFETY_SLACK = 1e-10
# bisection stops once the bracket is this fraction of the acceleration span
BISECTION_RTOL = 1e-9


class Bounds(NamedTuple):
    p_min: np.ndarray
    p_max: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    a_min: np.ndarray
    a_max: np.ndarray
    j_min: np.ndarray
    j_max: np.ndarray

    def tile(self, reps):
        return Bounds(*(np.tile(x, reps) for x in self))

    def take(self, idx):
        return Bounds(*(x[idx] for x in self))


def advance(p, v, a, a_next, dt):
    """End of an interval with linearly interpolated acceleration."""
    v_next = v + 0.5 * (a + a_next) * dt
    p_next = p + v * dt + (2.0 * a + a_next) * dt * dt / 6.0
    return p_next, v_next


def position_at(p, v, a, a_next, dt, tau):
    return p + v * tau + 0.5 * a * tau * tau + (a_next - a) * tau**3 / (6.0 * dt)


def interval_extrema(p, v, a, a_next, dt):
    """Exact min/max of position and velocity over one interval.

    Returns ``(p_lo, p_hi, v_lo, v_hi)``.
    """
    p_end, v_end = advance(p, v, a, a_next, dt)
    v_lo = np.minimum(v, v_end)
    v_hi = np.maximum(v, v_end)
    # velocity is extremal where the acceleration crosses zero
    crossing = a * a_next < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_v = np.where(crossing, a * dt / (a - a_next), 0.0)
    v_mid = v + 0.5 * a * tau_v
    v_lo = np.where(crossing, np.minimum(v_lo, v_mid), v_lo)
    v_hi = np.where(crossing, np.maximum(v_hi, v_mid), v_hi)

    # position is extremal where the velocity crosses zero
    c2 = 0.5 * (a_next - a) / dt
    c1 = a
    c0 = v
    p_lo = np.minimum(p, p_end)
    p_hi = np.maximum(p, p_end)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = c1 * c1 - 4.0 * c2 * c0
        root = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (c1 + np.where(c1 >= 0.0, root, -root))
        quad = np.abs(c2) > 1e-300
        tau1 = np.where(quad, q / c2, np.where(c1 != 0.0, -c0 / c1, np.nan))
        tau2 = np.where(quad & (q != 0.0), c0 / q, np.nan)
        for tau in (tau1, tau2):
            valid = (disc >= 0.0) & np.isfinite(tau) & (tau > 0.0) & (tau < dt)
            p_tau = position_at(p, v, a, a_next, dt, np.where(valid, tau, 0.0))
            p_lo = np.where(valid, np.minimum(p_lo, p_tau), p_lo)
            p_hi = np.where(valid, np.maximum(p_hi, p_tau), p_hi)
    return p_lo, p_hi, v_lo, v_hi


def interval_ok(p, v, a, a_next, bounds, dt, slack=SAFETY_SLACK):
    p_lo, p_hi, v_lo, v_hi = interval_extrema(p, v, a, a_next, dt)
    jerk = (a_next - a) / dt
    return (
        (p_lo >= bounds.p_min - slack)
        & (p_hi <= bounds.p_max + slack)
        & (v_lo >= bounds.v_min - slack)
        & (v_hi <= bounds.v_max + slack)
        & (a_next >= bounds.a_min - slack)
        & (a_next <= bounds.a_max + slack)
        & (jerk >= bounds.j_min - slack / dt)
        & (jerk <= bounds.j_max + slack / dt)
    )


def velocity_upper(v, a, v_max, j_dec, dt):
    """Largest next acceleration keeping v below ``v_max`` over the interval and
    during a full-jerk ramp of the acceleration back to zero afterwards."""
    c = v + 0.5 * a * dt - v_max
    disc = 0.25 * dt * dt - 2.0 * np.minimum(c, 0.0) / j_dec
    ramp_root = -2.0 * np.minimum(c, 0.0) / (0.5 * dt + np.sqrt(disc))
    headroom = np.maximum(v_max - v, 1e-300)
    # a > 0 with no room at a' = 0: the interior velocity peak binds
    interior = a - a * a * dt / (2.0 * headroom)
    return np.where(c <= 0.0, ramp_root, interior)


def plan_steps(bounds, dt):
    """Steps of a braking plan from any state inside ``bounds`` moving at most
    the full velocity span; the planner's short pass searches this far."""
    v_span = bounds.v_max - bounds.v_min
    a_span = bounds.a_max - bounds.a_min
    a_weak = np.minimum(-bounds.a_min, bounds.a_max)
    j_weak = np.minimum(-bounds.j_min, bounds.j_max)
    steps = np.ceil(v_span / (a_weak * dt)) + np.ceil(a_span / (j_weak * dt)) + 2
    return int(np.max(steps))


def braking_horizon(bounds, dt):
    """Search horizon (steps) of the braking planner for these bounds."""
    return 2 * plan_steps(bounds, dt) + 4


def at_rest(v, a):
    return (np.abs(v) <= REST_TOL) & (np.abs(a) <= REST_TOL)


# plan length -> (i, K - i, i <= K) grids, which depend on nothing else
_PLAN_GRIDS = {}


def _plan_grid(n):
    grid = _PLAN_GRIDS.get(n)
    if grid is not None:
        return grid
    i = np.arange(1, n + 1, dtype=np.float64)
    remaining = i[None, :, None] - i[None, None, :]
    inside = remaining >= 0.0
    for arr in (i, remaining, inside):
        arr.setflags(write=False)
    _PLAN_GRIDS[n] = (i, remaining, inside)
    return _PLAN_GRIDS[n]


def _plan(v, a, bounds, dt, n):
    """First action of the shortest plan within ``n`` steps.

    Returns ``(a_next, found, family)`` with ``family`` the index of the cap
    family the plan was taken from.
    """
    w = v + 0.5 * a * dt
    sign = np.where(w > 0.0, 1.0, np.where(w < 0.0, -1.0, np.where(a >= 0.0, 1.0, -1.0)))
    flip = sign < 0.0
    a0 = sign * a
    target = -np.abs(w) / dt
    a_min = np.where(flip, -bounds.a_max, bounds.a_min)
    a_max = np.where(flip, -bounds.a_min, bounds.a_max)
    j_dn = np.where(flip, -bounds.j_max, bounds.j_min) * dt
    j_up = np.where(flip, -bounds.j_min, bounds.j_max) * dt

    i, remaining, inside = _plan_grid(n)
    # (B, K, i) grids, K = plan length
    ii = i[None, None, :]
    col = (slice(None), None, None)
    down = a0[col] + ii * j_dn[col]
    up = a0[col] + ii * j_up[col]
    lower = np.maximum(np.maximum(a_min[col], down), -remaining * j_up[col])
    upper = np.minimum(np.minimum(a_max[col], up), -remaining * j_dn[col])

    # caps of the three plan families, shape (B, i)
    descent = np.maximum(a0[:, None] + i[None, :] * j_dn[:, None], a_min[:, None])
    first_nonpos = np.argmax(descent <= 0.0, axis=1)
    z_m = np.take_along_axis(descent, first_nonpos[:, None], axis=1)
    after = np.minimum(0.0, z_m + (i[None, :] - 1 - first_nonpos[:, None]) * j_up[:, None])
    forced = np.where(np.arange(n)[None, :] <= first_nonpos[:, None], descent, after)
    no_reverse = np.maximum(a0[:, None] + i[None, :] * j_dn[:, None], 0.0)
    forced = np.where((a0 > 0.0)[:, None], forced, no_reverse)
    caps = np.stack([forced, no_reverse, np.full_like(forced, np.inf)], axis=1)

    # (B, family, K, i)
    hi = np.minimum(upper[:, None], caps[:, :, None, :])
    lo = np.broadcast_to(lower[:, None], hi.shape)
    mask = inside[:, None]
    lo = np.where(mask, lo, 0.0)
    hi = np.where(mask, hi, 0.0)
    tol = 1e-12 * (1.0 + np.abs(target))[:, None, None]
    ordered = np.all(lo <= hi + tol[..., None], axis=-1)
    sum_lo = lo.sum(axis=-1)
    sum_hi = hi.sum(axis=-1)
    t = target[:, None, None]
    feasible = ordered & (sum_lo <= t + tol) & (t <= sum_hi + tol)

    flat = feasible.reshape(len(a0), -1)
    found = flat.any(axis=1)
    pick = np.argmax(flat, axis=1)
    family, k_idx = np.divmod(pick, n)
    rows = np.arange(len(a0))
    lo_sel = lo[rows, family, k_idx]
    hi_sel = np.maximum(hi[rows, family, k_idx], lo_sel)

    # solve sum(clip(c, lo, hi)) = target, piecewise linear in c
    breaks = np.sort(np.concatenate([lo_sel, hi_sel], axis=1), axis=1)
    totals = np.clip(breaks[:, :, None], lo_sel[:, None, :], hi_sel[:, None, :]).sum(axis=-1)
    reached = totals >= target[:, None]
    j = np.where(reached.any(axis=1), np.argmax(reached, axis=1), breaks.shape[1] - 1)
    j_prev = np.maximum(j - 1, 0)
    b1, b0 = breaks[rows, j], breaks[rows, j_prev]
    f1, f0 = totals[rows, j], totals[rows, j_prev]
    slope = f1 - f0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(
            (j > 0) & (slope > 0.0), b0 + (target - f0) * (b1 - b0) / slope, b1
        )
    first = np.clip(c, lo_sel[:, 0], hi_sel[:, 0])
    return sign * first, found, family


def braking_action(v, a, bounds, dt, horizon, short=None):
    """First acceleration of the braking plan.

    Returns ``(a_next, found)``; ``found`` is False where no plan exists within
    ``horizon`` steps. Joints at rest get 0.

    With ``short`` set, plans are first searched within ``short`` steps. A
    first-family plan found there is the one the full search picks, so only
    the remaining joints are planned again over the whole ``horizon``.
    """
    resting = at_rest(v, a)
    if short is None or short >= horizon:
        a_next, found, _ = _plan(v, a, bounds, dt, horizon)
    else:
        a_next, found, family = _plan(v, a, bounds, dt, short)
        redo = np.flatnonzero(~resting & (~found | (family != 0)))
        if redo.size:
            a_full, found_full, _ = _plan(v[redo], a[redo], bounds.take(redo), dt, horizon)
            a_next[redo] = a_full
            found[redo] = found_full
    return np.where(resting, 0.0, a_next), found | resting


def brake_rollout(p, v, a, bounds, dt, horizon=None, max_steps=None, record=False, short=None):
    """Roll the braking law until every joint rests.

    Returns ``(ok, accelerations)`` where ``ok`` marks joints whose braking
    trajectory stays within ``bounds`` and reaches rest, and ``accelerations``
    is the applied per-step acceleration list when ``record`` is set.
    Without ``record`` only joints still moving and still passing are rolled on.
    """
    if horizon is None:
        horizon = braking_horizon(bounds, dt)
    if max_steps is None:
        max_steps = 4 * horizon + 8
    p, v, a = (np.array(x, dtype=np.float64) for x in (p, v, a))
    ok = np.ones(np.shape(v), dtype=bool)
    if not record:
        live = np.flatnonzero(~at_rest(v, a))
        sub = bounds.take(live)
        for _ in range(max_steps):
            if not live.size:
                break
            pl, vl, al = p[live], v[live], a[live]
            a_next, found = braking_action(vl, al, sub, dt, horizon, short)
            passed = found & interval_ok(pl, vl, al, a_next, sub, dt)
            p[live], v[live] = advance(pl, vl, al, a_next, dt)
            a[live] = a_next
            ok[live] &= passed
            keep = passed & ~at_rest(v[live], a_next)
            live = live[keep]
            sub = sub.take(keep)
        ok &= at_rest(v, a)
        return ok, []
    history = []
    for _ in range(max_steps):
        moving = ~at_rest(v, a)
        if not (moving & ok).any():
            break
        a_next, found = braking_action(v, a, bounds, dt, horizon, short)
        a_next = np.where(moving, a_next, 0.0)
        ok &= found & interval_ok(p, v, a, a_next, bounds, dt)
        p, v = advance(p, v, a, a_next, dt)
        a = a_next
        history.append(a_next)
    ok &= at_rest(v, a)
    return ok, history


def candidate_ok(p, v, a, a_next, bounds, dt, horizon, short=None):
    """Safety test of a next acceleration: the interval itself and the braking
    trajectory started at its end respect every limit."""
    ok = interval_ok(p, v, a, a_next, bounds, dt)
    p_next, v_next = advance(p, v, a, a_next, dt)
    brake_ok, _ = brake_rollout(p_next, v_next, a_next, bounds, dt, horizon, short=short)
    return ok & brake_ok


def bisect_safe(p, v, a, good, bad, bounds, dt, horizon, iterations=60, short=None):
    """Move ``bad`` towards ``good`` until the safety test passes; returns the
    last passing value (``good`` side) per element.

    Only elements whose bracket is still wider than :data:`BISECTION_RTOL`
    times the acceleration span are tested again.
    """
    span = np.maximum(np.abs(bounds.a_max - bounds.a_min), 1.0)
    good = np.array(good, dtype=np.float64)
    bad = np.array(bad, dtype=np.float64)
    active = np.flatnonzero(np.abs(bad - good) > BISECTION_RTOL * span)
    for _ in range(iterations):
        if not active.size:
            break
        mid = 0.5 * (good[active] + bad[active])
        passed = candidate_ok(
            p[active], v[active], a[active], mid, bounds.take(active), dt, horizon, short
        )
        good[active] = np.where(passed, mid, good[active])
        bad[active] = np.where(passed, bad[active], mid)
        active = active[np.abs(bad[active] - good[active]) > BISECTION_RTOL * span[active]]
    return good
