"""Method-of-steps initial-value integration of the delayed model.

The solution is advanced interval by interval with an embedded Runge-Kutta
pair; no interval exceeds the delay, so the delayed argument always falls in
already-completed dense output. Dense output is piecewise cubic Hermite on
the accepted step points. Only positive delays are integrable this way;
negative delays live in the boundary-value module.
"""

import dataclasses

import numpy as np
from scipy.integrate import solve_ivp

from .model import dde_rhs


class BlowUpError(RuntimeError):
    """State norm exceeded the blow-up bound; carries the partial result."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


def _hermite_eval(bp, vals, ders, t):
    """Piecewise cubic Hermite evaluation on nodes bp with slopes ders."""
    t = np.asarray(t, dtype=float)
    idx = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, len(bp) - 2)
    h = bp[idx + 1] - bp[idx]
    s = (t - bp[idx]) / h
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    out = (h00[..., None] * vals[idx] + (h10 * h)[..., None] * ders[idx]
           + h01[..., None] * vals[idx + 1]
           + (h11 * h)[..., None] * ders[idx + 1])
    return out


@dataclasses.dataclass
class HistorySegment:
    """Initial function on one delay interval, piecewise cubic Hermite.

    breakpoints are ordered times spanning [-tau, 0]; values and derivs hold
    the state and its slope at each breakpoint. corners lists times where the
    function is not smooth (they are propagated forward as forced step
    endpoints by the integrator).
    """

    breakpoints: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    corners: tuple = ()

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.derivs = np.atleast_2d(np.asarray(self.derivs, dtype=float))
        if self.breakpoints.ndim != 1 or len(self.breakpoints) < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if abs(self.breakpoints[-1]) > 1e-12 * max(1.0, self.span):
            raise ValueError("history must end at time 0")

    @property
    def span(self):
        return float(self.breakpoints[-1] - self.breakpoints[0])

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.breakpoints[0], self.breakpoints[-1]
        pad = 1e-10 * max(1.0, self.span)
        if np.any(t < lo - pad) or np.any(t > hi + pad):
            raise ValueError(f"evaluation outside history span "
                             f"[{lo:g}, {hi:g}]")
        return _hermite_eval(self.breakpoints, self.values, self.derivs, t)


def constant_history(state, tau):
    """History identically equal to one state on [-tau, 0]."""
    state = np.asarray(state, dtype=float)
    bp = np.array([-float(tau), 0.0])
    vals = np.tile(state, (2, 1))
    return HistorySegment(bp, vals, np.zeros_like(vals))


def history_from_function(fn, tau, n=201, dfn=None):
    """History sampled from a callable t -> state on [-tau, 0].

    Slopes come from dfn when given, otherwise from a centered difference
    (interior nodes) and one-sided differences at the ends.
    """
    bp = np.linspace(-float(tau), 0.0, n)
    vals = np.array([np.asarray(fn(t), dtype=float) for t in bp])
    if dfn is not None:
        ders = np.array([np.asarray(dfn(t), dtype=float) for t in bp])
    else:
        ders = np.gradient(vals, bp, axis=0)
    return HistorySegment(bp, vals, ders)


def history_from_orbit(orbit, tau=None, per_interval=8):
    """One delay interval of a periodic orbit as an initial history.

    The orbit's own (adaptive) mesh sets the node placement; each mesh
    interval is subdivided so the Hermite representation resolves the
    profile to the orbit's native accuracy. Phase 0 of the orbit sits at
    time 0.
    """
    if tau is None:
        tau = orbit.params.tau
    tau = float(tau)
    if tau <= 0:
        raise ValueError("history span must be positive")
    T = orbit.period
    mesh = orbit.mesh
    s_ref = np.unique(np.concatenate(
        [np.linspace(mesh[i], mesh[i + 1], per_interval + 1)
         for i in range(len(mesh) - 1)]))
    # cover [-tau, 0] with whole-period copies of the reference grid
    n_per = int(np.ceil(tau / T))
    ts = np.concatenate(
        [(s_ref[:-1] - 1.0 - k) * T for k in range(n_per - 1, -1, -1)]
        + [np.array([0.0])])
    ts = ts[ts >= -tau - 1e-12 * T]
    if ts[0] > -tau:
        ts = np.concatenate([[-tau], ts])
    s = (ts / T) % 1.0
    vals = orbit.evaluate(s)
    ders = orbit.derivative(s) / T
    return HistorySegment(ts, vals, ders)


@dataclasses.dataclass
class Trajectory:
    """Dense solution on [0, t_end]: cubic Hermite on accepted step points."""

    params: object
    ts: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    history: HistorySegment
    n_steps: int = 0
    n_rhs: int = 0

    @property
    def t_end(self):
        return float(self.ts[-1])

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        pad = 1e-10 * max(1.0, self.t_end)
        if np.any(t < -pad) or np.any(t > self.t_end + pad):
            raise ValueError(f"evaluation outside [0, {self.t_end:g}]")
        return _hermite_eval(self.ts, self.values, self.derivs, t)

    def evaluate_with_history(self, t):
        """Evaluation extended back over the initial history segment."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (3,))
        past = t < 0
        if np.any(past):
            out[past] = self.history.evaluate(t[past])
        if np.any(~past):
            out[~past] = self.evaluate(t[~past])
        return out


def _forced_times(tau, t_end, corners):
    ts = set(np.arange(0.0, t_end, tau).tolist())
    for c in corners:
        for k in (1, 2, 3):
            t = c + k * tau
            if 0.0 < t < t_end:
                ts.add(float(t))
    ts.add(float(t_end))
    ts.discard(0.0)
    return np.array(sorted(ts))


def integrate(h, p, t_end, tol=1e-6, cap_scale=8.0, blowup=1e6):
    """Advance the delayed system from history h to time t_end.

    Local error per step is held below tol by an embedded pair, and the
    accepted step is additionally capped at cap_scale * sqrt(tol) so the
    dense-output (and hence delayed-lookup) error shrinks superlinearly as
    tol is tightened. Corner times of the history propagate forward by up to
    three delays as forced step endpoints. Raises BlowUpError (with the
    partial trajectory attached) if the state norm passes the blow-up bound.
    """
    tau = float(p.tau)
    if tau <= 0:
        raise ValueError("integration needs a positive delay; negative "
                         "delays are boundary-value territory")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if abs(h.span - tau) > 1e-9 * max(1.0, tau):
        raise ValueError(f"history span {h.span:g} does not match the "
                         f"delay {tau:g}")

    corners = set(float(c) for c in h.corners)
    corners.add(0.0)                      # junction of history and solution
    forced = _forced_times(tau, float(t_end), corners)
    h_cap = min(tau, cap_scale * np.sqrt(tol))

    ts = [0.0]
    vals = [h.evaluate(0.0).reshape(3)]
    ders = [dde_rhs(vals[0], h.evaluate(-tau).reshape(3), p)]
    traj = Trajectory(p, np.array(ts), np.array(vals), np.array(ders), h)
    n_rhs = [0]

    def past(t):
        if t <= 0.0:
            return h.evaluate(t).reshape(3)
        return _hermite_eval(traj.ts, traj.values, traj.derivs,
                             min(t, traj.ts[-1])).reshape(3)

    def rhs(t, u):
        n_rhs[0] += 1
        return dde_rhs(u, past(t - tau), p)

    t0, u0 = 0.0, vals[0]
    for t1 in forced:
        sol = solve_ivp(rhs, (t0, t1), u0, method="RK45",
                        rtol=tol, atol=tol, max_step=h_cap,
                        first_step=min(h_cap, t1 - t0))
        if not sol.success:
            raise BlowUpError(f"integration failed at t = {t0:g}: "
                              f"{sol.message}", traj)
        seg_t = sol.t[1:]
        seg_u = sol.y[:, 1:].T
        # slopes for the new nodes look back at most one delay, so the
        # not-yet-extended dense output still covers every lookup
        seg_f = np.array([dde_rhs(u, past(t - tau), p)
                          for t, u in zip(seg_t, seg_u)])
        traj.ts = np.concatenate([traj.ts, seg_t])
        traj.values = np.concatenate([traj.values, seg_u])
        traj.derivs = np.concatenate([traj.derivs, seg_f])
        traj.n_steps += len(seg_t)
        if np.abs(seg_u).max() > blowup:
            raise BlowUpError(f"state norm exceeded {blowup:g} near "
                              f"t = {seg_t[-1]:g}", traj)
        t0, u0 = t1, seg_u[-1]
    traj.n_rhs = n_rhs[0]
    return traj


def sample_uniform(traj, n, window=None):
    """n equally spaced state samples over the window (default full span)."""
    if n < 2:
        raise ValueError("need at least two samples")
    if window is None:
        window = (0.0, traj.t_end)
    t0, t1 = float(window[0]), float(window[1])
    pad = 1e-10 * max(1.0, traj.t_end)
    if t0 < -pad or t1 > traj.t_end + pad or t1 <= t0:
        raise ValueError("window outside the trajectory span")
    t = np.linspace(t0, t1, n)
    return t, traj.evaluate(t)


def export_trajectory(traj, path, n=None, window=None):
    """Write rows (t, x, y, z) at the step points or on a uniform grid."""
    if n is None and window is None:
        t, u = traj.ts, traj.values
    else:
        t, u = sample_uniform(traj, n or 1001, window)
    data = np.column_stack([t, u])
    np.savetxt(path, data, fmt="%.17g", delimiter="\t",
               header="t\tx\ty\tz")
    return path
