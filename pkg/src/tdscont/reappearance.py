"""Delay-shift family maps for periodic orbits.

A periodic solution of the delay system persists when the delay is shifted by
whole periods: the delayed argument enters the periodic boundary value
problem only through (s - tau/T) mod 1, so tau -> tau + k T leaves every
residual entry unchanged. This module implements that family map, the
traveling-wave reparametrization tau - T, multi-pulse branch generation from
it, pulse classification, and verification of which Floquet multipliers carry
over to the shifted delay (only the resonant ones do in general).
"""

import dataclasses

import numpy as np

from . import continuation
from .floquet import floquet_multipliers
from .orbit import orbit_diagnostics, solve_orbit

ONE_PULSE = "one-pulse"
BOUND_MULTI = "bound multi-pulse"
UNBOUND_MULTI = "unbound multi-pulse"
NON_TDS = "non-TDS"


@dataclasses.dataclass
class ReappearanceRecord:
    """Bookkeeping for one application of the delay-shift map."""

    source: object
    k: int
    tau_new: float
    pulses_per_delay: int
    classification: str


def reappear_orbit(orbit, k):
    """The same solution at delay tau + k T; exact, no re-solve needed."""
    shift = float(k) * orbit.period
    return orbit.with_params(orbit.params.replace(tau=orbit.params.tau + shift))


def reappear_record(orbit, k, eps_loc=1e-2):
    """Shifted orbit plus a ReappearanceRecord describing it."""
    out = reappear_orbit(orbit, k)
    tau = out.params.tau
    if tau > 0:
        cls = classify_pulses(out, eps_loc=eps_loc)
        npk = int(round(orbit_diagnostics(out).peaks_per_delay))
    else:
        cls, npk = NON_TDS, 0
    rec = ReappearanceRecord(source=orbit, k=int(k), tau_new=tau,
                             pulses_per_delay=npk, classification=cls)
    return out, rec


def classify_pulses(orbit, eps_loc=1e-2, n_samples=4096):
    """Pulse classification of a converged orbit at positive delay.

    A pulsing solution must revisit a neighbourhood of the origin somewhere
    along the orbit; the classes separate by the number of x peaks per
    delay-length window and by whether any inter-peak trough of the distance
    to the origin stays farther than eps_loc (relative to the x amplitude)
    from the origin: if so the peaks travel as a bound group, otherwise they
    are mutually unbound.
    """
    if orbit.params.tau <= 0:
        return NON_TDS
    diag = orbit_diagnostics(orbit, n_samples=n_samples)
    if not np.isfinite(diag.peaks_per_delay):
        return NON_TDS
    n_delay = int(round(diag.peaks_per_delay))
    if n_delay < 1 or diag.peak_count < 1:
        return NON_TDS
    s = np.arange(n_samples) / n_samples
    u = orbit.evaluate(s)
    r = np.linalg.norm(u, axis=1)
    eps = eps_loc * (u[:, 0].max() - u[:, 0].min())
    if r.min() > eps:
        return NON_TDS
    if n_delay == 1:
        return ONE_PULSE
    # troughs of the origin distance between cyclically consecutive peaks
    idx = np.searchsorted(s, diag.peak_phases) % n_samples
    troughs = []
    for i, j in zip(idx, np.roll(idx, -1)):
        seg = r[i:j] if j > i else np.concatenate([r[i:], r[:j]])
        if seg.size:
            troughs.append(seg.min())
    if troughs and max(troughs) > eps:
        return BOUND_MULTI
    return UNBOUND_MULTI


def _shift_point(pt, k):
    T = pt.period
    p2 = pt.params.replace(tau=pt.params.tau + float(k) * T)
    orb2 = pt.orbit.with_params(p2) if pt.orbit is not None else None
    return dataclasses.replace(pt, params=p2, delta=T - p2.tau, orbit=orb2)


def _shift_event(ev, k):
    p2 = ev.params.replace(tau=ev.params.tau + float(k) *
                           ev.info.get("period", np.nan))
    orb2 = ev.orbit.with_params(p2) if ev.orbit is not None else None
    return dataclasses.replace(ev, params=p2, orbit=orb2)


def _shift_branch(branch, k, classify):
    pts = []
    for pt in branch.points:
        q = _shift_point(pt, k)
        if classify and q.orbit is not None:
            q = dataclasses.replace(q, classification=classify_pulses(q.orbit))
        pts.append(q)
    return continuation.Branch(
        free_params=branch.free_params, points=pts,
        events=[_shift_event(ev, k) for ev in branch.events],
        stop_hits=[_shift_point(h, k) for h in branch.stop_hits],
        status=branch.status, problem=None, seed_tangent=None)


def traveling_wave_view(branch):
    """The branch under the pointwise shift k = -1 (delay tau - T).

    This is the representation in which pulsing families limit onto
    connecting orbits: the shifted delay stays finite while the period grows
    beyond bounds. Located events (doubling points in particular) are shifted
    along with their orbits.
    """
    return _shift_branch(branch, -1, classify=False)


def generate_multipulse(branch, k):
    """Pointwise reappearance of a whole branch; k extra pulses per delay.

    Applied to a one-pulse family with T / tau near 1, the image is a family
    with k + 1 peaks per delay interval and slope near 1 / (k + 1) in the
    (tau, T) diagram. Points that carry profiles get a pulse classification.
    """
    if k == 0:
        return branch
    return _shift_branch(branch, k, classify=True)


@dataclasses.dataclass
class Lemma1Report:
    """Outcome of tracking one resonant multiplier across a delay shift."""

    j: int
    k: int
    tau_from: float
    tau_to: float
    multiplier: complex
    distance: float
    tol: float
    passed: bool
    control_distance: float = np.nan


def _resonant_target(j):
    if j == 1:
        return 1.0
    if j == 2:
        return -1.0
    raise ValueError("only j = 1 (trivial) and j = 2 (doubling) are exercised")


def lemma1_verify(orbit, j, k, tol=None, pre_tol=1e-4, control=False,
                  n_lead=8):
    """Track a j-th root-of-unity multiplier across the shift tau + j k T.

    The orbit must carry a multiplier mu with mu**j near 1 (the trivial
    multiplier for j = 1, the doubling multiplier -1 for j = 2). The orbit is
    re-solved at the shifted delay and the report gives the distance from mu
    to the nearest multiplier there. With control=True the largest clearly
    non-resonant multiplier is tracked the same way as a contrast; nothing
    guarantees it persists, and as a rule it moves by much more.
    """
    if tol is None:
        tol = 1e-8 if j == 1 else 1e-6
    target = _resonant_target(j)
    fs = floquet_multipliers(orbit, n_lead=n_lead)
    mult = fs.multipliers
    mu = mult[np.argmin(np.abs(mult - target))]
    if abs(mu**j - 1.0) > pre_tol:
        raise ValueError(f"no multiplier with power {j} near 1 "
                         f"(closest: {mu:.6g})")
    shifted = reappear_orbit(orbit, j * k)
    resolved = solve_orbit(shifted, tol=1e-11)
    fs2 = floquet_multipliers(resolved, n_lead=n_lead)
    dist = float(np.min(np.abs(fs2.multipliers - mu)))
    ctrl = np.nan
    if control:
        rest = mult[np.abs(mult - target) > 10 * pre_tol]
        rest = rest[np.abs(np.abs(rest) - 1.0) > 1e-3]
        if rest.size:
            nu = rest[np.argmax(np.abs(rest))]
            ctrl = float(np.min(np.abs(fs2.multipliers - nu)))
    return Lemma1Report(j=j, k=k, tau_from=orbit.params.tau,
                        tau_to=resolved.params.tau, multiplier=mu,
                        distance=dist, tol=tol, passed=bool(dist < tol),
                        control_distance=ctrl)
