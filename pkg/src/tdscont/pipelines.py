"""End-to-end drivers: start solutions, staged parameter walks, delay runs.

Everything here composes the lower-level solvers into the runs the package
ships as presets: building start solutions on the instantaneous-feedback
plane (kappa = 0), lifting them into the delayed system through staged
two-parameter walks, producing pulsing solutions at large delay from
near-connecting orbits via the delay-shift map, and the long-period
two-plateau run that checks the extreme-delay reduction.
"""

import dataclasses

import numpy as np

from . import curves
from .asymptotic import period_two_points, reduce_state
from .continuation import (ContOpts, Recipe, RecipeError, Stage,
                           _tf_param_extremum, branch_switch_pd,
                           continue_homoclinic, continue_one_param, run_recipe)
from .floquet import leading_multipliers
from .mesh import Disc, uniform_mesh
from .model import ParameterSet, equilibria, hopf_points
from .orbit import (NewtonError, PeriodicOrbit, planar_homoclinic_seed,
                    remesh_orbit, solve_orbit)
from .reappearance import reappear_orbit

HOM_PERIOD = 200.0


# ------------------------------------------------------------ start builders

def homoclinic_lift_start(a, mu_tilde, n_int=140, n_homotopy=6,
                          period=HOM_PERIOD):
    """Near-connecting long-period orbit at kappa = 0 and the given a.

    The explicit planar loop seeds the orbit at mu_tilde = 0; the connection
    level mu is then re-solved while mu_tilde is walked to its target in a
    few steps (the planar loop only exists at mu_tilde = 0).
    """
    orb = planar_homoclinic_seed(ParameterSet(a=a), period=period,
                                 n_int=n_int)
    orb = solve_orbit(orb, free_params=("mu",), fix_period=True)
    if mu_tilde:
        first = np.sign(mu_tilde) * min(0.005, abs(mu_tilde))
        for mt in np.linspace(first, mu_tilde, n_homotopy):
            orb = solve_orbit(orb, orb.params.replace(mu_tilde=mt),
                              free_params=("mu",), fix_period=True)
    return orb


def _period_descent(orbit, tests, max_points, mu_window):
    """Walk the long-period family toward short periods.

    The family is nearly vertical in mu (exponentially flat near the
    connecting orbit), so the descent runs arclength in mu with the period
    free, seeded straight down in the period component.
    """
    n_nodes = orbit.disc().n_nodes
    seed = np.zeros(3 * n_nodes + 2)
    seed[3 * n_nodes] = -1.0
    opts = ContOpts(h0=0.5, hmax=4.0, max_points=max_points,
                    bounds={"mu": mu_window}, seed_direction=seed,
                    record_profiles=False)
    return continue_one_param(orbit, "mu", opts, tests=tests)


def _tf_pd_gated(period_cap=45.0):
    """Doubling test that blanks out on extreme-period points.

    Near the long-period end of the family the extreme multipliers overflow
    any sensible scale and their signs are numerically meaningless; the test
    returns nan there and otherwise tracks the most negative real multiplier
    plus one, which crosses zero exactly at a doubling.
    """
    def fn(ctx):
        if ctx.orbit.period > period_cap:
            return np.nan
        mult = leading_multipliers(ctx.orbit, k=6)
        real = mult[np.abs(mult.imag) < 1e-6 * (1 + np.abs(mult.real))].real
        neg = real[real < 0]
        if neg.size == 0:
            return 1.0
        return float(neg.min() + 1.0)

    fn.kind = "PeriodDoubling"
    fn.name = "pd"
    fn.needs_multipliers = False
    return fn


def _mu_window(mu0):
    return (0.0, 0.2) if mu0 > 0 else (-0.2, 0.0)


def pd_lift_start(a=-0.6414, mu_tilde=0.03, n_int=140):
    """Doubling point of the instantaneous system at the given a.

    Descends the periodic family from the near-connecting orbit until the
    gated doubling test fires, then solves the extended doubling system
    (orbit plus antiperiodic eigenfunction) with mu free.
    """
    orb = homoclinic_lift_start(a, mu_tilde, n_int=n_int)
    br = _period_descent(orb, [_tf_pd_gated()], 260,
                         _mu_window(orb.params.mu))
    good = [e for e in br.events if e.locator_residual < 1e-6]
    if not good:
        raise NewtonError("no doubling event located on the period descent")
    return curves.solve_pd_point(good[-1].orbit, "mu", tol=1e-10)


def fold_lift_start(a=-0.3852, mu_tilde=-0.03, n_int=140):
    """Periodic-orbit fold of the instantaneous system at the given a.

    Descends the periodic family watching the mu tangent component; events
    on the flat long-period segment (noise-scale mu wiggles) are discarded
    by requiring detachment from the starting mu level, and the first
    detached extremum is solved as an extended fold system.
    """
    orb = homoclinic_lift_start(a, mu_tilde, n_int=n_int)
    mu0 = orb.params.mu
    br = _period_descent(orb, [_tf_param_extremum("mu")], 80, _mu_window(mu0))
    good = [e for e in br.events
            if abs(e.params.mu - mu0) > 1e-3 * max(1.0, abs(mu0))]
    if not good:
        raise NewtonError("no detached fold event on the period descent")
    return curves.solve_fold_point(good[0].orbit, "mu", tol=1e-10)


def step_period(orbit, target, dT=2.0, free="mu"):
    """Walk the period to a target through bounded fixed-period re-solves.

    Direct large period jumps compress or stretch the profile too much for
    Newton; stepping by at most dT keeps every re-solve in its basin.
    """
    o = orbit
    while abs(o.period - target) > 1e-9:
        o = o.copy()
        o.period += float(np.clip(target - o.period, -dT, dT))
        o = solve_orbit(o, free_params=(free,), fix_period=True)
    return o


def two_pulse_start(pd=None, a=-0.7490, period=60.0, a_steps=12):
    """Two-pulse near-connecting orbit at the given a, from a doubling point.

    Branch-switches at the doubling (the doubled orbit is a bound pulse
    pair), grows the period along the doubled family, pins the period at a
    moderate value well inside the two-pulse plateau (past roughly T = 130
    the grown family drifts onto a separating-pair configuration, so the
    walk stays below that), and finally walks a to its target re-solving the
    connection level mu at each step.
    """
    if pd is None:
        pd = pd_lift_start()
    dbl = branch_switch_pd(pd.orbit, pd.eigenfunction, free="mu")
    n_nodes = dbl.disc().n_nodes
    seed = np.zeros(3 * n_nodes + 2)
    seed[3 * n_nodes] = 1.0
    opts = ContOpts(h0=0.5, hmax=4.0, max_points=100,
                    bounds={"mu": _mu_window(dbl.params.mu),
                            "T": (2.0, period + 10.0)},
                    seed_direction=seed, record_profiles=False)
    br = continue_one_param(dbl, "mu", opts, tests=[])
    pt = br.points[-1]
    U, T, pp = br.problem.system.unpack(pt.raw)
    orb = PeriodicOrbit(pp, T, br.problem.disc.mesh.copy(),
                        U.reshape(-1, 3), dbl.degree, 0.0, True)
    orb = step_period(orb, period)
    for av in np.linspace(orb.params.a, a, a_steps)[1:]:
        orb = solve_orbit(orb, orb.params.replace(a=av),
                          free_params=("mu",), fix_period=True)
    return orb


# ------------------------------------------------------------ staged walks

def walk(kind, state, free, stop_param, stop_value, opts=None, **stage_kw):
    """One continuation stage from a solved state; returns the RecipeResult."""
    p0 = state.params if hasattr(state, "params") else state.orbit.params
    rec = Recipe(name=f"walk-{stop_param}", kind=kind, initial=p0,
                 stages=[Stage(free=free, stop_param=stop_param,
                               stop_value=stop_value, **stage_kw)])
    return run_recipe(rec, state, opts)


# ------------------------------------------------------------ table recipes

def recipe_table1_homoclinic():
    return Recipe(
        name="table1-homoclinic", kind="homoclinic",
        initial=ParameterSet(a=-0.6, mu=-0.0597, mu_tilde=-0.03),
        stages=[
            Stage(free=("kappa", "mu_tilde"), stop_param="kappa",
                  stop_value=-1.0),
            Stage(free=("mu_tilde", "tau"), stop_param="mu_tilde",
                  stop_value=-0.0550),
            Stage(free=("mu", "tau"), stop_param="mu", stop_value=-0.2),
        ],
        meta={"start": "homoclinic", "opts": {"h0": 0.02, "hmax": 0.2,
                                              "max_points": 1200}})


def recipe_table1_fold():
    return Recipe(
        name="table1-fold", kind="fold",
        initial=ParameterSet(a=-0.3852, mu=-0.0550, mu_tilde=-0.03),
        stages=[
            Stage(free=("a", "kappa"), stop_param="a", stop_value=-0.8),
            Stage(free=("kappa", "mu_tilde"), stop_param="kappa",
                  stop_value=-1.0),
            Stage(free=("mu_tilde", "tau"), stop_param="mu_tilde",
                  stop_value=-0.0550),
            Stage(free=("mu", "tau"), stop_param="mu", stop_value=-0.2),
        ],
        meta={"start": "fold", "opts": {"h0": 0.05, "hmax": 0.6,
                                        "record_profiles": False}})


def recipe_table2_homoclinic():
    return Recipe(
        name="table2-homoclinic", kind="homoclinic",
        initial=ParameterSet(a=-2.0620, mu=0.0550, mu_tilde=0.03),
        stages=[
            Stage(free=("kappa", "mu"), stop_param="mu", stop_value=0.2),
            Stage(free=("kappa", "tau"), stop_param="kappa", stop_value=-1.0,
                  hits=2, min_hits=2),
        ],
        meta={"start": "homoclinic", "opts": {"h0": 0.02, "hmax": 0.2,
                                              "max_points": 1200}})


def recipe_table2_twohom():
    return Recipe(
        name="table2-twohom", kind="homoclinic",
        initial=ParameterSet(a=-0.7490, mu=0.0550, mu_tilde=0.03),
        stages=[
            Stage(free=("kappa", "mu"), stop_param="mu", stop_value=0.2),
            Stage(free=("kappa", "tau"), stop_param="kappa", stop_value=-1.0,
                  hits=2, min_hits=2),
        ],
        meta={"start": "two-pulse", "opts": {"h0": 0.05, "hmax": 0.6}})


def recipe_table2_pd():
    return Recipe(
        name="table2-pd", kind="pd",
        initial=ParameterSet(a=-0.6414, mu=0.0550, mu_tilde=0.03),
        stages=[
            Stage(free=("kappa", "mu"), stop_param="mu", stop_value=0.2),
            Stage(free=("kappa", "tau"), stop_param="kappa", stop_value=-1.0,
                  hits=2, min_hits=2),
        ],
        meta={"start": "pd", "opts": {"h0": 0.05, "hmax": 0.6,
                                      "record_profiles": False}})


def recipe_table3_homoclinic():
    return Recipe(
        name="table3-homoclinic", kind="homoclinic",
        initial=ParameterSet(a=-0.5, mu=0.0595, mu_tilde=0.03),
        stages=[
            Stage(free=("kappa", "mu"), stop_param="mu", stop_value=0.2),
            Stage(free=("kappa", "tau"), stop_param="kappa", stop_value=-1.0,
                  hits=2, min_hits=1, pick=("tau", "min")),
            Stage(free=("mu_tilde", "tau"), stop_param="mu_tilde",
                  stop_value=0.0),
        ],
        meta={"start": "homoclinic", "opts": {"h0": 0.02, "hmax": 0.2,
                                              "max_points": 1200}})


def recipe_table3_twohom():
    return Recipe(
        name="table3-twohom", kind="homoclinic",
        initial=ParameterSet(a=-0.7490, mu=0.0550, mu_tilde=0.03),
        stages=[
            Stage(free=("kappa", "mu"), stop_param="mu", stop_value=0.2),
            Stage(free=("kappa", "tau"), stop_param="kappa", stop_value=-1.0,
                  hits=2, min_hits=1, pick=("tau", "min")),
            Stage(free=("a", "tau"), stop_param="a", stop_value=-0.5),
            Stage(free=("mu_tilde", "tau"), stop_param="mu_tilde",
                  stop_value=0.0),
        ],
        meta={"start": "two-pulse", "opts": {"h0": 0.05, "hmax": 0.6}})


def recipe_table3_pd():
    return Recipe(
        name="table3-pd", kind="pd",
        initial=ParameterSet(a=-0.6414, mu=0.0550, mu_tilde=0.03),
        stages=[
            Stage(free=("kappa", "mu"), stop_param="mu", stop_value=0.2),
            Stage(free=("kappa", "tau"), stop_param="kappa", stop_value=-1.0,
                  hits=2, min_hits=1, pick=("tau", "min")),
            Stage(free=("a", "tau"), stop_param="a", stop_value=-0.5,
                  reappear=1),
            Stage(free=("mu_tilde", "tau"), stop_param="mu_tilde",
                  stop_value=0.0),
        ],
        meta={"start": "pd", "opts": {"h0": 0.05, "hmax": 0.6,
                                      "record_profiles": False}})


def recipe_table3_fold():
    return Recipe(
        name="table3-fold", kind="fold",
        initial=ParameterSet(a=-0.3852, mu=-0.0550, mu_tilde=-0.03),
        stages=[
            Stage(free=("kappa", "a"), stop_param="a", stop_value=-0.5),
            Stage(free=("kappa", "mu_tilde"), stop_param="kappa",
                  stop_value=-1.0),
            Stage(free=("mu_tilde", "tau"), stop_param="mu_tilde",
                  stop_value=0.0),
        ],
        meta={"start": "fold", "opts": {"h0": 0.05, "hmax": 0.6,
                                        "record_profiles": False}})


TABLE_RECIPES = {
    "table1-homoclinic": recipe_table1_homoclinic,
    "table1-fold": recipe_table1_fold,
    "table2-homoclinic": recipe_table2_homoclinic,
    "table2-twohom": recipe_table2_twohom,
    "table2-pd": recipe_table2_pd,
    "table3-homoclinic": recipe_table3_homoclinic,
    "table3-twohom": recipe_table3_twohom,
    "table3-pd": recipe_table3_pd,
    "table3-fold": recipe_table3_fold,
}


def build_start(recipe):
    """Construct the converged start solution a recipe's first stage expects."""
    init = recipe.initial
    tag = recipe.meta.get("start", "homoclinic")
    if tag == "homoclinic":
        return homoclinic_lift_start(init.a, init.mu_tilde)
    if tag == "pd":
        return pd_lift_start(init.a, init.mu_tilde)
    if tag == "fold":
        return fold_lift_start(init.a, init.mu_tilde)
    if tag == "two-pulse":
        return two_pulse_start(a=init.a)
    raise ValueError(f"unknown start tag: {tag}")


def recipe_opts(recipe):
    return ContOpts(**recipe.meta.get("opts", {}))


def run_table_recipe(name, start=None, opts=None):
    """Build (or take) the start solution and execute one named recipe."""
    recipe = TABLE_RECIPES[name]()
    if start is None:
        start = build_start(recipe)
    if opts is None:
        opts = recipe_opts(recipe)
    return run_recipe(recipe, start, opts)


# ------------------------------------------------------------- delay runs

def param_run(orbit, name, target, tests=(), opts=None, n_lead=6):
    """One-parameter run pinned at a target value of one parameter.

    The period is free. Returns (orbit at the target, branch); raises if
    the family ends before the target is crossed.
    """
    if opts is None:
        opts = ContOpts(h0=0.5, hmax=4.0, max_points=600,
                        record_profiles=False, multipliers=False,
                        n_lead=n_lead)
    start = float(orbit.params.get(name))
    sgn = 1.0 if target >= start else -1.0
    opts = dataclasses.replace(
        opts, stop=(name, float(target), 1),
        seed_direction=(name, sgn))
    lo, hi = min(start, target), max(start, target)
    pad = 0.05 * (hi - lo) + 1.0
    opts.bounds = dict(opts.bounds)
    opts.bounds.setdefault(name, (lo - pad, hi + pad))
    br = continue_one_param(orbit, name, opts, tests=list(tests))
    if not br.stop_hits:
        raise NewtonError(f"{name} run ended with status '{br.status}' "
                          f"before reaching {name} = {target}")
    return br.stop_hits[0].orbit, br


def delay_run(orbit, tau_target, tests=(), opts=None, n_lead=6):
    """One-parameter run in the delay, pinned at tau_target.

    Along pulsing families the period tracks the delay with slope near one
    per extra pulse. Returns (orbit at the target, branch).
    """
    return param_run(orbit, "tau", tau_target, tests=tests, opts=opts,
                     n_lead=n_lead)


def fit_period_slope(branch, window=None):
    """Least-squares dT/dtau over the branch points (optionally windowed)."""
    taus = branch.param_values("tau")
    Ts = branch.periods()
    if window is not None:
        m = (taus >= window[0]) & (taus <= window[1])
        taus, Ts = taus[m], Ts[m]
    if taus.size < 3:
        raise ValueError("not enough points for a slope fit")
    return float(np.polyfit(taus, Ts, 1)[0])


# --------------------------------------------------- pulsing-solution runs

def _tw_connecting_orbit(kind_start, a):
    """Near-connecting orbit at the delayed parameters, walked to a.

    Runs the matching table walk to kappa = -1 / mu = 0.2, picks the
    negative-delay crossing (the arm whose first reappearance has positive
    drift), and walks (tau, a) to the requested a.
    """
    res = run_table_recipe(kind_start)
    fin = min(res.finals, key=lambda s: s.params.tau)
    out = walk("homoclinic", fin, ("tau", "a"), "a", a,
               opts=ContOpts(h0=0.05, hmax=0.3, record_profiles=False))
    return out.finals[0]


def one_pulse_tds(tau=100.0, a=-1.56, hom=None):
    """One-pulse pulsing orbit at delay tau; returns (orbit, delay branch).

    The near-connecting orbit at the target a is shifted by one period
    (making its delay nearly equal its period) and the resulting family is
    continued in the delay down to tau.
    """
    if hom is None:
        hom = _tw_connecting_orbit("table2-homoclinic", a)
    start = reappear_orbit(hom, 1)
    return delay_run(start, tau)


def bound_two_pulse_tds(tau=100.0, a=-1.56, hom2=None):
    """Bound two-pulse pulsing orbit at delay tau; returns (orbit, branch)."""
    if hom2 is None:
        hom2 = _tw_connecting_orbit("table2-twohom", a)
    start = reappear_orbit(hom2, 1)
    return delay_run(start, tau)


def unbound_two_pulse_tds(tau=100.0, one_pulse=None):
    """Unbound (equidistant) two-pulse orbit at delay tau.

    One more period shift of the one-pulse solution doubles the pulses per
    delay interval; continuing back down to tau halves the period.
    """
    if one_pulse is None:
        one_pulse, _ = one_pulse_tds(tau=tau)
    start = reappear_orbit(one_pulse, 1)
    return delay_run(start, tau)


# ---------------------------------------------------- two-plateau run

def plateau_orbit(tau=-100.0, a=-2.4, mu=0.2, mu_tilde=0.03, kappa=-1.0,
                  tau_start=-30.0, n_int=240, trans_width=1.6,
                  remesh_at=(-60.0,)):
    """Long-period two-plateau orbit at large negative delay.

    Seeds a smoothed square-wave profile alternating between the two states
    over the period-two levels of the unit-shift relation, solves it at a
    moderate negative delay, and continues in the delay to the target with
    adaptive remeshing on the way (the transition layers sharpen relative to
    the period as it grows). The period stays near twice the delay
    magnitude; several nearby families differ in their excess over 2|tau|,
    and the seed period and layer width select the one with excess near
    5.27. Returns (orbit, branch of the final leg).
    """
    p = ParameterSet(a=a, mu=mu, mu_tilde=mu_tilde, kappa=kappa,
                     tau=tau_start)
    pairs = [q for q in period_two_points(p) if q[0] > 0 and q[1] > 0]
    if not pairs:
        raise ValueError("no positive period-two pair at these parameters")
    X_hi, X_lo = pairs[0]
    q_hi = reduce_state(X_hi, p).as_array()
    q_lo = reduce_state(X_lo, p).as_array()
    T0 = 2.0 * abs(tau_start)
    disc = Disc(uniform_mesh(n_int))
    s = disc.s_nodes
    w = trans_width / T0
    sig = lambda z: 0.5 * (1.0 + np.tanh(z))
    g = sig((s - 0.25) / w) - sig((s - 0.75) / w)
    U = q_lo[None, :] + np.outer(g, q_hi - q_lo)
    orb = PeriodicOrbit(p, T0, disc.mesh, U, disc.m, np.nan, False)
    orb = solve_orbit(orb, tol=1e-10, max_iter=40)
    orb = remesh_orbit(orb, n_int=n_int)
    branch = None
    stops = sorted([t for t in remesh_at if tau < t < tau_start],
                   reverse=True) + [tau]
    for t_next in stops:
        orb, branch = delay_run(orb, t_next)
        if t_next != tau:
            orb = remesh_orbit(orb, n_int=n_int)
    return orb, branch


# ----------------------------------------------------- curve-structure runs

def homoclinic_curve(state, free_pair, bounds, direction=None, opts=None):
    """Bounded two-parameter walk of a connecting-orbit curve with events."""
    if opts is None:
        opts = ContOpts(h0=0.05, hmax=0.25, max_points=400,
                        record_profiles=False)
    opts = dataclasses.replace(opts, bounds=dict(bounds))
    if direction is not None:
        opts.seed_direction = direction
    return continue_homoclinic(state, free_pair, opts)


def resonance_events(branch):
    return [ev for ev in branch.events if ev.kind == "Resonance"]


def orbit_flip_events(branch):
    return [ev for ev in branch.events if ev.kind == "OrbitFlip"]


def ode_resonant_curve(a0=-0.6, mu_tilde=-0.03, a_stop=-1.7):
    """Instantaneous-case connecting-orbit curve in (a, mu) through a_R.

    At kappa = 0 the curve is continued in (a, mu) from the planar-leaf
    start; the saddle-quantity test crosses zero where a passes the
    resonance value.
    """
    start = homoclinic_lift_start(a0, mu_tilde)
    res = walk("homoclinic", start, ("a", "mu"), "a", a_stop,
               opts=ContOpts(h0=0.05, hmax=0.25, record_profiles=False))
    return res.branches[-1]


def delayed_plane_curves(a_window=(-2.3, -0.55), tau_window=(-30.0, 30.0),
                         finals=None):
    """The two connecting-orbit curves of the delayed system in (tau, a).

    Continues both table-2 end points (negative and positive delay) in
    (tau, a) toward increasing a within a bounded window; each curve carries
    its own resonance crossing.
    """
    if finals is None:
        finals = run_table_recipe("table2-homoclinic").finals
    out = []
    for fin in sorted(finals, key=lambda s: s.params.tau):
        br = homoclinic_curve(
            fin, ("tau", "a"),
            bounds={"a": a_window, "tau": tau_window},
            direction=("a", 1.0))
        out.append(br)
    return out


def orientable_closed_curve(final=None, max_points=500):
    """The (tau, a) connecting-orbit curve at the orientable parameters.

    Continued in one direction long enough to wrap around; closure is
    checked by the caller on the returned branch. The bounds are a wide
    safety box well outside the loop, not a stopping device.
    """
    if final is None:
        final = run_table_recipe("table1-homoclinic").finals[0]
    return homoclinic_curve(
        final, ("tau", "a"),
        bounds={"a": (-3.0, 1.0), "tau": (-6.0, 2.0)},
        opts=ContOpts(h0=0.05, hmax=0.25, max_points=max_points,
                      record_profiles=False))


def curve_is_closed(branch, tol=0.1, min_extent=0.5):
    """Whether the (tau, a) polyline returns to its start after an excursion."""
    taus = branch.param_values("tau")
    avs = branch.param_values("a")
    pts = np.column_stack([taus, avs])
    d_start = np.hypot(taus - taus[0], avs - avs[0])
    extent = d_start.max()
    if extent < min_extent:
        return False
    far = int(np.argmax(d_start))
    return bool(d_start[far:].min() < tol)


def orbit_flip_crossings(final=None):
    """The (tau, mu) walk through mu = 0 at the planar-plane parameters.

    Returns the recipe result of a two-hit stage pinned at mu = 0; the two
    crossing orbits are planar there (the z component collapses onto the
    invariant plane that exists at mu = 0).
    """
    if final is None:
        final = run_table_recipe("table3-homoclinic").finals[0]
    return walk("homoclinic", final, ("tau", "mu"), "mu", 0.0,
                hits=2, min_hits=2,
                opts=ContOpts(h0=0.05, hmax=0.3, record_profiles=False))


# ------------------------------------------------------------- Hopf slice

def hopf_slice(a=-2.0, mu=-0.2, mu_tilde=-0.0550, kappa=-1.0,
               tau_range=(-3.0, -1.0)):
    """Delay values with a pure-imaginary characteristic pair on a fixed-a
    slice, collected over all equilibria of the instantaneous system."""
    p = ParameterSet(a=a, mu=mu, mu_tilde=mu_tilde, kappa=kappa)
    taus = []
    for eq in equilibria(p):
        for tau, omega in hopf_points(p, eq, tau_range):
            taus.append((float(tau), float(omega), eq))
    taus.sort(key=lambda t: t[0])
    return taus


# --------------------------------------------------- two-parameter planes
#
# Each builder assembles the named curves of one (tau, a) or (tau, mu)
# diagram and returns {label: branch}. They accept precomputed table-walk
# finals so repeated builds (tests, multi-figure runs) can share the lifts.

def pulsing_plane(a_stop=-1.56, hom_finals=None, pd_finals=None):
    """Connecting-orbit and period-doubling curves in (tau, a) at
    (mu, mu_tilde, kappa) = (0.2, 0.03, -1).

    The two connecting-orbit curves (one per delay sign) bound the pulsing
    regime; the two primary period-doubling curves are walked toward more
    negative a. Curves at larger delays follow from these by reappearance
    (even period multiples for the period-doubling curves).
    """
    homs = delayed_plane_curves(finals=hom_finals)
    out = {"hom-neg": homs[0], "hom-pos": homs[1]}
    if pd_finals is None:
        pd_finals = run_table_recipe("table2-pd").finals
    for tag, fin in zip(("pd-neg", "pd-pos"),
                        sorted(pd_finals, key=lambda s: s.params.tau)):
        opts = ContOpts(h0=0.05, hmax=0.6, max_points=400,
                        record_profiles=False,
                        stop=("a", a_stop, 1), seed_direction=("a", -1.0),
                        bounds={"a": (a_stop - 0.4, -0.3),
                                "tau": (-35.0, 35.0)})
        out[tag] = curves.continue_pd_curve(fin, ("tau", "a"), opts)
    return out


def orientable_plane(hom_final=None, fold_final=None, include_hopf=True):
    """Curve skeleton in (tau, a) at (mu, mu_tilde, kappa) =
    (-0.2, -0.0550, -1): the closed connecting-orbit curve, the fold curve
    of periodic orbits through the fold end point, and an equilibrium Hopf
    curve through the same delay window.
    """
    out = {"hom": orientable_closed_curve(final=hom_final)}
    if fold_final is None:
        fold_final = run_table_recipe("table1-fold").finals[0]
    box = {"a": (-3.0, -0.5), "tau": (-6.0, 2.0)}
    out["fold"] = curves.continue_fold_curve(
        fold_final, ("tau", "a"),
        ContOpts(h0=0.05, hmax=0.6, max_points=300, record_profiles=False,
                 bounds=dict(box)))
    if include_hopf:
        pts = hopf_slice()
        if pts:
            tau0, om0, eq = pts[0]
            p = ParameterSet(a=-2.0, mu=-0.2, mu_tilde=-0.0550, kappa=-1.0,
                             tau=tau0)
            st = curves.solve_hopf_point(p, eq, om0, "tau")
            out["hopf"] = curves.continue_hopf_curve(
                st, ("tau", "a"),
                ContOpts(h0=0.05, hmax=0.3, max_points=300,
                         bounds=dict(box)))
    return out


def resonant_plane(hom_finals=None, pd_finals=None, twohom_finals=None):
    """Resonance neighbourhood in (tau, a) at (mu, mu_tilde, kappa) =
    (0.2, 0.03, -1): connecting-orbit curves with their resonance crossings,
    the period-doubling curves emerging near them, and the two-loop
    connecting-orbit curves.
    """
    out = pulsing_plane(hom_finals=hom_finals, pd_finals=pd_finals)
    if twohom_finals is None:
        twohom_finals = run_table_recipe("table2-twohom").finals
    for tag, fin in zip(("twohom-neg", "twohom-pos"),
                        sorted(twohom_finals, key=lambda s: s.params.tau)):
        out[tag] = homoclinic_curve(
            fin, ("tau", "a"),
            bounds={"a": (-2.3, -0.55), "tau": (-30.0, 30.0)},
            direction=("a", 1.0))
    return out


def orbit_flip_plane(final=None, mu_window=(-0.25, 0.3)):
    """Connecting-orbit curve in (tau, mu) at (a, mu_tilde, kappa) =
    (-0.5, 0, -1), walked from mu = 0.2 across mu = 0 in both directions.

    The z component of the connection collapses where the curve crosses
    mu = 0 (the invariant plane there), which the orbit-flip test flags;
    the downward arm crosses twice. Returns the two walk arms.
    """
    if final is None:
        final = run_table_recipe("table3-homoclinic").finals[0]
    out = {}
    for tag, sgn in (("arm-neg", -1.0), ("arm-pos", 1.0)):
        out[tag] = homoclinic_curve(
            final, ("tau", "mu"),
            bounds={"mu": mu_window, "tau": (-12.0, 3.0)},
            direction=("mu", sgn),
            opts=ContOpts(h0=0.05, hmax=0.3, max_points=300,
                          record_profiles=False))
    return out


PLANE_BUILDERS = {
    "pulsing": pulsing_plane,
    "orientable": orientable_plane,
    "resonant": resonant_plane,
    "orbit-flip": orbit_flip_plane,
}
