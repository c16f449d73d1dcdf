"""Pseudo-arclength continuation of orbits and codimension-1 bifurcation curves.

A continuation problem exposes a residual with exactly one fewer equation
than unknowns; the engine closes the system with a weighted arclength pin,
steps along the solution curve with adaptive step control, records test
functions at every accepted point, and refines their sign changes (events,
stopping conditions) by bracketed root finding on the step fraction.
"""

import dataclasses
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.optimize import brentq

from . import model
from .mesh import Disc
from .orbit import (OrbitSystem, PeriodicOrbit, NewtonError, solve_orbit,
                    _newton)
from .floquet import leading_multipliers


# ----------------------------------------------------------------- records

@dataclasses.dataclass
class BranchPoint:
    """One accepted continuation point."""

    params: model.ParameterSet
    period: float
    delta: float
    amplitude: float
    tests: dict
    multipliers: np.ndarray | None = None
    orbit: PeriodicOrbit | None = None
    raw: np.ndarray | None = None
    classification: str | None = None


@dataclasses.dataclass
class BifurcationPoint:
    """A refined test-function zero on a branch."""

    kind: str
    params: model.ParameterSet
    orbit: PeriodicOrbit | None
    locator_residual: float
    info: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class Branch:
    """Ordered continuation points plus refined events."""

    free_params: tuple
    points: list = dataclasses.field(default_factory=list)
    events: list = dataclasses.field(default_factory=list)
    stop_hits: list = dataclasses.field(default_factory=list)
    status: str = "running"
    problem: object = None
    seed_tangent: np.ndarray | None = None

    def param_values(self, name):
        return np.array([pt.params.get(name) for pt in self.points])

    def periods(self):
        return np.array([pt.period for pt in self.points])


@dataclasses.dataclass
class ContOpts:
    """Engine options; stop is (param, value, hits)."""

    h0: float = 0.02
    hmax: float = 0.25
    hmin: float = 1e-8
    tol: float = 1e-10
    max_points: int = 2000
    multipliers: bool | str = "auto"
    n_lead: int = 6
    stop: tuple | None = None
    bounds: dict = dataclasses.field(default_factory=dict)
    seed_direction: tuple | None = None
    record_profiles: bool = True


# ----------------------------------------------------------------- problems

class OrbitPathProblem:
    """One-parameter family of periodic orbits; period free."""

    kind = "orbit"

    def __init__(self, orbit, free):
        self.free_names = (free,)
        self.disc = orbit.disc()
        self.template = orbit.params
        self._anchor_vals = orbit.values.copy()
        self._make_system()
        self.n = self.system.n_unknowns
        w = np.ones(self.n)
        w[:3 * self.disc.n_nodes] = 1.0 / np.sqrt(3.0 * self.disc.n_nodes)
        self.weights = w

    def _make_system(self):
        self.system = OrbitSystem(self.disc, self.template, self.disc,
                                  self._anchor_vals,
                                  free_params=self.free_names)

    def pack(self, orbit):
        self.template = orbit.params
        self._make_system()
        return self.system.pack(orbit)

    def residual(self, X):
        return self.system.residual(X)

    def jacobian(self, X):
        return self.system.jacobian(X)

    def params(self, X):
        _, _, p = self.system.unpack(X)
        return p

    def orbit(self, X):
        U, T, p = self.system.unpack(X)
        return PeriodicOrbit(p, T, self.disc.mesh.copy(), U.copy(),
                             self.disc.m, 0.0, True)

    def rebuild(self, X):
        U, _, p = self.system.unpack(X)
        self.template = p
        self._anchor_vals = U.copy()
        self._make_system()


class HomoclinicCurveProblem:
    """Two-parameter homoclinic curve: period frozen, two parameters free."""

    kind = "homoclinic"

    def __init__(self, orbit, free_pair):
        self.free_names = tuple(free_pair)
        self.period = orbit.period
        self.disc = orbit.disc()
        self.template = orbit.params
        self._anchor_vals = orbit.values.copy()
        self._make_system()
        self.n = self.system.n_unknowns
        w = np.ones(self.n)
        w[:3 * self.disc.n_nodes] = 1.0 / np.sqrt(3.0 * self.disc.n_nodes)
        self.weights = w

    def _make_system(self):
        self.system = OrbitSystem(self.disc, self.template, self.disc,
                                  self._anchor_vals,
                                  free_params=self.free_names,
                                  fix_period=True)
        self.system.T_fixed = self.period

    def pack(self, orbit):
        self.template = orbit.params
        self.period = orbit.period
        self._make_system()
        return self.system.pack(orbit)

    def residual(self, X):
        return self.system.residual(X)

    def jacobian(self, X):
        return self.system.jacobian(X)

    def params(self, X):
        _, _, p = self.system.unpack(X)
        return p

    def orbit(self, X):
        U, T, p = self.system.unpack(X)
        return PeriodicOrbit(p, T, self.disc.mesh.copy(), U.copy(),
                             self.disc.m, 0.0, True)

    def rebuild(self, X):
        U, _, p = self.system.unpack(X)
        self.template = p
        self._anchor_vals = U.copy()
        self._make_system()


# ----------------------------------------------------------------- engine

def _inner(problem, u, v):
    w2 = problem.weights ** 2
    return float(np.dot(u * w2, v))


def _tangent(problem, X, t_prev):
    J = problem.jacobian(X)
    row = sp.csr_matrix((t_prev * problem.weights ** 2)[None, :])
    A = sp.vstack([J, row]).tocsc()
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    t = splu(A).solve(rhs)
    t /= np.sqrt(_inner(problem, t, t))
    if _inner(problem, t, t_prev) < 0.0:
        t = -t
    return t


def _correct(problem, X_guess, pin, pin_rhs, tol, max_iter):
    """Newton on [residual; <pin, X> = pin_rhs]; returns (X, iters)."""
    X = X_guess.copy()
    row = sp.csr_matrix(pin[None, :])
    for it in range(max_iter):
        R = problem.residual(X)
        rpin = float(np.dot(pin, X)) - pin_rhs
        norm = max(np.abs(R).max(), abs(rpin))
        if norm < tol:
            return X, it
        J = sp.vstack([problem.jacobian(X), row]).tocsc()
        try:
            dX = splu(J).solve(-np.concatenate([R, [rpin]]))
        except RuntimeError as e:
            raise NewtonError(f"singular bordered system: {e}", norm) from None
        X = X + dX
        if not np.all(np.isfinite(X)):
            raise NewtonError("corrector diverged", np.inf)
    R = problem.residual(X)
    rpin = float(np.dot(pin, X)) - pin_rhs
    norm = max(np.abs(R).max(), abs(rpin))
    if norm < tol:
        return X, max_iter
    raise NewtonError(f"corrector: no convergence (residual {norm:.3e})", norm)


def _free_index(problem, name):
    return problem.n - len(problem.free_names) + problem.free_names.index(name)


def _make_ctx(problem, X, tangent, opts, need_multipliers):
    p = problem.params(X)
    orb = problem.orbit(X)
    mult = None
    if need_multipliers:
        want = opts.multipliers
        if want == "auto":
            want = p.tau >= -1e-12
        if want:
            try:
                mult = leading_multipliers(orb, k=opts.n_lead)
            except Exception:
                mult = None
    return SimpleNamespace(problem=problem, X=X, params=p, orbit=orb,
                           tangent=tangent, multipliers=mult)


# ------------------------------------------------------------ test functions

def _tf_param_extremum(name):
    def fn(ctx):
        return float(ctx.tangent[_free_index(ctx.problem, name)])
    fn.kind = "Fold"
    fn.name = f"fold[{name}]"
    fn.needs_multipliers = False
    return fn


def _tf_resonance(ctx):
    return model.origin_spectrum(ctx.params).sigma


_tf_resonance.kind = "Resonance"
_tf_resonance.name = "resonance"
_tf_resonance.needs_multipliers = False


def _tf_orbit_flip(ctx):
    vals = ctx.orbit.values
    return float(vals[np.argmax(vals[:, 0]), 2])


_tf_orbit_flip.kind = "OrbitFlip"
_tf_orbit_flip.name = "orbit-flip"
_tf_orbit_flip.needs_multipliers = False


def _nontrivial(mult):
    i = int(np.argmin(np.abs(mult - 1.0)))
    return np.delete(mult, i)


def _tf_pd(ctx):
    if ctx.multipliers is None:
        return np.nan
    mu = _nontrivial(ctx.multipliers)
    return float(np.prod(mu + 1.0).real)


_tf_pd.kind = "PeriodDoubling"
_tf_pd.name = "pd"
_tf_pd.needs_multipliers = True


def _tf_torus(ctx):
    if ctx.multipliers is None:
        return np.nan
    mu = _nontrivial(ctx.multipliers)
    off = mu[np.abs(mu.imag) > 1e-8 * (1.0 + np.abs(mu.real))]
    if off.size == 0:
        return -1.0
    return float(np.abs(off).max() - 1.0)


_tf_torus.kind = "Torus"
_tf_torus.name = "torus"
_tf_torus.needs_multipliers = False  # uses ctx.multipliers when present


def _default_tests(problem):
    if problem.kind == "orbit":
        return [_tf_param_extremum(problem.free_names[0]), _tf_pd, _tf_torus]
    if problem.kind == "homoclinic":
        tests = [_tf_resonance, _tf_orbit_flip]
        tests += [_tf_param_extremum(n) for n in problem.free_names]
        return tests
    return [_tf_param_extremum(n) for n in problem.free_names]


# ------------------------------------------------------------- refinement

def _refine_zero(problem, X0, t0, X1, value_fn, opts):
    """Bracketed zero of value_fn between corrected points X0 and X1."""
    pin = t0 * problem.weights ** 2
    cache = {}

    def g(f):
        if f in cache:
            return cache[f][0]
        if f == 0.0:
            Xg = X0
        elif f == 1.0:
            Xg = X1
        else:
            Xg = X0 + f * (X1 - X0)
        X, _ = _correct(problem, Xg, pin, float(np.dot(pin, Xg)),
                        opts.tol, 14)
        tan = _tangent(problem, X, t0)
        ctx = _make_ctx(problem, X, tan, opts, value_fn.needs_multipliers)
        val = value_fn(ctx)
        cache[f] = (val, ctx)
        return val

    f_star = brentq(g, 0.0, 1.0, xtol=1e-13, rtol=8.9e-16)
    val = g(f_star)
    return cache[f_star][1], abs(val)


# ------------------------------------------------------------- main loop

def continue_branch(problem, X0, opts=None, tests=None):
    """Run the predictor--corrector loop from a solved point X0."""
    opts = opts or ContOpts()
    tests = _default_tests(problem) if tests is None else tests
    branch = Branch(free_params=problem.free_names, problem=problem)

    stop_name = stop_value = None
    stop_hits_needed = 1
    if opts.stop is not None:
        stop_name, stop_value = opts.stop[0], float(opts.stop[1])
        stop_hits_needed = int(opts.stop[2]) if len(opts.stop) > 2 else 1

    def stop_fn(ctx):
        return ctx.params.get(stop_name) - stop_value
    stop_fn.kind = "Stop"
    stop_fn.name = f"stop[{stop_name}]"
    stop_fn.needs_multipliers = False

    # seed tangent: either align with a full previous tangent vector, or
    # point a named free parameter in a requested direction
    if isinstance(opts.seed_direction, np.ndarray):
        t_seed = opts.seed_direction
    else:
        t_seed = np.zeros(problem.n)
        if opts.seed_direction is not None:
            name, sign = opts.seed_direction
        elif stop_name is not None and stop_name in problem.free_names:
            name = stop_name
            X0p = problem.params(X0).get(stop_name)
            sign = 1.0 if stop_value >= X0p else -1.0
        else:
            name, sign = problem.free_names[0], 1.0
        t_seed[_free_index(problem, name)] = float(sign)

    t = _tangent(problem, X0, t_seed)
    branch.seed_tangent = t.copy()
    needs_mult = any(tf.needs_multipliers for tf in tests)
    ctx = _make_ctx(problem, X0, t, opts, needs_mult or opts.multipliers is True)
    _record(branch, ctx, tests, stop_fn if stop_name else None, opts)

    h = opts.h0
    fast = 0
    X, n_hits = X0, 0
    while len(branch.points) < opts.max_points:
        pin = t * problem.weights ** 2
        try:
            X_pred = X + h * t
            X_new, iters = _correct(problem, X_pred, pin,
                                    float(np.dot(pin, X_pred)), opts.tol, 5)
        except NewtonError:
            h *= 0.5
            fast = 0
            if h < opts.hmin:
                branch.status = "step-collapse"
                return branch
            continue

        t_new = _tangent(problem, X_new, t)
        ctx_new = _make_ctx(problem, X_new, t_new, opts,
                            needs_mult or opts.multipliers is True)

        # ---- events and stopping between ctx (old) and ctx_new
        all_fns = list(tests) + ([stop_fn] if stop_name else [])
        for tf in all_fns:
            v0 = branch.points[-1].tests.get(tf.name, np.nan)
            v1 = _tf_value(tf, ctx_new)
            if not (np.isfinite(v0) and np.isfinite(v1)) or v0 == 0.0:
                continue
            if np.sign(v0) != np.sign(v1):
                try:
                    rctx, resid = _refine_zero(problem, X, t, X_new, tf, opts)
                except (NewtonError, ValueError):
                    continue
                if tf.kind == "Stop":
                    n_hits += 1
                    branch.stop_hits.append(_point_of(
                        rctx, tests, None,
                        dataclasses.replace(opts, record_profiles=True)))
                    if n_hits >= stop_hits_needed:
                        _record(branch, rctx, tests, None, opts)
                        branch.status = "target"
                        return branch
                else:
                    branch.events.append(BifurcationPoint(
                        kind=_event_kind(tf, rctx, branch),
                        params=rctx.params,
                        orbit=rctx.orbit.copy(),
                        locator_residual=resid,
                        info={"period": rctx.orbit.period,
                              "test": tf.name}))

        # ---- accept
        X, t, ctx = X_new, t_new, ctx_new
        _record(branch, ctx, tests, stop_fn if stop_name else None, opts)
        problem.rebuild(X)
        t = _tangent(problem, X, t)
        for nm, (lo, hi) in opts.bounds.items():
            if nm == "T":
                v = ctx.orbit.period if ctx.orbit is not None else np.nan
            else:
                v = ctx.params.get(nm)
            if not (lo <= v <= hi):
                branch.status = "domain-bound"
                return branch
        if iters <= 3:
            fast += 1
            if fast >= 3:
                h = min(2.0 * h, opts.hmax)
                fast = 0
        else:
            fast = 0
    branch.status = "max-points"
    return branch


def _tf_value(tf, ctx):
    try:
        return tf(ctx)
    except Exception:
        return np.nan


def _event_kind(tf, ctx, branch):
    if tf.kind == "Fold" and ctx.problem.kind in ("homoclinic", "pd", "fold"):
        # tag curve extrema as minima or maxima of the parameter
        name = tf.name[5:-1]
        vals = [pt.params.get(name) for pt in branch.points[-3:]]
        here = ctx.params.get(name)
        return ("M[%s]" % name) if here >= max(vals, default=here) \
            else ("m[%s]" % name)
    return tf.kind


def _point_of(ctx, tests, stop_fn, opts):
    vals = {tf.name: _tf_value(tf, ctx) for tf in tests}
    if stop_fn is not None:
        vals[stop_fn.name] = _tf_value(stop_fn, ctx)
    orb = ctx.orbit
    return BranchPoint(
        params=ctx.params, period=orb.period,
        delta=orb.period - ctx.params.tau,
        amplitude=orb.amplitude(), tests=vals,
        multipliers=None if ctx.multipliers is None else ctx.multipliers.copy(),
        orbit=orb.copy() if opts.record_profiles else None,
        raw=ctx.X.copy())


def _record(branch, ctx, tests, stop_fn, opts):
    branch.points.append(_point_of(ctx, tests, stop_fn, opts))


# ------------------------------------------------------------- public API

def continue_one_param(start, free, opts=None, tests=None):
    """Continue a family of periodic orbits in one parameter (period free)."""
    opts = opts or ContOpts()
    start = solve_orbit(start, tol=opts.tol)
    problem = OrbitPathProblem(start, free)
    X0 = problem.pack(start)
    return continue_branch(problem, X0, opts, tests)


def continue_homoclinic(start, free_pair, opts=None, tests=None):
    """Continue a fixed-period homoclinic representation in two parameters."""
    opts = opts or ContOpts()
    problem = HomoclinicCurveProblem(start, free_pair)
    X0 = problem.pack(start)
    # make sure the start satisfies the system (re-anchoring shifts phase row)
    pin = np.zeros(problem.n)
    pin[_free_index(problem, free_pair[1])] = 1.0
    X0, _ = _correct(problem, X0, pin, float(np.dot(pin, X0)), opts.tol, 12)
    return continue_branch(problem, X0, opts, tests)


def continue_codim1_curve(seed, free_pair, kind, opts=None, tests=None):
    """Two-parameter curve of a codimension-1 bifurcation.

    kind selects the extended system: 'Homoclinic' (fixed large period),
    'PeriodDoubling' / 'Fold' (orbit plus eigenfunction systems), or 'Hopf'
    (characteristic-root pinning). seed is the matching solution object:
    a PeriodicOrbit for Homoclinic, a PDState/FoldState from the curves
    module, or a HopfState.
    """
    if kind == "Homoclinic":
        return continue_homoclinic(seed, free_pair, opts, tests)
    from . import curves
    if kind == "PeriodDoubling":
        return curves.continue_pd_curve(seed, free_pair, opts, tests)
    if kind == "Fold":
        return curves.continue_fold_curve(seed, free_pair, opts, tests)
    if kind == "Hopf":
        return curves.continue_hopf_curve(seed, free_pair, opts, tests)
    raise ValueError(f"unknown curve kind: {kind}")


def branch_switch_pd(pd_orbit, eigenfunction, free="tau", amplitude=1e-2,
                     tol=1e-10):
    """Period-doubled orbit emerging at a period-doubling point.

    Doubles the mesh (two period-copies), injects the -1 eigenfunction with
    opposite signs on the two copies, and re-solves with the injection
    amplitude pinned while one parameter adjusts. Retries a few amplitudes.
    """
    disc = pd_orbit.disc()
    mesh_d = np.concatenate([0.5 * disc.mesh[:-1], 0.5 + 0.5 * disc.mesh])
    disc_d = Disc(mesh_d, pd_orbit.degree)
    W = eigenfunction
    if np.iscomplexobj(W):
        W = W.real
    W = W / np.abs(W).max()
    U, Wn = pd_orbit.values, W
    mode = np.concatenate([Wn[:-1], -Wn])           # sign flip on second copy
    base = np.concatenate([U[:-1], U])
    last_err = None
    for amp in (amplitude, 2 * amplitude, 0.5 * amplitude, 4 * amplitude):
        vals = base + amp * mode
        seed = PeriodicOrbit(pd_orbit.params, 2.0 * pd_orbit.period,
                             mesh_d, vals, pd_orbit.degree)
        system = OrbitSystem(disc_d, seed.params, disc_d, vals,
                             free_params=(free,))
        row = np.zeros(system.n_unknowns)
        nodes = disc_d.node_idx[disc_d.ci]
        Lc = np.tile(disc_d.Lc, (disc_d.n_int, 1))
        w = disc_d.wquad[:, None] * Lc
        mode_c = disc_d.eval_profile(mode, disc_d.sc)
        for d in range(3):
            np.add.at(row, 3 * nodes + d, w * mode_c[:, d:d + 1])
        target = float(row[:3 * disc_d.n_nodes] @ vals.ravel())
        try:
            X0 = system.pack(seed)
            X, norm, _ = _newton(system, X0, extra_rows=row[None, :],
                                 extra_rhs=np.array([target]), tol=tol,
                                 max_iter=25)
            Ud, Td, pd_ = system.unpack(X)
            return PeriodicOrbit(pd_, Td, mesh_d.copy(), Ud,
                                 pd_orbit.degree, norm, True)
        except NewtonError as e:
            last_err = e
    raise NewtonError(f"branch switch failed at all amplitudes: {last_err}")


# ------------------------------------------------------------- recipes

@dataclasses.dataclass
class Stage:
    """One continuation run: free pair, stop condition, hit count.

    hits is the number of stop-value crossings to collect over the two curve
    directions; min_hits (default hits) is how many must be found. pick, if
    given as (param, "min"|"max"), selects which crossing feeds the next
    stage when several are found. reappear shifts the stage's outgoing
    solutions to a delay-reappearance copy: tau + k*T for orbit-like states,
    tau + 2k*T for period-doubling states (whose eigenfunction is
    antiperiodic, so only even period shifts return to the same solution).
    """

    free: tuple
    stop_param: str
    stop_value: float
    hits: int = 1
    min_hits: int | None = None
    pick: tuple | None = None
    reappear: int = 0
    opts: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class Recipe:
    """Ordered stages lifting a solution through parameter space."""

    name: str
    kind: str                      # homoclinic | pd | fold | orbit
    initial: model.ParameterSet
    stages: list
    period: float | None = None
    meta: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class RecipeResult:
    branches: list
    finals: list
    achieved: list

    def final_taus(self):
        return [s.params.tau for s in self.finals]


class RecipeError(RuntimeError):
    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


def _snap_homoclinic(orbit, pinned_name, pinned_value, other_free, tol):
    p = orbit.params.replace(**{pinned_name: pinned_value})
    return solve_orbit(orbit, p, free_params=(other_free,), fix_period=True,
                       tol=tol)


def _reappear_state(kind, state, k):
    """Delay-reappearance copy: the same solution with tau shifted by whole
    periods (the delayed argument wraps modulo the period, so the discrete
    system is satisfied exactly by the shifted state)."""
    if kind == "pd":
        from . import curves
        orb = state.orbit
        orb2 = orb.with_params(orb.params.replace(
            tau=orb.params.tau + 2.0 * k * orb.period))
        return curves.PDState(orb2, state.eigenfunction.copy())
    if kind == "fold":
        from . import curves
        orb = state.orbit
        orb2 = orb.with_params(orb.params.replace(
            tau=orb.params.tau + float(k) * orb.period))
        return curves.FoldState(orb2, state.null_values.copy(),
                                state.null_period)
    return state.with_params(state.params.replace(
        tau=state.params.tau + float(k) * state.period))


def _stage_runner(kind, state, free, opts):
    if kind == "homoclinic":
        return continue_homoclinic(state, free, opts)
    if kind == "orbit":
        return continue_one_param(state, free[0], opts)
    from . import curves
    if kind == "pd":
        return curves.continue_pd_curve(state, free, opts)
    if kind == "fold":
        return curves.continue_fold_curve(state, free, opts)
    raise ValueError(f"unknown recipe kind: {kind}")


def _run_stage(kind, state, stage, opts_base):
    """Run one stage; continue in the opposite direction if hits remain.

    Stage runs are bounded in the stop parameter (a margin of a few spans
    past the target) so that curves that shoot off do not run forever; the
    second direction picks up crossings on the other arm of a folded curve.
    """
    opts = dataclasses.replace(opts_base or ContOpts())
    for k, v in stage.opts.items():
        setattr(opts, k, v)
    opts.stop = (stage.stop_param, stage.stop_value, stage.hits)
    p0 = state.params if hasattr(state, "params") else state.orbit.params
    start_val = p0.get(stage.stop_param)
    span = max(abs(stage.stop_value - start_val), 0.1)
    margin = stage.opts.get("margin", 3.0)
    if stage.stop_param not in opts.bounds:
        lo = min(start_val, stage.stop_value) - margin * span
        hi = max(start_val, stage.stop_value) + margin * span
        opts.bounds = dict(opts.bounds)
        opts.bounds[stage.stop_param] = (lo, hi)

    branches, hits = [], []
    for leg in range(2):
        o = dataclasses.replace(opts)
        if leg == 1:
            # walk the other arm of the curve from the same start point
            o.seed_direction = -branches[0].seed_tangent
        o.stop = (stage.stop_param, stage.stop_value,
                  stage.hits - len(hits))
        branch = _stage_runner(kind, state, stage.free, o)
        branches.append(branch)
        hits.extend((branch, pt) for pt in branch.stop_hits)
        if len(hits) >= stage.hits:
            break
    return branches, hits


def run_recipe(recipe, initial, opts_base=None):
    """Execute the stages of a recipe from a converged initial solution.

    initial is the solution object matching recipe.kind. Each stage continues
    with the stage's free pair until the stop parameter crosses its target
    (hits times over both curve directions), bisects onto each crossing, then
    freezes the target exactly and re-solves before the next stage. Returns
    RecipeResult; raises RecipeError with the partial result on failure.
    """
    branches, achieved = [], []
    finals = [initial]
    for i, stage in enumerate(recipe.stages):
        state = finals[0]
        stage_branches, hits = _run_stage(recipe.kind, state, stage, opts_base)
        branches.extend(stage_branches)
        need = stage.hits if stage.min_hits is None else stage.min_hits
        if len(hits) < need:
            raise RecipeError(
                f"stage {i + 1} ({'/'.join(stage.free)} -> "
                f"{stage.stop_param} = {stage.stop_value}) found "
                f"{len(hits)} of {need} crossings "
                f"(last status '{stage_branches[-1].status}')",
                RecipeResult(branches, finals, achieved))
        other = [n for n in stage.free if n != stage.stop_param]
        other = other[0] if other else stage.free[0]
        tol = (opts_base or ContOpts()).tol
        finals = []
        for src_branch, hit in hits:
            if recipe.kind == "homoclinic":
                snapped = _snap_homoclinic(hit.orbit, stage.stop_param,
                                           stage.stop_value, other, tol)
            elif recipe.kind in ("pd", "fold"):
                from . import curves
                snapped = curves.snap_state(
                    recipe.kind, src_branch.problem, hit.raw,
                    stage.stop_param, stage.stop_value, other, tol)
            else:
                p = hit.orbit.params.replace(
                    **{stage.stop_param: stage.stop_value})
                snapped = solve_orbit(hit.orbit, p, tol=tol)
            finals.append(snapped)
        if stage.pick is not None and len(finals) > 1:
            nm, which = stage.pick
            key = [(f.params if hasattr(f, "params") else f.orbit.params)
                   .get(nm) for f in finals]
            best = int(np.argmin(key) if which == "min" else np.argmax(key))
            finals.insert(0, finals.pop(best))
        if stage.reappear:
            finals = [_reappear_state(recipe.kind, f, stage.reappear)
                      for f in finals]
        for f in finals:
            achieved.append(f.params if hasattr(f, "params")
                            else f.orbit.params)
    return RecipeResult(branches, finals, achieved)
