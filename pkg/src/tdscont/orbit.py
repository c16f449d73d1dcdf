"""Periodic-orbit boundary value solver with a wrapped delayed argument.

A periodic orbit of the delay system is a profile u on [0, 1] with
u'(s) = T f(u(s), u((s - tau/T) mod 1)) and u(1) = u(0). Because the delayed
argument wraps around the period, tau may be negative or exceed the period;
only the offset tau/T mod 1 matters for the profile. An integral phase
condition against an anchor profile removes the rotation freedom.
"""

import dataclasses

import numpy as np
import scipy.sparse as sp
from scipy.signal import find_peaks
from scipy.sparse.linalg import splu

from . import model
from .mesh import Disc, resample, equidistribute


class NewtonError(RuntimeError):
    """Newton iteration failed; carries the last residual norm."""

    def __init__(self, msg, residual_norm=np.nan):
        super().__init__(msg)
        self.residual_norm = residual_norm


@dataclasses.dataclass
class PeriodicOrbit:
    """Collocation representation of one periodic orbit."""

    params: model.ParameterSet
    period: float
    mesh: np.ndarray
    values: np.ndarray
    degree: int = 4
    residual_norm: float = np.nan
    converged: bool = False

    def disc(self):
        return Disc(self.mesh, self.degree)

    def evaluate(self, s):
        """Profile at phase s (wrapped into [0, 1))."""
        return self.disc().eval_profile(self.values, np.mod(s, 1.0))

    def derivative(self, s):
        return self.disc().deval_profile(self.values, np.mod(s, 1.0))

    def evaluate_time(self, t):
        """State at time t, using period-T periodicity."""
        return self.evaluate(np.asarray(t, dtype=float) / self.period)

    def amplitude(self):
        """Peak-to-peak amplitude of the x component."""
        x = self.values[:, 0]
        return float(x.max() - x.min())

    def max_norm(self):
        return float(np.abs(self.values).max())

    def min_distance_to_origin(self):
        return float(np.linalg.norm(self.values, axis=1).min())

    def copy(self):
        return PeriodicOrbit(self.params, self.period, self.mesh.copy(),
                             self.values.copy(), self.degree,
                             self.residual_norm, self.converged)

    def with_params(self, p):
        o = self.copy()
        o.params = p
        return o


def phase_row(disc, anchor_disc, anchor_values):
    """Row vector of the integral phase condition against the anchor derivative."""
    dref = anchor_disc.deval_profile(anchor_values, disc.sc)
    row = np.zeros(3 * disc.n_nodes)
    K = disc.n_int * disc.m
    nodes = disc.node_idx[disc.ci]                  # (K, m+1)
    Lc = np.tile(disc.Lc, (disc.n_int, 1))          # (K, m+1)
    w = disc.wquad[:, None] * Lc                    # (K, m+1)
    for d in range(3):
        np.add.at(row, 3 * nodes + d, w * dref[:, d:d + 1])
    return row


class OrbitSystem:
    """Residual and Jacobian assembly for one mesh, parameter set and anchor."""

    def __init__(self, disc, p, anchor_disc, anchor_values,
                 free_params=(), fix_period=False):
        self.disc = disc
        self.p = p
        self.free_params = tuple(free_params)
        self.fix_period = fix_period
        self.phase = phase_row(disc, anchor_disc, anchor_values)
        K = disc.n_int * disc.m
        self.K = K
        self.n_nodes = disc.n_nodes
        self.n_scalars = (0 if fix_period else 1) + len(self.free_params)
        self.n_unknowns = 3 * disc.n_nodes + self.n_scalars
        self.n_equations = 3 * K + 3 + 1
        # static Jacobian pieces for the derivative term
        self.nodes_c = disc.node_idx[disc.ci]                       # (K, m+1)
        l_idx = np.tile(np.arange(disc.m), disc.n_int)
        self.Lc_pts = disc.Lc[l_idx]                                # (K, m+1)
        self.Dc_pts = disc.Dc[l_idx] / disc.h[disc.ci][:, None]     # (K, m+1)

    def unpack(self, X):
        U = X[:3 * self.n_nodes].reshape(self.n_nodes, 3)
        rest = X[3 * self.n_nodes:]
        i = 0
        if self.fix_period:
            T = self.T_fixed
        else:
            T = rest[0]
            i = 1
        p = self.p
        for name, v in zip(self.free_params, rest[i:]):
            p = p.replace(**{name: float(v)})
        return U, float(T), p

    def pack(self, orbit):
        X = [orbit.values.ravel()]
        if self.fix_period:
            self.T_fixed = orbit.period
        else:
            X.append([orbit.period])
        X.append([orbit.params.get(n) for n in self.free_params])
        return np.concatenate([np.asarray(v, dtype=float).ravel() for v in X])

    def _delayed(self, U, T, p):
        d = p.tau / T
        w = np.mod(self.disc.sc - d, 1.0)
        widx, Ww = self.disc.eval_weights(w)
        _, dWw = self.disc.deval_weights(w)
        nodes_w = self.disc.node_idx[widx]
        Uw = U[nodes_w]
        uw = np.einsum("kj,kjd->kd", Ww, Uw)
        duw = np.einsum("kj,kjd->kd", dWw, Uw)
        return nodes_w, Ww, uw, duw

    def residual(self, X):
        U, T, p = self.unpack(X)
        Uint = U[self.nodes_c]
        uc = np.einsum("kj,kjd->kd", self.Lc_pts, Uint)
        duc = np.einsum("kj,kjd->kd", self.Dc_pts, Uint)
        _, _, uw, _ = self._delayed(U, T, p)
        f = model.dde_rhs(uc, uw, p)
        scale = 1.0 / max(1.0, abs(T))
        Rc = (duc - T * f) * scale
        Rper = U[-1] - U[0]
        Rph = self.phase @ U.ravel()
        return np.concatenate([Rc.ravel(), Rper, [Rph]])

    def jacobian(self, X):
        U, T, p = self.unpack(X)
        disc = self.disc
        K = self.K
        Uint = U[self.nodes_c]
        uc = np.einsum("kj,kjd->kd", self.Lc_pts, Uint)
        nodes_w, Ww, uw, duw = self._delayed(U, T, p)
        f = model.dde_rhs(uc, uw, p)
        A = model.jac_u(uc, uw, p)
        B = model.jac_v(uc, uw, p)
        scale = 1.0 / max(1.0, abs(T))

        mp1 = disc.m + 1
        rows, cols, vals = [], [], []

        # derivative term: block-diagonal identities weighted by Dc
        r = (3 * np.arange(K)[:, None, None] + np.arange(3)[None, None, :])
        c = (3 * self.nodes_c[:, :, None] + np.arange(3)[None, None, :])
        v = np.broadcast_to(self.Dc_pts[:, :, None], (K, mp1, 3))
        rows.append(np.broadcast_to(r, (K, mp1, 3)).ravel())
        cols.append(c.ravel())
        vals.append((v * scale).ravel())

        # -T A(u_c) interpolated with the current-point weights
        r = (3 * np.arange(K)[:, None, None, None]
             + np.arange(3)[None, None, :, None])
        cjc = (3 * self.nodes_c[:, :, None, None] + np.arange(3)[None, None, None, :])
        vA = -T * A[:, None, :, :] * self.Lc_pts[:, :, None, None]
        rows.append(np.broadcast_to(r, (K, mp1, 3, 3)).ravel())
        cols.append(np.broadcast_to(cjc, (K, mp1, 3, 3)).ravel())
        vals.append((vA * scale).ravel())

        # -T B(u_w) interpolated with the delayed-point weights
        cjw = (3 * nodes_w[:, :, None, None] + np.arange(3)[None, None, None, :])
        vB = -T * B[:, None, :, :] * Ww[:, :, None, None]
        rows.append(np.broadcast_to(r, (K, mp1, 3, 3)).ravel())
        cols.append(np.broadcast_to(cjw, (K, mp1, 3, 3)).ravel())
        vals.append((vB * scale).ravel())

        Jc = sp.coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(3 * K, 3 * self.n_nodes))

        # periodicity and phase rows
        per = sp.lil_matrix((3, 3 * self.n_nodes))
        for d in range(3):
            per[d, 3 * (self.n_nodes - 1) + d] = 1.0
            per[d, d] = -1.0
        Jrows = sp.vstack([Jc, per.tocsr(), sp.csr_matrix(self.phase)])

        # scalar columns
        cols_list = []
        Bduw = np.einsum("kij,kj->ki", B, duw)
        if not self.fix_period:
            dRdT = (-f - (p.tau / T) * Bduw) * scale
            cols_list.append(np.concatenate([dRdT.ravel(), np.zeros(4)]))
        for name in self.free_params:
            if name == "tau":
                col = Bduw * scale
            else:
                col = -T * model.jac_param(uc, uw, p, name) * scale
            cols_list.append(np.concatenate([col.ravel(), np.zeros(4)]))
        if cols_list:
            J = sp.hstack([Jrows, sp.csr_matrix(np.column_stack(cols_list))])
        else:
            J = Jrows
        return J.tocsc()


def _newton(system, X0, extra_rows=None, extra_rhs=None, tol=1e-10,
            max_iter=12, min_lambda=1.0 / 32.0):
    """Damped Newton on an OrbitSystem plus optional bordering rows.

    extra_rows is a dense (n_extra, n_unknowns) array of linear functionals,
    extra_rhs their target values; they square up under-determined systems.
    """
    X = X0.copy()

    def full_res(Xv):
        r = system.residual(Xv)
        if extra_rows is not None:
            r = np.concatenate([r, extra_rows @ Xv - extra_rhs])
        return r

    R = full_res(X)
    norm = np.abs(R).max()
    for it in range(max_iter):
        if norm < tol:
            return X, norm, it
        J = system.jacobian(X)
        if extra_rows is not None:
            J = sp.vstack([J, sp.csr_matrix(extra_rows)]).tocsc()
        if J.shape[0] != J.shape[1]:
            raise NewtonError(
                f"system is not square: {J.shape[0]} equations, "
                f"{J.shape[1]} unknowns", norm)
        try:
            lu = splu(J)
        except RuntimeError as e:
            raise NewtonError(f"singular Jacobian: {e}", norm) from None
        dX = lu.solve(-R)
        lam = 1.0
        while True:
            Xn = X + lam * dX
            Rn = full_res(Xn)
            normn = np.abs(Rn).max()
            if normn < norm * (1.0 - 1e-4 * lam) or normn < tol:
                break
            lam *= 0.5
            if lam < min_lambda:
                raise NewtonError(
                    f"no descent after damping (residual {norm:.3e})", norm)
        X, R, norm = Xn, Rn, normn
    if norm < tol:
        return X, norm, max_iter
    raise NewtonError(f"no convergence in {max_iter} iterations "
                      f"(residual {norm:.3e})", norm)


def assemble_residual(orbit, p=None):
    """Scaled collocation/periodicity/phase residual of an orbit as given.

    Collocation rows are divided by max(1, T) so that tolerances are
    comparable across short and long periods; the orbit is its own phase
    anchor, making the phase row exactly zero only up to the anchor identity.
    """
    p = p or orbit.params
    disc = orbit.disc()
    system = OrbitSystem(disc, p, disc, orbit.values)
    X = system.pack(orbit)
    r = system.residual(X)
    # the self-anchored phase value is reported but not meaningful as an error
    return r


def solve_orbit(orbit, p=None, free_params=(), fix_period=False, anchor=None,
                tol=1e-10, max_iter=12):
    """Newton-correct an initial orbit at parameters p.

    With fix_period=True the period is frozen and exactly one free parameter
    must be named instead (used for homoclinic-approximating orbits). The
    anchor for the phase condition defaults to the initial orbit itself.
    Returns a new converged PeriodicOrbit; raises NewtonError otherwise.
    """
    p = p or orbit.params
    n_free = len(free_params)
    if fix_period and n_free != 1:
        raise ValueError("fixed period requires exactly one free parameter")
    if not fix_period and n_free != 0:
        raise ValueError("free parameters beyond the period need pin rows")
    disc = orbit.disc()
    if anchor is None:
        anchor = orbit
    system = OrbitSystem(disc, p, anchor.disc(), anchor.values,
                         free_params=free_params, fix_period=fix_period)
    start = orbit.with_params(p)
    X0 = system.pack(start)
    X, norm, _ = _newton(system, X0, tol=tol, max_iter=max_iter)
    U, T, pout = system.unpack(X)
    return PeriodicOrbit(pout, T, disc.mesh.copy(), U, disc.m, norm, True)


def remesh_orbit(orbit, n_int=None, resolve=True, tol=1e-10):
    """Re-equidistribute the mesh and re-solve on it."""
    disc = orbit.disc()
    n_int = n_int or disc.n_int
    mesh_new = equidistribute(disc, orbit.values, n_int)
    disc_new = Disc(mesh_new, orbit.degree)
    vals = resample(disc, orbit.values, disc_new)
    out = PeriodicOrbit(orbit.params, orbit.period, mesh_new, vals,
                        orbit.degree, np.nan, False)
    if resolve:
        out = solve_orbit(out, tol=tol)
    return out


def mesh_concentration(orbit, span_frac=0.2):
    """Smallest fraction of the period containing span_frac of the intervals...

    Returns the fraction of intervals that lie inside the shortest window
    covering span_frac of the period, a measure of adaptive concentration.
    """
    mesh = orbit.mesh
    n = len(mesh) - 1
    widths = np.diff(mesh)
    order = np.argsort(widths)
    # count how many of the narrowest intervals fit in span_frac of the period
    acc, count = 0.0, 0
    for i in order:
        if acc + widths[i] > span_frac:
            break
        acc += widths[i]
        count += 1
    return count / n


@dataclasses.dataclass
class OrbitDiagnostics:
    """Pulse-structure summary of one orbit."""

    component_min: np.ndarray
    component_max: np.ndarray
    min_distance_origin: float
    peak_count: int
    peaks_per_delay: float
    drift: float
    peak_phases: np.ndarray


def orbit_diagnostics(orbit, n_samples=4096, prominence_frac=0.05):
    """Componentwise ranges, pulse count, and drift of a periodic orbit.

    Peaks are maxima of the x component over one period with prominence above
    prominence_frac of the x amplitude (filters tail ripples). The per-delay
    count rescales the per-period count by tau / T, which by periodicity is
    the exact average over a sliding delay-length window; it is nan when the
    delay is not positive. drift is T - tau.
    """
    s = np.arange(n_samples) / n_samples
    u = orbit.evaluate(s)
    x = u[:, 0]
    amp = x.max() - x.min()
    # tile one extra copy so peaks sitting on the seam are not missed
    x3 = np.concatenate([x, x, x])
    pk, _ = find_peaks(x3, prominence=max(prominence_frac * amp, 1e-300))
    pk = pk[(pk >= n_samples) & (pk < 2 * n_samples)] - n_samples
    tau = orbit.params.tau
    per_delay = len(pk) * tau / orbit.period if tau > 0 else np.nan
    return OrbitDiagnostics(
        component_min=u.min(axis=0), component_max=u.max(axis=0),
        min_distance_origin=float(np.linalg.norm(u, axis=1).min()),
        peak_count=int(len(pk)), peaks_per_delay=per_delay,
        drift=orbit.period - tau, peak_phases=np.sort(s[pk]))


def planar_homoclinic_seed(p, period=200.0, n_int=80, degree=4, delta=1e-8,
                           return_level=1e-6, n_fine=400):
    """Long-period orbit seed from the explicit planar homoclinic loop.

    At mu = mu_tilde = kappa = tau = 0 the x-y plane carries a homoclinic
    loop to the origin along the leaf x^2 (1 - x) = y^2. The loop is traced
    by time integration from a point on the unstable eigendirection, rolled
    so the pulse sits mid-interval, and resampled onto an adapted mesh. The
    result is a seed, not a converged orbit.
    """
    from scipy.integrate import solve_ivp

    p0 = p.replace(mu=0.0, mu_tilde=0.0, kappa=0.0, tau=0.0)
    u0 = delta * np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)

    # one excursion only: the origin is a saddle, so integration past the
    # return re-ejects; stop when the norm falls back through return_level,
    # which must sit above the integration-error floor of the return miss
    def back_near(t, u):
        return np.linalg.norm(u) - return_level
    back_near.terminal = True
    back_near.direction = -1.0
    sol = solve_ivp(lambda t, u: model.ode_rhs(u, p0), (0.0, period), u0,
                    method="RK45", rtol=1e-12, atol=1e-14,
                    dense_output=True, events=back_near)
    if sol.t_events[0].size == 0:
        raise RuntimeError("homoclinic loop did not return near the origin")
    t_loop = sol.t_events[0][0]
    if t_loop >= period:
        raise RuntimeError("loop longer than the requested period")

    disc_f = Disc(np.linspace(0.0, 1.0, n_fine + 1), degree)
    t_s = period * disc_f.s_nodes - 0.5 * (period - t_loop)
    vals_f = np.zeros((disc_f.n_nodes, 3))
    inside = (t_s >= 0.0) & (t_s <= t_loop)
    vals_f[inside] = sol.sol(t_s[inside]).T
    mesh = equidistribute(disc_f, vals_f, n_int)
    disc = Disc(mesh, degree)
    vals = resample(disc_f, vals_f, disc)
    vals[-1] = vals[0]
    return PeriodicOrbit(p0, period, mesh, vals, degree)


def hopf_start(p, eq, tau, omega, amplitude=1e-2, n_int=40, degree=4,
               tol=1e-10):
    """Small periodic orbit near a Hopf point, solved with a modal pin.

    Builds the linear seed q + amplitude * Re(v exp(2 pi i s)) from the
    critical eigenvector v of the characteristic matrix at i omega, then
    corrects with Newton keeping the modal amplitude pinned while tau adjusts.
    """
    pt = p.replace(tau=tau)
    D = model.char_matrix(complex(0.0, omega), pt, eq)
    _, _, Vh = np.linalg.svd(D)
    v = Vh.conj()[-1]
    v = v / np.linalg.norm(v)
    disc = Disc(np.linspace(0.0, 1.0, n_int + 1), degree)
    s = disc.s_nodes
    prof = (np.asarray(eq)[None, :]
            + amplitude * np.real(v[None, :] * np.exp(2j * np.pi * s)[:, None]))
    T0 = 2.0 * np.pi / omega
    orbit = PeriodicOrbit(pt, T0, disc.mesh, prof, degree)

    system = OrbitSystem(disc, pt, disc, prof, free_params=("tau",),
                         fix_period=False)
    # modal amplitude pin: projection onto the real part of the seed mode
    dmode = np.real(v[None, :] * np.exp(2j * np.pi * disc.sc)[:, None])
    row = np.zeros(system.n_unknowns)
    nodes = disc.node_idx[disc.ci]
    Lc = np.tile(disc.Lc, (disc.n_int, 1))
    w = disc.wquad[:, None] * Lc
    for d in range(3):
        np.add.at(row, 3 * nodes + d, 2.0 * w * dmode[:, d:d + 1])
    target = row[:3 * disc.n_nodes] @ prof.ravel()
    X0 = system.pack(orbit)
    X, norm, _ = _newton(system, X0, extra_rows=row[None, :],
                         extra_rhs=np.array([target]), tol=tol, max_iter=30)
    U, T, pout = system.unpack(X)
    return PeriodicOrbit(pout, T, disc.mesh.copy(), U, degree, norm, True)
