"""Extended defining systems for codimension-1 bifurcation curves.

Period-doubling curves append the multiplier -1 eigenfunction equations to
the periodic-orbit collocation system; fold (SNP) curves append the null
vector of the orbit/period linearization; Hopf curves pin a characteristic
root at i*omega on an equilibrium. Each problem exposes the same interface
as the orbit problems in the continuation module (residual, jacobian,
pack/unpack, rebuild), so the one pseudo-arclength engine drives them all.

Scalar columns of the Jacobians (period and parameter derivatives) are
formed by central differences of the full residual; the large state blocks
are analytic.
"""

import dataclasses

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import model
from .mesh import Disc
from .orbit import OrbitSystem, PeriodicOrbit, NewtonError, phase_row


# ------------------------------------------------------------------ states

@dataclasses.dataclass
class PDState:
    """A period-doubling point: critical orbit plus -1 eigenfunction."""

    orbit: PeriodicOrbit
    eigenfunction: np.ndarray            # (n_nodes, 3), real

    @property
    def params(self):
        return self.orbit.params

    @property
    def period(self):
        return self.orbit.period


@dataclasses.dataclass
class FoldState:
    """A fold (SNP) point: orbit plus null vector of the (U, T) system."""

    orbit: PeriodicOrbit
    null_values: np.ndarray              # (n_nodes, 3)
    null_period: float                   # period component of the null vector

    @property
    def params(self):
        return self.orbit.params

    @property
    def period(self):
        return self.orbit.period


@dataclasses.dataclass
class HopfState:
    """A Hopf point of an equilibrium: state, frequency and null vector."""

    params: model.ParameterSet
    equilibrium: np.ndarray              # (3,)
    omega: float
    eigenvector: np.ndarray              # (3,) complex


# ------------------------------------------------------- shared machinery

def _fd_columns(residual, X, idxs):
    """Central-difference columns of residual at X for the given indices."""
    cols = []
    for i in idxs:
        eps = 1e-6 * (1.0 + abs(X[i]))
        Xp = X.copy()
        Xm = X.copy()
        Xp[i] += eps
        Xm[i] -= eps
        cols.append((residual(Xp) - residual(Xm)) / (2.0 * eps))
    return np.column_stack(cols) if cols else None


def _quad_row(disc, profile_c, nodes_c, Lc_pts):
    """Row vector over node dofs representing int <profile, .> ds."""
    row = np.zeros(3 * disc.n_nodes)
    w = disc.wquad[:, None] * Lc_pts
    for d in range(3):
        np.add.at(row, 3 * nodes_c + d, w * profile_c[:, d:d + 1])
    return row


def _block(rows_k, nodes, weights, mats, scale):
    """COO triplets for sum_j weights[k,j] * mats[k,:,:] at node columns."""
    K, mp1 = nodes.shape
    r = (3 * rows_k[:, None, None, None] + np.arange(3)[None, None, :, None])
    c = (3 * nodes[:, :, None, None] + np.arange(3)[None, None, None, :])
    v = mats[:, None, :, :] * weights[:, :, None, None] * scale
    return (np.broadcast_to(r, (K, mp1, 3, 3)).ravel(),
            np.broadcast_to(c, (K, mp1, 3, 3)).ravel(),
            v.ravel())


def _square_newton(problem, X0, tol=1e-10, max_iter=16):
    X = X0.copy()
    for _ in range(max_iter):
        R = problem.residual(X)
        norm = float(np.abs(R).max())
        if norm < tol:
            return X, norm
        J = problem.jacobian(X).tocsc()
        try:
            dX = splu(J).solve(-R)
        except RuntimeError as e:
            raise NewtonError(f"singular extended system: {e}", norm) from None
        X = X + dX
        if not np.all(np.isfinite(X)):
            raise NewtonError("extended solve diverged", np.inf)
    R = problem.residual(X)
    norm = float(np.abs(R).max())
    if norm < tol:
        return X, norm
    raise NewtonError(f"extended solve: no convergence ({norm:.3e})", norm)


# --------------------------------------------------------------- PD curves

class PDCurveProblem:
    """Orbit + antiperiodic eigenfunction system; period free.

    Unknowns [U, T, W, p...]: collocation/periodicity/phase rows for the
    orbit, then the linearized rows for the eigenfunction w with w(1) =
    -w(0) and a frozen-reference normalization int <w, w_ref> = 1. The
    delayed eigenfunction argument picks up a factor (-1)^floor(xi) from
    antiperiodicity, xi = s - tau/T.
    """

    kind = "pd"
    bc_sign = 1.0          # w(1) + bc_sign * w(0) = 0

    def __init__(self, state, free):
        self.free_names = tuple(free)
        orbit = state.orbit
        self.disc = orbit.disc()
        self.template = orbit.params
        self._anchor_vals = orbit.values.copy()
        self._wref = state.eigenfunction.copy()
        self.nd = 3 * self.disc.n_nodes
        self.n = 2 * self.nd + 1 + len(self.free_names)
        self._make_system()
        w = np.ones(self.n)
        w[:self.nd] = 1.0 / np.sqrt(self.nd)
        w[self.nd + 1:2 * self.nd + 1] = 1.0 / np.sqrt(self.nd)
        self.weights = w

    # -- assembly helpers

    def _make_system(self):
        self.osys = OrbitSystem(self.disc, self.template, self.disc,
                                self._anchor_vals, free_params=())
        # scale w_ref so the normalization row evaluates to one exactly
        wref_c = self.disc.eval_profile(self._wref, self.disc.sc)
        wc = wref_c  # current eigenfunction equals reference at (re)anchor
        denom = float(np.sum(self.disc.wquad * np.sum(wc * wref_c, axis=1)))
        self._wref = self._wref / denom
        self._norm_row = _quad_row(self.disc, wref_c / denom,
                                   self.osys.nodes_c, self.osys.Lc_pts)

    def unpack(self, X):
        nd = self.nd
        U = X[:nd].reshape(-1, 3)
        T = float(X[nd])
        W = X[nd + 1:2 * nd + 1].reshape(-1, 3)
        p = self.template
        for name, v in zip(self.free_names, X[2 * nd + 1:]):
            p = p.replace(**{name: float(v)})
        return U, T, W, p

    def pack(self, state):
        self.template = state.orbit.params
        self._anchor_vals = state.orbit.values.copy()
        self._wref = state.eigenfunction.copy()
        self._make_system()
        return np.concatenate(
            [state.orbit.values.ravel(), [state.orbit.period],
             state.eigenfunction.ravel(),
             [state.orbit.params.get(n) for n in self.free_names]])

    def unpack_state(self, X):
        U, T, W, p = self.unpack(X)
        orb = PeriodicOrbit(p, T, self.disc.mesh.copy(), U.copy(),
                            self.disc.m, 0.0, True)
        return PDState(orb, W.copy())

    def _wrap_signs(self, T, p):
        xi = self.disc.sc - p.tau / T
        return np.where(np.mod(np.floor(xi), 2.0) == 0.0, 1.0, -1.0)

    def _lin_pieces(self, U, T, W, p):
        o = self.osys
        Uc = U[o.nodes_c]
        uc = np.einsum("kj,kjd->kd", o.Lc_pts, Uc)
        nodes_w, Ww, uw, duw = o._delayed(U, T, p)
        Wc = W[o.nodes_c]
        wc = np.einsum("kj,kjd->kd", o.Lc_pts, Wc)
        dwc = np.einsum("kj,kjd->kd", o.Dc_pts, Wc)
        sign = self._wrap_signs(T, p)
        wd = sign[:, None] * np.einsum("kj,kjd->kd", Ww, W[nodes_w])
        return uc, nodes_w, Ww, uw, duw, wc, dwc, wd, sign

    def residual(self, X):
        U, T, W, p = self.unpack(X)
        self.osys.p = p
        R_orb = self.osys.residual(np.concatenate([U.ravel(), [T]]))
        uc, _, _, uw, _, wc, dwc, wd, _ = self._lin_pieces(U, T, W, p)
        A = model.jac_u(uc, uw, p)
        B = model.jac_v(uc, uw, p)
        scale = 1.0 / max(1.0, abs(T))
        Gc = (dwc - T * (np.einsum("kij,kj->ki", A, wc)
                         + np.einsum("kij,kj->ki", B, wd))) * scale
        Rbc = W[-1] + self.bc_sign * W[0]
        Rn = self._norm_row @ W.ravel() - 1.0
        return np.concatenate([R_orb, Gc.ravel(), Rbc, [Rn]])

    def jacobian(self, X):
        U, T, W, p = self.unpack(X)
        o = self.osys
        o.p = p
        nd, K = self.nd, o.K
        scale = 1.0 / max(1.0, abs(T))
        J_orb = o.jacobian(np.concatenate([U.ravel(), [T]]))  # (3K+4, nd+1)
        uc, nodes_w, Ww, uw, duw, wc, dwc, wd, sign = \
            self._lin_pieces(U, T, W, p)
        A = model.jac_u(uc, uw, p)
        B = model.jac_v(uc, uw, p)
        ks = np.arange(K)

        # eigenfunction rows, U columns: second-derivative contractions
        rU, cU, vU = [], [], []
        for tr in (_block(ks, o.nodes_c, o.Lc_pts,
                          -T * model.huu_contract(uc, wc, p), scale),
                   _block(ks, nodes_w, Ww,
                          -T * model.hdd_contract(uw, wd, p), scale)):
            rU.append(tr[0]); cU.append(tr[1]); vU.append(tr[2])
        G_U = sp.coo_matrix((np.concatenate(vU),
                             (np.concatenate(rU), np.concatenate(cU))),
                            shape=(3 * K, nd))

        # eigenfunction rows, W columns: derivative term and linearization
        rW, cW, vW = [], [], []
        r = (3 * ks[:, None, None] + np.arange(3)[None, None, :])
        c = (3 * o.nodes_c[:, :, None] + np.arange(3)[None, None, :])
        v = np.broadcast_to(o.Dc_pts[:, :, None], (K, o.disc.m + 1, 3))
        rW.append(np.broadcast_to(r, v.shape).ravel())
        cW.append(c.ravel())
        vW.append((v * scale).ravel())
        for tr in (_block(ks, o.nodes_c, o.Lc_pts, -T * A, scale),
                   _block(ks, nodes_w, Ww * sign[:, None], -T * B, scale)):
            rW.append(tr[0]); cW.append(tr[1]); vW.append(tr[2])
        G_W = sp.coo_matrix((np.concatenate(vW),
                             (np.concatenate(rW), np.concatenate(cW))),
                            shape=(3 * K, nd))

        bc = sp.lil_matrix((3, nd))
        for d in range(3):
            bc[d, nd - 3 + d] = 1.0
            bc[d, d] = self.bc_sign
        lower = sp.bmat([[G_U, G_W],
                         [None, bc.tocsr()],
                         [None, sp.csr_matrix(self._norm_row)]],
                        format="csr")
        upper = sp.hstack([J_orb[:, :nd],
                           sp.csr_matrix((3 * K + 4, nd))], format="csr")
        body = sp.vstack([upper, lower])

        # period and parameter columns by central differences
        idxs = [nd] + [2 * nd + 1 + i for i in range(len(self.free_names))]
        C = _fd_columns(self.residual, X, idxs)
        J = sp.hstack([body[:, :nd], sp.csr_matrix(C[:, :1]),
                       body[:, nd:], sp.csr_matrix(C[:, 1:])])
        return J.tocsc()

    def params(self, X):
        return self.unpack(X)[3]

    def orbit(self, X):
        U, T, _, p = self.unpack(X)
        return PeriodicOrbit(p, T, self.disc.mesh.copy(), U.copy(),
                             self.disc.m, 0.0, True)

    def rebuild(self, X):
        U, T, W, p = self.unpack(X)
        self.template = p
        self._anchor_vals = U.copy()
        self._wref = W.copy()
        self._make_system()


# ------------------------------------------------------------- fold curves

class FoldCurveProblem(PDCurveProblem):
    """Orbit + null-vector system for a fold of periodic orbits.

    The null vector (W, nu) spans the kernel of the phase-pinned orbit
    linearization in (U, T); the delayed eigenfunction argument wraps
    periodically (no sign) and the period direction enters through the
    analytic T-column of the collocation residual.
    """

    kind = "fold"
    bc_sign = -1.0         # periodic: w(1) - w(0) = 0

    def __init__(self, state, free):
        self.free_names = tuple(free)
        orbit = state.orbit
        self.disc = orbit.disc()
        self.template = orbit.params
        self._anchor_vals = orbit.values.copy()
        self._wref = state.null_values.copy()
        self._nuref = float(state.null_period)
        self.nd = 3 * self.disc.n_nodes
        self.n = 2 * self.nd + 2 + len(self.free_names)
        self._make_system()
        w = np.ones(self.n)
        w[:self.nd] = 1.0 / np.sqrt(self.nd)
        w[self.nd + 1:2 * self.nd + 1] = 1.0 / np.sqrt(self.nd)
        self.weights = w

    def _make_system(self):
        self.osys = OrbitSystem(self.disc, self.template, self.disc,
                                self._anchor_vals, free_params=())
        wref_c = self.disc.eval_profile(self._wref, self.disc.sc)
        denom = float(np.sum(self.disc.wquad * np.sum(wref_c ** 2, axis=1))
                      + self._nuref ** 2)
        self._wref = self._wref / denom
        self._nuref = self._nuref / denom
        self._norm_row = _quad_row(self.disc, wref_c / denom,
                                   self.osys.nodes_c, self.osys.Lc_pts)

    def unpack(self, X):
        nd = self.nd
        U = X[:nd].reshape(-1, 3)
        T = float(X[nd])
        W = X[nd + 1:2 * nd + 1].reshape(-1, 3)
        nu = float(X[2 * nd + 1])
        p = self.template
        for name, v in zip(self.free_names, X[2 * nd + 2:]):
            p = p.replace(**{name: float(v)})
        return U, T, W, nu, p

    def pack(self, state):
        self.template = state.orbit.params
        self._anchor_vals = state.orbit.values.copy()
        self._wref = state.null_values.copy()
        self._nuref = float(state.null_period)
        self._make_system()
        return np.concatenate(
            [state.orbit.values.ravel(), [state.orbit.period],
             state.null_values.ravel(), [state.null_period],
             [state.orbit.params.get(n) for n in self.free_names]])

    def unpack_state(self, X):
        U, T, W, nu, p = self.unpack(X)
        orb = PeriodicOrbit(p, T, self.disc.mesh.copy(), U.copy(),
                            self.disc.m, 0.0, True)
        return FoldState(orb, W.copy(), nu)

    def residual(self, X):
        U, T, W, nu, p = self.unpack(X)
        o = self.osys
        o.p = p
        R_orb = o.residual(np.concatenate([U.ravel(), [T]]))
        Uc = U[o.nodes_c]
        uc = np.einsum("kj,kjd->kd", o.Lc_pts, Uc)
        nodes_w, Ww, uw, duw = o._delayed(U, T, p)
        Wc = W[o.nodes_c]
        wc = np.einsum("kj,kjd->kd", o.Lc_pts, Wc)
        dwc = np.einsum("kj,kjd->kd", o.Dc_pts, Wc)
        wd = np.einsum("kj,kjd->kd", Ww, W[nodes_w])
        A = model.jac_u(uc, uw, p)
        B = model.jac_v(uc, uw, p)
        f = model.dde_rhs(uc, uw, p)
        Bduw = np.einsum("kij,kj->ki", B, duw)
        scale = 1.0 / max(1.0, abs(T))
        Gc = (dwc - T * (np.einsum("kij,kj->ki", A, wc)
                         + np.einsum("kij,kj->ki", B, wd))
              + nu * (-f - (p.tau / T) * Bduw)) * scale
        Rbc = W[-1] - W[0]
        Rph = float(o.phase @ W.ravel())
        Rn = self._norm_row @ W.ravel() + self._nuref * nu - 1.0
        return np.concatenate([R_orb, Gc.ravel(), Rbc, [Rph, Rn]])

    def jacobian(self, X):
        U, T, W, nu, p = self.unpack(X)
        o = self.osys
        o.p = p
        nd, K = self.nd, o.K
        scale = 1.0 / max(1.0, abs(T))
        J_orb = o.jacobian(np.concatenate([U.ravel(), [T]]))
        Uc = U[o.nodes_c]
        uc = np.einsum("kj,kjd->kd", o.Lc_pts, Uc)
        d = p.tau / T
        frac = np.mod(o.disc.sc - d, 1.0)
        widx, Ww = o.disc.eval_weights(frac)
        _, dWw = o.disc.deval_weights(frac)
        nodes_w = o.disc.node_idx[widx]
        Uw = U[nodes_w]
        uw = np.einsum("kj,kjd->kd", Ww, Uw)
        duw = np.einsum("kj,kjd->kd", dWw, Uw)
        Wc = W[o.nodes_c]
        wc = np.einsum("kj,kjd->kd", o.Lc_pts, Wc)
        wd = np.einsum("kj,kjd->kd", Ww, W[nodes_w])
        A = model.jac_u(uc, uw, p)
        B = model.jac_v(uc, uw, p)
        ks = np.arange(K)

        # null-vector rows, U columns
        rU, cU, vU = [], [], []
        terms = [
            _block(ks, o.nodes_c, o.Lc_pts,
                   -T * model.huu_contract(uc, wc, p) - nu * A, scale),
            _block(ks, nodes_w, Ww,
                   -T * model.hdd_contract(uw, wd, p) - nu * B
                   - nu * d * model.hdd_contract(uw, duw, p), scale),
            _block(ks, nodes_w, dWw, -nu * d * B, scale),
        ]
        for tr in terms:
            rU.append(tr[0]); cU.append(tr[1]); vU.append(tr[2])
        G_U = sp.coo_matrix((np.concatenate(vU),
                             (np.concatenate(rU), np.concatenate(cU))),
                            shape=(3 * K, nd))

        # null-vector rows, W columns
        rW, cW, vW = [], [], []
        r = (3 * ks[:, None, None] + np.arange(3)[None, None, :])
        c = (3 * o.nodes_c[:, :, None] + np.arange(3)[None, None, :])
        v = np.broadcast_to(o.Dc_pts[:, :, None], (K, o.disc.m + 1, 3))
        rW.append(np.broadcast_to(r, v.shape).ravel())
        cW.append(c.ravel())
        vW.append((v * scale).ravel())
        for tr in (_block(ks, o.nodes_c, o.Lc_pts, -T * A, scale),
                   _block(ks, nodes_w, Ww, -T * B, scale)):
            rW.append(tr[0]); cW.append(tr[1]); vW.append(tr[2])
        G_W = sp.coo_matrix((np.concatenate(vW),
                             (np.concatenate(rW), np.concatenate(cW))),
                            shape=(3 * K, nd))

        bc = sp.lil_matrix((3, nd))
        for d_ in range(3):
            bc[d_, nd - 3 + d_] = 1.0
            bc[d_, d_] = -1.0
        lower = sp.bmat([[G_U, G_W],
                         [None, bc.tocsr()],
                         [None, sp.csr_matrix(o.phase)],
                         [None, sp.csr_matrix(self._norm_row)]],
                        format="csr")
        upper = sp.hstack([J_orb[:, :nd],
                           sp.csr_matrix((3 * K + 4, nd))], format="csr")
        body = sp.vstack([upper, lower])

        # T, nu and parameter columns by central differences
        idxs = ([nd, 2 * nd + 1]
                + [2 * nd + 2 + i for i in range(len(self.free_names))])
        C = _fd_columns(self.residual, X, idxs)
        J = sp.hstack([body[:, :nd], sp.csr_matrix(C[:, :1]),
                       body[:, nd:], sp.csr_matrix(C[:, 1:])])
        return J.tocsc()

    def orbit(self, X):
        U, T, _, _, p = self.unpack(X)
        return PeriodicOrbit(p, T, self.disc.mesh.copy(), U.copy(),
                             self.disc.m, 0.0, True)

    def params(self, X):
        return self.unpack(X)[4]

    def rebuild(self, X):
        U, T, W, nu, p = self.unpack(X)
        self.template = p
        self._anchor_vals = U.copy()
        self._wref = W.copy()
        self._nuref = nu
        self._make_system()


# ------------------------------------------------------------- Hopf curves

class HopfCurveProblem:
    """Equilibrium + characteristic pair pinned at i*omega."""

    kind = "hopf"

    def __init__(self, state, free):
        self.free_names = tuple(free)
        self.template = state.params
        self._vref = state.eigenvector.copy()
        self.n = 10 + len(self.free_names)
        self.weights = np.ones(self.n)
        self._anchor()

    def _anchor(self):
        v = self._vref
        self._vref = v / np.vdot(v, v).real

    def unpack(self, X):
        q = X[:3]
        omega = float(X[3])
        v = X[4:7] + 1j * X[7:10]
        p = self.template
        for name, val in zip(self.free_names, X[10:]):
            p = p.replace(**{name: float(val)})
        return q, omega, v, p

    def pack(self, state):
        self.template = state.params
        self._vref = state.eigenvector.copy()
        self._anchor()
        return np.concatenate(
            [state.equilibrium, [state.omega],
             state.eigenvector.real, state.eigenvector.imag,
             [state.params.get(n) for n in self.free_names]])

    def unpack_state(self, X):
        q, omega, v, p = self.unpack(X)
        return HopfState(p, q.copy(), omega, v.copy())

    def residual(self, X):
        q, omega, v, p = self.unpack(X)
        F = model.dde_rhs(q, q, p)
        D = model.char_matrix(1j * omega, p, q)
        Dv = D @ v
        rn = np.vdot(self._vref, v) - 1.0
        return np.concatenate([F, Dv.real, Dv.imag, [rn.real, rn.imag]])

    def jacobian(self, X):
        C = _fd_columns(self.residual, X, list(range(self.n)))
        return sp.csr_matrix(C)

    def params(self, X):
        return self.unpack(X)[3]

    def orbit(self, X):
        q, omega, _, p = self.unpack(X)
        vals = np.vstack([q, q])
        return PeriodicOrbit(p, 2.0 * np.pi / max(abs(omega), 1e-12),
                             np.array([0.0, 1.0]), vals, 1, 0.0, True)

    def rebuild(self, X):
        q, omega, v, p = self.unpack(X)
        self.template = p
        self._vref = v.copy()
        self._anchor()


# ----------------------------------------------------------- point solves

def solve_pd_point(orbit, free, tol=1e-10):
    """Locate a period-doubling point exactly, one parameter adjusting.

    Seeds the eigenfunction from the multiplier closest to -1 and solves
    the square extended system (orbit, period, eigenfunction, free param).
    """
    from .floquet import floquet_eigenfunction
    _, w = floquet_eigenfunction(orbit, -1.0)
    if np.iscomplexobj(w):
        w = w.real / np.abs(w.real).max()
    state = PDState(orbit.copy(), w)
    problem = PDCurveProblem(state, (free,))
    X, norm = _square_newton(problem, problem.pack(state), tol)
    out = problem.unpack_state(X)
    out.orbit.residual_norm = norm
    return out


def solve_fold_point(orbit, free, tol=1e-10):
    """Locate a fold of periodic orbits exactly, one parameter adjusting.

    The null-vector seed is the branch tangent of the one-parameter family
    at the fold, whose parameter component vanishes there.
    """
    from .continuation import OrbitPathProblem, _tangent
    path = OrbitPathProblem(orbit, free)
    Xp = path.pack(orbit)
    seed = np.zeros(path.n)
    seed[3 * path.disc.n_nodes] = 1.0      # period direction
    t = _tangent(path, Xp, seed)
    nd = 3 * path.disc.n_nodes
    W = t[:nd].reshape(-1, 3).copy()
    nu = float(t[nd])
    state = FoldState(orbit.copy(), W, nu)
    problem = FoldCurveProblem(state, (free,))
    X, norm = _square_newton(problem, problem.pack(state), tol)
    out = problem.unpack_state(X)
    out.orbit.residual_norm = norm
    return out


def solve_hopf_point(p, q0, omega0, free, tol=1e-10):
    """Refine a Hopf point of an equilibrium with one parameter adjusting."""
    D = model.char_matrix(1j * omega0, p, np.asarray(q0, float))
    _, _, Vh = np.linalg.svd(D)
    v0 = Vh[-1].conj()
    state = HopfState(p, np.asarray(q0, float), float(omega0), v0)
    problem = HopfCurveProblem(state, (free,))
    X, _ = _square_newton(problem, problem.pack(state), tol)
    return problem.unpack_state(X)


# ------------------------------------------------------- curve continuation

def _continue_curve(problem_cls, state, free_pair, opts, tests):
    from .continuation import ContOpts, _correct, _free_index, continue_branch
    opts = opts or ContOpts()
    problem = problem_cls(state, tuple(free_pair))
    X0 = problem.pack(state)
    pin = np.zeros(problem.n)
    pin[_free_index(problem, free_pair[1])] = 1.0
    X0, _ = _correct(problem, X0, pin, float(np.dot(pin, X0)), opts.tol, 14)
    return continue_branch(problem, X0, opts, tests)


def continue_pd_curve(state, free_pair, opts=None, tests=None):
    """Two-parameter curve of period-doubling bifurcations."""
    return _continue_curve(PDCurveProblem, state, free_pair, opts, tests)


def continue_fold_curve(state, free_pair, opts=None, tests=None):
    """Two-parameter curve of folds (SNP) of periodic orbits."""
    return _continue_curve(FoldCurveProblem, state, free_pair, opts, tests)


def continue_hopf_curve(state, free_pair, opts=None, tests=None):
    """Two-parameter curve of equilibrium Hopf bifurcations."""
    return _continue_curve(HopfCurveProblem, state, free_pair, opts, tests)


def snap_state(kind, problem, rawX, pinned, value, other_free, tol=1e-10):
    """Freeze a stop parameter exactly and re-solve the extended system."""
    cls = {"pd": PDCurveProblem, "fold": FoldCurveProblem,
           "hopf": HopfCurveProblem}[kind]
    state = problem.unpack_state(np.asarray(rawX, float))
    if kind == "hopf":
        state.params = state.params.replace(**{pinned: value})
    else:
        state.orbit = state.orbit.with_params(
            state.orbit.params.replace(**{pinned: value}))
    square = cls(state, (other_free,))
    X, _ = _square_newton(square, square.pack(state), tol)
    return square.unpack_state(X)
