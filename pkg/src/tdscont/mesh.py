"""Piecewise-polynomial collocation discretization on a periodic mesh.

Profiles live on the rescaled period interval [0, 1]. Each mesh interval
carries a degree-m polynomial represented by its values at m+1 equally spaced
nodes, so neighbouring intervals share their endpoint values and continuity is
automatic. Collocation conditions are imposed at the m Gauss-Legendre points
of every interval.
"""

import numpy as np
from scipy.special import roots_legendre


def gauss_points(m):
    """Gauss-Legendre points and weights mapped to (0, 1)."""
    x, w = roots_legendre(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _basis_coeffs(m):
    """Monomial coefficients of the Lagrange basis on the uniform nodes j/m.

    Column j holds the coefficients (low order first) of the basis polynomial
    that is 1 at node j and 0 at the others.
    """
    xi = np.arange(m + 1) / m
    V = np.vander(xi, m + 1, increasing=True)
    return np.linalg.solve(V, np.eye(m + 1))


def uniform_mesh(n):
    return np.linspace(0.0, 1.0, n + 1)


class Disc:
    """Discretization data bound to one mesh and polynomial degree."""

    def __init__(self, mesh, degree=4):
        mesh = np.asarray(mesh, dtype=float)
        if mesh[0] != 0.0 or abs(mesh[-1] - 1.0) > 1e-14 or np.any(np.diff(mesh) <= 0):
            raise ValueError("mesh must increase from 0 to 1")
        self.mesh = mesh
        self.m = degree
        self.n_int = len(mesh) - 1
        self.h = np.diff(mesh)
        self.n_nodes = self.n_int * degree + 1
        self.coeffs = _basis_coeffs(degree)
        # derivative coefficients: d/dxi of sum c_q xi^q
        q = np.arange(1, degree + 1)
        self.dcoeffs = self.coeffs[1:, :] * q[:, None]
        g, wq = gauss_points(degree)
        self.g = g
        self.wq = wq
        # basis values/derivatives at the reference Gauss points
        self.Lc = self._vals(g)          # (m, m+1)
        self.Dc = self._dvals(g)         # (m, m+1), derivative in local xi
        # global collocation points, interval-major ordering
        self.sc = (mesh[:-1, None] + np.outer(self.h, g)).ravel()
        self.ci = np.repeat(np.arange(self.n_int), degree)
        self.node_idx = (np.arange(self.n_int)[:, None] * degree
                         + np.arange(degree + 1)[None, :])
        # quadrature weight of each collocation point for integrals over [0, 1]
        self.wquad = np.outer(self.h, wq).ravel()
        # representation nodes in s
        self.s_nodes = np.concatenate(
            [(mesh[:-1, None] + np.outer(self.h, np.arange(degree) / degree)).ravel(),
             [1.0]])

    def _vals(self, xi):
        xi = np.asarray(xi, dtype=float)
        P = np.vander(xi, self.m + 1, increasing=True)
        return P @ self.coeffs

    def _dvals(self, xi):
        xi = np.asarray(xi, dtype=float)
        P = np.vander(xi, self.m, increasing=True)
        return P @ self.dcoeffs

    def locate(self, s):
        """Interval index and local coordinate for points of [0, 1]."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self.mesh, s, side="right") - 1,
                      0, self.n_int - 1)
        xi = (s - self.mesh[idx]) / self.h[idx]
        return idx, xi

    def eval_weights(self, s):
        """(interval index, basis weights) so that u(s) = weights . U[nodes]."""
        idx, xi = self.locate(s)
        return idx, self._vals(xi)

    def deval_weights(self, s):
        """Weights of du/ds at arbitrary points, including the 1/h factor."""
        idx, xi = self.locate(s)
        return idx, self._dvals(xi) / self.h[idx][..., None]

    def eval_profile(self, U, s):
        idx, W = self.eval_weights(np.atleast_1d(s))
        vals = np.einsum("kj,kjd->kd", W, U[self.node_idx[idx]])
        return vals if np.ndim(s) else vals[0]

    def deval_profile(self, U, s):
        idx, W = self.deval_weights(np.atleast_1d(s))
        vals = np.einsum("kj,kjd->kd", W, U[self.node_idx[idx]])
        return vals if np.ndim(s) else vals[0]

    def integrate(self, vals_at_colloc):
        """Integral over [0, 1] of a quantity sampled at the collocation points."""
        return np.tensordot(self.wquad, vals_at_colloc, axes=(0, 0))


def resample(disc_old, U_old, disc_new):
    """Interpolate node values of one discretization onto another."""
    return disc_old.eval_profile(U_old, disc_new.s_nodes)


def equidistribute(disc, U, n_int_new, floor_frac=0.02, smooth=2):
    """New mesh equidistributing an arclength-style monitor of the profile.

    The monitor is ||du/ds|| sampled on a fine grid, floored at floor_frac of
    its maximum so that flat plateaus keep a share of intervals, and smoothed
    with a short moving average to avoid degenerate spacing.
    """
    s_fine = np.linspace(0.0, 1.0, max(2000, 12 * disc.n_int))
    du = disc.deval_profile(U, s_fine)
    mon = np.linalg.norm(du, axis=1)
    mon = np.maximum(mon, floor_frac * mon.max() + 1e-300)
    for _ in range(smooth):
        mon = np.convolve(np.r_[mon[:1], mon, mon[-1:]], [0.25, 0.5, 0.25],
                          mode="same")[1:-1]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (mon[1:] + mon[:-1])
                                           * np.diff(s_fine))])
    cum /= cum[-1]
    targets = np.linspace(0.0, 1.0, n_int_new + 1)
    mesh_new = np.interp(targets, cum, s_fine)
    mesh_new[0], mesh_new[-1] = 0.0, 1.0
    # guard against collapsed intervals, then rescale back onto [0, 1]
    min_h = 0.2 / (n_int_new * max(2000, 12 * disc.n_int))
    for i in range(1, len(mesh_new)):
        if mesh_new[i] - mesh_new[i - 1] < min_h:
            mesh_new[i] = mesh_new[i - 1] + min_h
    mesh_new /= mesh_new[-1]
    return mesh_new
