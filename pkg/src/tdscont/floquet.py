"""Floquet multipliers of collocation orbits via the period map on a history segment.

The linearization of the delay system about a periodic orbit defines a map
advancing a history segment of length max(tau, T) by one period. The segment
is discretized on period-copies of the orbit mesh; advancing solves the
linearized collocation system over one period, with delayed arguments read
from the segment. Eigenvalues of the resulting matrix are the multipliers.
Only tau >= 0 is meaningful here; orbits at negative tau must first be
mapped to an equivalent positive delay by reappearance.
"""

import dataclasses
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, eigs, LinearOperator

from . import model

DENSE_LIMIT = 3000


@dataclasses.dataclass
class FloquetSet:
    """Leading multipliers sorted by modulus, descending."""

    multipliers: np.ndarray
    count_requested: int

    def trivial_error(self):
        """Distance of the closest multiplier to 1."""
        return float(np.abs(self.multipliers - 1.0).min())

    def closest_to(self, target):
        i = int(np.argmin(np.abs(self.multipliers - target)))
        return complex(self.multipliers[i])


def _segment_pieces(orbit):
    """Linear-map factors (shift block, solve blocks) of the period map.

    Returns (m_per, n_seg_nodes, Lx_lu, Lh, n_nodes) where the one-period
    advance of a segment H (values at segment nodes, component-major last)
    is [H[shifted tail]; -Lx^{-1} Lh H].
    """
    p = orbit.params
    T = orbit.period
    d = p.tau / T
    if d < 0.0:
        raise ValueError("multipliers need tau >= 0; reappear the orbit "
                         "to an equivalent positive delay first")
    disc = orbit.disc()
    m_per = max(1, int(np.ceil(d - 1e-12)))
    Nm = disc.n_int * disc.m
    n_seg = m_per * Nm + 1          # segment nodes, endpoints shared
    K = Nm

    U = orbit.values
    nodes_c = disc.node_idx[disc.ci]
    l_idx = np.tile(np.arange(disc.m), disc.n_int)
    Lc_pts = disc.Lc[l_idx]
    Dc_pts = disc.Dc[l_idx] / disc.h[disc.ci][:, None]
    uc = np.einsum("kj,kjd->kd", Lc_pts, U[nodes_c])
    w = np.mod(disc.sc - d, 1.0)
    widx, Ww = disc.eval_weights(w)
    uw = np.einsum("kj,kjd->kd", Ww, U[disc.node_idx[widx]])
    A = model.jac_u(uc, uw, p)
    B = model.jac_v(uc, uw, p)

    # extended node vector E = [segment nodes 0..n_seg-1 | new nodes 1..Nm];
    # the s=0 node of the new period is segment node n_seg-1
    n_ext = n_seg + Nm

    def ext_id_current(local):
        # local node index 0..Nm of the current period -> extended index
        local = np.asarray(local)
        return np.where(local == 0, n_seg - 1, n_seg - 1 + local)

    rows, cols, vals = [], [], []

    def add_block(r3, nodes_ext, weights, mat):
        # rows 3*r3+i, cols 3*nodes_ext+j, vals weights * mat[.., i, j]
        K_, J_ = weights.shape
        r = (3 * r3[:, None, None, None] + np.arange(3)[None, None, :, None])
        c = (3 * nodes_ext[:, :, None, None] + np.arange(3)[None, None, None, :])
        v = weights[:, :, None, None] * mat[:, None, :, :]
        rows.append(np.broadcast_to(r, (K_, J_, 3, 3)).ravel())
        cols.append(np.broadcast_to(c, (K_, J_, 3, 3)).ravel())
        vals.append(v.ravel())

    kk = np.arange(K)
    # derivative term on the new period
    eye = np.eye(3)[None, :, :] * np.ones((K, 1, 1))
    add_block(kk, ext_id_current(nodes_c), Dc_pts, eye)
    # -T A(c) acting on the new period
    add_block(kk, ext_id_current(nodes_c), -T * Lc_pts, A)
    # -T B(c) acting at the delayed argument xi = c - d in [-m_per, 1)
    xi = disc.sc - d
    past = xi < 0.0
    if np.any(past):
        xi_p = xi[past] + m_per                      # in [0, m_per)
        copy = np.minimum(np.floor(xi_p).astype(int), m_per - 1)
        sloc = xi_p - copy
        widx_p, Wt = disc.eval_weights(sloc)
        seg_nodes = copy[:, None] * Nm + disc.node_idx[widx_p]
        add_block(kk[past], seg_nodes, -T * Wt, B[past])
    if np.any(~past):
        cur = ~past
        widx_c, Wt = disc.eval_weights(xi[cur])
        add_block(kk[cur], ext_id_current(disc.node_idx[widx_c]),
                  -T * Wt, B[cur])

    C = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * K, 3 * n_ext)).tocsc()
    Lh = C[:, :3 * n_seg]
    Lx = C[:, 3 * n_seg:]
    return m_per, n_seg, splu(Lx.tocsc()), Lh.tocsr(), Nm


def _period_map(orbit):
    """The one-period advance as (n, matvec, dense_builder)."""
    m_per, n_seg, Lx_lu, Lh, Nm = _segment_pieces(orbit)
    n = 3 * n_seg

    def advance(H):
        Wn = -Lx_lu.solve(Lh @ H)
        return np.concatenate([H[3 * Nm:], Wn])

    def dense():
        M = np.empty((n, n))
        # shift part
        S = np.zeros((n - 3 * Nm, n))
        S[:, 3 * Nm:] = np.eye(n - 3 * Nm)
        M[:n - 3 * Nm] = S
        M[n - 3 * Nm:] = -Lx_lu.solve(Lh.toarray())
        return M

    return n, advance, dense


def floquet_multipliers(orbit, n_lead=6):
    """Leading Floquet multipliers of a converged orbit (tau >= 0).

    Dense eigensolve of the period map for segment dimensions up to
    DENSE_LIMIT; larger segments fall back to iterative extraction with a
    warning. Multipliers come back sorted by modulus, descending.
    """
    if n_lead < 1:
        raise ValueError("n_lead must be at least 1")
    n, advance, dense = _period_map(orbit)
    if n <= DENSE_LIMIT:
        mu = np.linalg.eigvals(dense())
    else:
        warnings.warn(f"segment dimension {n} exceeds {DENSE_LIMIT}; "
                      "extracting leading multipliers iteratively")
        mu = _leading_eigs(n, advance, max(n_lead, 8))
    mu = mu[np.argsort(-np.abs(mu))]
    return FloquetSet(mu[:n_lead].copy(), n_lead)


def _leading_eigs(n, advance, k):
    op = LinearOperator((n, n), matvec=advance)
    return eigs(op, k=min(k, n - 2), which="LM", return_eigenvectors=False,
                maxiter=3000)


def leading_multipliers(orbit, k=6):
    """Fast leading multipliers for test functions along branches."""
    n, advance, dense = _period_map(orbit)
    if n <= 450:
        mu = np.linalg.eigvals(dense())
        mu = mu[np.argsort(-np.abs(mu))][:k]
    else:
        mu = _leading_eigs(n, advance, k)
        mu = mu[np.argsort(-np.abs(mu))]
    return mu


def floquet_eigenfunction(orbit, target):
    """Multiplier nearest target and its segment eigenfunction.

    The returned profile w has the segment's final period normalized to max
    norm 1; it sampled on the orbit node grid (values at s_nodes).
    """
    n, advance, dense = _period_map(orbit)
    if n > DENSE_LIMIT:
        raise ValueError("eigenfunction extraction needs a dense segment")
    M = dense()
    mu, V = np.linalg.eig(M)
    i = int(np.argmin(np.abs(mu - target)))
    m_per, n_seg, _, _, Nm = _segment_pieces(orbit)
    seg = V[:, i].reshape(n_seg, 3)
    w = seg[-(Nm + 1):]
    w = w / np.abs(w).max()
    if np.abs(w.imag).max() < 1e-8 * np.abs(w.real).max():
        w = w.real / np.abs(w.real).max()
    return complex(mu[i]), w
