"""Unit-shift reduction of the model at extreme delay.

Rescaling time by the delay, s = -t / tau, turns the delay shift into a unit
shift in s and multiplies every derivative by eps = 1 / |tau|. In the formal
limit eps = 0 the differential system collapses to an algebraic relation
between the state at s and at s + 1: the z and x equations eliminate Z and Y
pointwise as rational functions of X, and the y equation becomes a single
scalar relation between X(s) and X(s + 1). Clearing denominators makes the
forward image a quartic root set, so the relation is a multivalued map. Its
period-two points are the levels that long-period two-plateau orbits (period
close to 2 |tau|) hug for large negative delay.
"""

import dataclasses

import numpy as np


@dataclasses.dataclass
class ReducedPoint:
    """Full state on the reduced slow manifold over one X value."""

    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z])


def reduce_state(X, p):
    """Lift an X value to the full state of the reduced relation.

    Z solves the stationary z equation 0 = c Z + mu X + gamma X Z and Y then
    solves the stationary x equation; both are rational in X with the single
    pole at c + gamma X = 0.
    """
    X = float(X)
    den = p.c + p.gamma * X
    Z = -p.mu * X / den
    Y = -(p.a * X - p.a * X**2
          + (p.mu_tilde - p.alpha * Z) * X * (2.0 - 3.0 * X)) / p.b
    return ReducedPoint(X, Y, Z)


def _own_terms(X, p):
    """The shift-free part of the stationary y equation at X."""
    q = reduce_state(X, p)
    return (p.b * X + p.a * q.y - 1.5 * p.b * X**2 - 1.5 * p.a * X * q.y
            - 2.0 * q.y * (p.mu_tilde - p.alpha * q.z))


def relation_residual(X, X_next, p):
    """Residual of the reduced relation for the ordered pair (X, X + 1 image)."""
    qn = reduce_state(X_next, p)
    return _own_terms(X, p) + p.kappa * X_next * qn.y


def _image_poly(X, p):
    """Quartic (descending coefficients) whose roots are forward images of X.

    Writing Y(w) = N(w) / (b (c + gamma w)) with the cubic numerator
    N(w) = n1 w + n2 w^2 + n3 w^3 obtained by clearing the pole from the
    stationary x equation, the relation kappa w Y(w) + G(X) = 0 becomes
    kappa w N(w) + G(X) b (c + gamma w) = 0.
    """
    a, b, c = p.a, p.b, p.c
    al, g, mu, mt = p.alpha, p.gamma, p.mu, p.mu_tilde
    n1 = -a * c - 2.0 * c * mt
    n2 = a * c - a * g - 2.0 * al * mu + 3.0 * c * mt - 2.0 * g * mt
    n3 = a * g + 3.0 * al * mu + 3.0 * g * mt
    G = _own_terms(X, p)
    return np.array([p.kappa * n3, p.kappa * n2, p.kappa * n1,
                     G * b * g, G * b * c])


def map_forward(X, p, tol=1e-10):
    """Real forward images of X under the reduced relation, sorted.

    Roots come from the companion eigenvalues of the cleared-denominator
    quartic (degenerate leading coefficients drop the degree); each candidate
    is polished with a few Newton steps on the relation itself and kept only
    if the residual verifies below tol and it avoids the rational pole.
    """
    coeffs = _image_poly(X, p)
    scale = np.abs(coeffs).max()
    if scale == 0.0:
        return np.array([])
    coeffs = coeffs / scale
    nz = np.nonzero(np.abs(coeffs) > 1e-14)[0]
    if nz.size == 0 or nz[0] == len(coeffs) - 1:
        return np.array([])
    roots = np.roots(coeffs[nz[0]:])
    real = roots[np.abs(roots.imag) < 1e-8 * (1.0 + np.abs(roots.real))].real
    out = []
    for w in real:
        if abs(p.c + p.gamma * w) < 1e-10:
            continue
        for _ in range(4):
            f = relation_residual(X, w, p)
            df = (relation_residual(X, w + 1e-7, p)
                  - relation_residual(X, w - 1e-7, p)) / 2e-7
            if df == 0.0:
                break
            w -= f / df
        if abs(relation_residual(X, w, p)) < tol:
            out.append(w)
    return np.unique(np.round(np.array(sorted(out)), 12))


def _pair_residual(v, p):
    return np.array([relation_residual(v[0], v[1], p),
                     relation_residual(v[1], v[0], p)])


def _polish_pair(v, p, tol=1e-12, max_iter=40):
    v = np.asarray(v, dtype=float).copy()
    for _ in range(max_iter):
        f = _pair_residual(v, p)
        if np.abs(f).max() < tol:
            return v, True
        J = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1e-7
            J[:, i] = (_pair_residual(v + e, p)
                       - _pair_residual(v - e, p)) / 2e-7
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return v, False
        v -= step
    return v, np.abs(_pair_residual(v, p)).max() < tol


def period_two_points(p, box=(0.0, 1.0), n_grid=200, tol=1e-10,
                      min_separation=1e-6):
    """Genuine period-two pairs of the reduced relation inside a box.

    Seeds every grid X1 with each of its forward images and polishes the
    closed 2 x 2 system by Newton; pairs are deduplicated up to the swap
    symmetry (X1, X2) <-> (X2, X1) and reported with the larger value first.
    Fixed points (X1 = X2) are excluded by min_separation.
    """
    lo, hi = box
    found = []
    for X1 in np.linspace(lo, hi, n_grid):
        for X2 in map_forward(X1, p):
            if not (lo - 0.2 <= X2 <= hi + 0.2):
                continue
            v, ok = _polish_pair((X1, X2), p, tol=max(tol * 1e-2, 1e-13))
            if not ok or abs(v[0] - v[1]) < min_separation:
                continue
            if not (lo <= v[0] <= hi and lo <= v[1] <= hi):
                continue
            if np.abs(_pair_residual(v, p)).max() > tol:
                continue
            cand = np.array(sorted(v, reverse=True))
            if all(np.abs(cand - q).max() > 1e-7 for q in found):
                found.append(cand)
    return [tuple(q) for q in sorted(found, key=lambda q: q[0])]


def plateau_levels(orbit, n_samples=8192, dwell_frac=0.08):
    """Dominant flat x levels of a two-plateau orbit, larger first.

    Samples where the profile moves slowest (|dx/ds| below the dwell_frac
    quantile) are split at the midpoint of their x range and averaged per
    side, giving the two levels the orbit dwells at.
    """
    s = np.arange(n_samples) / n_samples
    x = orbit.evaluate(s)[:, 0]
    dx = np.abs(orbit.derivative(s)[:, 0])
    mask = dx <= np.quantile(dx, dwell_frac)
    xs = x[mask]
    mid = 0.5 * (xs.min() + xs.max())
    hi = xs[xs >= mid]
    lo = xs[xs < mid]
    if hi.size == 0 or lo.size == 0:
        raise ValueError("profile does not show two distinct dwell levels")
    return float(hi.mean()), float(lo.mean())
