"""Vector field, Jacobians and spectral helpers for the delayed real-saddle model.

The model is Sandstede's three-component saddle normal form with a single
scalar delayed feedback term kappa * x(t-tau) * y(t-tau) added to the y
equation.  All state arguments are arrays of shape (..., 3) so every function
broadcasts over leading axes; parameters travel in an immutable ParameterSet.
"""

import dataclasses
import math

import numpy as np

PARAM_NAMES = ("a", "b", "c", "alpha", "gamma", "mu", "mu_tilde", "kappa", "tau")


@dataclasses.dataclass(frozen=True)
class ParameterSet:
    """Model parameters. b, c, alpha, gamma default to the standard values."""

    a: float = -0.5
    b: float = 2.5
    c: float = -1.0
    alpha: float = 1.0
    gamma: float = 0.5
    mu: float = 0.0
    mu_tilde: float = 0.0
    kappa: float = 0.0
    tau: float = 0.0

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def get(self, name):
        return getattr(self, name)

    def as_dict(self):
        return {k: getattr(self, k) for k in PARAM_NAMES}


@dataclasses.dataclass
class StateVector:
    """A point (x, y, z) in phase space."""

    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(float(u[0]), float(u[1]), float(u[2]))

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclasses.dataclass
class Spectrum:
    """Origin eigenvalues lambda1 >= lambda2 in the planar block, lambda3 = c."""

    lambda1: float
    lambda2: float
    lambda3: float
    sigma: float
    saddle_ordering: bool


def _split(u):
    u = np.asarray(u, dtype=float)
    return u[..., 0], u[..., 1], u[..., 2]


def dde_rhs(u, v, p):
    """Right-hand side with current state u and delayed state v, shape (..., 3)."""
    x, y, z = _split(u)
    vx, vy, _ = _split(v)
    w = p.mu_tilde - p.alpha * z
    f = np.empty(np.broadcast(np.asarray(u), np.asarray(v)).shape[:-1] + (3,))
    f[..., 0] = p.a * x + p.b * y - p.a * x * x + w * x * (2.0 - 3.0 * x)
    f[..., 1] = (p.b * x + p.a * y - 1.5 * p.b * x * x - 1.5 * p.a * x * y
                 - 2.0 * y * w + p.kappa * vx * vy)
    f[..., 2] = p.c * z + p.mu * x + p.gamma * x * z
    return f


def ode_rhs(u, p):
    """Instantaneous limit: the delayed argument coincides with the current one."""
    return dde_rhs(u, u, p)


def jac_u(u, v, p):
    """Derivative of dde_rhs with respect to the current state, shape (..., 3, 3)."""
    x, y, z = _split(u)
    w = p.mu_tilde - p.alpha * z
    shape = np.broadcast(np.asarray(u), np.asarray(v)).shape[:-1]
    A = np.zeros(shape + (3, 3))
    A[..., 0, 0] = p.a - 2.0 * p.a * x + w * (2.0 - 6.0 * x)
    A[..., 0, 1] = p.b
    A[..., 0, 2] = -p.alpha * x * (2.0 - 3.0 * x)
    A[..., 1, 0] = p.b - 3.0 * p.b * x - 1.5 * p.a * y
    A[..., 1, 1] = p.a - 1.5 * p.a * x - 2.0 * w
    A[..., 1, 2] = 2.0 * p.alpha * y
    A[..., 2, 0] = p.mu + p.gamma * z
    A[..., 2, 2] = p.c + p.gamma * x
    return A


def jac_v(u, v, p):
    """Derivative of dde_rhs with respect to the delayed state."""
    vx, vy, _ = _split(v)
    shape = np.broadcast(np.asarray(u), np.asarray(v)).shape[:-1]
    B = np.zeros(shape + (3, 3))
    B[..., 1, 0] = p.kappa * vy
    B[..., 1, 1] = p.kappa * vx
    return B


def jac_param(u, v, p, name):
    """Explicit partial derivative of dde_rhs with respect to one parameter."""
    x, y, z = _split(u)
    vx, vy, _ = _split(v)
    shape = np.broadcast(np.asarray(u), np.asarray(v)).shape[:-1]
    g = np.zeros(shape + (3,))
    if name == "a":
        g[..., 0] = x - x * x
        g[..., 1] = y - 1.5 * x * y
    elif name == "b":
        g[..., 0] = y
        g[..., 1] = x - 1.5 * x * x
    elif name == "c":
        g[..., 2] = z
    elif name == "alpha":
        g[..., 0] = -z * x * (2.0 - 3.0 * x)
        g[..., 1] = 2.0 * y * z
    elif name == "gamma":
        g[..., 2] = x * z
    elif name == "mu":
        g[..., 2] = x
    elif name == "mu_tilde":
        g[..., 0] = x * (2.0 - 3.0 * x)
        g[..., 1] = -2.0 * y
    elif name == "kappa":
        g[..., 1] = vx * vy
    elif name == "tau":
        pass  # tau enters only through the delayed argument
    else:
        raise ValueError(f"unknown parameter {name!r}")
    return g


def huu_contract(u, w, p):
    """C[i,k] = sum_j d2f_i/du_j du_k * w_j, the u-derivative of jac_u(u).w."""
    x, y, z = _split(u)
    wx, wy, wz = _split(w)
    shape = np.broadcast(np.asarray(u), np.asarray(w)).shape[:-1]
    C = np.zeros(shape + (3, 3))
    mt = p.mu_tilde - p.alpha * z
    C[..., 0, 0] = wx * (-2.0 * p.a - 6.0 * mt) + wz * (-p.alpha * (2.0 - 6.0 * x))
    C[..., 0, 2] = wx * (-p.alpha * (2.0 - 6.0 * x))
    C[..., 1, 0] = -3.0 * p.b * wx - 1.5 * p.a * wy
    C[..., 1, 1] = -1.5 * p.a * wx + 2.0 * p.alpha * wz
    C[..., 1, 2] = 2.0 * p.alpha * wy
    C[..., 2, 0] = p.gamma * wz
    C[..., 2, 2] = p.gamma * wx
    return C


def hdd_contract(v, w, p):
    """C[i,k] = sum_j d2f_i/dv_j dv_k * w_j, the v-derivative of jac_v(v).w."""
    wx, wy, _ = _split(w)
    shape = np.broadcast(np.asarray(v), np.asarray(w)).shape[:-1]
    C = np.zeros(shape + (3, 3))
    C[..., 1, 0] = p.kappa * wy
    C[..., 1, 1] = p.kappa * wx
    return C


def jac_u_param(u, v, p, name):
    """Parameter derivative of jac_u, needed by variational (eigenfunction) rows."""
    x, y, z = _split(u)
    shape = np.broadcast(np.asarray(u), np.asarray(v)).shape[:-1]
    dA = np.zeros(shape + (3, 3))
    if name == "a":
        dA[..., 0, 0] = 1.0 - 2.0 * x
        dA[..., 1, 0] = -1.5 * y
        dA[..., 1, 1] = 1.0 - 1.5 * x
    elif name == "b":
        dA[..., 0, 1] = 1.0
        dA[..., 1, 0] = 1.0 - 3.0 * x
    elif name == "c":
        dA[..., 2, 2] = 1.0
    elif name == "alpha":
        dA[..., 0, 0] = -z * (2.0 - 6.0 * x)
        dA[..., 0, 2] = -x * (2.0 - 3.0 * x)
        dA[..., 1, 1] = 2.0 * z
        dA[..., 1, 2] = 2.0 * y
    elif name == "gamma":
        dA[..., 2, 0] = z
        dA[..., 2, 2] = x
    elif name == "mu":
        dA[..., 2, 0] = 1.0
    elif name == "mu_tilde":
        dA[..., 0, 0] = 2.0 - 6.0 * x
        dA[..., 1, 1] = -2.0
    elif name in ("kappa", "tau"):
        pass
    else:
        raise ValueError(f"unknown parameter {name!r}")
    return dA


def jac_v_param(u, v, p, name):
    """Parameter derivative of jac_v."""
    vx, vy, _ = _split(v)
    shape = np.broadcast(np.asarray(u), np.asarray(v)).shape[:-1]
    dB = np.zeros(shape + (3, 3))
    if name == "kappa":
        dB[..., 1, 0] = vy
        dB[..., 1, 1] = vx
    return dB


def origin_spectrum(p):
    """Eigenvalues of the linearization at the origin, delay independent.

    The delayed term is quadratic, so it contributes nothing at the origin and
    the spectrum is that of the instantaneous Jacobian: a planar block with
    eigenvalues a +- sqrt(b^2 + 4 mu_tilde^2) and the decoupled rate c.
    """
    disc = math.sqrt(p.b * p.b + 4.0 * p.mu_tilde * p.mu_tilde)
    lam1 = p.a + disc
    lam2 = p.a - disc
    lam3 = p.c
    ordering = lam2 < lam3 < 0.0 < lam1
    return Spectrum(lam1, lam2, lam3, lam1 + lam3, ordering)


def resonance_parameter(p):
    """Value of a where sigma = lambda1 + lambda3 vanishes, other params fixed."""
    return -p.c - math.sqrt(p.b * p.b + 4.0 * p.mu_tilde * p.mu_tilde)


def leaf_residual(u):
    """Algebraic residual x^2 (1 - x) - y^2 of the planar homoclinic leaf."""
    x, y, _ = _split(u)
    return x * x * (1.0 - x) - y * y


def leaf_point(x, sign=1.0):
    """Point on the leaf y^2 = x^2 (1 - x), z = 0, for x in [0, 1]."""
    x = np.asarray(x, dtype=float)
    y = sign * x * np.sqrt(np.clip(1.0 - x, 0.0, None))
    return np.stack([x, y, np.zeros_like(x)], axis=-1)


def equilibria(p, n_starts=200, seed=0, box=2.0, tol=1e-12, dedup=1e-8):
    """All equilibria found by damped multi-start Newton on f(s, s) = 0.

    Returns a list of shape-(3,) arrays sorted by x then y. The origin is always
    an equilibrium and is included exactly. Non-converged starts are skipped.
    """
    rng = np.random.default_rng(seed)
    found = [np.zeros(3)]
    starts = rng.uniform(-box, box, size=(n_starts, 3))
    for s in starts:
        u = s.copy()
        ok = False
        for _ in range(60):
            f = dde_rhs(u, u, p)
            r = np.max(np.abs(f))
            if r < tol:
                ok = True
                break
            J = jac_u(u, u, p) + jac_v(u, u, p)
            try:
                du = np.linalg.solve(J, -f)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            while lam > 1e-4:
                un = u + lam * du
                if np.max(np.abs(dde_rhs(un, un, p))) < r or lam == 1.0:
                    break
                lam *= 0.5
            step = lam * du if lam <= 1.0 else du
            u = u + step
            if np.max(np.abs(u)) > 1e6:
                break
        if not ok:
            continue
        if all(np.max(np.abs(u - q)) > dedup for q in found):
            found.append(u)
    found.sort(key=lambda q: (q[0], q[1], q[2]))
    return found


def char_matrix(lam, p, eq):
    """Characteristic matrix Delta(lambda) = lambda I - A - B exp(-lambda tau) at eq."""
    A = jac_u(eq, eq, p)
    B = jac_v(eq, eq, p)
    lam = np.asarray(lam, dtype=complex)
    shape = lam.shape
    out = (lam[..., None, None] * np.eye(3) - A
           - B * np.exp(-lam * p.tau)[..., None, None])
    return out.reshape(shape + (3, 3))


def _char_det(lam, p, eq):
    D = char_matrix(lam, p, eq)
    return np.linalg.det(D)


def _char_det_dlam(lam, p, eq):
    """d/dlambda of det Delta via the trace identity det' = det * tr(Delta^-1 Delta')."""
    D = char_matrix(lam, p, eq)
    A = jac_u(eq, eq, p)  # noqa: F841  (kept for clarity of what B refers to)
    B = jac_v(eq, eq, p)
    lam = np.asarray(lam, dtype=complex)
    Dp = np.eye(3) + p.tau * B * np.exp(-lam * p.tau)[..., None, None]
    det = np.linalg.det(D)
    sol = np.linalg.solve(D, Dp)
    return det * np.trace(sol, axis1=-2, axis2=-1)


def _winding_number(p, eq, corners):
    """Winding of det Delta along the rectangle boundary, adaptively refined."""
    re0, re1, im0, im1 = corners
    nodes = [complex(re0, im0), complex(re1, im0), complex(re1, im1),
             complex(re0, im1), complex(re0, im0)]
    pts = []
    for zA, zB in zip(nodes[:-1], nodes[1:]):
        # initial density must outresolve the exp(-lambda tau) phase speed,
        # otherwise aliasing passes the refinement test with a wrong winding
        L = abs(zB - zA)
        n0 = int(min(4096, max(8, 4.0 * (abs(p.tau) * L + 8.0))))
        seg = list(zA + (zB - zA) * np.linspace(0.0, 1.0, n0))
        for _ in range(8):
            vals = _char_det(np.array(seg), p, eq)
            if np.min(np.abs(vals)) < 1e-13:
                raise ArithmeticError("characteristic root on contour")
            dphi = np.abs(np.diff(np.angle(vals)))
            dphi = np.minimum(dphi, 2.0 * np.pi - dphi)
            if np.all(dphi < 1.0):
                break
            arr = np.array(seg)
            mids = 0.5 * (arr[:-1] + arr[1:])
            seg = list(np.stack([arr[:-1], mids], axis=1).ravel()) + [arr[-1]]
        pts.extend(seg[:-1])
    pts.append(pts[0])
    vals = _char_det(np.array(pts), p, eq)
    ang = np.angle(vals)
    d = np.diff(ang)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    total = np.sum(d)
    return int(round(total / (2.0 * np.pi)))


def _newton_root(lam0, p, eq, tol=1e-12, maxit=60):
    lam = complex(lam0)
    for _ in range(maxit):
        try:
            f = complex(_char_det(np.array(lam), p, eq))
            fp = complex(_char_det_dlam(np.array(lam), p, eq))
        except np.linalg.LinAlgError:
            # sitting numerically on a root already; nudge off and retry
            lam = lam + 1e-12 * (1.0 + abs(lam))
            continue
        if fp == 0:
            return None
        step = f / fp
        lam = lam - step
        if abs(step) < tol * max(1.0, abs(lam)):
            return lam
    return None


def char_roots(p, eq, re_range=(-5.0, 5.0), im_max=20.0, max_roots=200):
    """Characteristic roots in a rectangle, by argument-principle bisection.

    The rectangle [re_range] x [-im_max, im_max] is split recursively until the
    winding number of each cell is matched by Newton-polished roots found inside
    it (Newton on det Delta with its analytic derivative). Roots are returned
    sorted by real part descending; complex roots appear with both conjugates
    since the polynomial part has real coefficients.
    """
    eq = np.asarray(eq, dtype=float)
    stack = [(re_range[0], re_range[1], -im_max, im_max)]
    roots = []
    guard = 0
    while stack and len(roots) < max_roots and guard < 6000:
        guard += 1
        box = stack.pop()
        re0, re1, im0, im1 = box
        try:
            n = _winding_number(p, eq, box)
        except ArithmeticError:
            # a root sits (numerically) on the boundary: nudge the box
            eps = 1e-6 * (1.0 + abs(re1 - re0))
            stack.append((re0 - eps, re1 + 1.3e-6, im0 - eps, im1 + 1.1e-6))
            continue
        if n == 0:
            continue

        def _inside(z):
            return (re0 - 1e-10 <= z.real <= re1 + 1e-10
                    and im0 - 1e-10 <= z.imag <= im1 + 1e-10)

        found = []
        for fr in (0.5, 0.25, 0.75):
            for fi in (0.5, 0.25, 0.75):
                lam = _newton_root(complex(re0 + fr * (re1 - re0),
                                           im0 + fi * (im1 - im0)), p, eq)
                if lam is None or not _inside(lam):
                    continue
                if abs(lam.imag) < 1e-10:
                    lam = complex(lam.real, 0.0)
                if all(abs(lam - r) > 1e-8 for r in found):
                    found.append(lam)
                if len(found) == n:
                    break
            if len(found) == n:
                break
        tiny = re1 - re0 < 1e-9 and im1 - im0 < 1e-9
        if len(found) == n or tiny:
            for lam in found:
                if all(abs(lam - r) > 1e-8 for r in roots):
                    roots.append(lam)
            continue
        # unresolved: split along the longer side (off-center, to dodge roots
        # that sit exactly on symmetry axes)
        if re1 - re0 >= im1 - im0:
            mid = 0.5 * (re0 + re1) + 1.7e-5 * (re1 - re0)
            stack.append((re0, mid, im0, im1))
            stack.append((mid, re1, im0, im1))
        else:
            mid = 0.5 * (im0 + im1) + 1.7e-5 * (im1 - im0)
            stack.append((re0, re1, im0, mid))
            stack.append((re0, re1, mid, im1))
    # conjugate closure
    for z in list(roots):
        if abs(z.imag) > 1e-10 and all(abs(z.conjugate() - r) > 1e-8 for r in roots):
            roots.append(z.conjugate())
    roots.sort(key=lambda z: (-z.real, abs(z.imag), z.imag))
    return roots


def hopf_points(p, eq, tau_range, omega_range=(0.05, 8.0), n_grid=240):
    """Pure-imaginary characteristic root crossings as a function of tau.

    Scans a (tau, omega) grid for near-zeros of det Delta(i omega) and polishes
    each candidate with a 2x2 Newton iteration in (tau, omega). Returns a sorted
    list of (tau, omega) pairs inside tau_range with omega > 0.
    """
    eq = np.asarray(eq, dtype=float)
    taus = np.linspace(tau_range[0], tau_range[1], n_grid)
    omegas = np.linspace(omega_range[0], omega_range[1], n_grid)

    def fval(tau, omega):
        q = p.replace(tau=tau)
        return complex(_char_det(np.array(complex(0.0, omega)), q, eq))

    A = jac_u(eq, eq, p)
    B = jac_v(eq, eq, p)
    vals = np.empty((n_grid, n_grid), dtype=complex)
    I3 = np.eye(3)
    for i, tau in enumerate(taus):
        lam = 1j * omegas
        M = (lam[:, None, None] * I3 - A - B * np.exp(-lam * tau)[:, None, None])
        vals[i] = np.linalg.det(M)
    mag = np.abs(vals)
    # local minima of |det| over the grid are Newton seeds
    cands = []
    for i in range(1, n_grid - 1):
        for j in range(1, n_grid - 1):
            m = mag[i, j]
            if m <= mag[i - 1:i + 2, j - 1:j + 2].min() and m < 0.2:
                cands.append((taus[i], omegas[j]))
    out = []
    for tau0, om0 in cands:
        tau, om = tau0, om0
        ok = False
        for _ in range(50):
            f = fval(tau, om)
            if abs(f) < 1e-12:
                ok = True
                break
            h = 1e-7
            ftau = (fval(tau + h, om) - fval(tau - h, om)) / (2 * h)
            fom = (fval(tau, om + h) - fval(tau, om - h)) / (2 * h)
            J = np.array([[ftau.real, fom.real], [ftau.imag, fom.imag]])
            try:
                d = np.linalg.solve(J, -np.array([f.real, f.imag]))
            except np.linalg.LinAlgError:
                break
            tau, om = tau + d[0], om + d[1]
            if abs(d[0]) + abs(d[1]) < 1e-13:
                ok = True
                break
        if not ok or om <= 0:
            continue
        if not (tau_range[0] - 1e-9 <= tau <= tau_range[1] + 1e-9):
            continue
        if all(abs(tau - t0) > 1e-6 or abs(om - w0) > 1e-6 for t0, w0 in out):
            out.append((tau, om))
    out.sort()
    return out
