"""Independent oracles and frozen hand-computed values.

Everything here is implemented without the library's own machinery
(scipy's integrator, plain finite differences of metric components, dense
composite quadrature), so agreement between library and oracle is
evidence, not a tautology.  Frozen constants carry their derivations.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp

# --- frozen hand values -------------------------------------------------------

# dr = -2y dy on the disk with reference function r = 1 - |y|^2; against
# gbar = 4 delta at |y| = 1/2 the squared norm is 4|y|^2/4 = 1/4
GRAD_NORM_4DELTA_AT_HALF = 0.25

# curvature at infinity: -|dr|^2_gbar at |y| = 1, so -1 for gbar = 4 delta
# (hyperbolic disk) and -1/4 for gbar = 16 delta
KAPPA_HYPERBOLIC = -1.0
KAPPA_SCALED_DISK4 = -0.25

# collar coefficients of the scaled disk (gbar = 16 delta, flow time r):
# squared transverse coefficient (1 - r)/4, circle coefficient 16(1 - r)
def collar_k2_scaled_disk4(r):
    return (1.0 - np.asarray(r)) / 4.0


def collar_h_scaled_disk4(r):
    return 16.0 * (1.0 - np.asarray(r))


# unit-speed transverse field on the scaled disk: adj(a^2 I) dr / (dr^T ...)
# reduces to -y / (2|y|^2) independent of the scale a
def radial_flow_field(y):
    y = np.asarray(y, dtype=float)
    return -y / (2.0 * (y * y).sum())


# the linear test cutoff has Q(t)/t = 2/eps on [0, eps/2], so the
# integral gives phi(r) = -2r/eps there
def piecewise_phi(r, eps):
    return -2.0 * np.asarray(r) / eps


# on the plateau phi(r) = phi(eps/2) - log(2r/eps); for eps = 0.5 the drop
# between r = 0.25 and r = 0.4 is exactly -log(1.6)
PLATEAU_DROP_04_MINUS_025 = -math.log(1.6)

# map theta -> (a cos theta, a sin theta) pulls the ambient dot product
# back to a^2 dtheta^2
def circle_pullback(a):
    return a * a


# flat cylinder map (a cos t2, a sin t2, b t1): Jacobian columns have norms
# b and a and are orthogonal, so the smallest singular value is min(a, b)
def flat_cylinder_min_sv(a, b):
    return min(a, b)


# --- finite-difference derivative oracle --------------------------------------

def fd_derivative(f, x, h=1e-4):
    """4th-order central difference of a scalar function of one variable."""
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def fd_partial(f, point, axis, h=1e-4):
    point = np.asarray(point, dtype=float)

    def g(t):
        q = point.copy()
        q[axis] = t
        return f(q)

    return fd_derivative(g, point[axis], h)


# --- all-finite-difference sectional curvature --------------------------------

def _fd_christoffel(g_fn, point, h):
    point = np.asarray(point, dtype=float)
    m = len(point)
    g = np.asarray(g_fn(point), dtype=float)
    ginv = np.linalg.inv(g)
    dg = np.empty((m, m, m))
    for a in range(m):
        step = np.zeros(m)
        step[a] = h
        dg[a] = (np.asarray(g_fn(point - 2 * step))
                 - 8 * np.asarray(g_fn(point - step))
                 + 8 * np.asarray(g_fn(point + step))
                 - np.asarray(g_fn(point + 2 * step))) / (12 * h)
    gamma = np.empty((m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(m):
                s = 0.0
                for l in range(m):
                    s += ginv[k, l] * (dg[i][j, l] + dg[j][i, l] - dg[l][i, j])
                gamma[k, i, j] = 0.5 * s
    return gamma


def fd_sectional_curvature(g_fn, point, u, v, h=1e-3):
    """Sectional curvature with every derivative taken by differences.

    ``g_fn`` maps a coordinate point to the metric matrix.  Signs follow
    the convention that makes the round sphere come out at +1.
    """
    point = np.asarray(point, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = len(point)
    g = np.asarray(g_fn(point), dtype=float)
    gamma = _fd_christoffel(g_fn, point, h)
    dgamma = np.empty((m, m, m, m))   # dgamma[a] = d_a gamma
    for a in range(m):
        step = np.zeros(m)
        step[a] = h
        dgamma[a] = (_fd_christoffel(g_fn, point - 2 * step, h)
                     - 8 * _fd_christoffel(g_fn, point - step, h)
                     + 8 * _fd_christoffel(g_fn, point + step, h)
                     - _fd_christoffel(g_fn, point + 2 * step, h)) / (12 * h)
    riem = np.zeros((m, m, m, m))     # R^l_{kij} for R(e_i, e_j) e_k
    for l in range(m):
        for k in range(m):
            for i in range(m):
                for j in range(m):
                    val = dgamma[i][l, j, k] - dgamma[j][l, i, k]
                    for p in range(m):
                        val += gamma[l, i, p] * gamma[p, j, k] \
                            - gamma[l, j, p] * gamma[p, i, k]
                    riem[l, k, i, j] = val
    # contract <R(u, v) v, u>
    rv = np.einsum("lkij,i,j,k->l", riem, u, v, v)
    ruvvu = float(u @ g @ rv)
    uu = float(u @ g @ u)
    vv = float(v @ g @ v)
    uv = float(u @ g @ v)
    return ruvvu / (uu * vv - uv * uv)


# --- independent integrators ---------------------------------------------------

def integrate_flow(field, y0, t_end, rtol=1e-12, atol=1e-14):
    """Adaptive Runge-Kutta trajectory endpoint from scipy."""
    sol = solve_ivp(lambda t, y: field(y), (0.0, t_end), np.asarray(y0, float),
                    rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[:, -1]


def simpson_dense(f, a, b, n=20001):
    """Composite Simpson on a dense fixed grid (n odd)."""
    if n % 2 == 0:
        n += 1
    x = np.linspace(a, b, n)
    y = np.array([f(t) for t in x])
    h = (b - a) / (n - 1)
    return h / 3.0 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-2:2].sum())
