"""Construction of the special boundary defining function.

Pipeline order: flow the unit-speed gradient field of the reference bdf to
put the metric in collar normal form, pick a collar depth on which the
transverse coefficient stays below 1, build a cutoff and integrate it into
the log-correction phi, assemble x = e^phi * r with its constant plateau,
and finally form the adjusted tensor G = x^2 g - dx^2 whose positive
definiteness is the whole point of the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    ConsistencyError,
    FlowError,
    FlowExitsChartError,
    GridError,
    HypothesisViolation,
    QuadratureError,
)
from .expr import add, differentiate, div, evaluate, mul
from .fields import sym_eigenvalues
from .manifold import CollarGrid, ManifoldKind
from .metric import (
    MetricSpec,
    adjugate_exprs,
    bdf_values,
    compute_k2,
    env_from_nodes,
    eval_components,
)

__all__ = [
    "Cutoff",
    "Smoothstep5Cutoff",
    "PiecewiseLinearCutoff",
    "ZeroCutoff",
    "ExpBumpCutoff",
    "make_cutoff",
    "CUTOFF_KINDS",
    "PhiTable",
    "compute_phi",
    "BdfProfile",
    "assemble_bdf",
    "NormalFormData",
    "flow_collar",
    "choose_epsilon",
    "GField",
    "assemble_G",
]


# --- cutoffs ---------------------------------------------------------------

class Cutoff:
    """Ramp Q with Q(0) = 0 and Q identically 1 from eps/2 on.

    Subclasses provide the ramp shape S on [0, 1]; the factored quotient
    Q(r)/r is supplied in closed form so the phi integrand never divides
    by r.
    """

    name = "abstract"
    has_plateau = True

    def __init__(self, eps: float):
        if eps <= 0:
            raise GridError("cutoff needs a positive collar depth")
        self.eps = float(eps)

    def _u(self, r):
        return np.clip(2.0 * np.asarray(r, dtype=float) / self.eps, 0.0, 1.0)

    def value(self, r):
        raise NotImplementedError

    def derivative(self, r):
        raise NotImplementedError

    def q_over_r(self, r):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(eps={self.eps!r})"


class Smoothstep5Cutoff(Cutoff):
    """Quintic ramp u^3(10 - 15u + 6u^2): C^2 joins at 0 and eps/2."""

    name = "smoothstep5"

    def value(self, r):
        u = self._u(r)
        return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)

    def derivative(self, r):
        u = self._u(r)
        inside = (np.asarray(r, dtype=float) > 0) & (u < 1.0)
        return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2 * 2.0 / self.eps, 0.0)

    def q_over_r(self, r):
        r = np.asarray(r, dtype=float)
        u = self._u(r)
        ramp = (2.0 / self.eps) * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
        with np.errstate(divide="ignore"):
            tail = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
        return np.where(u < 1.0, ramp, tail)


class PiecewiseLinearCutoff(Cutoff):
    """Linear ramp, test-only: phi is exactly -2r/eps on the ramp."""

    name = "piecewise-linear"

    def value(self, r):
        return self._u(r)

    def derivative(self, r):
        u = self._u(r)
        r = np.asarray(r, dtype=float)
        return np.where((r >= 0) & (u < 1.0), 2.0 / self.eps, 0.0)

    def q_over_r(self, r):
        r = np.asarray(r, dtype=float)
        u = self._u(r)
        with np.errstate(divide="ignore"):
            tail = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
        return np.where(u < 1.0, np.full_like(r, 2.0 / self.eps), tail)


class ZeroCutoff(Cutoff):
    """Q = 0, test-only: phi = 0 and x = r with no plateau."""

    name = "zero"
    has_plateau = False

    def value(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def q_over_r(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


class ExpBumpCutoff(Cutoff):
    """C-infinity ramp from the classical exp(-1/t) bump partition."""

    name = "exp-bump"

    @staticmethod
    def _f(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        return out

    def value(self, r):
        u = self._u(r)
        fu = self._f(u)
        return fu / (fu + self._f(1.0 - u))

    def derivative(self, r):
        u = self._u(r)
        r = np.asarray(r, dtype=float)
        inside = (u > 0) & (u < 1)
        us = np.where(inside, u, 0.5)
        fu, fv = self._f(us), self._f(1.0 - us)
        dfu = fu / us ** 2
        dfv = fv / (1.0 - us) ** 2
        ds = (dfu * fv + fu * dfv) / (fu + fv) ** 2
        return np.where(inside, ds * 2.0 / self.eps, 0.0)

    def q_over_r(self, r):
        r = np.asarray(r, dtype=float)
        u = self._u(r)
        with np.errstate(divide="ignore"):
            quotient = np.where(r > 0, self.value(r) / np.where(r > 0, r, 1.0), 0.0)
        # value/r -> 0 as r -> 0 faster than any power; 0 at r = 0 is exact
        return quotient


CUTOFF_KINDS = {
    "smoothstep5": Smoothstep5Cutoff,
    "piecewise-linear": PiecewiseLinearCutoff,
    "zero": ZeroCutoff,
    "exp-bump": ExpBumpCutoff,
}


def make_cutoff(kind: str, eps: float) -> Cutoff:
    try:
        cls = CUTOFF_KINDS[kind]
    except KeyError:
        raise GridError(f"unknown cutoff kind {kind!r}; choose from "
                        f"{sorted(CUTOFF_KINDS)}") from None
    return cls(eps)


# --- quadrature of phi ------------------------------------------------------

def _adaptive_simpson(f, a: float, b: float, tol: float,
                      max_depth: int = 50) -> float:
    fa, fb = float(f(a)), float(f(b))
    m = 0.5 * (a + b)
    fm = float(f(m))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = float(f(lm)), float(f(rm))
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or (b - a) < 1e-15 * (1.0 + abs(a)):
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive quadrature did not converge on [{a:.6g}, {b:.6g}]")
        return (rec(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + rec(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    if a == b:
        return 0.0
    return rec(a, b, fa, fm, fb, whole, tol, 0)


@dataclass(frozen=True)
class PhiTable:
    """Dense table of phi = -integral of Q(t)/t with a refining evaluator."""

    cutoff: Cutoff
    r_table: np.ndarray
    phi_table: np.ndarray
    tol: float

    def phi(self, r):
        """phi at arbitrary nonnegative r.

        Looks up the nearest table node and integrates the short increment,
        so nearby evaluations differ by genuinely small integrals rather
        than by cancellation of two large ones.
        """
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r_arr < 0):
            raise GridError("phi is defined for nonnegative depth only")
        out = np.empty_like(r_arr)
        f = self.cutoff.q_over_r
        for idx, rv in np.ndenumerate(r_arr):
            k = int(np.clip(np.searchsorted(self.r_table, rv), 0,
                            len(self.r_table) - 1))
            if k > 0 and abs(self.r_table[k - 1] - rv) < abs(self.r_table[k] - rv):
                k -= 1
            base = self.r_table[k]
            if rv == base:
                out[idx] = self.phi_table[k]
                continue
            inc = _adaptive_simpson(
                f, float(base), float(rv),
                self.tol * max(abs(rv - base) / self.cutoff.eps, 1e-3))
            out[idx] = self.phi_table[k] - inc
        if np.isscalar(r) or np.asarray(r).ndim == 0:
            return float(out[0])
        return out.reshape(np.asarray(r).shape)


def compute_phi(cutoff: Cutoff, tol: float = 1e-10,
                table_size: int = 801) -> PhiTable:
    """Integrate the factored cutoff quotient into the log-correction phi.

    The table spans [0, eps] with an odd node count so eps/2 is a node.
    """
    if table_size < 3 or table_size % 2 == 0:
        raise GridError("phi table size must be odd and at least 3")
    r_table = np.linspace(0.0, cutoff.eps, table_size)
    inc_tol = tol / (table_size - 1)
    phi = np.empty(table_size)
    phi[0] = 0.0
    acc = 0.0
    f = cutoff.q_over_r
    for k in range(1, table_size):
        acc += _adaptive_simpson(f, float(r_table[k - 1]), float(r_table[k]),
                                 inc_tol)
        phi[k] = -acc
    return PhiTable(cutoff, r_table, phi, tol)


# --- the special bdf profile ------------------------------------------------

@dataclass(frozen=True)
class BdfProfile:
    """The constructed boundary defining function x = e^phi * r.

    Beyond eps/2 the profile is the exact constant ``x_plateau`` and its
    derivative vanishes identically (bit-exact zeros, not small numbers).
    """

    cutoff: Cutoff
    table: PhiTable
    x_plateau: float | None

    @property
    def eps(self) -> float:
        return self.cutoff.eps

    @property
    def has_plateau(self) -> bool:
        return self.cutoff.has_plateau

    def phi(self, r):
        return self.table.phi(r)

    def phi_prime(self, r):
        return -self.cutoff.q_over_r(r)

    def one_plus_rphi(self, r):
        # algebraically 1 + r*phi'(r); the factored form keeps it exact
        return 1.0 - self.cutoff.value(r)

    def x(self, r):
        r_arr = np.asarray(r, dtype=float)
        raw = np.exp(self.table.phi(r_arr)) * r_arr
        if not self.has_plateau:
            return raw
        return np.where(r_arr >= 0.5 * self.eps, self.x_plateau, raw)

    def dx_dr(self, r):
        r_arr = np.asarray(r, dtype=float)
        return np.exp(self.table.phi(r_arr)) * self.one_plus_rphi(r_arr)

    def stretch(self, r):
        """x(r)/r, continued by its limit 1 at r = 0."""
        r_arr = np.asarray(r, dtype=float)
        raw = np.exp(self.table.phi(r_arr))
        if not self.has_plateau:
            return raw
        plateau = np.divide(self.x_plateau, np.where(r_arr > 0, r_arr, 1.0))
        return np.where(r_arr >= 0.5 * self.eps, plateau, raw)

    def sample(self, n: int = 200) -> np.ndarray:
        """Rows (r, phi, x, 1 + r phi') on a uniform sample of [0, eps]."""
        r = np.linspace(0.0, self.eps, int(n))
        return np.column_stack([r, self.phi(r), self.x(r),
                                self.one_plus_rphi(r)])


def assemble_bdf(cutoff: Cutoff, table: PhiTable | None = None,
                 tol: float = 1e-10) -> BdfProfile:
    """Build the full profile from a cutoff (integrating phi if needed)."""
    if table is None:
        table = compute_phi(cutoff, tol)
    elif table.cutoff is not cutoff:
        raise ConsistencyError("phi table was built for a different cutoff")
    plateau = None
    if cutoff.has_plateau:
        half = 0.5 * cutoff.eps
        plateau = float(np.exp(table.phi(half)) * half)
    return BdfProfile(cutoff, table, plateau)


# --- collar normal form via the gradient flow --------------------------------

@lru_cache(maxsize=None)
def _flow_exprs(spec: MetricSpec):
    """Symbolic unit-bdf-speed gradient field and its Jacobian.

    The field is adj(gbar) dr / (dr^T adj(gbar) dr): the determinant of gbar
    cancels between numerator and denominator, so no division by a possibly
    tiny determinant ever happens.
    """
    names = spec.manifold.coord_names
    m = len(names)
    dr = [differentiate(spec.reference_bdf, nm) for nm in names]
    adj = adjugate_exprs(spec.components)
    num = []
    for i in range(m):
        s = mul(adj[i][0], dr[0])
        for j in range(1, m):
            s = add(s, mul(adj[i][j], dr[j]))
        num.append(s)
    den = mul(dr[0], num[0])
    for i in range(1, m):
        den = add(den, mul(dr[i], num[i]))
    v = tuple(div(num[i], den) for i in range(m))
    dv = tuple(tuple(differentiate(v[i], nm) for nm in names) for i in range(m))
    return v, dv


def _eval_field(exprs, env, n: int) -> np.ndarray:
    cols = [np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), (n,))
            for e in exprs]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class NormalFormData:
    """Collar normal form: flowed chart points, frame, and measured metric.

    ``chart_points[k]`` are the original-chart coordinates of the surface at
    flow depth ``grid.r_nodes[k]``; ``jac`` transports the boundary tangent
    frame; ``h`` is the measured tangential metric, ``k2`` the squared dual
    norm of the reference bdf differential at the flowed points.
    """

    grid: CollarGrid
    chart_points: np.ndarray   # (n_r, n_b, m)
    jac: np.ndarray            # (n_r, n_b, m, m-1)
    k2: np.ndarray             # (n_r, n_b)
    vnorm2: np.ndarray         # (n_r, n_b)  measured squared norm of the flow field
    cross: np.ndarray          # (n_r, n_b, m-1) flow-tangent inner products
    h: np.ndarray              # (n_r, n_b, m-1, m-1)
    drift: np.ndarray          # (n_r, n_b)  |bdf(point) - depth|

    @property
    def eps(self) -> float:
        return self.grid.eps

    @property
    def h0(self) -> np.ndarray:
        """Boundary representative of the conformal infinity."""
        return self.h[0]

    @property
    def max_drift(self) -> float:
        return float(self.drift.max())

    @property
    def max_cross(self) -> float:
        """Largest normalized off-block entry of the measured frame metric."""
        m1 = self.h.shape[-1]
        diag = np.stack([self.h[..., j, j] for j in range(m1)], axis=-1)
        scale = np.sqrt(np.maximum(self.vnorm2[..., None] * diag, 1e-300))
        return float(np.max(np.abs(self.cross) / scale))

    def k2_max_upto(self, depth: float) -> float:
        mask = self.grid.r_nodes <= depth + 1e-15
        return float(self.k2[mask].max())


def flow_collar(spec: MetricSpec, grid: CollarGrid, *, base_steps: int = 256,
                drift_tol: float = 1e-8, orth_tol: float = 1e-8,
                check: bool = True) -> NormalFormData:
    """Integrate the normalizing flow from the boundary grid through the collar.

    Classical 4th-order one-step integration of the chart position together
    with its variational (tangent-transport) system, at least ``base_steps``
    substeps across the full depth.  Depth along each trajectory equals the
    reference bdf value, which is what the drift check enforces.
    """
    if grid.manifold is not spec.manifold and grid.manifold != spec.manifold:
        raise GridError("grid was built for a different manifold")
    v_exprs, dv_exprs = _flow_exprs(spec)
    names = spec.manifold.coord_names
    m = spec.dim
    n_b = grid.n_b
    mm1 = m - 1

    def rhs(z, jac):
        env = {nm: z[:, i] for i, nm in enumerate(names)}
        v = _eval_field(v_exprs, env, n_b)
        dv = np.empty((n_b, m, m))
        for i in range(m):
            dv[:, i, :] = _eval_field(dv_exprs[i], env, n_b)
        return v, np.einsum("nij,njk->nik", dv, jac)

    def guard(z, where):
        if not np.all(np.isfinite(z)):
            raise FlowError(f"flow produced non-finite coordinates near "
                            f"depth {where:.6g}")
        inside = spec.manifold.contains(z, slack=1e-9)
        if spec.manifold.kind == ManifoldKind.DISK:
            inside &= np.einsum("ni,ni->n", z, z) > 2.5e-3
        if not np.all(inside):
            bad = z[np.argmin(inside)]
            raise FlowExitsChartError(
                f"flow exits chart near depth {where:.6g} at node "
                f"{tuple(round(float(c), 6) for c in bad)}")
        k2 = compute_k2(spec, z)
        if np.any(k2 < 1e-12):
            raise FlowError(f"squared bdf gradient norm reaches 0 near depth "
                            f"{where:.6g}; the reference bdf degenerates")

    z = grid.boundary.nodes.copy()
    jac = grid.boundary.tangents.copy()
    guard(z, 0.0)

    n_r = grid.n_r
    chart = np.empty((n_r, n_b, m))
    jacs = np.empty((n_r, n_b, m, mm1))
    chart[0] = z
    jacs[0] = jac

    r_nodes = grid.r_nodes
    for k in range(n_r - 1):
        span = float(r_nodes[k + 1] - r_nodes[k])
        steps = max(1, math.ceil(base_steps * span / grid.eps))
        dt = span / steps
        for _ in range(steps):
            v1, dj1 = rhs(z, jac)
            v2, dj2 = rhs(z + 0.5 * dt * v1, jac + 0.5 * dt * dj1)
            v3, dj3 = rhs(z + 0.5 * dt * v2, jac + 0.5 * dt * dj2)
            v4, dj4 = rhs(z + dt * v3, jac + dt * dj3)
            z = z + dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
            jac = jac + dt / 6.0 * (dj1 + 2.0 * dj2 + 2.0 * dj3 + dj4)
            guard(z, float(r_nodes[k + 1]))
        chart[k + 1] = z
        jacs[k + 1] = jac

    flat = chart.reshape(-1, m)
    jflat = jacs.reshape(-1, m, mm1)
    gbar = eval_components(spec, flat)
    env = {nm: flat[:, i] for i, nm in enumerate(names)}
    vfield = _eval_field(v_exprs, env, flat.shape[0])
    vnorm2 = np.einsum("ni,nij,nj->n", vfield, gbar, vfield)
    cross = np.einsum("ni,nij,njk->nk", vfield, gbar, jflat)
    h = np.einsum("nia,nij,njb->nab", jflat, gbar, jflat)
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    k2 = compute_k2(spec, flat)
    drift = np.abs(bdf_values(spec, flat) - np.repeat(r_nodes, n_b))

    nf = NormalFormData(
        grid=grid,
        chart_points=chart,
        jac=jacs,
        k2=k2.reshape(n_r, n_b),
        vnorm2=vnorm2.reshape(n_r, n_b),
        cross=cross.reshape(n_r, n_b, mm1),
        h=h.reshape(n_r, n_b, mm1, mm1),
        drift=drift.reshape(n_r, n_b),
    )
    if check:
        if nf.max_drift > drift_tol:
            raise FlowError(f"flow drift {nf.max_drift:.3e} exceeds "
                            f"tolerance {drift_tol:.1e}")
        if nf.max_cross > orth_tol:
            raise FlowError(f"level-set orthogonality violated: normalized "
                            f"cross term {nf.max_cross:.3e} exceeds "
                            f"{orth_tol:.1e}")
    return nf


def choose_epsilon(nf: NormalFormData, margin: float = 0.05, *,
                   hypothesis_tol: float = 1e-9) -> float:
    """Largest dyadic shrink of the sampled depth keeping K^2 safely below 1.

    Raises HypothesisViolation when the boundary values themselves reach 1,
    i.e. the curvature-at-infinity hypothesis fails and no collar depth can
    work.  When the boundary maximum lies inside the margin band the target
    is relaxed to the midpoint between that maximum and 1, which is still a
    strict bound and is always attainable by continuity.
    """
    if not 0.0 < margin < 1.0:
        raise GridError("margin must lie strictly between 0 and 1")
    k2b = nf.k2[0]
    worst = int(np.argmax(k2b))
    if k2b[worst] >= 1.0 - hypothesis_tol:
        node = tuple(round(float(c), 9) for c in nf.chart_points[0, worst])
        raise HypothesisViolation(
            f"boundary curvature hypothesis fails at node {node}: "
            f"squared transverse coefficient {k2b[worst]:.9g} >= 1 "
            f"(curvature at infinity {-k2b[worst]:.9g} does not exceed -1)",
            node=node, k2=float(k2b[worst]))
    target = max(1.0 - margin, 0.5 * (1.0 + float(k2b.max())))
    eps = nf.eps
    for _ in range(200):
        if nf.k2_max_upto(eps) <= target:
            return eps
        eps *= 0.5
    raise FlowError("could not find a collar depth meeting the bound; "
                    "sampled values do not settle below the target")


# --- the adjusted tensor G ---------------------------------------------------

@dataclass(frozen=True)
class GField:
    """G = x^2 g - dx^2 in the collar frame, with positivity diagnostics.

    ``values[k, n]`` is the m x m matrix at depth node k, boundary node n,
    expressed in the flow frame (transverse direction first).  The
    ``consistency`` field records the per-node relative disagreement between
    the directly measured assembly and the closed-form normal-form assembly.
    """

    grid: CollarGrid
    values: np.ndarray          # (n_r, n_b, m, m)
    min_eig: np.ndarray         # (n_r, n_b)
    consistency: np.ndarray     # (n_r, n_b)
    transverse_coeff: np.ndarray  # (n_r, n_b): 1/K^2 - (1-Q)^2

    @property
    def min_eig_overall(self) -> float:
        return float(self.min_eig.min())

    @property
    def max_consistency(self) -> float:
        return float(self.consistency.max())

    @property
    def trace_scale(self) -> float:
        m = self.values.shape[-1]
        return float(np.mean(np.trace(self.values, axis1=-2, axis2=-1)) / m)

    def boundary_min_eig(self) -> np.ndarray:
        return self.min_eig[0]


def assemble_G(nf: NormalFormData, profile: BdfProfile, *,
               consistency_tol: float = 1e-9, check: bool = True) -> GField:
    """Assemble the adjusted tensor two ways and cross-check them.

    Direct: stretch^2 times the measured frame metric minus the squared
    profile slope on the transverse axis.  Closed form: diagonal with
    transverse entry stretch^2 (1/K^2 - (1-Q)^2) and tangential block
    stretch^2 h.  Both are exact for the same data, so their disagreement
    measures the flow's orthogonality error plus roundoff.
    """
    if profile.eps < nf.eps - 1e-12:
        raise GridError("profile was built for a shallower collar than the "
                        "normal form covers")
    grid = nf.grid
    n_r, n_b = grid.n_r, grid.n_b
    m = grid.manifold.dim
    r = grid.r_nodes

    w = profile.stretch(r)[:, None]           # (n_r, 1)
    slope = profile.dx_dr(r)[:, None]
    one_minus_q = profile.one_plus_rphi(r)[:, None]

    direct = np.zeros((n_r, n_b, m, m))
    direct[:, :, 0, 0] = w ** 2 * nf.vnorm2
    direct[:, :, 0, 1:] = w[..., None] ** 2 * nf.cross
    direct[:, :, 1:, 0] = direct[:, :, 0, 1:]
    direct[:, :, 1:, 1:] = (w ** 2)[..., None, None] * nf.h
    direct[:, :, 0, 0] -= slope ** 2

    coeff = 1.0 / nf.k2 - one_minus_q ** 2
    formula = np.zeros_like(direct)
    formula[:, :, 0, 0] = w ** 2 * coeff
    formula[:, :, 1:, 1:] = (w ** 2)[..., None, None] * nf.h

    diff = np.linalg.norm((direct - formula).reshape(n_r, n_b, -1), axis=-1)
    scale = np.linalg.norm(formula.reshape(n_r, n_b, -1), axis=-1)
    consistency = diff / np.maximum(scale, 1e-300)

    gfield = GField(
        grid=grid,
        values=direct,
        min_eig=sym_eigenvalues(direct)[..., 0],
        consistency=consistency,
        transverse_coeff=coeff,
    )
    if check and gfield.max_consistency > consistency_tol:
        raise ConsistencyError(
            f"adjusted-tensor assemblies disagree: relative error "
            f"{gfield.max_consistency:.3e} exceeds {consistency_tol:.1e}")
    return gfield
