"""Curvature at infinity and interior sectional curvature.

The curvature at infinity of a conformally compact metric is minus the
squared norm of the differential of a boundary defining function, measured
in the metric compactified by that same function and evaluated on the
boundary.  It does not depend on which boundary defining function is used,
and interior sectional curvatures approach it along any sequence of tangent
planes converging to a boundary point.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegeneratePlaneError, GridError, NotABdfError
from .expr import Expression, differentiate, evaluate, parse_expression
from .manifold import ManifoldKind
from .metric import (
    MetricSpec,
    bdf_gradient,
    bdf_values,
    env_from_nodes,
    eval_components,
    eval_inverse,
    interior_metric_exprs,
)

__all__ = [
    "TwoPlane",
    "KappaInfinityField",
    "kappa_infinity",
    "kappa_rescale",
    "sectional_curvature",
    "sectional_curvature_exprs",
    "curvature_limit_scan",
    "plane_family",
    "default_fd_step",
    "MIN_INTERIOR_BDF",
]

MIN_INTERIOR_BDF = 1e-3


@dataclass(frozen=True)
class TwoPlane:
    """A tangent 2-plane: base point and two spanning coordinate vectors."""

    point: tuple[float, ...]
    u: tuple[float, ...]
    v: tuple[float, ...]


@dataclass(frozen=True)
class KappaInfinityField:
    """Curvature at infinity sampled over boundary nodes."""

    nodes: np.ndarray       # (n, m) chart coordinates on the boundary
    values: np.ndarray      # (n,)

    def __post_init__(self):
        if np.any(self.values >= 0.0):
            raise NotABdfError(
                "curvature at infinity must be negative; the candidate "
                "function is not a boundary defining function for this metric")

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())


def _candidate_gradient(spec: MetricSpec, x, nodes: np.ndarray) -> np.ndarray:
    if isinstance(x, str):
        x = parse_expression(x, variables=spec.manifold.coord_names)
    if not isinstance(x, Expression):
        raise NotABdfError("candidate bdf must be an expression")
    env = env_from_nodes(spec.manifold, nodes)
    n = len(next(iter(env.values())))
    grads = [np.broadcast_to(np.asarray(
        evaluate(differentiate(x, name), env), dtype=float), (n,))
        for name in spec.manifold.coord_names]
    return np.stack(grads, axis=1)


def kappa_infinity(spec: MetricSpec, boundary_nodes: np.ndarray,
                   x=None) -> KappaInfinityField:
    """Curvature at infinity at boundary nodes, for any defining function.

    ``x`` may be an expression (or source string) for an alternative
    boundary defining function; ``None`` uses the spec's reference bdf.  The
    value is computed in compactified form: the candidate's differential is
    measured in the compactified metric and divided by the square of the
    ratio between the candidate and the reference bdf.  On the boundary that
    ratio equals the ratio of the two differentials along any transverse
    direction, which is how it is evaluated without dividing zero by zero.
    """
    nodes = np.atleast_2d(np.asarray(boundary_nodes, dtype=float))
    ginv = eval_inverse(spec, nodes)
    dr = bdf_gradient(spec, nodes)
    k2_ref = np.einsum("nij,ni,nj->n", ginv, dr, dr)
    if x is None:
        return KappaInfinityField(nodes, -k2_ref)
    dx = _candidate_gradient(spec, x, nodes)
    # ratio of the candidate to the reference bdf at the boundary
    w = np.einsum("nij,ni,nj->n", ginv, dx, dr) / k2_ref
    if np.any(np.abs(w) < 1e-12):
        raise NotABdfError("candidate function has vanishing differential "
                           "transverse to the boundary")
    norm_dx = np.einsum("nij,ni,nj->n", ginv, dx, dx)
    return KappaInfinityField(nodes, -norm_dx / w**2)


def kappa_rescale(kappa, lam: float):
    """Curvature at infinity after multiplying the metric by lam^2."""
    if lam == 0:
        raise ValueError("scale factor must be nonzero")
    factor = lam ** -2.0
    if isinstance(kappa, KappaInfinityField):
        return KappaInfinityField(kappa.nodes, factor * kappa.values)
    return factor * np.asarray(kappa)


# --- interior sectional curvature ----------------------------------------

def default_fd_step(r: float) -> float:
    """Finite-difference step for curvature, shrinking toward the boundary.

    The step decays slightly faster than the distance to the boundary so the
    truncation error of the Christoffel derivative stencils decays as well;
    a fixed step (or one merely proportional to the distance) would leave
    the numerical error flat or growing as the boundary is approached.
    """
    return max(1e-2 * float(r) ** 1.25, 1e-8)


@lru_cache(maxsize=None)
def _metric_context(coord_names: tuple[str, ...], g_exprs):
    dg = tuple(tuple(tuple(differentiate(g_exprs[i][j], name)
                           for name in coord_names)
                     for j in range(len(g_exprs))) for i in range(len(g_exprs)))
    return g_exprs, dg


def _eval_matrix(exprs, env, m):
    out = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            v = float(evaluate(exprs[i][j], env))
            out[i, j] = v
            out[j, i] = v
    return out


def _christoffel(coord_names, g_exprs, dg_exprs, point):
    m = len(coord_names)
    env = {name: float(point[i]) for i, name in enumerate(coord_names)}
    g = _eval_matrix(g_exprs, env, m)
    ginv = np.linalg.inv(g)
    dg = np.empty((m, m, m))  # dg[l, i, j] = d_l g_ij
    for i in range(m):
        for j in range(i, m):
            for l in range(m):
                v = float(evaluate(dg_exprs[i][j][l], env))
                dg[l, i, j] = v
                dg[l, j, i] = v
    gamma = np.empty((m, m, m))  # gamma[k, i, j]
    for k in range(m):
        for i in range(m):
            for j in range(m):
                s = 0.0
                for l in range(m):
                    s += ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                gamma[k, i, j] = 0.5 * s
    return gamma


def sectional_curvature_exprs(coord_names: tuple[str, ...], g_exprs,
                              plane: TwoPlane, fd_step: float) -> float:
    """Sectional curvature of an explicit interior metric.

    First derivatives of the metric are exact (symbolic); the derivatives of
    the Christoffel symbols are taken with fourth-order central differences
    of step ``fd_step``.
    """
    g_exprs, dg_exprs = _metric_context(tuple(coord_names), tuple(map(tuple, g_exprs)))
    m = len(coord_names)
    p = np.asarray(plane.point, dtype=float)
    u = np.asarray(plane.u, dtype=float)
    v = np.asarray(plane.v, dtype=float)

    env = {name: float(p[i]) for i, name in enumerate(coord_names)}
    g = _eval_matrix(g_exprs, env, m)
    uu = u @ g @ u
    vv = v @ g @ v
    uv = u @ g @ v
    gram = uu * vv - uv * uv
    scale = max(uu * vv, 1e-300)
    if gram < 1e-12 * scale:
        raise DegeneratePlaneError(
            f"plane is numerically degenerate (normalized Gram determinant "
            f"{gram / scale:.3e})")

    gamma0 = _christoffel(coord_names, g_exprs, dg_exprs, p)
    h = float(fd_step)
    dgamma = np.empty((m, m, m, m))  # dgamma[d, k, i, j] = d_d gamma^k_ij
    for d in range(m):
        e = np.zeros(m)
        e[d] = h
        gm2 = _christoffel(coord_names, g_exprs, dg_exprs, p - 2 * e)
        gm1 = _christoffel(coord_names, g_exprs, dg_exprs, p - e)
        gp1 = _christoffel(coord_names, g_exprs, dg_exprs, p + e)
        gp2 = _christoffel(coord_names, g_exprs, dg_exprs, p + 2 * e)
        dgamma[d] = (gm2 - 8.0 * gm1 + 8.0 * gp1 - gp2) / (12.0 * h)

    # R(u, v)v contracted against u, all indices via loops (m <= 3).
    num = 0.0
    for l in range(m):
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    rl = dgamma[i, l, j, k] - dgamma[j, l, i, k]
                    for a in range(m):
                        rl += (gamma0[l, i, a] * gamma0[a, j, k]
                               - gamma0[l, j, a] * gamma0[a, i, k])
                    weight = u[i] * v[j] * v[k]
                    if weight != 0.0:
                        num += (g[l] @ u) * rl * weight
    return float(num / gram)


def sectional_curvature(spec: MetricSpec, plane: TwoPlane,
                        fd_step=None) -> float:
    """Sectional curvature of the interior metric at an interior point."""
    p = np.asarray(plane.point, dtype=float)
    r = float(bdf_values(spec, p[None, :])[0])
    if r < MIN_INTERIOR_BDF:
        raise GridError(f"point too close to the boundary for interior "
                        f"curvature (bdf value {r:.3e} < {MIN_INTERIOR_BDF})")
    if fd_step is None:
        h = default_fd_step(r)
    elif callable(fd_step):
        h = float(fd_step(r))
    else:
        h = float(fd_step)
    g_exprs = interior_metric_exprs(spec)
    return sectional_curvature_exprs(spec.manifold.coord_names, g_exprs,
                                     plane, h)


# --- limit scans ----------------------------------------------------------

def _ray_point(spec: MetricSpec, boundary_node: np.ndarray, r: float) -> np.ndarray:
    """Interior point at bdf value r on the inward ray from a boundary node."""
    manifold = spec.manifold
    node = np.asarray(boundary_node, dtype=float)
    if manifold.kind == ManifoldKind.DISK:
        yhat = node / np.linalg.norm(node)
        return np.sqrt(1.0 - r) * yhat
    p = node.copy()
    if abs(p[0] - manifold.r_max) < 1e-12 and "rmax" in manifold.ends:
        raise GridError("limit scans are implemented for the r = 0 end")
    p[0] = r
    return p


def plane_family(spec: MetricSpec, boundary_node: np.ndarray, r: float,
                 family: str) -> TwoPlane:
    """Coordinate plane at the ray point above a boundary node.

    ``family`` is ``"transverse"`` (inward direction with the first angular
    direction) or ``"tangential"`` (the two angular directions, dimension 3
    only).
    """
    manifold = spec.manifold
    node = np.asarray(boundary_node, dtype=float)
    point = _ray_point(spec, boundary_node, r)
    m = manifold.dim
    if manifold.kind == ManifoldKind.DISK:
        yhat = node / np.linalg.norm(node)
        if m == 2:
            t1 = np.array([-yhat[1], yhat[0]])
            t2 = None
        else:
            k = int(np.argmin(np.abs(yhat)))
            e = np.zeros(3)
            e[k] = 1.0
            t1 = np.cross(e, yhat)
            t1 /= np.linalg.norm(t1)
            t2 = np.cross(yhat, t1)
        radial = -yhat
        vectors = {"transverse": (radial, t1)}
        if t2 is not None:
            vectors["tangential"] = (t1, t2)
    else:
        e = np.eye(m)
        vectors = {"transverse": (e[0], e[1])}
        if m >= 3:
            vectors["tangential"] = (e[1], e[2])
    if family not in vectors:
        raise GridError(f"plane family {family!r} not available in "
                        f"dimension {m}; choose from {sorted(vectors)}")
    u, v = vectors[family]
    return TwoPlane(tuple(point), tuple(u), tuple(v))


def curvature_limit_scan(spec: MetricSpec, boundary_node, radii,
                         family: str = "transverse",
                         fd_step=None) -> list[tuple[float, float]]:
    """Distance between interior curvature and the boundary limit.

    Returns ``(r, |K - kappa_inf|)`` pairs for the coordinate plane family
    transported along the inward ray from ``boundary_node``.
    """
    node = np.asarray(boundary_node, dtype=float)
    kappa = kappa_infinity(spec, node[None, :]).values[0]
    out = []
    for r in radii:
        plane = plane_family(spec, node, float(r), family)
        k = sectional_curvature(spec, plane, fd_step=fd_step)
        out.append((float(r), abs(k - kappa)))
    return out
