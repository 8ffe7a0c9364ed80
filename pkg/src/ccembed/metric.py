"""Conformally compact metric specifications.

A :class:`MetricSpec` stores the *compactified* metric: the symmetric matrix
of expressions obtained by multiplying the interior metric by the square of
the reference boundary defining function.  The interior metric itself is
recovered by dividing by that square, so nothing stored here blows up at the
boundary and every comparison in the package can be done in finite terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    EvaluationError,
    SpecValidationError,
    UnknownIdentifierError,
)
from .expr import (
    Expression,
    add,
    differentiate,
    div,
    evaluate,
    free_variables,
    mul,
    parse_expression,
    powe,
    sub,
    const,
    var,
)
from .fields import Frame, SymTensorField, ZeroOneForm, min_eigenvalue_field
from .manifold import ManifoldKind, ModelManifold

__all__ = [
    "MetricSpec",
    "make_metric_spec",
    "env_from_nodes",
    "eval_metric",
    "eval_components",
    "eval_inverse",
    "bdf_values",
    "bdf_gradient",
    "compute_k2",
    "zero_norm_of_differential",
    "log_differential_zero_form",
    "interior_metric_exprs",
    "scale_metric",
    "adjugate_exprs",
    "sample_nodes",
    "boundary_sample_nodes",
]


@dataclass(frozen=True)
class MetricSpec:
    """Compactified metric components plus the reference bdf, as expressions."""

    manifold: ModelManifold
    components: tuple[tuple[Expression, ...], ...]
    reference_bdf: Expression

    @property
    def dim(self) -> int:
        return self.manifold.dim


def env_from_nodes(manifold: ModelManifold, nodes: np.ndarray) -> dict:
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    return {name: nodes[:, i] for i, name in enumerate(manifold.coord_names)}


def _as_expression(source, variables) -> Expression:
    if isinstance(source, Expression):
        bad = free_variables(source) - set(variables)
        if bad:
            raise UnknownIdentifierError(
                f"expression uses unknown variables {sorted(bad)}")
        return source
    return parse_expression(source, variables=variables)


def make_metric_spec(manifold: ModelManifold, components, bdf=None,
                     validate: bool = True) -> MetricSpec:
    """Build a spec from expression sources.

    ``components`` maps entry names like ``g12`` to sources (str or
    :class:`Expression`); missing off-diagonal entries default to zero,
    missing diagonal entries are an error.  ``bdf`` defaults to the
    manifold's standard boundary defining function.
    """
    names = manifold.coord_names
    m = manifold.dim
    if isinstance(components, dict):
        entries = {}
        for key, src in components.items():
            if not (len(key) == 3 and key[0] == "g" and key[1].isdigit()
                    and key[2].isdigit()):
                raise SpecValidationError(f"bad metric entry name {key!r}")
            i, j = int(key[1]) - 1, int(key[2]) - 1
            if not (0 <= i < m and 0 <= j < m):
                raise SpecValidationError(f"entry {key!r} outside dimension {m}")
            entries[(min(i, j), max(i, j))] = _as_expression(src, names)
        rows = []
        for i in range(m):
            row = []
            for j in range(m):
                key = (min(i, j), max(i, j))
                if key in entries:
                    row.append(entries[key])
                elif i == j:
                    raise SpecValidationError(f"missing diagonal entry g{i + 1}{i + 1}")
                else:
                    row.append(const(0.0))
            rows.append(tuple(row))
        comp = tuple(rows)
    else:
        comp = tuple(tuple(_as_expression(components[i][j], names)
                           for j in range(m)) for i in range(m))
        for i in range(m):
            for j in range(i):
                if comp[i][j] != comp[j][i]:
                    raise SpecValidationError(
                        "component matrix must be symmetric")
    if bdf is None:
        bdf = manifold.default_bdf_source()
    bdf_expr = _as_expression(bdf, names)
    spec = MetricSpec(manifold, comp, bdf_expr)
    if validate:
        validate_spec(spec)
    return spec


# --- evaluation ---------------------------------------------------------

def eval_components(spec: MetricSpec, nodes: np.ndarray) -> np.ndarray:
    """Compactified metric entries at nodes, shape (n, m, m)."""
    env = env_from_nodes(spec.manifold, nodes)
    n = len(next(iter(env.values())))
    m = spec.dim
    out = np.empty((n, m, m))
    for i in range(m):
        for j in range(i, m):
            vals = np.broadcast_to(np.asarray(
                evaluate(spec.components[i][j], env), dtype=float), (n,))
            out[:, i, j] = vals
            out[:, j, i] = vals
    if not np.all(np.isfinite(out)):
        raise EvaluationError("metric evaluation produced a non-finite value")
    return out


def eval_metric(spec: MetricSpec, nodes: np.ndarray) -> SymTensorField:
    """Metric components against the rescaled frame (finite at the boundary)."""
    return SymTensorField(eval_components(spec, nodes), Frame.ZERO)


def eval_inverse(spec: MetricSpec, nodes: np.ndarray) -> np.ndarray:
    g = eval_components(spec, nodes)
    try:
        inv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError(f"metric is singular at a node: {exc}") from exc
    return inv


@lru_cache(maxsize=None)
def _bdf_grad_exprs(spec: MetricSpec) -> tuple[Expression, ...]:
    return tuple(differentiate(spec.reference_bdf, name)
                 for name in spec.manifold.coord_names)


def bdf_values(spec: MetricSpec, nodes: np.ndarray) -> np.ndarray:
    env = env_from_nodes(spec.manifold, nodes)
    n = len(next(iter(env.values())))
    return np.broadcast_to(np.asarray(
        evaluate(spec.reference_bdf, env), dtype=float), (n,)).copy()


def bdf_gradient(spec: MetricSpec, nodes: np.ndarray) -> np.ndarray:
    env = env_from_nodes(spec.manifold, nodes)
    n = len(next(iter(env.values())))
    grads = [np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), (n,))
             for e in _bdf_grad_exprs(spec)]
    return np.stack(grads, axis=1)


def compute_k2(spec: MetricSpec, nodes: np.ndarray) -> np.ndarray:
    """Squared norm of the reference bdf differential in the compactified
    metric.  At boundary nodes this equals minus the curvature at infinity."""
    return zero_norm_of_differential(spec, spec.reference_bdf, nodes)


def zero_norm_of_differential(spec: MetricSpec, f, nodes: np.ndarray) -> np.ndarray:
    """Dual-metric norm squared of df in the compactified metric."""
    if not isinstance(f, Expression):
        f = parse_expression(f, variables=spec.manifold.coord_names)
    env = env_from_nodes(spec.manifold, nodes)
    n = len(next(iter(env.values())))
    grads = [np.broadcast_to(np.asarray(
        evaluate(differentiate(f, name), env), dtype=float), (n,))
        for name in spec.manifold.coord_names]
    df = np.stack(grads, axis=1)
    ginv = eval_inverse(spec, nodes)
    return np.einsum("nij,ni,nj->n", ginv, df, df)


def log_differential_zero_form(spec: MetricSpec, f, nodes: np.ndarray) -> ZeroOneForm:
    """Components of df/f against the rescaled coframe at interior nodes.

    For a boundary defining function f these stay bounded as the boundary is
    approached, which is the finiteness property tests probe.
    """
    if not isinstance(f, Expression):
        f = parse_expression(f, variables=spec.manifold.coord_names)
    env = env_from_nodes(spec.manifold, nodes)
    n = len(next(iter(env.values())))
    fv = np.broadcast_to(np.asarray(evaluate(f, env), dtype=float), (n,))
    if np.any(fv == 0.0):
        raise EvaluationError("df/f requested at a zero of f")
    r = bdf_values(spec, nodes)
    grads = [np.broadcast_to(np.asarray(
        evaluate(differentiate(f, name), env), dtype=float), (n,))
        for name in spec.manifold.coord_names]
    df = np.stack(grads, axis=1)
    return ZeroOneForm(r[:, None] * df / fv[:, None])


# --- symbolic helpers ---------------------------------------------------

def interior_metric_exprs(spec: MetricSpec) -> tuple[tuple[Expression, ...], ...]:
    """Interior metric entries: compactified entries over bdf squared."""
    r2 = powe(spec.reference_bdf, const(2.0))
    return tuple(tuple(div(spec.components[i][j], r2)
                       for j in range(spec.dim)) for i in range(spec.dim))


def adjugate_exprs(components) -> tuple[tuple[Expression, ...], ...]:
    """Adjugate matrix of a 1..3-dimensional symmetric expression matrix."""
    m = len(components)
    g = components
    if m == 1:
        return ((const(1.0),),)
    if m == 2:
        return ((g[1][1], mul(const(-1.0), g[0][1])),
                (mul(const(-1.0), g[1][0]), g[0][0]))
    if m == 3:
        def c2(a, b, c, d):
            return sub(mul(a, b), mul(c, d))
        a00 = c2(g[1][1], g[2][2], g[1][2], g[2][1])
        a01 = mul(const(-1.0), c2(g[0][1], g[2][2], g[0][2], g[2][1]))
        a02 = c2(g[0][1], g[1][2], g[0][2], g[1][1])
        a11 = c2(g[0][0], g[2][2], g[0][2], g[2][0])
        a12 = mul(const(-1.0), c2(g[0][0], g[1][2], g[0][2], g[1][0]))
        a22 = c2(g[0][0], g[1][1], g[0][1], g[1][0])
        return ((a00, a01, a02), (a01, a11, a12), (a02, a12, a22))
    raise SpecValidationError("adjugate supports dimensions 1..3 only")


def scale_metric(spec: MetricSpec, factor: float) -> MetricSpec:
    """Multiply the metric by a positive constant (same reference bdf)."""
    if factor <= 0:
        raise SpecValidationError("metric scale factor must be positive")
    f = const(factor)
    comp = tuple(tuple(mul(f, spec.components[i][j])
                       for j in range(spec.dim)) for i in range(spec.dim))
    return MetricSpec(spec.manifold, comp, spec.reference_bdf)


# --- sampling and validation ---------------------------------------------

def sample_nodes(manifold: ModelManifold, n_per_axis: int = 9) -> np.ndarray:
    """Deterministic chart sample including boundary and interior points."""
    if manifold.kind == ManifoldKind.DISK:
        radii = np.linspace(0.0, 1.0, n_per_axis)
        theta = np.linspace(0.0, 2 * np.pi, n_per_axis, endpoint=False)
        if manifold.dim == 2:
            rr, tt = np.meshgrid(radii, theta, indexing="ij")
            return np.column_stack([(rr * np.cos(tt)).ravel(),
                                    (rr * np.sin(tt)).ravel()])
        pol = np.linspace(0.2, np.pi - 0.2, n_per_axis)
        rr, pp, tt = np.meshgrid(radii, pol, theta, indexing="ij")
        return np.column_stack([
            (rr * np.sin(pp) * np.cos(tt)).ravel(),
            (rr * np.sin(pp) * np.sin(tt)).ravel(),
            (rr * np.cos(pp)).ravel()])
    rs = np.linspace(0.0, manifold.r_max, n_per_axis)
    angles = [np.linspace(0.0, p, n_per_axis, endpoint=False)
              for p in manifold.periods]
    mesh = np.meshgrid(rs, *angles, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def boundary_sample_nodes(manifold: ModelManifold, end: str,
                          n: int = 16) -> np.ndarray:
    """Deterministic sample of points on one boundary end."""
    if manifold.kind == ManifoldKind.DISK:
        theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        if manifold.dim == 2:
            return np.column_stack([np.cos(theta), np.sin(theta)])
        pol = np.linspace(0.2, np.pi - 0.2, n)
        pp, tt = np.meshgrid(pol, theta, indexing="ij")
        return np.column_stack([(np.sin(pp) * np.cos(tt)).ravel(),
                                (np.sin(pp) * np.sin(tt)).ravel(),
                                np.cos(pp).ravel()])
    angles = [np.linspace(0.0, p, n, endpoint=False)
              for p in manifold.periods]
    mesh = np.meshgrid(*angles, indexing="ij")
    flat = [m.ravel() for m in mesh]
    count = flat[0].size
    r0 = 0.0 if end == "r0" else manifold.r_max
    return np.column_stack([np.full(count, r0)] + flat)


def validate_spec(spec: MetricSpec) -> None:
    """Structural checks: coordinates, symmetry, positivity, bdf behavior."""
    names = set(spec.manifold.coord_names)
    used = set()
    for row in spec.components:
        for entry in row:
            used |= free_variables(entry)
    used |= free_variables(spec.reference_bdf)
    bad = used - names
    if bad:
        raise UnknownIdentifierError(
            f"spec uses unknown variables {sorted(bad)}; "
            f"coordinates are {sorted(names)}")

    nodes = sample_nodes(spec.manifold)
    g = eval_components(spec, nodes)
    mins = min_eigenvalue_field(g)
    if np.any(mins <= 0.0):
        k = int(np.argmin(mins))
        raise SpecValidationError(
            f"compactified metric is not positive-definite at sampled node "
            f"{nodes[k].tolist()} (min eigenvalue {mins[k]:.3e})")

    # Reference bdf: vanishes on declared ends, differential nonzero there,
    # positive at interior samples.
    for end in spec.manifold.boundary_ends:
        bn = boundary_sample_nodes(spec.manifold, end)
        bv = bdf_values(spec, bn)
        if np.any(np.abs(bv) > 1e-12):
            raise SpecValidationError(
                f"reference bdf does not vanish on end {end!r} "
                f"(max |value| {np.abs(bv).max():.3e})")
        grad = bdf_gradient(spec, bn)
        norms = np.linalg.norm(grad, axis=1)
        if np.any(norms < 1e-8):
            raise SpecValidationError(
                f"reference bdf has vanishing differential on end {end!r}")
    rv = bdf_values(spec, nodes)
    interior = ~_on_declared_boundary(spec.manifold, nodes)
    if np.any(rv[interior] <= 0.0):
        raise SpecValidationError("reference bdf must be positive away from "
                                  "declared boundary ends")

    # Angular periodicity of the entries (collar-torus only): entries must
    # agree across the periodic wrap or grids would be inconsistent.
    if spec.manifold.kind == ManifoldKind.COLLAR_TORUS:
        base = sample_nodes(spec.manifold, 5)
        shifted = base.copy()
        for j, p in enumerate(spec.manifold.periods):
            shifted[:, j + 1] += p
        g0 = eval_components(spec, base)
        g1 = eval_components(spec, shifted)
        scale = np.abs(g0).max() + 1.0
        if np.abs(g0 - g1).max() > 1e-9 * scale:
            raise SpecValidationError(
                "metric entries are not periodic in the angular coordinates")


def _on_declared_boundary(manifold: ModelManifold, nodes: np.ndarray) -> np.ndarray:
    if manifold.kind == ManifoldKind.DISK:
        return np.abs(np.einsum("ni,ni->n", nodes, nodes) - 1.0) < 1e-9
    mask = np.zeros(len(nodes), dtype=bool)
    if "r0" in manifold.ends:
        mask |= np.abs(nodes[:, 0]) < 1e-12
    if "rmax" in manifold.ends:
        mask |= np.abs(nodes[:, 0] - manifold.r_max) < 1e-12
    return mask
