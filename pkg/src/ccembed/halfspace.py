"""Composition into the hyperbolic half-space model and its verification.

The final map sends a collar node to (x, v): the constructed boundary
defining function as the vertical half-space coordinate, the Euclidean
embedding as the horizontal ones.  All isometry checks are multiplied
through by x^2 so every identity stays finite at the boundary, where the
vertical coordinate vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .bdf import BdfProfile
from .embed import EmbedGrid, EuclideanEmbedding, _grid_graph, pullback_metric
from .errors import GridError

__all__ = [
    "HalfSpaceModel",
    "PEmbedding",
    "compose",
    "pullback_halfspace",
    "PullbackComparison",
    "verify_p_embedding",
    "PVerificationRecord",
    "induced_kappa",
    "induced_curvature_inequality",
    "InducedCurvatureRecord",
    "totally_geodesic_half_plane",
]


@dataclass(frozen=True)
class HalfSpaceModel:
    """Upper half space with metric (dX^2 + dY^2) / (lam X)^2.

    Constant sectional curvature -lam^2; X = 0 is the boundary at infinity.
    """

    ambient_dim: int
    lam: float

    def __post_init__(self):
        if self.lam == 0:
            raise GridError("curvature scale lam must be nonzero")
        if self.ambient_dim < 2:
            raise GridError("half space needs at least 2 ambient coordinates")

    def metric_at(self, big_x: float) -> np.ndarray:
        if big_x <= 0:
            raise GridError("metric evaluation needs X > 0")
        return np.eye(self.ambient_dim) / (self.lam * big_x) ** 2


@dataclass(frozen=True)
class PEmbedding:
    """Composed map into the half space, sampled on a collar-style grid.

    ``x`` is the vertical component (the constructed bdf, stored once and
    shared: ``points[:, 0]`` is a bit-exact copy).  The Jacobian's first row
    is the differential of x, which depends on the depth coordinate only.
    """

    grid: EmbedGrid
    lam: float
    x: np.ndarray          # (n,)
    points: np.ndarray     # (n, 1 + N)
    jacobian: np.ndarray   # (n, 1 + N, ndim)
    provenance: str

    @property
    def n_ambient(self) -> int:
        return self.points.shape[1]

    @property
    def depth_values(self) -> np.ndarray:
        return self.grid.node_coords()[:, 0]

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.depth_values == 0.0

    def model(self) -> HalfSpaceModel:
        return HalfSpaceModel(self.n_ambient, self.lam)


def compose(profile: BdfProfile, emb: EuclideanEmbedding,
            lam: float) -> PEmbedding:
    """Assemble (x, v) from the bdf profile and the Euclidean embedding."""
    if lam == 0:
        raise GridError("curvature scale lam must be nonzero")
    grid = emb.grid
    r = grid.node_coords()[:, 0]
    if float(r.max()) > profile.eps + 1e-12:
        raise GridError("embedding grid is deeper than the bdf profile")
    x = np.asarray(profile.x(r), dtype=float)
    slope = np.asarray(profile.dx_dr(r), dtype=float)
    n, n_dim = emb.points.shape
    points = np.empty((n, 1 + n_dim))
    points[:, 0] = x
    points[:, 1:] = emb.points
    jac = np.zeros((n, 1 + n_dim, grid.ndim))
    jac[:, 0, 0] = slope
    jac[:, 1:, :] = emb.jacobian
    return PEmbedding(grid, float(lam), x, points, jac,
                      provenance=f"compose({emb.provenance})")


@dataclass(frozen=True)
class PullbackComparison:
    pulled: np.ndarray      # (n, m, m): dx^2 + dv^2 per node
    target: np.ndarray      # (n, m, m): compactified ambient target
    residual: np.ndarray    # (n,) relative Frobenius disagreement

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())

    @property
    def rms_residual(self) -> float:
        return float(math.sqrt(np.mean(self.residual ** 2)))


def pullback_halfspace(u: PEmbedding, target: np.ndarray) -> PullbackComparison:
    """Compare the compactified pullback with the compactified metric.

    ``target`` is x^2 times the metric the composition is supposed to be
    isometric for, in the same grid frame as the Jacobians.  The pullback of
    the half-space metric times x^2 is exactly dx^2 + dv^2, i.e. the plain
    Euclidean pullback of the full Jacobian, finite at the boundary.
    """
    target = np.asarray(target, dtype=float)
    pulled = pullback_metric(u.jacobian)
    if pulled.shape != target.shape:
        raise GridError(f"target has shape {target.shape}, expected "
                        f"{pulled.shape}")
    n = len(pulled)
    diff = np.linalg.norm((pulled - target).reshape(n, -1), axis=1)
    scale = np.linalg.norm(target.reshape(n, -1), axis=1)
    return PullbackComparison(pulled, target,
                              diff / np.maximum(scale, 1e-300))


@dataclass(frozen=True)
class PVerificationRecord:
    """Outcome of the structural checks on a composed map."""

    bdf_boundary_exact: bool      # x == 0 exactly on depth-0 nodes
    bdf_interior_positive: bool
    transversality_min: float     # min boundary-node norm of the dx row
    immersion_min_sv: float       # min singular value of the full Jacobian
    injectivity_ratio: float | None

    def passed(self, *, transversality_tol: float = 1e-8,
               immersion_tol: float = 0.0,
               injectivity_tol: float = 0.0) -> bool:
        ok = (self.bdf_boundary_exact and self.bdf_interior_positive
              and self.transversality_min > transversality_tol
              and self.immersion_min_sv > immersion_tol)
        if self.injectivity_ratio is not None:
            ok = ok and self.injectivity_ratio > injectivity_tol
        return ok


def verify_p_embedding(u: PEmbedding, target: np.ndarray | None = None, *,
                       sample_cap: int = 120) -> PVerificationRecord:
    """Check the structural embedding properties of the composed map.

    The vertical component must vanish exactly on the boundary slice and
    nowhere else, its differential must stay transverse there, the full
    Jacobian must have full rank, and (when a compactified target metric is
    supplied) sampled extrinsic distances must not collapse relative to
    intrinsic ones.
    """
    mask = u.boundary_mask
    boundary_exact = bool(np.all(u.x[mask] == 0.0))
    interior_positive = bool(np.all(u.x[~mask] > 0.0))
    dx_rows = u.jacobian[mask, 0, :]
    transversality = float(np.linalg.norm(dx_rows, axis=1).min()) \
        if mask.any() else 0.0
    sv = np.linalg.svd(u.jacobian, compute_uv=False)
    min_sv = float(sv[..., -1].min())

    ratio = None
    if target is not None:
        target = np.asarray(target, dtype=float)
        n = u.grid.n_nodes
        stride = max(1, int(math.ceil(n / sample_cap)))
        ids = np.arange(0, n, stride)
        graph = _grid_graph(u.grid, target)
        intr = dijkstra(graph, directed=False, indices=ids)[:, ids]
        pts = u.points[ids]
        ext = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        iu = np.triu_indices(len(ids), k=1)
        good = intr[iu] > 1e-12
        ratio = float((ext[iu][good] / intr[iu][good]).min()) \
            if good.any() else 1.0

    return PVerificationRecord(
        bdf_boundary_exact=boundary_exact,
        bdf_interior_positive=interior_positive,
        transversality_min=transversality,
        immersion_min_sv=min_sv,
        injectivity_ratio=ratio,
    )


def induced_kappa(u: PEmbedding) -> np.ndarray:
    """Curvature at infinity of the metric the map induces, per boundary node.

    Computed from the compactified induced metric lam^-2 (dx^2 + dv^2)
    restricted to the boundary slice, measuring the differential of the
    vertical component against it.
    """
    mask = u.boundary_mask
    if not mask.any():
        raise GridError("grid has no boundary (depth 0) nodes")
    jac0 = u.jacobian[mask]
    compact = pullback_metric(jac0) / u.lam ** 2
    dx0 = jac0[:, 0, :]
    inv = np.linalg.inv(compact)
    return -np.einsum("ni,nij,nj->n", dx0, inv, dx0)


@dataclass(frozen=True)
class InducedCurvatureRecord:
    kappa: np.ndarray              # per boundary node
    lam: float
    lower_bound_margin: float      # min(kappa - (-lam^2)); >= -tol required
    match_max_error: float | None  # vs supplied reference field

    def lower_bound_ok(self, tol: float = 1e-6) -> bool:
        return self.lower_bound_margin >= -tol

    def match_ok(self, tol: float = 2e-3) -> bool:
        if self.match_max_error is None:
            return True
        return self.match_max_error <= tol


def induced_curvature_inequality(u: PEmbedding,
                                 kappa_reference: np.ndarray | None = None
                                 ) -> InducedCurvatureRecord:
    """Induced curvature at infinity vs the ambient curvature bound.

    A submanifold of this kind can never be more negatively curved at
    infinity than the ambient space, so the induced values must sit at or
    above -lam^2; when a reference field is given (the curvature at infinity
    of the metric the map was built from) the two must also agree, since the
    map is isometric.
    """
    kappa = induced_kappa(u)
    margin = float((kappa - (-u.lam ** 2)).min())
    match = None
    if kappa_reference is not None:
        ref = np.asarray(kappa_reference, dtype=float)
        if ref.shape != kappa.shape:
            raise GridError(f"reference curvature field has shape {ref.shape},"
                            f" expected {kappa.shape}")
        match = float(np.abs(kappa - ref).max())
    return InducedCurvatureRecord(kappa, u.lam, margin, match)


def totally_geodesic_half_plane(lam: float, n_depth: int = 16,
                                n_span: int = 16) -> PEmbedding:
    """Synthetic equality case: a flat coordinate half plane in the model.

    The map (r, t) -> (X, Y) = (r, t, const) is totally geodesic, so its
    induced curvature at infinity equals the ambient -lam^2 on the nose.
    """
    grid = EmbedGrid(
        (np.linspace(0.0, 0.5, n_depth), np.linspace(0.0, 1.0, n_span)),
        (False, False), (None, None))
    coords = grid.node_coords()
    n = grid.n_nodes
    x = coords[:, 0].copy()
    points = np.column_stack([x, coords[:, 1], np.full(n, 0.7)])
    jac = np.zeros((n, 3, 2))
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = 1.0
    return PEmbedding(grid, float(lam), x, points, jac,
                      provenance="synthetic:half-plane")
