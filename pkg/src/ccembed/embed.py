"""Numerical isometric embedding of a positive-definite grid metric.

Given symmetric positive matrices G on a rectangular (optionally periodic)
grid, find a map v into R^N whose discrete Jacobian pulls the Euclidean
metric back to G.  Structured metrics go through a small closed-form
library; everything else is solved by seeded gradient descent on the
Frobenius isometry defect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .errors import (
    GridError,
    NotConvergedError,
    RepresentabilityError,
    SpecValidationError,
)
from .fields import SymTensorField, min_eigenvalue_field
from .manifold import CollarGrid

__all__ = [
    "EmbedGrid",
    "embed_grid_from_collar",
    "build_diff_ops",
    "OptimizerConfig",
    "EuclideanEmbedding",
    "default_target_dim",
    "analytic_embedding",
    "optimize_embedding",
    "isometry_residual",
    "defect_field",
    "EmbeddingDiagnostics",
    "embedding_diagnostics",
]


# --- grids and difference operators ----------------------------------------

@dataclass(frozen=True)
class EmbedGrid:
    """Uniform tensor-product grid, axis 0 outermost in the node ordering."""

    axes: tuple[np.ndarray, ...]
    periodic: tuple[bool, ...]
    periods: tuple[float | None, ...]

    def __post_init__(self):
        if len(self.axes) != len(self.periodic) or len(self.axes) != len(self.periods):
            raise GridError("axes, periodic flags, and periods must align")
        for ax, per, period in zip(self.axes, self.periodic, self.periods):
            if len(ax) < 5:
                raise GridError("difference stencils need at least 5 nodes "
                                "per axis")
            d = np.diff(ax)
            if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
                raise GridError("axes must be uniform and increasing")
            if per and period is None:
                raise GridError("periodic axis needs its period")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def spacing(self, axis: int) -> float:
        ax = self.axes[axis]
        if self.periodic[axis]:
            return float(self.periods[axis] / len(ax))
        return float(ax[1] - ax[0])

    def node_coords(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def halved(self) -> "EmbedGrid":
        """Grid with every spacing halved over the same extents."""
        axes = []
        for ax, per, period in zip(self.axes, self.periodic, self.periods):
            n = 2 * len(ax)
            if per:
                axes.append(np.linspace(ax[0], ax[0] + period, n,
                                        endpoint=False))
            else:
                axes.append(np.linspace(ax[0], ax[-1], n - 1))
        return EmbedGrid(tuple(axes), self.periodic, self.periods)


def embed_grid_from_collar(grid: CollarGrid) -> EmbedGrid:
    b = grid.boundary
    return EmbedGrid((np.asarray(grid.r_nodes),) + tuple(b.params),
                     (False,) + tuple(b.periodic),
                     (None,) + tuple(b.periods))


def _diff_1d(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    """4th-order first-derivative matrix on a uniform axis."""
    central = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    rows, cols, vals = [], [], []
    if periodic:
        for i in range(n):
            for o, c in zip((-2, -1, 0, 1, 2), central):
                if c != 0.0:
                    rows.append(i)
                    cols.append((i + o) % n)
                    vals.append(c)
    else:
        edge0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
        edge1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
        for i in range(n):
            if i == 0:
                stencil = zip(range(5), edge0)
            elif i == 1:
                stencil = zip(range(5), edge1)
            elif i == n - 2:
                stencil = zip(range(n - 5, n), -edge1[::-1])
            elif i == n - 1:
                stencil = zip(range(n - 5, n), -edge0[::-1])
            else:
                stencil = zip(range(i - 2, i + 3), central)
            for j, c in stencil:
                if c != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(c)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_diff_ops(grid: EmbedGrid) -> tuple[sp.csr_matrix, ...]:
    """Per-axis derivative operators on flattened node vectors."""
    ops = []
    shape = grid.shape
    for k in range(grid.ndim):
        d = _diff_1d(shape[k], grid.spacing(k), grid.periodic[k])
        pre = int(np.prod(shape[:k])) if k > 0 else 1
        post = int(np.prod(shape[k + 1:])) if k + 1 < grid.ndim else 1
        op = sp.kron(sp.identity(pre, format="csr"),
                     sp.kron(d, sp.identity(post, format="csr"), format="csr"),
                     format="csr")
        ops.append(op)
    return tuple(ops)


# --- embeddings --------------------------------------------------------------

@dataclass(frozen=True)
class EuclideanEmbedding:
    """Grid map into R^N together with its per-node Jacobian."""

    grid: EmbedGrid
    points: np.ndarray     # (n, N)
    jacobian: np.ndarray   # (n, N, ndim)
    provenance: str
    converged: bool = True
    final_residual: float | None = None
    trace: np.ndarray | None = None   # rows (iteration, residual, step)

    @property
    def n_dim(self) -> int:
        return self.points.shape[1]

    def require_converged(self):
        if not self.converged:
            raise NotConvergedError(
                f"embedding optimizer stopped at residual "
                f"{self.final_residual:.3e} without reaching its target")
        return self


def default_target_dim(m: int) -> int:
    """Local isometric-embedding dimension plus slack."""
    return m * (m + 3) // 2 + 3


def _as_values(g) -> np.ndarray:
    if isinstance(g, SymTensorField):
        return g.values
    return np.asarray(g, dtype=float)


def pullback_metric(jac: np.ndarray) -> np.ndarray:
    out = np.einsum("nak,nal->nkl", jac, jac, optimize=True)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def defect_field(jac: np.ndarray, g_values: np.ndarray) -> np.ndarray:
    """Per-node Frobenius norm of the isometry defect J^T J - G."""
    e = pullback_metric(jac) - g_values
    return np.linalg.norm(e.reshape(e.shape[0], -1), axis=1)


def isometry_residual(jac: np.ndarray, g_values: np.ndarray,
                      weights: np.ndarray | None = None) -> float:
    """Weighted relative Frobenius residual of the isometry equations."""
    d2 = defect_field(jac, g_values) ** 2
    s2 = np.linalg.norm(g_values.reshape(len(g_values), -1), axis=1) ** 2
    if weights is None:
        return float(math.sqrt(d2.sum() / s2.sum()))
    return float(math.sqrt((weights * d2).sum() / (weights * s2).sum()))


# --- analytic library --------------------------------------------------------

def _require_2d(grid: EmbedGrid, name: str, want_periodic_axis1=True):
    if grid.ndim != 2:
        raise GridError(f"{name} embedding needs a 2-d grid")
    if want_periodic_axis1 and not grid.periodic[1]:
        raise GridError(f"{name} embedding needs a periodic second axis")


def analytic_embedding(name: str, params: dict, grid: EmbedGrid, *,
                       jacobian_mode: str = "exact") -> EuclideanEmbedding:
    """Closed-form embeddings for structured metrics.

    ``flat-cylinder`` (params a, b) realizes diag(b^2, a^2); ``circle-pair``
    realizes the identity metric on two angular-style axes in R^4;
    ``revolution`` (params A, B, B_prime as callables of the first axis)
    realizes diag(A^2, B^2) whenever A^2 >= B'^2.
    """
    coords = grid.node_coords()
    if name == "flat-cylinder":
        _require_2d(grid, name)
        a, b = float(params["a"]), float(params["b"])
        t, theta = coords[:, 0], coords[:, 1]
        pts = np.column_stack([a * np.cos(theta), a * np.sin(theta), b * t])
        jac = np.zeros((len(pts), 3, 2))
        jac[:, 2, 0] = b
        jac[:, 0, 1] = -a * np.sin(theta)
        jac[:, 1, 1] = a * np.cos(theta)
    elif name == "circle-pair":
        _require_2d(grid, name, want_periodic_axis1=False)
        s, t = coords[:, 0], coords[:, 1]
        pts = np.column_stack([np.cos(s), np.sin(s), np.cos(t), np.sin(t)])
        jac = np.zeros((len(pts), 4, 2))
        jac[:, 0, 0] = -np.sin(s)
        jac[:, 1, 0] = np.cos(s)
        jac[:, 2, 1] = -np.sin(t)
        jac[:, 3, 1] = np.cos(t)
    elif name == "revolution":
        _require_2d(grid, name)
        fa, fb, fbp = params["A"], params["B"], params["B_prime"]
        r_axis = grid.axes[0]
        fine = np.linspace(r_axis[0], r_axis[-1], 16 * (len(r_axis) - 1) + 1)
        gap = np.asarray(fa(fine), dtype=float) ** 2 \
            - np.asarray(fbp(fine), dtype=float) ** 2
        if np.min(gap) < -1e-12:
            bad = fine[int(np.argmin(gap))]
            raise RepresentabilityError(
                f"profile is not representable as a surface of revolution: "
                f"A^2 - B'^2 = {np.min(gap):.3e} < 0 near first-axis value "
                f"{bad:.6g}")

        def zslope(t):
            return math.sqrt(max(float(fa(t)) ** 2 - float(fbp(t)) ** 2, 0.0))

        from .bdf import _adaptive_simpson
        z_axis = np.empty(len(r_axis))
        z_axis[0] = 0.0
        for i in range(1, len(r_axis)):
            z_axis[i] = z_axis[i - 1] + _adaptive_simpson(
                zslope, float(r_axis[i - 1]), float(r_axis[i]), 1e-12)
        z_of = dict(zip(r_axis, z_axis))
        t, theta = coords[:, 0], coords[:, 1]
        bvals = np.asarray(fb(t), dtype=float)
        bp = np.asarray(fbp(t), dtype=float)
        z = np.array([z_of[tv] for tv in t])
        zp = np.array([zslope(tv) for tv in t])
        pts = np.column_stack([bvals * np.cos(theta), bvals * np.sin(theta), z])
        jac = np.zeros((len(pts), 3, 2))
        jac[:, 0, 0] = bp * np.cos(theta)
        jac[:, 1, 0] = bp * np.sin(theta)
        jac[:, 2, 0] = zp
        jac[:, 0, 1] = -bvals * np.sin(theta)
        jac[:, 1, 1] = bvals * np.cos(theta)
    else:
        raise GridError(f"unknown analytic embedding {name!r}")

    if jacobian_mode == "stencil":
        ops = build_diff_ops(grid)
        jac = np.stack([op @ pts for op in ops], axis=2)
    elif jacobian_mode != "exact":
        raise GridError(f"unknown jacobian mode {jacobian_mode!r}")
    return EuclideanEmbedding(grid, pts, jac, provenance=f"analytic:{name}")


# --- optimizer ---------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the isometry-defect minimizer."""

    n_dim: int
    max_iters: int = 20000
    stop_residual: float = 1e-3
    step_init: float = 1.0
    armijo: float = 1e-4
    max_halvings: int = 60
    seed: int = 0
    perturb: float = 0.01
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.n_dim < 1:
            raise SpecValidationError("target dimension must be positive")
        if self.stop_residual <= 0:
            raise SpecValidationError("stop residual must be positive")
        if self.max_iters < 1:
            raise SpecValidationError("need at least one iteration")

    def with_seed(self, seed: int) -> "OptimizerConfig":
        return replace(self, seed=int(seed))


def _stencil_frequency(kappa: float, h: float) -> float:
    """Grid-effective frequency of the 4th-order stencil on cos(kappa y).

    On a uniform periodic axis the stencil maps cos(kappa y) to
    -kappa_eff sin(kappa y) exactly, so pullbacks built from trig pairs
    close at machine precision when amplitudes use kappa_eff.
    """
    return (8.0 * math.sin(kappa * h) - math.sin(2.0 * kappa * h)) / (6.0 * h)


def _profiled_initial_points(grid: EmbedGrid, g_values: np.ndarray,
                             cfg: OptimizerConfig) -> np.ndarray | None:
    """Depth-profiled layout for grids of one free axis times one circle.

    The slot scales follow the row-averaged target instead of a single
    global mean.  When the circumference shrinks faster along the free
    axis than the transverse coefficient can pay for (no classical
    profile-of-revolution exists), the shrinkage is shifted into
    corrugation pairs at higher angular frequency, which trade amplitude
    for length at quadratically lower transverse cost.  Descent alone
    never finds that structure from a round start, so it has to be in
    the layout.  Returns None when the grid shape does not fit.
    """
    if grid.ndim != 2 or grid.periodic != (False, True) or cfg.n_dim < 5:
        return None
    n0, n1 = grid.shape
    r_ax = grid.axes[0]
    period = float(grid.periods[1])
    omega = 2.0 * math.pi / period
    h1 = grid.spacing(1)
    gv = g_values.reshape(n0, n1, 2, 2)
    a2 = np.maximum(gv[:, :, 0, 0].mean(axis=1), 1e-300)   # free-axis row mean
    p = np.maximum(gv[:, :, 1, 1].mean(axis=1), 1e-300)    # circle row mean

    d_r = _diff_1d(n0, grid.spacing(0), periodic=False)
    base_eff = _stencil_frequency(omega, h1)
    v = np.zeros((n0, n1, cfg.n_dim))
    theta = grid.axes[1][None, :]

    b = np.sqrt(p)
    bp = d_r @ b
    budget = 0.81 * a2
    if float(np.max(bp ** 2 / budget)) <= 1.0:
        # representable as a profile of revolution: winding pair with
        # row radius, leftover transverse speed into the monotone slot
        radius = (b / base_eff)[:, None]
        rp = d_r @ (b / base_eff)
        zp = np.sqrt(np.maximum(a2 - rp ** 2, (0.02 * math.sqrt(a2.max())) ** 2))
        coil_cols = []
    else:
        pairs = min(2, (cfg.n_dim - 3) // 2)
        floor2 = 0.64 * float(p.min())
        s = np.sqrt(np.maximum(p - floor2, 0.0))
        sp = d_r @ s
        k_hi = max(int(np.argmax([_stencil_frequency(k * omega, h1)
                                  for k in range(1, n1 // 2 + 1)])) + 1, 2)
        freqs = None
        for k in range(2, k_hi + 1):
            ks = [min(k + j, k_hi) for j in range(pairs)]
            effs = np.array([_stencil_frequency(kj * omega, h1) for kj in ks])
            cost = (sp ** 2) * np.mean(1.0 / effs ** 2)
            if float(np.max(cost / budget)) <= 1.0:
                freqs = ks
                break
        if freqs is None:
            freqs = [max(k_hi - j, 1) for j in range(pairs)][::-1]
        radius = np.full((n0, 1), math.sqrt(floor2) / base_eff)
        coil_cols = []
        cost = np.zeros(n0)
        for j, kj in enumerate(freqs):
            eff = _stencil_frequency(kj * omega, h1)
            amp = (s / (math.sqrt(len(freqs)) * eff))[:, None]
            coil_cols.append((amp, kj))
            cost += (d_r @ amp[:, 0]) ** 2
        zp = np.sqrt(np.maximum(a2 - cost, (0.02 * math.sqrt(a2.max())) ** 2))

    # pin z(0) = 0 and make the stencil derivative of z match zp in the
    # least-squares sense, so the free-axis pullback closes on the grid
    system = np.vstack([d_r.toarray(), np.eye(n0)[:1]])
    rhs = np.concatenate([zp, [0.0]])
    z = np.linalg.lstsq(system, rhs, rcond=None)[0]
    v[:, :, 0] = z[:, None]
    v[:, :, 1] = radius * np.cos(omega * theta)
    v[:, :, 2] = radius * np.sin(omega * theta)
    slot = 3
    for amp, kj in coil_cols:
        v[:, :, slot] = amp * np.cos(kj * omega * theta)
        v[:, :, slot + 1] = amp * np.sin(kj * omega * theta)
        slot += 2
    return v.reshape(n0 * n1, cfg.n_dim)


def _initial_points(grid: EmbedGrid, g_values: np.ndarray,
                    cfg: OptimizerConfig) -> np.ndarray:
    """Linear slots for free axes, circle pairs for periodic axes, noise.

    The circle pairs wrap each periodic coordinate exactly once so the image
    has the right topology from the start; slot scales are matched to the
    mean metric coefficient of their axis, with an r-profiled refinement on
    free-times-circle grids.
    """
    coords = grid.node_coords()
    n = grid.n_nodes
    slots_needed = sum(2 if p else 1 for p in grid.periodic)
    if cfg.n_dim < slots_needed:
        raise SpecValidationError(
            f"target dimension {cfg.n_dim} cannot hold the initial layout "
            f"({slots_needed} slots for {grid.ndim} axes)")
    v = _profiled_initial_points(grid, g_values, cfg)
    if v is None:
        v = np.zeros((n, cfg.n_dim))
        slot = 0
        for k in range(grid.ndim):
            scale = math.sqrt(float(np.mean(g_values[:, k, k])))
            if grid.periodic[k]:
                omega = 2.0 * math.pi / grid.periods[k]
                radius = scale / omega
                v[:, slot] = radius * np.cos(omega * coords[:, k])
                v[:, slot + 1] = radius * np.sin(omega * coords[:, k])
                slot += 2
            else:
                v[:, slot] = scale * coords[:, k]
                slot += 1
    rng = np.random.default_rng(cfg.seed)
    base = math.sqrt(float(np.mean(v ** 2))) or 1.0
    # noise passes through the difference stencils, which amplify by 1/h;
    # scaling by the finest spacing keeps the Jacobian perturbation at the
    # requested relative size while still populating every target column
    h_min = min(grid.spacing(k) for k in range(grid.ndim))
    v += cfg.perturb * base * h_min * rng.standard_normal((n, cfg.n_dim))
    return v


def optimize_embedding(grid: EmbedGrid, g, cfg: OptimizerConfig,
                       initial: np.ndarray | None = None) -> EuclideanEmbedding:
    """Minimize the weighted Frobenius isometry defect by damped descent.

    Each iteration takes a Gauss-Newton direction, obtained by conjugate
    gradients on the damped normal equations of the defect linearization,
    and a backtracking line search halves the step from ``step_init`` until
    the Armijo decrease condition holds.  The damping factor adapts to the
    line-search outcome.  Plain steepest descent is hopeless here: the
    difference stencils make the Hessian conditioning degrade like the
    inverse grid spacing squared.

    Both the direction and the accepted step lengths are invariant when all
    node weights are multiplied by one constant, so equally-weighted runs
    are unaffected by the weight normalization.

    Convergence means the largest per-node relative defect (the quantity
    later verified) fell to ``stop_residual``; the returned embedding
    carries the full iteration trace and a convergence flag instead of
    raising, so callers can report best-effort results.
    """
    g_values = _as_values(g)
    n = grid.n_nodes
    if g_values.shape != (n, grid.ndim, grid.ndim):
        raise GridError(f"metric array has shape {g_values.shape}, expected "
                        f"{(n, grid.ndim, grid.ndim)}")
    if float(min_eigenvalue_field(g_values).min()) <= 0.0:
        raise SpecValidationError(
            "target metric must be positive-definite at every node")
    w = np.ones(n) if cfg.weights is None else np.asarray(cfg.weights, float)
    if w.shape != (n,) or np.any(w <= 0):
        raise SpecValidationError("node weights must be positive, one per node")

    ops = build_diff_ops(grid)
    opsT = [op.T.tocsr() for op in ops]
    norm_g = np.maximum(
        np.linalg.norm(g_values.reshape(n, -1), axis=1), 1e-300)
    w4 = (4.0 * w)[:, None, None]

    def jacobian_of(v):
        return np.stack([op @ v for op in ops], axis=2)

    def objective(jac):
        e = pullback_metric(jac) - g_values
        dn = np.linalg.norm(e.reshape(n, -1), axis=1)
        f = float((w * dn ** 2).sum())
        return f, e, dn

    def adjoint(field, jac):
        # shared tail of the gradient and the Gauss-Newton matvec:
        # sum_k D_k^T [4 w field J]_k for a symmetric per-node field
        dfdj = w4 * np.einsum("nkl,nal->nak", field, jac, optimize=True)
        out = opsT[0] @ dfdj[:, :, 0]
        for k in range(1, grid.ndim):
            out += opsT[k] @ dfdj[:, :, k]
        return out

    def gauss_newton_matvec(x, jac):
        jx = jacobian_of(x)
        edot = np.einsum("nak,nal->nkl", jx, jac, optimize=True)
        edot += np.swapaxes(edot, -1, -2)
        return adjoint(edot, jac)

    def solve_direction(grad, jac, damping):
        # CG on (H_gn + mu I) d = -grad; PSD operator, so any partial
        # solve is a descent direction.  mu is tied to the Rayleigh
        # quotient of the operator along the gradient, which keeps the
        # whole system homogeneous in the weight scale.
        b = -grad
        hb = gauss_newton_matvec(b, jac)
        bb = float((b * b).sum())
        ray = float((b * hb).sum()) / bb
        mu = damping * max(ray, 0.0)
        if mu == 0.0:
            return b
        x = np.zeros_like(b)
        r = b.copy()
        p = r.copy()
        rr = bb
        tol2 = (0.05 ** 2) * bb
        for _ in range(200):
            hp = gauss_newton_matvec(p, jac) + mu * p
            alpha = rr / float((p * hp).sum())
            x += alpha * p
            r -= alpha * hp
            rr_new = float((r * r).sum())
            if rr_new <= tol2:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        return x

    if initial is None:
        v = _initial_points(grid, g_values, cfg)
    else:
        v = np.array(initial, dtype=float)
        if v.shape != (n, cfg.n_dim):
            raise GridError(f"initial points have shape {v.shape}, expected "
                            f"{(n, cfg.n_dim)}")
    jac = jacobian_of(v)
    f, e, dn = objective(jac)
    trace = []
    step_used = 0.0
    converged = False
    damping = 1e-3

    for it in range(cfg.max_iters + 1):
        res = float((dn / norm_g).max())
        trace.append((float(it), res, step_used))
        if res <= cfg.stop_residual:
            converged = True
            break
        if it == cfg.max_iters:
            break
        grad = adjoint(e, jac)
        if float((grad * grad).sum()) == 0.0:
            break
        d = solve_direction(grad, jac, damping)
        slope = float((grad * d).sum())
        if slope >= 0.0:
            d = -grad
            slope = -float((grad * grad).sum())
        step = cfg.step_init
        accepted = False
        for halving in range(cfg.max_halvings):
            v_try = v + step * d
            jac_try = jacobian_of(v_try)
            f_try, e_try, dn_try = objective(jac_try)
            if f_try <= f + cfg.armijo * step * slope:
                v, jac, f, e, dn = v_try, jac_try, f_try, e_try, dn_try
                step_used = step
                accepted = True
                damping = max(damping * (0.3 if halving == 0 else 2.0), 1e-12)
                break
            step *= 0.5
        if not accepted:
            damping *= 100.0
            if damping > 1e12:
                break  # stall: no decrease possible at double precision

    final = float((dn / norm_g).max())
    return EuclideanEmbedding(
        grid, v, jac, provenance="optimized",
        converged=converged, final_residual=final,
        trace=np.array(trace))


# --- diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingDiagnostics:
    max_defect: float            # max per-node relative Frobenius defect
    rms_defect: float
    min_singular_value: float    # over nodes, of the Jacobian
    injectivity_ratio: float     # min extrinsic/intrinsic over sampled pairs
    n_sampled: int

    @property
    def immersion(self) -> bool:
        return self.min_singular_value > 0.0

    @property
    def injective_flag(self) -> bool:
        return self.injectivity_ratio > 0.0


def _grid_graph(grid: EmbedGrid, g_values: np.ndarray) -> sp.csr_matrix:
    """Grid-edge graph weighted by metric lengths of the grid steps."""
    shape = grid.shape
    n = grid.n_nodes
    idx = np.arange(n).reshape(shape)
    rows, cols, vals = [], [], []
    for k in range(grid.ndim):
        h = grid.spacing(k)
        src = idx
        dst = np.roll(idx, -1, axis=k)
        if not grid.periodic[k]:
            sl = [slice(None)] * grid.ndim
            sl[k] = slice(0, shape[k] - 1)
            src = idx[tuple(sl)]
            dst = np.roll(idx, -1, axis=k)[tuple(sl)]
        s = src.reshape(-1)
        t = dst.reshape(-1)
        gkk = 0.5 * (g_values[s, k, k] + g_values[t, k, k])
        length = h * np.sqrt(np.maximum(gkk, 0.0))
        rows.extend(s)
        cols.extend(t)
        vals.extend(length)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return mat.maximum(mat.T)


def embedding_diagnostics(emb: EuclideanEmbedding, g, *,
                          sample_cap: int = 120) -> EmbeddingDiagnostics:
    """Isometry, immersion, and injectivity measurements for an embedding.

    Injectivity is probed on a deterministic subsample of node pairs: the
    reported ratio compares straight-line distance in the ambient space with
    the graph-geodesic distance induced by the target metric on grid edges.
    """
    g_values = _as_values(g)
    n = emb.grid.n_nodes
    d = defect_field(emb.jacobian, g_values)
    scale = np.linalg.norm(g_values.reshape(n, -1), axis=1)
    rel = d / np.maximum(scale, 1e-300)
    sv = np.linalg.svd(emb.jacobian, compute_uv=False)
    min_sv = float(sv[..., -1].min())

    stride = max(1, int(math.ceil(n / sample_cap)))
    ids = np.arange(0, n, stride)
    graph = _grid_graph(emb.grid, g_values)
    intr = dijkstra(graph, directed=False, indices=ids)
    pts = emb.points[ids]
    diffs = pts[:, None, :] - pts[None, :, :]
    ext = np.linalg.norm(diffs, axis=2)
    intr_pairs = intr[:, ids]
    iu = np.triu_indices(len(ids), k=1)
    denom = intr_pairs[iu]
    good = denom > 1e-12
    ratio = float((ext[iu][good] / denom[good]).min()) if good.any() else 1.0

    return EmbeddingDiagnostics(
        max_defect=float(rel.max()),
        rms_defect=float(math.sqrt(np.mean(rel ** 2))),
        min_singular_value=min_sv,
        injectivity_ratio=ratio,
        n_sampled=int(len(ids)),
    )
