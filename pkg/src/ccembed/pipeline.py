"""End-to-end pipeline: rescale, gate, collar, profile, embed, compose, verify.

``run_pipeline`` executes the full chain and returns a PipelineResult whose
status maps onto the process exit codes.  The ``through`` argument stops the
chain after a named stage so the thinner CLI subcommands can reuse the same
driver.  All artifacts (structured text report, CSV dumps, figures) are
written when the config carries an output directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report as rpt
from .bdf import (BdfProfile, GField, NormalFormData, assemble_G, assemble_bdf,
                  choose_epsilon, flow_collar, make_cutoff)
from .config import PipelineConfig, default_eps_request
from .curvature import KappaInfinityField, kappa_infinity
from .embed import (EuclideanEmbedding, embed_grid_from_collar,
                    embedding_diagnostics, optimize_embedding)
from .errors import (EXIT_FAIL, EXIT_HYPOTHESIS_VIOLATION,
                     EXIT_NOT_CONVERGED, EXIT_PASS, FlowError,
                     HypothesisViolation)
from .halfspace import (InducedCurvatureRecord, PEmbedding,
                        PullbackComparison, compose,
                        induced_curvature_inequality, pullback_halfspace,
                        verify_p_embedding)
from .manifold import (BoundaryGrid, CollarGrid, ManifoldKind, ModelManifold,
                       make_boundary_grid, make_collar_grid)
from .metric import scale_metric

__all__ = ["PipelineResult", "run_pipeline", "STAGES"]

STAGES = ("kappa", "bdf", "embed", "verify")

_STATUS_EXIT = {
    "pass": EXIT_PASS,
    "fail": EXIT_FAIL,
    "hypothesis-violation": EXIT_HYPOTHESIS_VIOLATION,
    "not-converged": EXIT_NOT_CONVERGED,
}


@dataclass
class PipelineResult:
    """Everything a run produced, plus the overall verdict."""

    status: str
    report: rpt.RunReport
    kappa: KappaInfinityField | None = None
    boundary: BoundaryGrid | None = None
    grid: CollarGrid | None = None
    normal_form: NormalFormData | None = None
    profile: BdfProfile | None = None
    g_field: GField | None = None
    embedding: EuclideanEmbedding | None = None
    p_map: PEmbedding | None = None
    comparison: PullbackComparison | None = None
    curvature: InducedCurvatureRecord | None = None

    @property
    def exit_code(self) -> int:
        return _STATUS_EXIT[self.status]

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _cap_eps(manifold: ModelManifold, eps: float) -> float:
    """Keep the requested depth inside the range the reference bdf reaches."""
    if manifold.kind == ManifoldKind.DISK:
        return min(eps, 0.9)
    if len(manifold.ends) == 1:
        return min(eps, 0.95 * manifold.r_max)
    return min(eps, 0.2 * manifold.r_max)


def _param_names(m: int) -> list[str]:
    return [f"y{i + 1}" for i in range(m - 1)]


def _boundary_param_coords(bgrid: BoundaryGrid) -> np.ndarray:
    mesh = np.meshgrid(*bgrid.params, indexing="ij")
    return np.column_stack([a.reshape(-1) for a in mesh])


def _tri_names(prefix: str, m: int) -> list[str]:
    return [f"{prefix}{i + 1}{j + 1}" for i in range(m) for j in range(i, m)]


def _tri_entries(mat: np.ndarray) -> np.ndarray:
    m = mat.shape[-1]
    cols = [mat[..., i, j].reshape(-1) for i in range(m)
            for j in range(i, m)]
    return np.column_stack(cols)


class _Artifacts:
    """Collects artifact writers; inert when no output directory is set."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out) if cfg.out else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def kappa(self, bgrid: BoundaryGrid, field: KappaInfinityField) -> None:
        if self.dir is None:
            return
        params = _boundary_param_coords(bgrid)
        header = ",".join(_param_names(bgrid.manifold.dim) + ["kappa"])
        rpt.write_csv(self._path("kappa.csv"), header,
                      np.column_stack([params, field.values]))
        rpt.plot_kappa(bgrid.params, field.values,
                       self._path("kappa_boundary.png"))

    def profile(self, profile: BdfProfile) -> None:
        if self.dir is None:
            return
        rows = profile.sample(200)
        rpt.write_csv(self._path("bdf_profile.csv"),
                      "r,phi,x,one_plus_rphi", rows)
        rpt.plot_profile(rows, self._path("bdf_profile.png"))

    def g_field(self, grid: CollarGrid, gfield: GField) -> None:
        if self.dir is None:
            return
        rpt.plot_min_eigenvalue(grid.r_nodes, gfield.min_eig,
                                self._path("g_min_eigenvalue.png"))
        if not self.cfg.dump_fields:
            return
        m = grid.manifold.dim
        coords = _collar_param_coords(grid)
        header = ",".join(["r"] + _param_names(m) + _tri_names("g", m))
        rpt.write_csv(self._path("fields/adjusted_metric.csv"), header,
                      np.column_stack([coords,
                                       _tri_entries(gfield.values)]))

    def normal_form(self, nf: NormalFormData) -> None:
        if self.dir is None or not self.cfg.dump_fields:
            return
        grid = nf.grid
        m = grid.manifold.dim
        sub = self._path("fields/normal_form")
        sub.mkdir(parents=True, exist_ok=True)
        params = _boundary_param_coords(grid.boundary)
        header = ",".join(_param_names(m) + ["k2"]
                          + _tri_names("h", m - 1) + ["drift"])
        for k, r in enumerate(grid.r_nodes):
            rows = np.column_stack([
                params,
                nf.k2[k].reshape(-1, 1),
                _tri_entries(nf.h[k]),
                nf.drift[k].reshape(-1, 1),
            ])
            rpt.write_csv(sub / f"slice_{k:03d}.csv", header, rows)
        rpt.write_csv(sub / "index.csv", "slice,r",
                      [(float(k), float(r))
                       for k, r in enumerate(grid.r_nodes)])
        chart_header = ",".join(
            ["r"] + _param_names(m)
            + [f"z{i + 1}" for i in range(m)])
        rpt.write_csv(self._path("fields/collar_chart.csv"), chart_header,
                      np.column_stack([
                          _collar_param_coords(grid),
                          nf.chart_points.reshape(-1, m)]))

    def trace(self, emb: EuclideanEmbedding) -> None:
        if self.dir is None or emb.trace is None:
            return
        rpt.write_csv(self._path("optimizer_trace.csv"),
                      "iter,residual,step", emb.trace)
        rpt.plot_trace(emb.trace, self._path("optimizer_trace.png"))

    def embedding(self, grid: CollarGrid, emb: EuclideanEmbedding) -> None:
        if self.dir is None:
            return
        m = grid.manifold.dim
        coords = _collar_param_coords(grid)
        names = ["r"] + _param_names(m) \
            + [f"v{i + 1}" for i in range(emb.n_dim)]
        rpt.write_csv(self._path("embedding.csv"), ",".join(names),
                      np.column_stack([coords, emb.points]))

    def p_map(self, grid: CollarGrid, u: PEmbedding) -> None:
        if self.dir is None:
            return
        m = grid.manifold.dim
        coords = _collar_param_coords(grid)
        names = ["r"] + _param_names(m) + ["X"] \
            + [f"Y{i + 1}" for i in range(u.n_ambient - 1)]
        rpt.write_csv(self._path("p_embedding.csv"), ",".join(names),
                      np.column_stack([coords, u.points]))

    def residual(self, grid: CollarGrid, cmp: PullbackComparison) -> None:
        if self.dir is None:
            return
        rpt.plot_residual(grid.r_nodes, cmp.residual,
                          self._path("isometry_residual.png"))
        if not self.cfg.dump_fields:
            return
        m = grid.manifold.dim
        header = ",".join(["r"] + _param_names(m) + ["defect"])
        rpt.write_csv(self._path("fields/isometry_defect.csv"), header,
                      np.column_stack([_collar_param_coords(grid),
                                       cmp.residual]))

    def finish(self, report: rpt.RunReport) -> None:
        if self.dir is None:
            return
        report.write(self._path("report.txt"))


def _collar_param_coords(grid: CollarGrid) -> np.ndarray:
    params = _boundary_param_coords(grid.boundary)
    n_r, n_b = grid.n_r, grid.n_b
    r_col = np.repeat(grid.r_nodes, n_b).reshape(-1, 1)
    tiled = np.tile(params, (n_r, 1))
    return np.column_stack([r_col, tiled])


def run_pipeline(cfg: PipelineConfig, through: str = "verify"
                 ) -> PipelineResult:
    """Run the verification pipeline, optionally stopping after a stage.

    ``through`` is one of "kappa" (curvature gate only), "bdf" (through the
    adjusted tensor), "embed" (through the optimizer), or "verify" (full
    chain).  Artifacts accumulated so far are written in every case,
    including early aborts on a failed hypothesis gate.
    """
    if through not in STAGES:
        raise ValueError(f"unknown stage {through!r}; expected one of "
                         f"{STAGES}")
    spec = cfg.spec
    manifold = spec.manifold
    lam = cfg.lam
    report = rpt.RunReport(title="conformal embedding pipeline")
    arts = _Artifacts(cfg)
    result = PipelineResult(status="fail", report=report)

    st = report.stage("rescale")
    st.add("manifold", manifold.kind.value)
    st.add("dimension", manifold.dim)
    st.add("curvature scale", lam)
    ghat = scale_metric(spec, lam * lam) if lam != 1.0 else spec

    # curvature at infinity and the boundary-coefficient gate
    st = report.stage("curvature-at-infinity")
    bgrid = make_boundary_grid(manifold, cfg.boundary_counts)
    khat = kappa_infinity(ghat, bgrid.nodes)
    result.kappa = khat
    result.boundary = bgrid
    kappa_in = khat.values * lam * lam  # field of the unscaled input metric
    st.add("boundary nodes", bgrid.n_nodes)
    st.add("kappa range (input metric)",
           (float(kappa_in.min()), float(kappa_in.max())))
    st.add("kappa range (working metric)", (khat.min, khat.max))
    hyp_tol = cfg.tol("hypothesis")
    k20 = -khat.values
    worst = int(np.argmax(k20))
    gate_ok = bool(k20[worst] < 1.0 - hyp_tol)
    report.check("boundary_coefficient_bound", gate_ok,
                 value=float(k20[worst]), tolerance=1.0 - hyp_tol,
                 detail="squared transverse coefficient at the worst "
                        "boundary node")
    arts.kappa(bgrid, khat)
    if not gate_ok:
        st.status = "violation"
        node = tuple(round(float(c), 9) for c in bgrid.nodes[worst])
        st.add("violating node", node)
        result.status = "hypothesis-violation"
        arts.finish(report)
        return result
    if through == "kappa":
        result.status = "pass" if report.passed else "fail"
        arts.finish(report)
        return result

    # collar: probe shallow, choose the depth, flow at full resolution
    st = report.stage("collar")
    eps_req = cfg.eps_request if cfg.eps_request is not None \
        else default_eps_request(manifold)
    eps_req = _cap_eps(manifold, eps_req)
    st.add("depth requested", eps_req)
    drift_tol = cfg.tol("drift")
    orth_tol = cfg.tol("orthogonality")

    eps_try = eps_req
    nf_probe = None
    for _ in range(9):
        try:
            probe = make_collar_grid(manifold, eps_try, 17,
                                     cfg.boundary_counts)
            nf_probe = flow_collar(ghat, probe, drift_tol=drift_tol,
                                   orth_tol=orth_tol)
            break
        except FlowError:
            eps_try *= 0.5
    if nf_probe is None:
        raise FlowError(f"no collar depth down to {eps_try:.3e} could be "
                        f"flowed; the reference bdf degenerates too close "
                        f"to the boundary")
    try:
        eps_final = choose_epsilon(nf_probe, cfg.margin,
                                   hypothesis_tol=hyp_tol)
    except HypothesisViolation as exc:
        st.status = "violation"
        st.add("violating node", exc.node)
        report.check("collar_coefficient_bound", False,
                     value=exc.k2, tolerance=1.0 - hyp_tol)
        result.status = "hypothesis-violation"
        arts.finish(report)
        return result

    nf = grid = None
    for _ in range(4):
        grid = make_collar_grid(manifold, eps_final, cfg.n_r,
                                cfg.boundary_counts)
        nf = flow_collar(ghat, grid, drift_tol=drift_tol, orth_tol=orth_tol)
        tau = max(1.0 - cfg.margin, 0.5 * (1.0 + float(nf.k2[0].max())))
        if float(nf.k2.max()) <= tau + 1e-12:
            break
        eps_final *= 0.5
        nf = None
    if nf is None:
        raise FlowError("coefficient bound kept failing on the refined "
                        "grid while shrinking the collar depth")
    result.grid = grid
    result.normal_form = nf
    st.add("depth chosen", eps_final)
    st.add("depth nodes", grid.n_r)
    st.add("max squared transverse coefficient", float(nf.k2.max()))
    st.add("max depth drift", nf.max_drift)
    st.add("max normalized cross term", nf.max_cross)
    report.check("collar_coefficient_bound", float(nf.k2.max()) <= tau,
                 value=float(nf.k2.max()), tolerance=tau)
    arts.normal_form(nf)

    # depth profile: cutoff, phi, plateaued reparametrization
    st = report.stage("depth-profile")
    cutoff = make_cutoff(cfg.cutoff, eps_final)
    profile = assemble_bdf(cutoff, tol=cfg.tol("quadrature"))
    result.profile = profile
    st.add("cutoff", cfg.cutoff)
    st.add("plateau value", profile.x_plateau
           if profile.x_plateau is not None else float("nan"))
    rows = profile.sample(200)
    rs = rows[:, 0]
    ident = np.abs(1.0 + rs * profile.phi_prime(rs)
                   - (1.0 - cutoff.value(rs)))
    report.check("cutoff_identity", float(ident.max()) <=
                 cfg.tol("phi_identity"), value=float(ident.max()),
                 tolerance=cfg.tol("phi_identity"))
    arts.profile(profile)

    # the adjusted tensor, assembled two ways
    st = report.stage("adjusted-tensor")
    gfield = assemble_G(nf, profile, check=False)
    result.g_field = gfield
    st.add("min eigenvalue", gfield.min_eig_overall)
    st.add("boundary min eigenvalue", float(gfield.boundary_min_eig().min()))
    st.add("trace scale", gfield.trace_scale)
    report.check("assembly_consistency",
                 gfield.max_consistency <= cfg.tol("consistency"),
                 value=gfield.max_consistency,
                 tolerance=cfg.tol("consistency"))
    report.check("positive_definite", gfield.min_eig_overall > 0.0,
                 value=gfield.min_eig_overall, tolerance=0.0,
                 detail="smallest eigenvalue over all collar nodes")
    arts.g_field(grid, gfield)
    if through == "bdf":
        result.status = "pass" if report.passed else "fail"
        arts.finish(report)
        return result

    # flat embedding of the adjusted tensor
    st = report.stage("embedding")
    egrid = embed_grid_from_collar(grid)
    ecfg = cfg.embed_config()
    n = egrid.n_nodes
    emb = optimize_embedding(egrid, gfield.values.reshape(n, spec.dim,
                                                          spec.dim), ecfg)
    result.embedding = emb
    st.add("target dimension", ecfg.n_dim)
    st.add("iterations", int(emb.trace[-1, 0]))
    st.add("final residual", emb.final_residual)
    st.add("converged", emb.converged)
    report.check("embedding_residual",
                 emb.converged and
                 emb.final_residual <= ecfg.stop_residual,
                 value=emb.final_residual, tolerance=ecfg.stop_residual,
                 detail="max per-node relative defect")
    arts.trace(emb)
    arts.embedding(grid, emb)
    if not emb.converged:
        st.status = "failed"
        result.status = "not-converged"
        arts.finish(report)
        return result
    diag = embedding_diagnostics(emb, gfield.values.reshape(
        n, spec.dim, spec.dim))
    st.add("min singular value", diag.min_singular_value)
    st.add("injectivity ratio", diag.injectivity_ratio)
    if through == "embed":
        result.status = "pass" if report.passed else "fail"
        arts.finish(report)
        return result

    # composition into the curved model and final verification
    st = report.stage("composition")
    u = compose(profile, emb, lam)
    result.p_map = u
    target = gfield.values.reshape(n, spec.dim, spec.dim).copy()
    target[:, 0, 0] += np.repeat(profile.dx_dr(grid.r_nodes),
                                 grid.n_b) ** 2
    comparison = pullback_halfspace(u, target)
    result.comparison = comparison
    st.add("max isometry residual", comparison.max_residual)
    st.add("rms isometry residual", comparison.rms_residual)
    report.check("isometry_residual",
                 comparison.max_residual <= cfg.tol("isometry"),
                 value=comparison.max_residual,
                 tolerance=cfg.tol("isometry"),
                 detail="compactified pullback vs target")
    arts.p_map(grid, u)
    arts.residual(grid, comparison)

    st = report.stage("verification")
    rec = verify_p_embedding(u, target)
    report.check("boundary_structure",
                 rec.bdf_boundary_exact and rec.bdf_interior_positive,
                 detail="vertical component vanishes exactly on the "
                        "boundary slice and only there")
    report.check("transversality",
                 rec.transversality_min > cfg.tol("transversality"),
                 value=rec.transversality_min,
                 tolerance=cfg.tol("transversality"))
    report.check("immersion",
                 rec.immersion_min_sv > cfg.tol("immersion"),
                 value=rec.immersion_min_sv, tolerance=cfg.tol("immersion"))
    if rec.injectivity_ratio is not None:
        report.check("injectivity",
                     rec.injectivity_ratio > cfg.tol("injectivity"),
                     value=rec.injectivity_ratio,
                     tolerance=cfg.tol("injectivity"))

    ind = induced_curvature_inequality(u, kappa_reference=kappa_in)
    result.curvature = ind
    st.add("induced curvature range",
           (float(ind.kappa.min()), float(ind.kappa.max())))
    st.add("curvature lower bound", -lam * lam)
    report.check("induced_curvature_lower_bound",
                 ind.lower_bound_ok(cfg.tol("kappa_slack")),
                 value=ind.lower_bound_margin,
                 tolerance=cfg.tol("kappa_slack"),
                 detail="margin above the model curvature bound")
    report.check("induced_curvature_match",
                 ind.match_ok(cfg.tol("kappa_match")),
                 value=ind.match_max_error,
                 tolerance=cfg.tol("kappa_match"),
                 detail="against the input curvature at infinity")

    result.status = "pass" if report.passed else "fail"
    arts.finish(report)
    return result
