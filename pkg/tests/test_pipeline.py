"""The end-to-end driver: staging, statuses, exit codes, artifacts."""

import numpy as np
import pytest

from ccembed.config import PipelineConfig
from ccembed.embed import OptimizerConfig
from ccembed.pipeline import STAGES, run_pipeline

CHECK_ORDER = [
    "boundary_coefficient_bound",
    "collar_coefficient_bound",
    "cutoff_identity",
    "assembly_consistency",
    "positive_definite",
    "embedding_residual",
    "isometry_residual",
    "boundary_structure",
    "transversality",
    "immersion",
    "injectivity",
    "induced_curvature_lower_bound",
    "induced_curvature_match",
]


def make_cfg(spec, **kw):
    kw.setdefault("n_r", 24)
    kw.setdefault("boundary_counts", (48,))
    kw.setdefault("embed", OptimizerConfig(n_dim=10))
    return PipelineConfig(spec=spec, **kw)


@pytest.fixture(scope="module")
def full_run(scaled4):
    return run_pipeline(make_cfg(scaled4))


@pytest.fixture(scope="module")
def artifact_run(scaled4, tmp_path_factory):
    out = tmp_path_factory.mktemp("arts")
    res = run_pipeline(make_cfg(scaled4, out=str(out), dump_fields=True))
    return out, res


def test_full_chain_passes(full_run):
    res = full_run
    assert res.status == "pass"
    assert res.exit_code == 0
    assert res.passed
    assert res.comparison.max_residual <= 1e-3
    assert res.curvature.match_max_error <= 2e-3
    assert res.curvature.lower_bound_margin >= -1e-6
    assert [c.name for c in res.report.checks] == CHECK_ORDER
    assert all(c.passed for c in res.report.checks)
    assert "[result] PASS" in res.report.render()


def test_full_chain_populates_every_product(full_run):
    res = full_run
    for name in ("kappa", "boundary", "grid", "normal_form", "profile",
                 "g_field", "embedding", "p_map", "comparison", "curvature"):
        assert getattr(res, name) is not None, name
    assert res.embedding.converged
    # the working curvature of the quadruple disk is the constant -1/4
    assert np.max(np.abs(res.kappa.values + 0.25)) <= 1e-9


def test_stage_kappa_stops_early(scaled4):
    res = run_pipeline(make_cfg(scaled4), through="kappa")
    assert res.status == "pass"
    assert res.kappa is not None and res.boundary is not None
    assert res.grid is None and res.profile is None
    assert res.embedding is None
    assert [c.name for c in res.report.checks] == CHECK_ORDER[:1]


def test_stage_bdf_stops_after_the_tensor(scaled4):
    res = run_pipeline(make_cfg(scaled4), through="bdf")
    assert res.status == "pass"
    assert res.normal_form is not None
    assert res.profile is not None and res.g_field is not None
    assert res.embedding is None and res.p_map is None
    assert res.g_field.min_eig_overall > 0.0
    assert [c.name for c in res.report.checks] == CHECK_ORDER[:5]


def test_stage_embed_stops_before_composition(scaled4):
    res = run_pipeline(make_cfg(scaled4), through="embed")
    assert res.status == "pass"
    assert res.embedding is not None and res.embedding.converged
    assert res.p_map is None and res.comparison is None
    assert [c.name for c in res.report.checks] == CHECK_ORDER[:6]


def test_unknown_stage_is_a_programming_error(scaled4):
    with pytest.raises(ValueError, match="unknown stage"):
        run_pipeline(make_cfg(scaled4), through="polish")
    assert STAGES == ("kappa", "bdf", "embed", "verify")


def test_hypothesis_violation_is_a_status(hyperbolic, tmp_path):
    res = run_pipeline(make_cfg(hyperbolic, out=str(tmp_path)))
    assert res.status == "hypothesis-violation"
    assert res.exit_code == 2
    assert not res.passed
    assert res.kappa is not None
    assert res.grid is None  # aborted before the collar
    gate = res.report.checks[0]
    assert gate.name == "boundary_coefficient_bound" and not gate.passed
    assert gate.value == pytest.approx(1.0)
    # artifacts up to the abort still land on disk
    assert (tmp_path / "report.txt").exists()
    assert (tmp_path / "kappa.csv").exists()
    assert (tmp_path / "kappa_boundary.png").exists()
    assert "[result] FAIL" in (tmp_path / "report.txt").read_text()


def test_rescaling_clears_the_gate(hyperbolic):
    res = run_pipeline(make_cfg(hyperbolic, lam=2.0), through="kappa")
    assert res.status == "pass"
    # working-metric curvature is the input's divided by lambda^2
    assert res.kappa.max == pytest.approx(-0.25, abs=1e-9)


def test_starved_optimizer_reports_not_converged(scaled4):
    cfg = make_cfg(scaled4, n_r=16, boundary_counts=(16,),
                   embed=OptimizerConfig(n_dim=10, max_iters=40))
    res = run_pipeline(cfg)
    assert res.status == "not-converged"
    assert res.exit_code == 3
    assert res.embedding is not None and not res.embedding.converged
    assert res.p_map is None
    stage = [s for s in res.report.stages if s.name == "embedding"][0]
    assert stage.status == "failed"


def test_artifact_files(artifact_run):
    out, res = artifact_run
    assert res.status == "pass"
    for name in ("report.txt", "kappa.csv", "kappa_boundary.png",
                 "bdf_profile.csv", "bdf_profile.png",
                 "g_min_eigenvalue.png", "optimizer_trace.csv",
                 "optimizer_trace.png", "embedding.csv", "p_embedding.csv",
                 "isometry_residual.png"):
        assert (out / name).exists(), name
        assert (out / name).stat().st_size > 0, name
    text = (out / "report.txt").read_text()
    assert "[result] PASS" in text
    assert "[stage collar] ok" in text


def test_artifact_tables_reload(artifact_run):
    out, res = artifact_run
    prof = np.loadtxt(out / "bdf_profile.csv", delimiter=",", skiprows=1)
    assert prof.shape == (200, 4)
    assert np.all(np.diff(prof[:, 0]) > 0)
    kappa = np.loadtxt(out / "kappa.csv", delimiter=",", skiprows=1)
    assert kappa.shape == (48, 2)
    assert np.allclose(kappa[:, 1], -0.25, atol=1e-9)
    emb = np.loadtxt(out / "embedding.csv", delimiter=",", skiprows=1)
    assert emb.shape == (24 * 48, 2 + 10)
    pmap = np.loadtxt(out / "p_embedding.csv", delimiter=",", skiprows=1)
    assert pmap.shape == (24 * 48, 2 + 11)
    # vertical component vanishes exactly on the depth-0 rows
    assert np.all(pmap[pmap[:, 0] == 0.0, 2] == 0.0)
    trace = np.loadtxt(out / "optimizer_trace.csv", delimiter=",",
                       skiprows=1)
    assert trace.shape[1] == 3
    assert trace[-1, 1] <= 1e-3


def test_dump_fields_extras(artifact_run):
    out, _ = artifact_run
    for name in ("fields/adjusted_metric.csv", "fields/isometry_defect.csv",
                 "fields/collar_chart.csv", "fields/normal_form/index.csv",
                 "fields/normal_form/slice_000.csv"):
        assert (out / name).exists(), name
    adj = np.loadtxt(out / "fields/adjusted_metric.csv", delimiter=",",
                     skiprows=1)
    assert adj.shape == (24 * 48, 2 + 3)  # coords plus the g triangle
    idx = np.loadtxt(out / "fields/normal_form/index.csv", delimiter=",",
                     skiprows=1)
    assert idx.shape == (24, 2)
