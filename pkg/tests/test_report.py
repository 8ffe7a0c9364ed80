"""Text reports, delimited dumps, figures."""

import numpy as np
import pytest

from ccembed.report import (CheckResult, RunReport, plot_kappa,
                            plot_min_eigenvalue, plot_profile, plot_residual,
                            plot_trace, write_csv)


def test_check_line_formatting():
    good = CheckResult("drift", True, value=1.5e-9, tolerance=1e-8,
                       detail="max over nodes")
    line = good.line()
    assert line.startswith("  ok   drift")  # pass mark is padded to FAIL's width
    assert "value=1.5e-09" in line
    assert "tol=1e-08" in line
    assert "(max over nodes)" in line
    bad = CheckResult("isometry", False)
    assert bad.line().startswith("  FAIL isometry")
    assert "value=" not in bad.line()


def test_report_render_markers():
    rpt = RunReport("demo run")
    st = rpt.stage("collar")
    st.add("depth", 0.25)
    st.add("converged", True)
    rpt.check("drift", True, value=0.0, tolerance=1e-8)
    text = rpt.render()
    assert text.startswith("# demo run")
    assert "[stage collar] ok" in text
    assert "  depth: 0.25" in text
    assert "  converged: yes" in text
    assert "[checks]" in text
    assert "[result] PASS" in text
    assert rpt.passed


def test_report_fail_marker():
    rpt = RunReport("demo")
    rpt.check("a", True)
    rpt.check("b", False, detail="broke")
    assert not rpt.passed
    text = rpt.render()
    assert "[result] FAIL" in text
    assert "  FAIL b (broke)" in text


def test_report_write_and_stage_status(tmp_path):
    rpt = RunReport("demo")
    st = rpt.stage("embedding")
    st.status = "failed"
    p = tmp_path / "report.txt"
    rpt.write(p)
    assert "[stage embedding] failed" in p.read_text()


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "dump.csv"
    rows = [(0.1, 1.0 / 3.0), (0.2, np.pi)]
    write_csv(p, "r,value", rows)
    text = p.read_text()
    assert text.splitlines()[0] == "r,value"
    back = np.loadtxt(p, delimiter=",", skiprows=1)
    assert np.array_equal(back, np.asarray(rows))  # full precision survives


def test_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError, match="width"):
        write_csv(tmp_path / "bad.csv", "a,b", [(1.0, 2.0, 3.0)])


def test_figures_are_written(tmp_path):
    r = np.linspace(0, 0.5, 20)
    sample = np.column_stack([r, -2 * r, r * np.exp(-r), 1 - r])
    plot_profile(sample, tmp_path / "profile.png")
    plot_kappa([np.linspace(0, 6.28, 16)], np.full(16, -0.25),
               tmp_path / "kappa1.png")
    plot_kappa([np.linspace(0, 6.28, 8), np.linspace(0, 6.28, 6)],
               np.zeros((8, 6)) - 0.25, tmp_path / "kappa2.png")
    plot_min_eigenvalue(r, np.ones((20, 12)), tmp_path / "mineig.png")
    plot_trace(np.array([[0, 1.0, 1.0], [1, 1e-3, 0.5]]),
               tmp_path / "trace.png")
    plot_residual(r, np.full((20, 12), 1e-4), tmp_path / "resid.png")
    for name in ("profile.png", "kappa1.png", "kappa2.png", "mineig.png",
                 "trace.png", "resid.png"):
        assert (tmp_path / name).stat().st_size > 1000
