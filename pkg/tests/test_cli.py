"""The ccembed command: exit codes, stdout, artifact flags."""

import numpy as np
import pytest

from ccembed.cli import build_parser, main


def ini(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


HYPERBOLIC = ("[metric]\nbuiltin = hyperbolic-disk\n\n"
              "[bdf]\nn_r = 24\nn_boundary = 48\n\n"
              "[embed]\nn = 10\n\n")


def test_passing_run(pass_ini, capsys, tmp_path):
    code = main(["pipeline", "run", str(pass_ini),
                 "--out", str(tmp_path / "arts")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[result] PASS" in out
    assert "[stage verification]" in out
    assert (tmp_path / "arts" / "report.txt").exists()
    assert (tmp_path / "arts" / "p_embedding.csv").exists()


def test_gate_violation_exit_code(tmp_path, capsys):
    code = main(["pipeline", "run",
                 ini(tmp_path, HYPERBOLIC + "[pipeline]\nlambda = 1.0\n")])
    assert code == 2
    assert "[result] FAIL" in capsys.readouterr().out


def test_rescaled_run_passes_end_to_end(tmp_path, capsys):
    code = main(["pipeline", "run",
                 ini(tmp_path, HYPERBOLIC + "[pipeline]\nlambda = 2.0\n")])
    assert code == 0
    assert "[result] PASS" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    code = main(["pipeline", "run",
                 ini(tmp_path, "[manifold]\nkind = sphere\n[metric]\n"
                               "g11 = 1\n")])
    assert code == 4
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(["pipeline", "run", str(tmp_path / "absent.ini")]) == 4


def test_not_converged_exit_code(tmp_path, capsys):
    cfg = ini(tmp_path, "[metric]\nbuiltin = scaled-disk(4)\n\n"
                        "[bdf]\nn_r = 16\nn_boundary = 16\n\n"
                        "[embed]\nn = 10\nmax_iters = 40\n")
    assert main(["pipeline", "run", cfg]) == 3
    assert "[result]" in capsys.readouterr().out


def test_tightened_tolerance_fails_checks(pass_ini, capsys):
    code = main(["pipeline", "run", str(pass_ini),
                 "--tol", "isometry=1e-12"])
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL isometry_residual" in out


def test_malformed_tolerance_is_a_config_error(pass_ini, capsys):
    assert main(["pipeline", "run", str(pass_ini), "--tol", "isometry"]) == 4
    assert main(["pipeline", "run", str(pass_ini),
                 "--tol", "wobble=1e-3"]) == 4


def test_stage_subcommands(pass_ini, capsys, tmp_path):
    assert main(["kappa", str(pass_ini)]) == 0
    out = capsys.readouterr().out
    assert "[stage curvature-at-infinity]" in out
    assert "[stage collar]" not in out

    assert main(["bdf", str(pass_ini), "--out", str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out
    assert "[stage adjusted-tensor]" in out
    assert "[stage embedding]" not in out
    assert (tmp_path / "b" / "bdf_profile.csv").exists()

    assert main(["embed", str(pass_ini), "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "[stage embedding]" in out
    assert "[stage composition]" not in out


def test_dump_fields_flag(pass_ini, tmp_path, capsys):
    code = main(["bdf", str(pass_ini), "--out", str(tmp_path / "d"),
                 "--dump-fields"])
    assert code == 0
    assert (tmp_path / "d" / "fields" / "adjusted_metric.csv").exists()


def test_suite_subcommand(tmp_path, capsys):
    code = main(["pipeline", "suite", "limits", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "[suite" in out
    assert "[result] PASS" in out
    saved = tmp_path / "suite_limits.txt"
    assert saved.exists()
    assert saved.read_text() == out


def test_parser_structure():
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args([])  # a command is required
    args = parser.parse_args(["pipeline", "run", "x.ini", "--tol", "a=1",
                              "--tol", "b=2"])
    assert args.tol == ["a=1", "b=2"]
