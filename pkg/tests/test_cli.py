import os

import pytest

from helix_ilos.artifacts import parse_metrics, read_trace
from helix_ilos import cli
from helix_ilos.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, EXIT_RUN_FAILED, main
from helix_ilos.errors import NumericalFailureError


def _report(text: str):
    return parse_metrics(text)


def test_certify_study_scenario(capsys, scenario_path):
    assert main(["certify", "--config", scenario_path("study_ilos.ini")]) == EXIT_OK
    report = _report(capsys.readouterr().out)
    assert report["simplified_lhs"] == "0.900"
    assert report["simplified_ok"] == "true"
    assert report["ges_ok"] == "false"
    assert report["certificate"] == "lyapunov(Gamma=I)"


def test_certify_user_matrix(capsys, write_config):
    text = open(write_config(), encoding="utf-8").read()
    text = text.replace("alpha_d = 600.0", "alpha_d = 1.0").replace("sigma0 = 0.01", "sigma0 = 0.0")
    text = text.replace("k_d = 0.15", "k_d = 1.0").replace("delta_los = 0.00075", "delta_los = 10.0")
    cfg = write_config("identity.ini", text)
    assert main(["certify", "--config", cfg, "--p11", "1", "--p22", "1"]) == EXIT_OK
    report = _report(capsys.readouterr().out)
    assert report["certificate"] == "user"
    assert report["ges_ok"] == "true"
    assert main(["certify", "--config", cfg, "--p11", "1", "--p22", "-1"]) == EXIT_OK
    assert "unavailable" in _report(capsys.readouterr().out)["certificate"]
    assert main(["certify", "--config", cfg, "--p11", "1"]) == EXIT_CONFIG


def test_simulate_writes_artifacts(capsys, tmp_path, write_config):
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", write_config(), "--out", out, "--tail-window", "0.1"]) == EXIT_OK
    assert sorted(os.listdir(out)) == ["manifest.txt", "metrics.txt", "trace.csv"]
    assert len(read_trace(os.path.join(out, "trace.csv"))) == 501
    report = _report(capsys.readouterr().out)
    assert report["tail_window_s"] == "0.1"

    # 매니페스트를 그대로 다시 실행할 수 있다
    again = str(tmp_path / "again")
    assert main(["simulate", "--config", os.path.join(out, "manifest.txt"), "--out", again]) == EXIT_OK
    with open(os.path.join(out, "trace.csv"), encoding="utf-8") as a, open(os.path.join(again, "trace.csv"), encoding="utf-8") as b:
        assert a.read() == b.read()


def test_bad_config_exits_with_config_code(capsys, tmp_path, write_config):
    cfg = write_config("bad.ini", "[swimmer]\ne11 = 9.3e-05\nwheels = 4\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 3" in err and "wheels" in err
    assert main(["simulate", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_divergence_exits_with_run_code(capsys, tmp_path, write_config):
    text = open(write_config(), encoding="utf-8").read().replace("d_mu_x = 0.0", "d_mu_x = 5.0")
    cfg = write_config("diverge.ini", text)
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", cfg, "--out", out]) == EXIT_DIVERGED
    # 발산 직전까지의 트레이스는 남긴다
    assert read_trace(os.path.join(out, "trace.csv"))
    assert not os.path.exists(os.path.join(out, "manifest.txt"))


def test_solver_failure_exits_with_reason(capsys, monkeypatch, tmp_path, write_config):
    def failing_run(scenario, tail_window):
        raise NumericalFailureError("multiplier bisection failed after 200 iterations")

    monkeypatch.setattr(cli, "run", failing_run)
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", write_config(), "--out", out]) == EXIT_RUN_FAILED
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1] == "error: run failed: multiplier bisection failed after 200 iterations"
    assert not os.path.exists(os.path.join(out, "manifest.txt"))


def test_plot_command(tmp_path, write_config):
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", write_config(), "--out", out]) == EXIT_OK
    svg = str(tmp_path / "trace.svg")
    assert main(["plot", "--trace", os.path.join(out, "trace.csv"), "--out", svg, "--title", "short run"]) == EXIT_OK
    assert "short run" in open(svg, encoding="utf-8").read()

    empty = tmp_path / "empty.csv"
    empty.write_text("t,p_x,p_z,eps,z,s,u_x,u_z,u_mag,v_x,v_z,saturated\n", encoding="utf-8")
    assert main(["plot", "--trace", str(empty), "--out", svg]) == EXIT_CONFIG


def test_calibrate_prints_analytic_offset(capsys, write_config):
    assert main(["calibrate", "--config", write_config(), "--target", "0.0018"]) == EXIT_OK
    lines = dict(
        (k.strip(), v.strip())
        for k, v in (line.split("=", 1) for line in capsys.readouterr().out.splitlines() if "=" in line and not line.startswith("#"))
    )
    assert float(lines["d_mu_x"]) == 0.0
    assert float(lines["d_mu_z"]) == pytest.approx(1.0044e-4, rel=1e-12)


def test_sweep_writes_table(capsys, tmp_path, write_config):
    out = str(tmp_path / "sweep")
    code = main([
        "sweep", "--config", write_config(), "--out", out, "--workers", "1",
        "--grid", "alpha_d=600,1200", "--grid", "t_end=0.05",
    ])
    assert code == EXIT_OK
    with open(os.path.join(out, "sweep.csv"), encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0].startswith("guidance.alpha_d,t_end,mean_abs_eps_tail_mm")
    assert len(lines) == 3
    assert lines[1].split(",")[-2] == "true"
    assert lines[2].split(",")[-2] == "false"
    assert "guidance.alpha_d" in capsys.readouterr().out


def test_compare_writes_both_runs(capsys, tmp_path, write_config):
    a = write_config("a.ini", mode="ilos")
    b = write_config("b.ini", mode="conventional_los")
    out = str(tmp_path / "cmp")
    assert main(["compare", "--config-a", a, "--config-b", b, "--out", out, "--workers", "1"]) == EXIT_OK
    assert os.path.exists(os.path.join(out, "a", "trace.csv"))
    assert os.path.exists(os.path.join(out, "b", "trace.csv"))
    with open(os.path.join(out, "compare.csv"), encoding="utf-8") as f:
        rows = f.read().splitlines()
    assert rows[0].split(",")[:4] == ["run", "config", "mode", "alpha_d"]
    assert rows[1].split(",")[2] == "ilos"
    assert rows[2].split(",")[2] == "conventional_los"
