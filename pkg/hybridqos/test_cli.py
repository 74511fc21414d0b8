import json

import pytest

from hybridqos.cli import build_parser, main


def _exit_code(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return excinfo.value.code


def _scenario_file(tmp_path, data):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_list_checks(capsys):
    assert _exit_code(["selftest", "--list-checks"]) == 0
    out = capsys.readouterr().out
    assert "solve_ab_residuals" in out
    assert "handover_convergence" in out


def test_selected_selftest_checks(capsys):
    assert _exit_code(["selftest", "--quick", "--checks", "solve_ab_residuals, mu_star_residuals"]) == 0
    assert "All checks passed" in capsys.readouterr().out


def test_missing_key_exits_with_config_error(tmp_path, capsys):
    path = _scenario_file(tmp_path, {"source": {"beta": 0.7}})
    assert _exit_code(["run", path, "--out", str(tmp_path / "out")]) == 1
    assert "source.alpha" in capsys.readouterr().err


def test_missing_file_exits_with_config_error(tmp_path):
    assert _exit_code(["run", str(tmp_path / "nowhere.yaml")]) == 1


def test_quick_run_writes_results(tmp_path, capsys):
    path = _scenario_file(tmp_path, {
        "name": "cli", "source": {"alpha": 0.3, "beta": 0.7},
        "strategies": ["rf", "vlc"], "analysis": {"theta": [0.01]}})
    out = tmp_path / "out"
    assert _exit_code(["run", path, "--out", str(out), "--quick", "--seed", "5"]) == 0
    assert (out / "rho_vs_theta_rf.csv").exists()
    assert (out / "selection.csv").exists()
    manifest = json.loads((out / "run_manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 5
    assert "Files saved" in capsys.readouterr().out
