import csv

import pytest

from oseen_vvp.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, UsageError, main, read_config


def test_converge_writes_table(tmp_path, capsys):
    code = main(["converge", "--scheme", "mixed", "--k", "0", "--levels", "4", "--out", str(tmp_path)])
    rows = list(csv.reader(open(tmp_path / "errors_test1_mixed_k0.csv")))
    assert rows[0][:3] == ["h", "dofs", "err_u"]
    assert len(rows) == 5
    assert code in (EXIT_OK, EXIT_NUMERICAL)
    assert "finest-pair rates" in capsys.readouterr().out


def test_converge_levels_one_is_usage_error(tmp_path):
    assert main(["converge", "--levels", "1", "--out", str(tmp_path)]) == EXIT_USAGE


def test_converge_rejects_non_manufactured(tmp_path):
    assert main(["converge", "--scenario", "kh", "--out", str(tmp_path)]) == EXIT_USAGE


def test_bad_flag_exits_with_usage_code():
    with pytest.raises(SystemExit) as exc:
        main(["converge", "--scheme", "fem"])
    assert exc.value.code == EXIT_USAGE


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# test\nscheme = dg\nk = 0\nlevels = 2\nout = " + str(tmp_path) + "\n")
    main(["converge", "--config", str(cfg), "--k", "1"])
    assert (tmp_path / "errors_test1_dg_k1.csv").exists()


def test_read_config_errors(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("color = blue\n")
    with pytest.raises(UsageError):
        read_config(p)
    p.write_text("k = one\n")
    with pytest.raises(UsageError):
        read_config(p)
    p.write_text("just words\n")
    with pytest.raises(UsageError):
        read_config(p)


def test_transient_zero_steps_header_only_rows(tmp_path):
    code = main(["transient", "--scenario", "open-cavity", "--steps", "0", "--mesh", "20",
                 "--out", str(tmp_path)])
    rows = list(csv.reader(open(tmp_path / "diagnostics_open-cavity.csv")))
    assert code == EXIT_OK
    assert rows[0] == ["t", "E", "P", "E_phys", "P_phys", "div_linf"]
    assert len(rows) == 2  # the initial state


def test_transient_cavity_snapshots(tmp_path):
    code = main(["transient", "--scenario", "open-cavity", "--steps", "2", "--mesh", "20", "--k", "0",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert sorted(p.name for p in tmp_path.glob("*.vtk")) == ["open-cavity_00001.vtk",
                                                              "open-cavity_00002.vtk"]


def test_transient_rejects_steady_scenario(tmp_path):
    assert main(["transient", "--scenario", "test1", "--out", str(tmp_path)]) == EXIT_USAGE


def test_solve_with_mesh_file(tmp_path):
    from oseen_vvp.mesh import generate_structured, write_mesh
    path = tmp_path / "m.txt"
    write_mesh(generate_structured(3, 3), path)
    assert main(["solve", "--mesh", str(path), "--k", "1", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "test1_mixed_k1.vtk").exists()
    assert main(["solve", "--mesh", str(tmp_path / "none.txt"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_selftest_passes_and_detects_bad_constant(capsys):
    assert main(["selftest"]) == EXIT_OK
    assert main(["selftest", "--c11", "-1"]) == EXIT_NUMERICAL
    assert "FAIL dg-flux-energy" in capsys.readouterr().out


def test_thread_env_validation(monkeypatch, tmp_path):
    monkeypatch.setenv("OSEEN_THREADS", "zero")
    assert main(["solve", "--mesh", "2", "--out", str(tmp_path)]) == EXIT_USAGE
    monkeypatch.setenv("OSEEN_THREADS", "1")
    assert main(["solve", "--mesh", "2", "--out", str(tmp_path)]) == EXIT_OK


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["converge", "--levels", "3", "--k", "1", "--out", str(d)])
    assert (a / "errors_test1_mixed_k1.csv").read_bytes() == (b / "errors_test1_mixed_k1.csv").read_bytes()
