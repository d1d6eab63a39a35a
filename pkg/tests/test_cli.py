import numpy as np
import pytest

from jang_horizons.cli import RunConfig, main
from jang_horizons.errors import InputError, ParseError
from jang_horizons.horizon_geometry import read_mesh, write_mesh


def test_oracle_reports_radius(tmp_path, capsys):
    assert main(["oracle", "--family", "pg", "--mass", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "r_star = 2" in out
    rows = np.loadtxt(tmp_path / "oracle.csv", delimiter=",", skiprows=1)
    assert rows.shape[1] == 3


def test_oracle_flat(capsys):
    assert main(["oracle", "--family", "flat"]) == 0
    assert "no horizon" in capsys.readouterr().out


def test_untrapped_inner_is_input_error(tmp_path, capsys):
    status = main(["find", "--family", "pg", "--outer", "5", "--inner", "2.5", "--out", str(tmp_path)])
    assert status == 4
    err = capsys.readouterr().err
    assert "[error]" in err and "AdmissibilityError" in err
    assert (tmp_path / "error.txt").exists()


def test_missing_data_file(capsys):
    assert main(["find", "--data", "/nonexistent/x.ids"]) == 4
    assert "ParseError" in capsys.readouterr().err


def test_outermost_without_seeds(capsys):
    assert main(["outermost", "--family", "pg"]) == 4


def test_solver_failure_status(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[schedule]\nmax_newton = 1\n[output]\nwrite_fields = no\n")
    assert main(["find", "--config", str(cfg), "--outer", "3"]) == 3
    assert "SolverError" in capsys.readouterr().err


def test_config_file_values(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[data]\nfamily = schwarzschild\nmass = 2\n[domain]\nh = 0.025\n"
                    "[checks]\nmode = mots\nprobes = 10\n[output]\nwrite_fields = false\n")
    cfg = RunConfig.from_file(path)
    assert (cfg.family, cfg.mass, cfg.h, cfg.mode, cfg.probes, cfg.write_fields) == \
        ("schwarzschild", 2.0, 0.025, "mots", 10, False)


@pytest.mark.parametrize("text", ["[nope]\nx = 1\n", "[data]\nshape = 3\n", "[domain]\nh = fast\n",
                                  "no section header\n"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ParseError):
        RunConfig.from_file(path)


@pytest.mark.parametrize("kw", [dict(h=-1), dict(inner=7.0), dict(mode="x"), dict(t_min=1.0)])
def test_validation(kw):
    with pytest.raises(InputError):
        RunConfig(**kw).validate()


def test_verify_known_horizon(tmp_path):
    a = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    idx = np.arange(400)
    write_mesh(tmp_path / "c.mesh", 2 * np.column_stack([np.cos(a), np.sin(a)]),
               np.column_stack([idx, np.roll(idx, -1)]))
    assert main(["verify", "--family", "pg", "--outer", "4", "--mesh", str(tmp_path / "c.mesh"),
                 "--out", str(tmp_path)]) == 0
    assert "passed = true" in (tmp_path / "verify.txt").read_text()


def test_find_end_to_end(tmp_path):
    status = main(["find", "--family", "pg", "--mass", "1", "--outer", "6", "--inner", "1",
                   "--h", "0.05", "--out", str(tmp_path)])
    assert status == 0
    v, _ = read_mesh(tmp_path / "horizon.mesh")
    assert np.all(np.abs(np.linalg.norm(v, axis=1) - 2.0) < 0.1)
    assert (tmp_path / "trace.txt").exists() and (tmp_path / "report.txt").exists()


def test_malformed_seed_sphere(capsys):
    assert main(["outermost", "--family", "pg", "--seed-sphere", "a,b,c"]) == 4
    assert "InputError" in capsys.readouterr().err
