import json

import numpy as np
import pytest
import yaml

from piezorod import ConfigError, config_from_preset, config_hash, parse_config
from piezorod.cli import (EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, EXIT_SOLVER,
                          main)
from piezorod.config import DEFAULTS, DEFAULTS_YAML, validate_config


# -- validation ----------------------------------------------------------------

def test_minimal_file_fills_defaults(tmp_path):
    path = tmp_path / "min.yaml"
    path.write_text("discretization: {t_final: 0.5}\n")
    cfg = parse_config(path)
    assert cfg.discretization.t_final == 0.5
    assert cfg.discretization.m == DEFAULTS["discretization"]["m"]
    assert cfg.material.rho == 1.0


def test_zero_dt_reports_field_path():
    _, errs = validate_config({"discretization": {"dt": 0}})
    assert any(e.startswith("discretization.dt") for e in errs)


def test_negative_kappa_reports_material_violation():
    _, errs = validate_config({"material": {"kappa": -1.0}})
    assert any(e.startswith("material.kappa") for e in errs)


def test_all_violations_collected():
    _, errs = validate_config({
        "material": {"kappa": -1.0, "rho": 0.0, "f0": -2.0},
        "discretization": {"dt": 0, "t_final": -1},
        "density": {"kind": "nope"},
        "seed": "abc",
    })
    prefixes = {e.split(":")[0] for e in errs}
    assert {"material.kappa", "material.rho", "material.f0",
            "discretization.dt", "discretization.t_final", "density.kind",
            "seed"} <= prefixes


@pytest.mark.parametrize("override, path", [
    ({"material": {"gamma": 0.0}}, "material.gamma"),
    ({"material": {"mu_heat": -1.0}}, "material.mu_heat"),
    ({"material": {"c0": 0.0}}, "material.c0"),
    ({"material": {"ell": -2.0}}, "material.ell"),
    ({"material": {"R": 0.0}}, "material.R"),
    ({"material": {"nu": -0.1}}, "material.nu"),
    ({"material": {"beta": -0.1}}, "material.beta"),
    ({"material": {"c": -0.1}}, "material.c"),
    ({"material": {"f1": 0.2}}, "material.f1"),       # below f0
    ({"material": {"alpha0": -5.0}}, "material.alpha0"),
    ({"material": {"cv_model": "cubic"}}, "material.cv_model"),
    ({"density": {"r_decay": 0.0}}, "density.r_decay"),
    ({"density": {"r_rule": "simpson"}}, "density.r_rule"),
    ({"discretization": {"m": 0}}, "discretization.m"),
    ({"discretization": {"nodes": 5}}, "discretization.nodes"),
    ({"discretization": {"output_stride": 0}}, "discretization.output_stride"),
    ({"discretization": {"tol_q": 0.0}}, "discretization.tol_q"),
])
def test_every_invariant_is_reachable(override, path):
    _, errs = validate_config(override)
    assert any(e.startswith(path) for e in errs), errs


def test_unknown_fields_and_presets():
    _, errs = validate_config({"material": {"zeta": 1.0}})
    assert any(e.startswith("material.zeta") for e in errs)
    _, errs = validate_config({"preset": "does-not-exist"})
    assert any(e.startswith("preset") for e in errs)
    _, errs = validate_config({"initial": {"theta0": {"preset": "boiling"}}})
    assert any("theta0" in e for e in errs)


def test_tabulated_requires_path():
    _, errs = validate_config({"density": {"kind": "tabulated"}})
    assert any(e.startswith("density.path") for e in errs)


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("discretization: {dt: 0}\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert any("discretization.dt" in v for v in exc.value.violations)


def test_defaults_yaml_matches_defaults():
    data = yaml.safe_load(DEFAULTS_YAML)
    cfg, errs = validate_config(data)
    assert not errs
    base, _ = validate_config({})
    assert cfg.raw == base.raw


def test_config_hash_stability():
    a = config_from_preset("full-default")
    b = config_from_preset("full-default")
    c = config_from_preset("full-default", {"seed": 999})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


# -- CLI -------------------------------------------------------------------------

def write_cfg(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SHORT_RUN = """\
preset: full-default
density: {r_nodes: 24}
discretization: {m: 4, dt: 0.005, t_final: 0.1, output_stride: 5}
"""


def test_cli_print_defaults(capsys):
    assert main(["--print-defaults"]) == EXIT_OK
    out = capsys.readouterr().out
    assert yaml.safe_load(out)["material"]["rho"] == 1.0


def test_cli_run_outputs(tmp_path):
    cfg = write_cfg(tmp_path, SHORT_RUN)
    out = tmp_path / "out"
    assert main(["run", cfg, "--outdir", str(out)]) == EXIT_OK
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0] == ("t,E_total,E_kin,E_elastic,E_couple,E_hyst,E_feedback,"
                        "E_electro,E_caloric,E_entropy_coupling,diss_rate,"
                        "min_theta,D_resid,q_resid")
    assert len(trace) == 1 + 1 + 4  # header, t=0, four strides
    fields = (out / "fields_000000.csv").read_text().splitlines()
    assert fields[0] == "x,u,u_x,theta,q,P,sigma,E_field"

    summary = json.loads((out / "summary.json").read_text())
    assert summary["completed"] is True
    assert summary["min_theta"] >= -1e-10
    assert summary["admissibility_passed"] is True
    assert summary["config_hash"]

    chk = json.loads((out / "checkpoint.json").read_text())
    assert {"time", "u", "udot", "theta", "bank", "prev_G",
            "config_hash"} <= set(chk)
    assert {"r_grid", "weights", "xi", "last_q"} <= set(chk["bank"])


def test_cli_run_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SHORT_RUN)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--outdir", str(out1)]) == EXIT_OK
    assert main(["run", cfg, "--outdir", str(out2)]) == EXIT_OK
    assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
    for f in sorted(out1.glob("fields_*.csv")):
        assert f.read_bytes() == (out2 / f.name).read_bytes()


def test_cli_run_elastic_preset_has_no_dissipation(tmp_path):
    cfg = write_cfg(tmp_path, "preset: elastic-only\n"
                              "discretization: {t_final: 0.2}\n")
    out = tmp_path / "out"
    assert main(["run", cfg, "--outdir", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["diss_rate_max"] == 0.0


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "discretization: {dt: 0}\n")
    assert main(["run", cfg, "--outdir", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "discretization.dt" in capsys.readouterr().err


def test_cli_run_refuses_inadmissible_density(tmp_path):
    cfg = write_cfg(tmp_path, "preset: constant-cv\n"
                              "discretization: {t_final: 0.05}\n")
    out = tmp_path / "out"
    assert main(["run", cfg, "--outdir", str(out)]) == EXIT_HYPOTHESIS
    summary = json.loads((out / "summary.json").read_text())
    assert summary["completed"] is False

    cfg2 = write_cfg(tmp_path, "preset: constant-cv\n"
                               "allow_hypothesis_fail: true\n"
                               "discretization: {m: 4, dt: 0.01, "
                               "t_final: 0.05}\n", name="cfg2.yaml")
    assert main(["run", cfg2, "--outdir", str(tmp_path / "y")]) == EXIT_OK


def test_cli_check_density_exit_codes(tmp_path):
    good = write_cfg(tmp_path, "preset: full-default\n", name="good.yaml")
    bad = write_cfg(tmp_path, "preset: constant-cv\n", name="bad.yaml")
    out = tmp_path / "rep"
    assert main(["check-density", good, "--outdir", str(out)]) == EXIT_OK
    report = json.loads((out / "density_report.json").read_text())
    assert report["passed"] is True
    assert main(["check-density", bad]) == EXIT_HYPOTHESIS


def test_cli_check_density_stdout_json(tmp_path, capsys):
    good = write_cfg(tmp_path, "preset: full-default\n")
    assert main(["check-density", good]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["items"]["material.iii"]["pass"] is True


def test_cli_loops_outputs(tmp_path):
    cfg = write_cfg(tmp_path, "preset: full-default\ndensity: {r_nodes: 32}\n")
    out = tmp_path / "loops"
    assert main(["loops", cfg, "--outdir", str(out), "--amplitude", "2",
                 "--cycles", "2", "--samples", "128",
                 "--temperatures", "0.5,5"]) == EXIT_OK
    q_lines = (out / "loops_q.csv").read_text().splitlines()
    assert q_lines[0] == "theta,sample,q,P,U,diss_cum"
    s_lines = (out / "loops_strain.csv").read_text().splitlines()
    assert s_lines[0] == "theta,sample,eps,sigma,q,P,U,E_field"
    temps = {line.split(",")[0] for line in q_lines[1:]}
    assert temps == {"0.5", "5"}


def test_cli_converge_outputs(tmp_path):
    cfg = write_cfg(tmp_path, "preset: smooth-convergence\n"
                              "discretization: {t_final: 0.1}\n")
    out = tmp_path / "conv"
    assert main(["converge", cfg, "--outdir", str(out),
                 "--modes", "2,4"]) == EXIT_OK
    lines = (out / "converge.csv").read_text().splitlines()
    assert lines[0] == "m,nodes,dt,energy_drift,l2_dist_u,l2_dist_theta"
    assert len(lines) == 3


def test_cli_converge_linear_scenario_exact(tmp_path):
    # single-mode elastic data is represented exactly at every mode count
    cfg = write_cfg(tmp_path, "preset: elastic-only\n"
                              "discretization: {t_final: 0.3}\n")
    out = tmp_path / "conv"
    assert main(["converge", cfg, "--outdir", str(out),
                 "--modes", "2,4,8"]) == EXIT_OK
    rows = [line.split(",") for line in
            (out / "converge.csv").read_text().splitlines()[1:]]
    for row in rows[1:]:
        assert float(row[4]) < 1e-12  # u distance at rounding level
        assert float(row[5]) < 1e-12


def test_cli_seed_override(tmp_path):
    cfg = write_cfg(tmp_path, SHORT_RUN)
    out = tmp_path / "seeded"
    assert main(["run", cfg, "--outdir", str(out), "--seed", "777"]) == EXIT_OK
    assert json.loads((out / "summary.json").read_text())["seed"] == 777


def test_cli_converge_dt_halving_ratio(tmp_path):
    # second-order energy behavior of the linear part under dt halving
    cfg = write_cfg(tmp_path, "preset: elastic-only\n"
                              "discretization: {t_final: 3.4}\n")
    out = tmp_path / "conv"
    assert main(["converge", cfg, "--outdir", str(out), "--modes", "2",
                 "--dts", "0.005,0.0025"]) == EXIT_OK
    rows = [line.split(",") for line in
            (out / "converge_dt.csv").read_text().splitlines()[1:]]
    drift = {float(r[1]): float(r[2]) for r in rows}
    assert drift[0.005] / drift[0.0025] >= 3.5


def test_cli_loops_zero_density(tmp_path):
    cfg = write_cfg(tmp_path, "preset: full-default\n"
                              "density: {kind: uniform-test, amplitude: 0.0, "
                              "r_nodes: 8}\n")
    out = tmp_path / "loops0"
    assert main(["loops", cfg, "--outdir", str(out), "--amplitude", "1",
                 "--cycles", "1", "--samples", "64"]) == EXIT_OK
    rows = (out / "loops_q.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[3]) == 0.0 for r in rows)  # P column
