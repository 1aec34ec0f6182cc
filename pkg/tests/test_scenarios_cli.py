"""Scenario resolution, config files and the command-line driver."""

import numpy as np
import pytest

from flexagg.cli import main
from flexagg.config import AggregateConfig, config_text, parse_config_text
from flexagg.scenarios import (
    SCENARIOS,
    dislocated_chain,
    doubly_dislocated_chain,
    regular_chain,
    resolve_scenario,
)


def test_geometry_constructors():
    assert regular_chain() == (0.0, 5.0, 10.0, 15.0, 20.0)
    assert dislocated_chain() == (0.0, 5.0, 10.0, 15.0, 17.5)
    assert doubly_dislocated_chain() == (0.0, 2.5, 7.5, 12.5, 15.0)


def test_named_scenarios_resolve_and_validate():
    for name in SCENARIOS:
        cfg = resolve_scenario(name)
        assert cfg.scenario == name
        cfg.validate()
        again = resolve_scenario(name)
        assert cfg == again


def test_scenario_table_contents():
    homog = resolve_scenario("homog5")
    assert homog.positions0 == regular_chain()
    assert homog.n_excitations == 2 and homog.mode == "fixed"

    fixed = resolve_scenario("fixed-surface")
    assert fixed.n_excitations == 1
    assert fixed.initial_surface == 5 and fixed.sigma == 0.0

    coll = resolve_scenario("collision")
    assert coll.positions0 == doubly_dislocated_chain()
    assert coll.initial_surface == 10 and coll.mode == "fssh"
    assert coll.ref_positions == coll.positions0

    ga, gb = resolve_scenario("gate-a"), resolve_scenario("gate-b")
    assert ga.positions0 == gb.positions0 == dislocated_chain()
    assert (ga.initial_surface, gb.initial_surface) == (9, 10)
    assert ga.rng_seed != gb.rng_seed

    nad = resolve_scenario("nonadiabatic")
    assert nad.positions0 == doubly_dislocated_chain()
    assert nad.initial_surface == 9 and nad.mode == "fssh"


def test_unknown_scenario_lists_known_names():
    with pytest.raises(ValueError, match="collision"):
        resolve_scenario("no-such-thing")


def test_override_out_of_range_surface_rejected():
    with pytest.raises(ValueError, match="initial_surface"):
        resolve_scenario("fixed-surface", initial_surface=6)
    with pytest.raises(ValueError, match="initial_surface"):
        resolve_scenario("collision", initial_surface=11)


def test_config_text_roundtrip(tmp_path):
    cfg = resolve_scenario("nonadiabatic", n_traj=17, t_final=0.5)
    path = tmp_path / "run.cfg"
    path.write_text(config_text(cfg))
    assert resolve_scenario(str(path)) == cfg


def test_config_file_with_scenario_base(tmp_path):
    path = tmp_path / "short.cfg"
    path.write_text("scenario = collision\nn_traj = 7\nt_final_us = 0.5\n")
    cfg = resolve_scenario(str(path))
    assert cfg == resolve_scenario("collision", n_traj=7, t_final=0.5)


def test_self_contained_config_requires_core_keys(tmp_path):
    path = tmp_path / "partial.cfg"
    path.write_text("n_atoms = 3\nn_excitations = 1\n")
    with pytest.raises(ValueError, match="required"):
        resolve_scenario(str(path))


def test_malformed_config_line_reports_position(tmp_path):
    path = tmp_path / "broken.cfg"
    path.write_text("n_atoms = 5\nwat\n")
    with pytest.raises(ValueError, match="line 2"):
        resolve_scenario(str(path))


def test_parse_config_text_units_and_comments():
    fields = parse_config_text(
        "# comment\nn_atoms = 2\nn_excitations = 1\n"
        "positions_um = 0.0,5.0\nc3_mhz_um3 = 976.0\nc6_mhz_um6 = 5400.0\n")
    assert fields["n_atoms"] == 2
    assert fields["positions0"] == (0.0, 5.0)
    assert fields["c3"] == pytest.approx(2 * np.pi * 976.0)
    assert fields["c6"] == pytest.approx(2 * np.pi * 5400.0)


# ------------------------------------------------------------------- CLI

def small_run_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text("scenario = nonadiabatic\nn_traj = 2\n"
                    "t_final_us = 0.04\nout_stride_us = 0.02\n")
    return str(path)


def test_cli_requires_target(capsys):
    assert main(["run"]) == 1
    assert "scenario" in capsys.readouterr().err


def test_cli_unknown_scenario_is_usage_error(capsys):
    assert main(["spectra", "--scenario", "bogus"]) == 1
    assert "unknown scenario" in capsys.readouterr().err


def test_cli_bad_flag_is_usage_error(capsys):
    assert main(["run", "--scenario", "collision", "--mode", "quantum"]) == 1
    capsys.readouterr()


def test_cli_spectra_writes_reports(tmp_path, capsys):
    out = tmp_path / "spec"
    assert main(["spectra", "--scenario", "disloc5", "--out", str(out)]) == 0
    capsys.readouterr()
    names = {p.name for p in out.iterdir()}
    assert {"energies.csv", "coefficients.csv", "decomposition.csv", "meta"} <= names

    energies = (out / "energies.csv").read_text().splitlines()
    assert energies[0] == "k,energy"
    assert len(energies) == 11
    vals = [float(line.split(",")[1]) for line in energies[1:]]
    assert vals == sorted(vals)

    coeff = (out / "coefficients.csv").read_text().splitlines()
    assert coeff[0] == "k,n,m,value"
    assert len(coeff) == 1 + 10 * 10

    dec = (out / "decomposition.csv").read_text().splitlines()
    assert dec[0] == "state,energy,verdict,k_A,k_B,fidelity"
    verdicts = [line.split(",")[2] for line in dec[1:]]
    assert verdicts.count("product") == 6
    assert sum(v.startswith("inverted") for v in verdicts) == 4


def test_cli_run_echoes_config_and_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", small_run_cfg(tmp_path),
                 "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "scenario = nonadiabatic" in captured
    assert "completed 2/2" in captured
    names = {p.name for p in out.iterdir()}
    assert {"density_e.csv", "density_rho.csv", "populations.csv",
            "mean_positions.csv", "hops.csv", "meta"} <= names


def test_cli_run_flag_overrides_reach_config(tmp_path, capsys):
    out = tmp_path / "run2"
    assert main(["run", "--config", small_run_cfg(tmp_path), "--out", str(out),
                 "--n-traj", "3", "--seed", "123", "--mode", "fixed"]) == 0
    captured = capsys.readouterr().out
    assert "n_traj = 3" in captured
    assert "seed = 123" in captured
    assert "mode = fixed" in captured


def test_cli_rerun_byte_identical(tmp_path, capsys):
    cfg_path = small_run_cfg(tmp_path)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["run", "--config", cfg_path, "--out", str(out)]) == 0
        outs.append(out)
    capsys.readouterr()
    for name in ("density_e.csv", "populations.csv", "hops.csv", "meta"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_runtime_failure_exit_code(tmp_path, capsys, monkeypatch):
    import flexagg.cli as climod

    def boom(cfg):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(climod, "run_ensemble", boom)
    assert main(["run", "--scenario", "collision", "--out",
                 str(tmp_path / "x")]) == 2
    assert "runtime error" in capsys.readouterr().err


def test_cli_check_passes(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "ok - dimer eigenvalues" in out
    assert "FAIL" not in out
