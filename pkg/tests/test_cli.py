import csv
import json

import pytest

from wavecarleman import cli

SMALL = ["--set", "grid.nxprime=17", "--set", "grid.naxial=49", "--set", "grid.ntime=33",
         "--set", "domain.X=3"]


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_parse_config_text():
    text = "# comment\n grid.nxprime = 17  # trailing\n\ndomain.X=2.5\n"
    assert cli.parse_config_text(text) == {"grid.nxprime": "17", "domain.X": "2.5"}
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("no equals sign here")


def test_usage_errors(tmp_path):
    assert run(tmp_path, "no-such-command") == 2
    assert run(tmp_path, "check-weights", "--config", str(tmp_path / "missing.cfg")) == 2
    assert run(tmp_path, "check-weights", "--set", "grid.bogus=1") == 2
    assert run(tmp_path, "check-weights", "--set", "grid.nxprime=many") == 2
    assert run(tmp_path, "check-weights", "--set", "noequals") == 2


def test_check_weights_pass_and_fail(tmp_path):
    assert run(tmp_path, "check-weights") == 0
    rep = json.loads((tmp_path / "assumption.json").read_text())
    assert rep["pass"] is True and rep["gamma_star"]["points"] == [32]
    # x0 inside omega violates the sign condition
    assert run(tmp_path / "bad", "check-weights", "--set", "weights.x0=0.5") == 1


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("weights.x0 = 0.5\n")
    assert run(tmp_path / "a", "check-weights", "--config", str(cfg)) == 1
    assert run(tmp_path / "b", "check-weights", "--config", str(cfg), "--set", "weights.x0=-0.5") == 0


def test_carleman_bounded_outputs(tmp_path):
    args = SMALL + ["--set", "carleman.members=1", "--set", "carleman.s_count=4"]
    assert run(tmp_path, "carleman-bounded", *args) == 0
    rows = list(csv.reader((tmp_path / "sweep_bounded.csv").open()))
    assert len(rows) == 1 + 4
    summ = json.loads((tmp_path / "summary_bounded.json").read_text())
    assert summ["rows"] == 4 and summ["C_fit"] > 0
    assert (tmp_path / "ratio_bounded.svg").read_text().startswith("<svg")


def test_carleman_zero_family_is_skipped(tmp_path):
    args = SMALL + ["--set", "carleman.members=1", "--set", "carleman.s_count=3",
                    "--set", "carleman.amplitude=0"]
    assert run(tmp_path, "carleman-cyl", *args) == 0
    summ = json.loads((tmp_path / "summary_cylinder.json").read_text())
    assert summ["skipped"] == 3 and summ["C_fit"] is None


def test_stability_sweep_and_determinism(tmp_path):
    args = SMALL + ["--set", "stability.family_size=2"]
    assert run(tmp_path / "a", "stability-sweep", *args) == 0
    assert run(tmp_path / "b", "stability-sweep", *args) == 0
    for name in ("family.csv", "seed_000.json", "seed_001.json", "summary.json", "scatter.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run(tmp_path / "c", "stability-sweep", "--seed", "1", *args) == 0
    assert (tmp_path / "c" / "family.csv").read_bytes() != (tmp_path / "a" / "family.csv").read_bytes()


def test_stability_symmetrization_failure(tmp_path):
    args = SMALL + ["--set", "stability.family_size=1", "--set", "stability.u0_imag=0.1"]
    assert run(tmp_path, "stability-sweep", *args) == 1
    assert "error" in json.loads((tmp_path / "error.json").read_text())


def test_reconstruct_reference_potential(tmp_path):
    args = SMALL + ["--set", "recon.amplitude=0", "--set", "recon.noise=0"]
    assert run(tmp_path, "reconstruct", *args) == 0
    rows = list(csv.DictReader((tmp_path / "error_vs_noise.csv").open()))
    assert len(rows) == 1 and float(rows[0]["relative_error"]) == 0.0
