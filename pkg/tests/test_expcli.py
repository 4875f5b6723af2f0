import json
import subprocess
import sys

import pytest
import yaml

from phtorus import expcli
from phtorus.expcli import cli, config, systems


def _write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return p


def _small_audit():
    return {"experiment": "audit", "seed": 3,
            "system": [systems.cat_times(systems.standard(0.0)), systems.cat_times(systems.ROT90)],
            "params": {"orbit_points": 500, "uniform_points": 200, "alpha_grid": 12, "isometric": [1]}}


def test_list_has_the_six_kinds(capsys):
    assert tuple(expcli.list_experiments()) == config.EXPERIMENTS
    assert len(config.EXPERIMENTS) == 6
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in out] == list(config.EXPERIMENTS)


@pytest.mark.parametrize("kind", config.EXPERIMENTS)
def test_default_config_round_trips(kind):
    text = expcli.emit_default_config(kind)
    cfg = expcli.parse(text)
    assert cfg.experiment == kind
    again = expcli.parse(config.dump(cfg))
    assert again == cfg


def test_unknown_default_kind(capsys):
    with pytest.raises(ValueError, match="unknown experiment"):
        expcli.emit_default_config("nope")
    assert cli.main(["default-config", "nope"]) == 2


def test_bad_values_name_their_key():
    doc = yaml.safe_load(expcli.emit_default_config("separation"))
    doc["params"]["sigma"] = -1
    with pytest.raises(expcli.ConfigError) as err:
        expcli.validate(doc)
    assert err.value.key == "params.sigma" and "sigma" in str(err.value)
    doc["params"]["sigma"] = 4.0
    doc["params"]["sigmaa"] = 4.0
    with pytest.raises(expcli.ConfigError, match="params.sigmaa"):
        expcli.validate(doc)


@pytest.mark.parametrize("mutate, key", [
    (lambda d: d.update(experiment="fourier"), "experiment"),
    (lambda d: d.update(colour="red"), "colour"),
    (lambda d: d.pop("system"), "system"),
    (lambda d: d.update(seed=-1), "seed"),
    (lambda d: d["system"].update(kind="baker"), "system.kind"),
    (lambda d: d["params"].update(k_range=[5, 2]), "params.k_range"),
    (lambda d: d["params"].update(r=2, cr_order=3), "params.cr_order"),
])
def test_rejected_configs(mutate, key):
    doc = yaml.safe_load(expcli.emit_default_config("perturb-sweep"))
    mutate(doc)
    with pytest.raises(expcli.ConfigError) as err:
        expcli.validate(doc)
    assert err.value.key.startswith(key)


def test_system_lists_only_for_audit():
    doc = yaml.safe_load(expcli.emit_default_config("spectrum"))
    doc["system"] = [doc["system"]]
    with pytest.raises(expcli.ConfigError, match="only accepted by the audit"):
        expcli.validate(doc)


def test_config_error_exit_code(tmp_path, capsys):
    bad = _write(tmp_path, {"experiment": "spectrum", "seed": 0, "system": systems.CAT,
                            "params": {"n_iter": 10}})
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert "params.n_iter" in capsys.readouterr().err
    missing = tmp_path / "missing.yaml"
    assert cli.main(["run", "--config", str(missing)]) == 2


def test_spectrum_run(tmp_path, capsys):
    doc = yaml.safe_load(expcli.emit_default_config("spectrum"))
    doc["params"]["n_iter"] = 100_000
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(_write(tmp_path, doc)), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["criteria"] == {"cat_spectrum": True}
    assert abs(report["results"]["exponents"][0] - 0.9624236501192069) < 1e-3
    assert (out / "convergence.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_failing_check_exit_code(tmp_path):
    doc = yaml.safe_load(expcli.emit_default_config("spectrum"))
    doc["params"].update(n_iter=10_000, expected=[1.5, -1.5])
    assert cli.main(["run", "--config", str(_write(tmp_path, doc)), "--out", str(tmp_path / "o")]) == 1


def test_runs_are_deterministic(tmp_path):
    path = _write(tmp_path, _small_audit())
    reports = []
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / d)]) == 0
        reports.append(json.loads((tmp_path / d / "report.json").read_text()))
    assert (tmp_path / "a" / "alpha_scan.csv").read_bytes() == (tmp_path / "b" / "alpha_scan.csv").read_bytes()
    assert reports[0]["results"] == reports[1]["results"]
    assert reports[0]["artifacts"] == ["alpha_scan.csv", "alpha_scan.plot"]


def test_seed_override_and_threads(tmp_path):
    path = _write(tmp_path, _small_audit())
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "s"), "--seed", "11",
                     "--threads", "2"]) == 0
    report = json.loads((tmp_path / "s" / "report.json").read_text())
    assert report["config"]["seed"] == 11 and report["threads"] == 2
    assert cli.main(["run", "--config", str(path), "--threads", "0"]) == 2


def test_report_records_runner_errors(tmp_path):
    cfg = expcli.validate({"experiment": "separation", "seed": 0, "system": systems.CAT, "params": {}})
    report = expcli.run(cfg, tmp_path)
    assert not report["passed"] and report["errors"]
    assert json.loads((tmp_path / "report.json").read_text())["errors"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "phtorus.expcli.cli", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "separation" in res.stdout
