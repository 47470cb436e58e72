import json
from pathlib import Path

import pytest

from coherence_scope.cli import main, oracle_suite, parse_config
from coherence_scope.exceptions import ValidationError

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


GOLDEN = {"protocol": "channel", "channel": {"builder": "rotation", "params": {"theta": 0.02, "axis": [0, 0, 1]}},
          "n_values": list(range(2, 13)), "shots": 0}


def test_golden_channel_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, GOLDEN), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "quadratic"
    assert report["v2"]["Z"] == pytest.approx(1.0, abs=0.02)
    header = (out / "results.csv").read_text().splitlines()[0]
    assert header == "basis,n,shots,error_count,p_error,stderr"


def test_fit_reproduces_report(tmp_path):
    out, refit = tmp_path / "out", tmp_path / "refit"
    main(["run", "--config", _write(tmp_path, GOLDEN), "--out", str(out)])
    assert main(["fit", "--config", str(out / "results.csv"), "--out", str(refit)]) == 0
    assert (refit / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_fit_from_config_with_options(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", _write(tmp_path, GOLDEN), "--out", str(out)])
    cfg = _write(out, {"csv": "results.csv", "fit": {"z_quadratic": 1e12}}, "fit.json")
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "refit")]) == 0
    report = json.loads((tmp_path / "refit" / "report.json").read_text())
    assert report["basis_verdicts"]["Z"] == "inconclusive"


def test_scale_warning(tmp_path, caplog):
    cfg = dict(GOLDEN, n_values=[2, 3, 4, 5, 6], r=2 / 36)
    assert main(["run", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    assert "n_max^2 * r" in caplog.text


def test_non_tp_kraus_fails_naming_field(tmp_path, capsys):
    cfg = dict(GOLDEN, channel={"dim": 2, "kraus": [[[[1, 0], [0, 0]], [[0, 0], [0.5, 0]]]]})
    assert main(["run", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) != 0
    assert "kraus trace-preservation" in capsys.readouterr().err


@pytest.mark.parametrize("bad,field", [
    ({"protocol": "teleport"}, "protocol"),
    (dict(GOLDEN, n_values="abc"), "n_values"),
    (dict(GOLDEN, channel={"builder": "nope"}), "channel"),
    ({"protocol": "prep", "n": 10, "phi": 0.2, "prep": {"rotation": {"theta": 0.01}}}, "n*phi"),
])
def test_validation_failures(tmp_path, capsys, bad, field):
    assert main(["validate", "--config", _write(tmp_path, bad)]) == 2
    assert field in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["explode", "--config", "x"])
    assert exc.value.code != 0


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2
    assert "cannot read config" in capsys.readouterr().err


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate_run_and_refit(tmp_path, path):
    assert main(["validate", "--config", str(path)]) == 0
    out = tmp_path / "out"
    assert main(["run", "--config", str(path), "--out", str(out), "--jobs", "2"]) == 0
    assert main(["fit", "--config", str(out / "results.csv"), "--out", str(tmp_path / "refit")]) == 0
    assert (tmp_path / "refit" / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_seed_override_changes_sampled_output(tmp_path):
    cfg = _write(tmp_path, dict(GOLDEN, shots=1000))
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", "--out", str(tmp_path)]) == 0
    assert "max deviation" in capsys.readouterr().out
    assert json.loads((tmp_path / "oracle.json").read_text())["max_deviation"] < 1e-10
    assert max(oracle_suite(seed=3).values()) < 1e-10


def test_parse_config_rejects_non_object():
    with pytest.raises(ValidationError):
        parse_config([1, 2])
