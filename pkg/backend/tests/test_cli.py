import json

import pytest

from app.main import DEFAULT_CONFIG, EXIT_CONFIG, EXIT_OK, ConfigError, cli_main, load_configs, select


SMALL = {
    "name": "small_circle",
    "experiment": "identities",
    "curve": {"kind": "ellipse", "a": 1.0, "b": 1.0},
    "n_nodes": 64,
    "ladder": [32, 64],
    "points": {"count": 2, "interior_scale": 0.6, "exterior_min": 2.0, "exterior_max": 3.0},
    "tolerances": {"near": 1e-4},
}


def _write(path, payload):
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
    return path


def test_missing_config_exits_with_config_code(tmp_path):
    assert cli_main(["identities", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_json_and_unknown_keys(tmp_path):
    bad = _write(tmp_path / "bad.json", "{not json")
    assert cli_main(["all", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG

    extra = _write(tmp_path / "extra.json", {**SMALL, "unexpected": 1})
    assert cli_main(["all", "--config", str(extra), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_no_matching_experiment(tmp_path):
    config = _write(tmp_path / "small.json", SMALL)
    assert cli_main(["kernels", "--config", str(config), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_suite_file_and_seed_override(tmp_path):
    path = _write(tmp_path / "suite.json", {"experiments": [SMALL, {**SMALL, "name": "other", "experiment": "kernels"}]})
    configs = load_configs(path)
    assert [c.name for c in configs] == ["small_circle", "other"]
    chosen = select(configs, "identities", 11)
    assert [(c.name, c.seed) for c in chosen] == [("small_circle", 11)]
    with pytest.raises(ConfigError):
        select(configs, "pde-residual", None)


def test_identities_run_writes_outputs(tmp_path):
    config = _write(tmp_path / "small.json", SMALL)
    out = tmp_path / "out"
    assert cli_main(["identities", "--config", str(config), "--out", str(out)]) == EXIT_OK

    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["experiments"][0]["name"] == "small_circle"
    header = (out / "small_circle.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "criterion,passed,asserted,value,threshold,detail"
    assert (out / "small_circle_defects.csv").is_file()


def test_reports_are_deterministic(tmp_path):
    config = _write(tmp_path / "small.json", SMALL)
    first, second = tmp_path / "a", tmp_path / "b"
    cli_main(["identities", "--config", str(config), "--out", str(first), "--seed", "3"])
    cli_main(["identities", "--config", str(config), "--out", str(second), "--seed", "3"])
    assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()


def test_default_suite_covers_every_experiment_kind():
    configs = load_configs(DEFAULT_CONFIG)
    assert len({c.name for c in configs}) == len(configs)

    scans = [c for c in configs if c.experiment == "modulus-scan"]
    assert any(c.scan.side == "exterior" for c in scans)
    assert any(c.scan.field == "grad_double" and c.density.preset == "c11_hat" for c in scans)

    families = {c.coefficients().n: set() for c in configs}
    for c in configs:
        if c.experiment == "pde-residual":
            families[c.coefficients().n].add(c.name)
    assert {"pde_laplace", "pde_anisotropic", "pde_yukawa", "pde_drift"} <= families[2]
    assert families[3] == {"pde_yukawa_3d"}

    ellipses = {c.name for c in configs if c.experiment == "identities" and (c.curve.a, c.curve.b) == (2.0, 1.0)}
    assert {"laplace_ellipse", "anisotropic_ellipse", "yukawa_ellipse"} <= ellipses
