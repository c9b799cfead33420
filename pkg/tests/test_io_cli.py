import json

import numpy as np
import pytest

from ecdsynth.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC, EXIT_OK, main
from ecdsynth.io import (ConfigError, load_config, parse_frequency, parse_range, parse_rate,
                         parse_target, parse_time, sha256_file, system_from_dict)


def test_unit_parsing():
    assert parse_frequency("33khz") == pytest.approx(2 * np.pi * 33e3)
    assert parse_frequency("2 MHz") == pytest.approx(2 * np.pi * 2e6)
    assert parse_frequency(5.0) == 5.0
    assert parse_time("24ns") == pytest.approx(24e-9)
    assert parse_time("50us") == parse_time("50µs") == pytest.approx(50e-6)
    # rates carry no 2 pi
    assert parse_rate("6.67hz") == pytest.approx(6.67)
    assert parse_rate("150ms") == pytest.approx(1 / 0.15)
    assert parse_range("1..4") == [1, 2, 3, 4]
    assert parse_range("3") == [3]
    for bad in ("33kHz/2", "fast", "10 parsecs"):
        with pytest.raises(ConfigError):
            parse_frequency(bad)
    with pytest.raises(ConfigError):
        parse_range("5..2")
    with pytest.raises(ConfigError):
        parse_rate("0s")


def test_system_from_dict():
    s = system_from_dict({"chi": "33khz", "kappa": "436us", "dt": "1ns"})
    assert s.chi == pytest.approx(2 * np.pi * 33e3)
    assert s.kappa == pytest.approx(1 / 436e-6)
    with pytest.raises(ConfigError, match="unknown"):
        system_from_dict({"chii": "33khz"})


def test_parse_target():
    psi = parse_target("fock:3", 10)
    assert psi[3] == 1
    assert np.linalg.norm(parse_target("squeezed:6db", 40)) == pytest.approx(1)
    assert np.linalg.norm(parse_target("binomial:+X", 20)) == pytest.approx(1)
    for bad in ("fock:x", "cat:2", "binomial:+W"):
        with pytest.raises(ConfigError):
            parse_target(bad, 20)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema": 1, "lr": 0.01}))
    assert load_config(p, {"lr"}) == {"lr": 0.01}
    p.write_text(json.dumps({"lr": 0.01, "lrr": 1}))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(p, {"lr"})
    p.write_text(json.dumps({"schema": 9}))
    with pytest.raises(ConfigError, match="schema"):
        load_config(p, set())
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.json", set())


@pytest.fixture(scope="module")
def fock1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["optimize", "--target", "fock:1", "--N", "4", "--n-osc", "20", "--batch", "100",
                 "--lr", "0.01", "--epochs", "30", "--patience", "4", "--fidelity", "0.99",
                 "--out", str(out)])
    return out, code


def test_optimize_writes_outputs(fock1_run):
    out, code = fock1_run
    assert code == EXIT_OK
    circ = json.loads((out / "circuit.json").read_text())
    assert circ["summary"]["fidelity"] >= 0.99
    man = json.loads((out / "manifest_optimize.json").read_text())
    assert man["outputs"]["circuit.json"] == sha256_file(out / "circuit.json")
    assert man["seeds"] == [0]
    assert (out / "trace.csv").read_text().startswith("N,epoch")


def test_compile_is_byte_identical(fock1_run, tmp_path):
    out, _ = fock1_run
    digests = []
    for k in range(2):
        d = tmp_path / f"c{k}"
        assert main(["compile", "--circuit", str(out / "circuit.json"), "--alpha0", "10",
                     "--out", str(d)]) == EXIT_OK
        digests.append((sha256_file(d / "pulse.csv"), sha256_file(d / "pulse.json")))
    assert digests[0] == digests[1]


def test_simulate_and_tomo(fock1_run, tmp_path):
    out, _ = fock1_run
    assert main(["compile", "--circuit", str(out / "circuit.json"), "--alpha0", "10",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert main(["simulate", "--pulse", str(tmp_path / "pulse.csv"), "--target", "fock:1",
                 "--n-osc", "20", "--channels", "none", "--out", str(tmp_path)]) == EXIT_OK
    sim = json.loads((tmp_path / "sim.json").read_text())
    assert sim["fidelity"] > 0.98
    assert main(["tomo", "--rho", str(tmp_path / "rho.npy"), "--points", "31", "--dims", "6,8,10",
                 "--out", str(tmp_path)]) == EXIT_OK
    rec = json.loads((tmp_path / "reconstruction.json").read_text())
    assert rec["fidelity"] > 0.99
    assert main(["report", str(out), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "minimal_depths.csv").exists()


def test_exit_codes(tmp_path, fock1_run):
    out, _ = fock1_run
    assert main(["compile", "--circuit", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_MISSING
    assert main(["compile", "--circuit", str(out / "circuit.json"), "--chi", "fast",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["optimize", "--target", "cat:2", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["optimize", "--bogus"]) == EXIT_CONFIG
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", str(empty)]) == EXIT_MISSING
    assert main(["report", str(tmp_path / "nowhere")]) == EXIT_MISSING
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"learning-rate": 0.1}))
    assert main(["optimize", "--target", "fock:1", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    # unreachable fidelity at depth 1 is a numerical failure
    assert main(["optimize", "--target", "fock:3", "--N", "1", "--n-osc", "15", "--batch", "10",
                 "--epochs", "2", "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_drive_limit_is_config_error(fock1_run, tmp_path):
    out, _ = fock1_run
    sysf = tmp_path / "sys.json"
    sysf.write_text(json.dumps({"drive_max": "1mhz"}))
    assert main(["compile", "--circuit", str(out / "circuit.json"), "--alpha0", "30",
                 "--system", str(sysf), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_config_file_sets_options(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema": 1, "n-osc": 15, "batch": 10, "epochs": 2, "N": 1}))
    code = main(["optimize", "--target", "fock:0", "--config", str(cfg), "--fidelity", "0.9",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    man = json.loads((tmp_path / "manifest_optimize.json").read_text())
    assert man["config"]["n_osc"] == 15
