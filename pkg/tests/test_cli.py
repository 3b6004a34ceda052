import csv
import json
from pathlib import Path

import numpy as np
import pytest

from freqlemma import cli, io
from freqlemma.benchmarks import batch_reactor
from freqlemma.cli import build_parser, main
from freqlemma.core import FrequencyGrid, SpectraCollection, Spectrum
from freqlemma.models.run_config import COMMAND_CONFIGS
from freqlemma.plantlab import transfer_eval


CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SHIPPED = {
    "batch_reactor_direct.json": "gen-data",
    "batch_reactor_noisy.json": "gen-data",
    "unstable_siso_frf.json": "gen-data",
    "estimate_frf_unstable_siso.json": "estimate-frf",
    "check_pe_batch_reactor.json": "check-pe",
    "simulate_batch_reactor.json": "simulate",
    "freqresp_batch_reactor.json": "freqresp",
    "lqr_batch_reactor.json": "lqr",
    "freepc_unstable_siso.json": "freepc",
    "deepc_unstable_siso.json": "deepc",
    "mpc_unstable_siso.json": "mpc",
    "monte_carlo_closed_loop.json": "monte-carlo",
    "monte_carlo_simulation_error.json": "monte-carlo",
}

PROBLEM = {
    "horizon": 10, "past_length": 6, "Q": [[1.0]], "R": [[0.01]],
    "u_lower": [-3.0], "u_upper": [0.5], "y_lower": [-0.5], "y_upper": [1.2],
    "lambda_sigma": 1e5, "lambda_g": 0.0,
}


def write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def run(command, config, out):
    return main([command, "--config", str(config), "--out", str(out)])


@pytest.fixture
def reactor_dataset(tmp_path):
    out = tmp_path / "data"
    cfg = write_config(tmp_path / "gen.json", {"plant": {"preset": "batch_reactor"}, "grid": {"M": 10}, "seed": 0})
    assert run("gen-data", cfg, out) == 0
    return out / "dataset.json"


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_shipped_configs_validate(name):
    io.load_model(CONFIGS / name, COMMAND_CONFIGS[SHIPPED[name]])


def test_gen_data_writes_dataset_and_summary(reactor_dataset):
    summary = json.loads((reactor_dataset.parent / "summary.json").read_text())
    assert summary["E"] == 2 and summary["has_states"]
    assert io.read_dataset(reactor_dataset).grid.M == 10


def test_check_pe(tmp_path, reactor_dataset, capsys):
    cfg = write_config(tmp_path / "pe.json", {"dataset": str(reactor_dataset), "order": 10})
    assert run("check-pe", cfg, tmp_path / "pe") == 0
    assert "achieved: True" in capsys.readouterr().out


def test_check_pe_on_zero_data_reports_failure(tmp_path, capsys):
    grid = FrequencyGrid(5)
    zeros = SpectraCollection((Spectrum.zeros(grid, 1),), (Spectrum.zeros(grid, 1),))
    path = io.write_dataset(tmp_path / "zeros.json", zeros)
    cfg = write_config(tmp_path / "pe.json", {"dataset": str(path), "order": 3})
    assert run("check-pe", cfg, tmp_path / "pe") == 0
    summary = json.loads((tmp_path / "pe" / "summary.json").read_text())
    assert summary["achieved"] is False and summary["rank_found"] == 0


def test_simulate_reports_error_against_the_plant(tmp_path, reactor_dataset):
    payload = json.loads((CONFIGS / "simulate_batch_reactor.json").read_text())
    payload["dataset"] = str(reactor_dataset)
    cfg = write_config(tmp_path / "sim.json", payload)
    out = tmp_path / "sim"
    assert run("simulate", cfg, out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["relative_error"] <= 1e-8
    with (out / "simulation.csv").open() as f:
        header = next(csv.reader(f))
    assert header == ["k", "u1", "u2", "y1", "y2", "y1_true", "y2_true"]


def test_inconsistent_past_exits_with_domain_error(tmp_path, reactor_dataset, rng):
    payload = {
        "dataset": str(reactor_dataset),
        "u_past": rng.standard_normal((3, 2)).tolist(),
        "y_past": rng.standard_normal((3, 2)).tolist(),
        "u_future": rng.standard_normal((2, 2)).tolist(),
    }
    out = tmp_path / "sim"
    assert run("simulate", write_config(tmp_path / "sim.json", payload), out) == 1
    assert json.loads((out / "error.json").read_text())["error"] == "InconsistentPast"


def test_missing_config_exits_with_config_error(tmp_path, capsys):
    out = tmp_path / "x"
    assert run("lqr", tmp_path / "missing.json", out) == 2
    assert json.loads((out / "error.json").read_text())["error"] == "ConfigError"
    assert "ConfigError" in capsys.readouterr().err


def test_invalid_config_exits_with_config_error(tmp_path):
    cfg = write_config(tmp_path / "bad.json", {"order": 0, "dataset": "d.json"})
    assert run("check-pe", cfg, tmp_path / "x") == 2


def test_invalid_derived_model_exits_with_config_error(tmp_path, reactor_dataset, monkeypatch):
    def rejects(config, out):
        return COMMAND_CONFIGS["check-pe"].model_validate({**config.model_dump(), "order": 0})

    monkeypatch.setitem(cli.COMMANDS, "check-pe", rejects)
    cfg = write_config(tmp_path / "pe.json", {"dataset": str(reactor_dataset), "order": 10})
    out = tmp_path / "x"
    assert run("check-pe", cfg, out) == 2
    assert json.loads((out / "error.json").read_text())["error"] == "ValidationError"


def test_unwritable_output_exits_with_domain_error(tmp_path, reactor_dataset, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    cfg = write_config(tmp_path / "pe.json", {"dataset": str(reactor_dataset), "order": 10})
    assert run("check-pe", cfg, blocker / "out") == 1
    assert not (blocker / "out").exists()
    assert "\"error\": \"" in capsys.readouterr().err


def test_overrides(tmp_path, reactor_dataset):
    cfg = write_config(tmp_path / "pe.json", {"dataset": str(reactor_dataset), "order": 10})
    assert main(["check-pe", "--config", cfg, "--out", str(tmp_path / "a"), "--tolerance", "1e-9"]) == 0
    assert main(["check-pe", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "4"]) == 2


def test_lqr_matches_reference_gain(tmp_path, reactor_dataset, reactor_lqr_reference):
    payload = json.loads((CONFIGS / "lqr_batch_reactor.json").read_text())
    payload["dataset"] = str(reactor_dataset)
    out = tmp_path / "lqr"
    assert run("lqr", write_config(tmp_path / "lqr.json", payload), out) == 0
    result = json.loads((out / "lqr.json").read_text())
    P_ref, K_ref = reactor_lqr_reference
    np.testing.assert_allclose(result["P"], P_ref, atol=5e-4)
    np.testing.assert_allclose(result["K"], K_ref, atol=5e-4)
    assert result["diagnostics"]["status"] in ("optimal", "inaccurate")


def test_freqresp_matches_transfer_matrix(tmp_path, reactor_dataset):
    payload = json.loads((CONFIGS / "freqresp_batch_reactor.json").read_text())
    payload["dataset"] = str(reactor_dataset)
    out = tmp_path / "fr"
    assert run("freqresp", write_config(tmp_path / "fr.json", payload), out) == 0
    points = json.loads((out / "freqresp.json").read_text())["points"]
    assert len(points) == 3
    H = io.from_complex_pairs(points[0]["H"])
    np.testing.assert_allclose(H, transfer_eval(batch_reactor(), 0.3 + 0.4j), rtol=1e-6, atol=1e-9)


def test_closed_loop_pipeline(tmp_path):
    data = tmp_path / "siso"
    gen = {
        "plant": {"preset": "unstable_siso"},
        "controller": {"preset": "unstable_siso_controller"},
        "grid": {"M": 20},
        "seed": 7,
        "mode": "closed_loop",
        "dataset": "frf",
        "excitation": {"amplitude": 1.0, "periods": 5, "transient_periods": 20},
    }
    assert run("gen-data", write_config(tmp_path / "gen.json", gen), data) == 0
    assert (data / "raw_e1.csv").exists() and (data / "frf.json").exists()

    loop = {
        "plant": {"preset": "unstable_siso"},
        "problem": PROBLEM,
        "seed": 0,
        "steps": 3,
        "initial_state": [5.618, 3.7635],
        "bootstrap": "free_response",
        "dataset": str(data / "dataset.json"),
        "trajectory": str(data / "raw_e1.csv"),
    }
    cfg = write_config(tmp_path / "loop.json", loop)
    for command in ("freepc", "deepc", "mpc"):
        out = tmp_path / command
        assert run(command, cfg, out) == 0
        with (out / "closed_loop.csv").open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["k", "u1", "y1", "J_cumulative"]
        assert len(rows) == 4
        assert float(rows[1][1]) == pytest.approx(-3.0, abs=1e-3)


def test_small_monte_carlo(tmp_path):
    payload = {
        "study": "simulation_error",
        "plant": {"preset": "unstable_siso"},
        "controller": {"preset": "unstable_siso_controller"},
        "grid": {"M": 4},
        "periods": [2, 3],
        "runs": 2,
        "seed": 1,
        "workers": 1,
        "excitation": {"transient_periods": 10},
        "dataset": "averaged",
        "past_length": 2,
        "horizon": 2,
    }
    out = tmp_path / "mc"
    assert run("monte-carlo", write_config(tmp_path / "mc.json", payload), out) == 0
    lines = (out / "monte_carlo.csv").read_text().splitlines()
    assert lines[0] == "run,p,error"
    assert len(lines) == 5
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["errors"]) == {"2", "3"}


def test_serve_arguments():
    args = build_parser().parse_args(["--log-level", "debug", "serve", "--port", "9000"])
    assert args.command == "serve" and args.port == 9000 and args.log_level == "debug"
