import json

import numpy as np
import pandas as pd
import pytest

from ecobounds.__main__ import main
from ecobounds.commands.config import RunConfig
from ecobounds.errors import ConfigError
from ecobounds.reporting import ERROR_FILE, ErrorReporter, filter_sensitive_params
from ecobounds.state import THREADS_ENV, current_state


def _write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def _trial_csv(path, n=236, missing_y=2):
    """ Single-trial style data: every row complete except ``missing_y`` outcomes. """
    rng = np.random.default_rng(0)
    frame = pd.DataFrame(
        {
            "x1": rng.normal(size=n),
            "x2": rng.integers(0, 2, size=n),
            "g": rng.integers(0, 2, size=n),
            "t": rng.integers(0, 2, size=n),
            "y": rng.uniform(1.0, 9.0, size=n),
        }
    )
    frame.loc[: missing_y - 1, "y"] = np.nan
    frame.to_csv(path, index=False)
    return str(path)


def _ingest_config(tmp_path, csv, **overrides):
    payload = {
        "seed": 0,
        "out": str(tmp_path / "out"),
        "data": {
            "csv": csv,
            "columns": {"v": ["x1", "x2"], "w": ["g"], "a": "t", "y": "y"},
            "e_random_fraction": 0.5,
            "bounds": [0, 10],
        },
    }
    payload["data"].update(overrides)
    return _write_config(tmp_path / "config.json", payload)


def _error(out_dir):
    with open(str(out_dir / ERROR_FILE)) as f:
        return json.load(f)


def test_ingest_drops_incomplete_rows(tmp_path):
    config = _ingest_config(tmp_path, _trial_csv(tmp_path / "trial.csv"))
    assert main(["ingest", "-c", config]) == 0
    with open(str(tmp_path / "out" / "ingest.json")) as f:
        report = json.load(f)
    assert report["rows_read"] == 236
    assert report["rows_dropped"] == 2
    assert report["n"] == 234
    assert report["n_study"] + report["n_target"] == 234
    assert (tmp_path / "out" / "dataset.csv").exists()
    assert (tmp_path / "out" / "dataset.csv.json").exists()


def test_ingest_empty_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    config = _ingest_config(tmp_path, str(empty))
    assert main(["ingest", "-c", config]) == 3
    record = _error(tmp_path / "out")
    assert record["error"] == "DataError"
    assert record["message"] == "no data rows"


def test_ingest_missing_column(tmp_path):
    config = _ingest_config(
        tmp_path,
        _trial_csv(tmp_path / "trial.csv"),
        columns={"v": ["x1", "x9"], "w": ["g"], "a": "t", "y": "y"},
    )
    assert main(["ingest", "-c", config]) == 2
    record = _error(tmp_path / "out")
    assert "x9" in record["message"]
    assert record["details"]["columns"] == ["x9"]


def test_unreadable_config(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["ingest", "-c", str(broken), "--out", str(tmp_path / "out")]) == 2
    assert _error(tmp_path / "out")["error"] == "ConfigError"


def test_unknown_section(tmp_path):
    config = _write_config(tmp_path / "config.json", {"out": str(tmp_path / "out"), "plots": {}})
    assert main(["simulate", "-c", config]) == 2


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / "sim"
    config = _write_config(
        tmp_path / "simulate.json", {"seed": 1, "out": str(out), "simulation": {"dgp": {"n": 800}}}
    )
    assert main(["simulate", "-c", config]) == 0
    return str(out / "dataset.csv")


def _estimate_config(tmp_path, name, dataset, out):
    return _write_config(
        tmp_path / name,
        {"seed": 1, "out": str(out), "data": {"dataset": dataset}, "model": {"deltas": [0.5]}},
    )


def test_simulate_outputs(tmp_path, simulated):
    out = tmp_path / "sim"
    truth = pd.read_csv(str(out / "truth.csv"))
    assert len(truth) == 800
    with open(str(out / "metadata.json")) as f:
        metadata = json.load(f)
    assert metadata["dgp"]["n"] == 800
    assert metadata["true_delta"] >= metadata["mean_delta"]


def test_estimate_deterministic(tmp_path, simulated):
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["estimate", "-c", _estimate_config(tmp_path, "a.json", simulated, first)]) == 0
    assert main(["estimate", "-c", _estimate_config(tmp_path, "b.json", simulated, second)]) == 0
    for name in ("beta.json", "intervals.json", "bounds.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    with open(str(first / "beta.json")) as f:
        estimates = json.load(f)["estimates"]
    assert [e["side"] for e in estimates] == ["lower", "upper"]
    assert all(e["delta"] == 0.5 for e in estimates)
    bounds = pd.read_csv(str(first / "bounds.csv"))
    assert np.all(bounds["gamma_lower"] <= bounds["gamma_upper"])
    with open(str(first / "intervals.json")) as f:
        intervals = json.load(f)["intervals"]
    for record in intervals:
        low, high = record["mean_bound_ci"]
        assert low <= record["mean_bound"] <= high
    means = {record["side"]: record["mean_bound"] for record in intervals}
    assert means["lower"] <= means["upper"]


@pytest.mark.slow
def test_estimate_bootstrap_mean_bound(tmp_path, simulated):
    out = tmp_path / "boot"
    config = _write_config(
        tmp_path / "boot.json",
        {
            "seed": 1,
            "out": str(out),
            "data": {"dataset": simulated},
            "model": {"deltas": [0.5]},
            "inference": {"method": "bootstrap", "B": 100},
        },
    )
    assert main(["estimate", "-c", config]) == 0
    with open(str(out / "intervals.json")) as f:
        intervals = json.load(f)["intervals"]
    assert [record["inference"] for record in intervals] == ["bootstrap", "bootstrap"]
    for record in intervals:
        low, high = record["mean_bound_ci"]
        assert low <= high


def test_output_directory_guard(tmp_path, simulated):
    out = tmp_path / "est"
    config = _estimate_config(tmp_path, "est.json", simulated, out)
    assert main(["bounds", "-c", config]) == 0
    assert main(["bounds", "-c", config, "--seed", "7"]) == 2
    assert _error(out)["error"] == "ConfigError"
    assert main(["bounds", "-c", config, "--seed", "7", "--force"]) == 0


def test_margin_command(tmp_path, simulated):
    out = tmp_path / "margin"
    config = _write_config(
        tmp_path / "margin.json",
        {"seed": 1, "out": str(out), "data": {"dataset": simulated}, "margin": {"t_grid": [1.0, 5.0, 50.0]}},
    )
    assert main(["margin", "-c", config]) == 0
    table = pd.read_csv(str(out / "margin.csv"))
    assert len(table) == 6
    assert np.all(np.diff(table[table["side"] == "lower"]["fraction"]) >= 0)


def test_benchmark_command(tmp_path, simulated):
    out = tmp_path / "bench"
    config = _write_config(
        tmp_path / "bench.json",
        {"seed": 1, "out": str(out), "data": {"dataset": simulated}, "benchmark": {"holdout_size": 1}},
    )
    assert main(["benchmark", "-c", config]) == 0
    table = pd.read_csv(str(out / "benchmark.csv"))
    assert len(table) == 3
    with open(str(out / "benchmark.json")) as f:
        record = json.load(f)
    assert record["delta_hat"] == pytest.approx(table["statistic"].mean())


def test_error_grid_command(tmp_path):
    out = tmp_path / "grid"
    config = _write_config(
        tmp_path / "grid.json",
        {
            "out": str(out),
            "simulation": {
                "dgp": {"n": 400},
                "seeds": 2,
                "grid": [[0, 0], [0.05, 0], [0, 0.05]],
                "n_oracle": 10000,
            },
        },
    )
    assert main(["error-grid", "-c", config]) == 0
    results = pd.read_csv(str(out / "results.csv"))
    assert len(results) == 3 * 2 * 2


def test_run_config_defaults():
    config = RunConfig({})
    assert config.sides == ["lower", "upper"]
    assert config.deltas == [None]
    assert config.replicates == 200
    assert config.seeds == list(range(10))
    assert RunConfig({"out": "elsewhere"}).fingerprint == config.fingerprint
    assert RunConfig({"seed": 3}).fingerprint != config.fingerprint
    assert RunConfig({"estimator": {"method": "both"}}).methods == ["plugin", "bias-corrected"]


@pytest.mark.parametrize(
    "payload",
    [
        {"inference": {"B": 2}},
        {"model": {"sides": ["middle"]}},
        {"estimator": {"fraction": 1.0}},
        {"learner": {"family": "forest"}},
        {"data": {"csv": "x.csv", "columns": {"v": ["a"], "w": ["a"], "a": "t", "y": "y", "e": "e"}, "bounds": [0, 1]}},
    ],
)
def test_run_config_rejects(payload):
    with pytest.raises(ConfigError):
        RunConfig(payload)


def test_threads_budget(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    current_state.set_threads()
    assert current_state.threads == 3
    current_state.set_threads(2)
    assert current_state.threads == 2
    current_state.set_threads(0)
    assert current_state.threads == 1


def test_reporter_filters_secrets(tmp_path):
    assert filter_sensitive_params({"sentry_dsn": "x", "seed": 1}, ("*dsn*",)) == {"sentry_dsn": "**********", "seed": 1}

    def fail():
        raise RuntimeError("boom")

    reporter = ErrorReporter(out_dir=str(tmp_path), config={"api_token": "secret"})
    assert reporter(fail) == 1
    record = _error(tmp_path)
    assert record["message"] == "boom"
    assert record["config"]["api_token"] == "**********"
