import math

from dataclasses import replace

import numpy as np
import pytest

from ecobounds.bounds import pointwise_bounds
from ecobounds.errors import ConfigError
from ecobounds.estimator import ModelSpec
from ecobounds.simulation.dgp import DgpConfig, full_support, generate, oracle_beta
from ecobounds.simulation.experiments import (
    loglog_slope,
    run_bias_order,
    run_delta_sweep,
    run_entropy_sweep,
    run_error_grid,
    run_margin_replacement,
    run_rate_study,
)


def linear_model(x, beta):
    return x @ beta


def test_design_moments():
    dataset, truth = generate(DgpConfig(n=10000, seed=1))
    continuous = dataset.v[:, :3]
    assert np.allclose(continuous.mean(axis=0), 1.0, atol=0.02)
    assert np.allclose(continuous.std(axis=0), 0.5, atol=0.02)
    assert np.allclose(dataset.v[:, 3:].mean(axis=0), 0.5, atol=0.03)
    assert dataset.v_discrete == (False, False, False, True, True, True)
    assert dataset.w_support.size == 8


def test_generate_deterministic():
    config = DgpConfig(n=500, seed=2, replicate=3)
    one, _ = generate(config)
    two, _ = generate(config)
    assert one.equals(two)
    other, _ = generate(replace(config, replicate=4))
    assert not one.equals(other)
    # replicates share one coefficient draw
    assert np.array_equal(config.coefficients().alpha_v, replace(config, replicate=4).coefficients().alpha_v)


def test_observed_outcomes_consistent():
    dataset, truth = generate(DgpConfig(n=2000, seed=3))
    study = dataset.e == 1
    expected = np.where(dataset.a == 1, truth.y1, truth.y0)
    assert np.array_equal(dataset.y[study], expected[study])
    assert np.all(dataset.bounds.contains(truth.y1)) and np.all(dataset.bounds.contains(truth.y0))
    assert np.array_equal(dataset.w[~study], truth.w[~study])


def test_no_w_effect_means_no_gap():
    dataset, truth = generate(DgpConfig(n=1000, seed=4, w_effect_scale=0.0))
    assert truth.true_delta(dataset.e == 0) == 0.0


def test_oracle_bounds_cover_true_effect():
    dataset, truth = generate(DgpConfig(n=10000, seed=5))
    frame = pointwise_bounds(dataset, truth.eta)
    observed = frame[frame["observed_w"]]
    cate = truth.cate[dataset.e == 0]
    assert np.all(observed["gamma_lower"].to_numpy() <= cate + 1e-6)
    assert np.all(cate <= observed["gamma_upper"].to_numpy() + 1e-6)


def test_full_support_order():
    support = full_support(2)
    assert support.levels == ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0))


def test_config_rejects():
    with pytest.raises(ConfigError):
        DgpConfig(n=0)
    with pytest.raises(ConfigError):
        DgpConfig(n_continuous=0, n_discrete=0)
    with pytest.raises(ConfigError):
        DgpConfig.from_config({"n": 10, "dimension": 4})


def test_oracle_beta_weight_invariance():
    config = DgpConfig(n=500, seed=6)
    plain = oracle_beta(config, ModelSpec(), n_oracle=50000)
    doubled = oracle_beta(config, ModelSpec(weight=lambda x: np.full(len(x), 2.0)), n_oracle=50000)
    assert np.allclose(plain, doubled, atol=1e-10)


def test_oracle_beta_needs_linear_model():
    with pytest.raises(ConfigError):
        oracle_beta(DgpConfig(n=100), ModelSpec(model=linear_model, beta_dim=11), n_oracle=1000)


def test_loglog_slope():
    eps = np.array([0.05, 0.1, 0.2])
    assert loglog_slope(eps, 3.0 * eps ** 2) == pytest.approx(2.0)
    assert math.isnan(loglog_slope([0.1], [1.0]))


def test_entropy_independent_w():
    result = run_entropy_sweep(DgpConfig(n=300, seed=7), [0.0], [0])
    entropy = result.table[result.table["metric"] == "entropy"]["value"]
    assert entropy.iloc[0] == pytest.approx(3 * math.log(2), abs=1e-12)
    assert math.isnan(result.metadata["spearman_entropy_width"])


def test_error_grid_rows():
    result = run_error_grid(DgpConfig(n=600, seed=8), [(0.0, 0.0), (0.05, 0.05)], [0, 1], n_oracle=20000)
    assert len(result.table) == 2 * 2 * 2
    assert set(result.table["estimator"]) == {"plugin", "bias-corrected"}
    zero = result.table[result.table["eps_outcome"] == 0.0]
    assert np.all(zero["realized_outcome"] == 0.0)
    summary = result.summary()
    assert len(summary) == 4


def test_delta_sweep_zero_collapses():
    result = run_delta_sweep(DgpConfig(n=1000, seed=9), [0.0], [0])
    table = result.table
    width = table[(table["estimator"] == "bounds") & (table["metric"] == "mean_width")]["value"]
    assert abs(width.iloc[0]) < 1e-10
    pointwise = table[(table["estimator"] == "bounds") & (table["metric"] == "mean_width_pointwise")]["value"]
    assert abs(pointwise.iloc[0]) < 1e-10
    truth = table[table["estimator"] == "truth"]
    assert set(truth["metric"]) == {"true_delta", "mean_delta"}


def test_margin_replacement_zero_shift():
    result = run_margin_replacement(DgpConfig(n=500, seed=10), [0.0, 0.1], [0], n_oracle=20000)
    shifts = result.table[(result.table["metric"].str.startswith("shift_")) & (result.table["cell"] == 0.0)]
    assert np.all(shifts["value"] == 0.0)


@pytest.mark.slow
def test_second_order_bias_joint_pair():
    result = run_bias_order(
        DgpConfig(n=5000, seed=11), ("mu1", "pi1"), [0.05, 0.1, 0.2], range(500), n_oracle=200000
    )
    assert 1.5 <= result.metadata["loglog_slope"] <= 2.5


@pytest.mark.slow
def test_second_order_bias_nu():
    result = run_bias_order(DgpConfig(n=5000, seed=12), ("nu",), [0.05, 0.1, 0.2], range(500), n_oracle=200000)
    assert result.metadata["loglog_slope"] >= 1.5


@pytest.mark.slow
def test_outcome_error_alone_is_unbiased():
    result = run_bias_order(DgpConfig(n=5000, seed=13), ("mu1",), [0.05, 0.1, 0.2], range(500), n_oracle=200000)
    assert all(value <= 3.0 for value in result.metadata["max_bias_in_se"])


@pytest.mark.slow
def test_margin_replacement_order():
    result = run_margin_replacement(DgpConfig(n=5000, seed=14), [0.05, 0.1, 0.2], range(500), n_oracle=200000)
    assert result.metadata["loglog_slope"] >= 1.5


@pytest.mark.slow
def test_root_n_rate_and_coverage():
    result = run_rate_study(DgpConfig(seed=15), [1000, 4000, 16000], range(200), n_oracle=10 ** 6)
    scaled = list(result.metadata["scaled_error"].values())
    assert max(scaled) <= 2 * min(scaled)
    for coverage in result.metadata["coverage"].values():
        assert 0.9 <= coverage <= 0.99


@pytest.mark.slow
def test_entropy_width_monotone():
    result = run_entropy_sweep(DgpConfig(n=4000, seed=16), np.linspace(0.0, 4.0, 10), range(20))
    assert result.metadata["spearman_entropy_width"] > 0.8


@pytest.mark.slow
def test_coverage_at_true_delta():
    config = DgpConfig(n=4000, seed=17)
    dataset, truth = generate(config)
    delta = truth.true_delta(dataset.e == 0)
    result = run_delta_sweep(config, [delta], [0])
    table = result.table.set_index(["estimator", "metric"])["value"]
    assert table[("bounds", "coverage_pointwise")] >= 0.95
    assert table[("dr-baseline", "coverage")] < 0.7
