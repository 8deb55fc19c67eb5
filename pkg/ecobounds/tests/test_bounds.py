import logging

import numpy as np
import pytest

from ecobounds.bounds import (
    LOWER,
    UPPER,
    SensitivityLevel,
    branches,
    compute_bounds,
    pointwise_bounds,
    sensitivity_bounds,
    worst_case_bounds,
)
from ecobounds.data_model import OutcomeBounds
from ecobounds.errors import ConfigError, EmptyCellError

from .utils import constant_eta, random_dataset

UNIT = OutcomeBounds(0.0, 1.0)


def test_worst_case_example():
    pair = worst_case_bounds(0.3, 0.5, UNIT)
    assert pair.tau_lower == pytest.approx(-0.4)
    assert pair.gamma_lower == pytest.approx(-0.4)
    assert pair.tau_upper == pytest.approx(1.6)
    assert pair.gamma_upper == pytest.approx(1.0)
    assert not pair.clipped_lower
    assert pair.clipped_upper
    assert pair.contains(0.3)


@pytest.mark.parametrize("delta_mu", [-0.5, 0.0, 0.7])
def test_full_mass_collapses(delta_mu):
    pair = worst_case_bounds(delta_mu, 1.0, UNIT)
    assert pair.gamma_lower == pytest.approx(delta_mu)
    assert pair.gamma_upper == pytest.approx(delta_mu)
    assert pair.width == pytest.approx(0.0)


def test_small_cell_clips_both():
    pair = worst_case_bounds(0.0, 0.25, OutcomeBounds(-1.0, 1.0))
    assert pair.tau_lower == pytest.approx(-6.0)
    assert pair.tau_upper == pytest.approx(6.0)
    assert (pair.gamma_lower, pair.gamma_upper) == (pytest.approx(-2.0), pytest.approx(2.0))
    assert pair.clipped_lower and pair.clipped_upper


def test_empty_and_thin_cells():
    with pytest.raises(EmptyCellError):
        worst_case_bounds(0.1, 0.0, UNIT)
    assert worst_case_bounds(0.1, 0.005, UNIT).thin_cell
    assert not worst_case_bounds(0.1, 0.5, UNIT).thin_cell

    values = compute_bounds([0.1, 0.1], [0.0, 0.5], UNIT)
    assert list(values["empty_cell"]) == [True, False]
    assert np.isnan(values["gamma_lower"][0])
    assert not np.isnan(values["gamma_lower"][1])


def test_thin_cells_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="ecobounds.bounds"):
        worst_case_bounds(0.1, 0.005, UNIT)
    assert "thin cell: nu=0.005" in caplog.text

    caplog.clear()
    dataset = random_dataset(n=50)
    with caplog.at_level(logging.WARNING, logger="ecobounds.bounds"):
        frame = pointwise_bounds(dataset, constant_eta(UNIT, [0.005, 0.995]))
    assert frame["thin_cell"].sum() == np.sum(dataset.e == 0)
    assert "%d thin cells" % np.sum(dataset.e == 0) in caplog.text


def test_sensitivity_example():
    pair = sensitivity_bounds(0.3, 0.5, UNIT, SensitivityLevel(0.2))
    assert pair.gamma_lower == pytest.approx(0.1)
    assert pair.gamma_upper == pytest.approx(0.5)


def test_sensitivity_level_checked():
    with pytest.raises(ConfigError):
        SensitivityLevel(-0.1)
    with pytest.raises(ConfigError):
        sensitivity_bounds(0.3, 0.5, UNIT, SensitivityLevel(1.5))


def test_sensitivity_zero_collapses():
    rng = np.random.default_rng(1)
    delta_mu = rng.uniform(-1.0, 1.0, size=500)
    nu = rng.uniform(0.01, 1.0, size=500)
    values = compute_bounds(delta_mu, nu, UNIT, delta=0.0)
    assert np.max(np.abs(values["gamma_lower"] - delta_mu)) < 1e-10
    assert np.max(np.abs(values["gamma_upper"] - delta_mu)) < 1e-10


@pytest.mark.parametrize("delta_mu", [0.0, 0.3, 0.8])
def test_sensitivity_full_width_matches_worst_case(delta_mu):
    worst = worst_case_bounds(delta_mu, 0.5, UNIT)
    relaxed = sensitivity_bounds(delta_mu, 0.5, UNIT, SensitivityLevel(UNIT.width))
    assert relaxed.gamma_lower == pytest.approx(worst.gamma_lower)
    assert relaxed.gamma_upper == pytest.approx(worst.gamma_upper)


@pytest.mark.parametrize("delta_mu,expected", [(-0.1, (-1.0, 0.9)), (0.1, (-0.9, 1.0))])
def test_sensitivity_full_width_small_nu_is_tighter(delta_mu, expected):
    # with small ν the Δμ ∓ δ floor and ceiling bind inside the worst-case bounds
    worst = worst_case_bounds(delta_mu, 0.1, UNIT)
    relaxed = sensitivity_bounds(delta_mu, 0.1, UNIT, SensitivityLevel(UNIT.width))
    assert (worst.gamma_lower, worst.gamma_upper) == pytest.approx((-1.0, 1.0))
    assert (relaxed.gamma_lower, relaxed.gamma_upper) == pytest.approx(expected)


def test_sensitivity_full_width_condition():
    rng = np.random.default_rng(7)
    delta_mu = rng.uniform(-1.0, 1.0, size=500)
    nu = rng.uniform(0.01, 1.0, size=500)
    delta = UNIT.width
    worst = compute_bounds(delta_mu, nu, UNIT)
    relaxed = compute_bounds(delta_mu, nu, UNIT, delta=delta)
    reach = delta * np.minimum(1.0, (1.0 - nu) / nu)
    assert np.allclose(relaxed["gamma_lower"], np.maximum(worst["gamma_lower"], delta_mu - reach))
    assert np.allclose(relaxed["gamma_upper"], np.minimum(worst["gamma_upper"], delta_mu + reach))
    assert np.all(relaxed["gamma_lower"] >= worst["gamma_lower"] - 1e-12)
    assert np.all(relaxed["gamma_upper"] <= worst["gamma_upper"] + 1e-12)


def test_worst_case_is_sharp():
    """ γ bounds equal the extremes over all conformable effects in the other cells. """
    rng = np.random.default_rng(2)
    a = rng.uniform(-2.0, 0.0, size=1000)
    b = a + rng.uniform(0.1, 3.0, size=1000)
    nu = rng.uniform(0.01, 1.0, size=1000)
    width = b - a
    delta_mu = rng.uniform(-1.0, 1.0, size=1000) * width
    alpha = np.linspace(-1.0, 1.0, 2001)[None, :] * width[:, None]
    implied = (delta_mu[:, None] - alpha * (1.0 - nu[:, None])) / nu[:, None]
    implied = np.clip(implied, -width[:, None], width[:, None])
    for i in range(1000):
        pair = worst_case_bounds(delta_mu[i], nu[i], OutcomeBounds(a[i], b[i]))
        assert pair.gamma_lower == pytest.approx(implied[i].min(), abs=1e-6)
        assert pair.gamma_upper == pytest.approx(implied[i].max(), abs=1e-6)


def test_sensitivity_nested():
    rng = np.random.default_rng(3)
    delta_mu = rng.uniform(-1.0, 1.0, size=300)
    nu = rng.uniform(0.01, 1.0, size=300)
    deltas = np.sort(rng.uniform(0.0, 1.0, size=6))
    previous = None
    for delta in deltas:
        values = compute_bounds(delta_mu, nu, UNIT, delta=delta)
        if previous is not None:
            assert np.all(values["gamma_lower"] <= previous["gamma_lower"] + 1e-12)
            assert np.all(values["gamma_upper"] >= previous["gamma_upper"] - 1e-12)
        previous = values
    worst = compute_bounds(delta_mu, nu, UNIT)
    assert np.all(previous["gamma_lower"] >= worst["gamma_lower"] - 1e-12)
    assert np.all(previous["gamma_upper"] <= worst["gamma_upper"] + 1e-12)


def test_width_shrinks_with_mass():
    nu = np.linspace(0.01, 1.0, 200)
    values = compute_bounds(np.full_like(nu, 0.2), nu, UNIT)
    width = values["gamma_upper"] - values["gamma_lower"]
    assert np.all(np.diff(width) <= 1e-12)
    assert width[-1] == pytest.approx(0.0)


def test_branches_tie_prefers_tau():
    # τ_ℓ = a - b exactly at ν = 0.25, Δμ = 0.5 on [0, 1]
    pieces = branches(np.array([0.5]), np.array([0.25]), UNIT, LOWER)
    assert pieces.values[0, 0] == pytest.approx(pieces.values[0, 1])
    assert pieces.select()[0, 0]
    pieces = branches(np.array([-0.5]), np.array([0.25]), UNIT, UPPER)
    assert pieces.select()[0, 0]


def test_pointwise_bounds_constant_eta():
    dataset = random_dataset(n=120, n_levels=4)
    eta = constant_eta(dataset.bounds, [0.25, 0.25, 0.25, 0.25], mu0=0.3, mu1=0.6)
    frame = pointwise_bounds(dataset, eta)
    assert len(frame) == dataset.n_target * 4
    assert frame["observed_w"].sum() == dataset.n_target
    expected = worst_case_bounds(0.3, 0.25, dataset.bounds)
    assert np.allclose(frame["gamma_lower"], expected.gamma_lower)
    assert np.allclose(frame["gamma_upper"], expected.gamma_upper)
    assert np.allclose(frame["nu"], 0.25)
    assert not frame["empty_cell"].any()

    relaxed = pointwise_bounds(dataset, eta, SensitivityLevel(0.0))
    assert np.allclose(relaxed["gamma_lower"], 0.3)
    assert np.allclose(relaxed["gamma_upper"], 0.3)
