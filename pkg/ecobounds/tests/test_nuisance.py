import numpy as np
import pytest

from ecobounds.data_model import MISSING, Dataset, OutcomeBounds
from ecobounds.errors import ConfigError, OverlapError, PositivityError
from ecobounds.learners import LOGISTIC, MULTINOMIAL, LearnerSpec
from ecobounds.nuisance import (
    CONSTANT_SHIFT,
    EPS_P,
    SMOOTH,
    PerturbationSpec,
    clip_simplex,
    fit_nuisances,
    fit_outcome,
    fit_propensities,
    fit_w_model,
    perturb,
)

from .utils import constant_eta, level_support, random_dataset


def _dataset(v, e, w, a, y, bounds=(-10.0, 10.0), n_levels=2):
    study = np.asarray(e) == 1
    return Dataset(
        v=v,
        e=e,
        w=np.where(study, MISSING, w),
        a=np.where(study, a, MISSING),
        y=np.where(study, y, np.nan),
        bounds=OutcomeBounds(*bounds),
        w_support=level_support(n_levels),
    )


def test_clip_simplex():
    p = clip_simplex([[0.0, 0.3, 0.7], [0.001, 0.001, 0.998], [1.0, 1.0, 2.0]], eps=0.01)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.all(p >= 0.01 - 1e-15)
    assert np.allclose(p[2], [0.25, 0.25, 0.5])
    assert clip_simplex([[0.3], [0.9]]).tolist() == [[1.0], [1.0]]


def test_outcome_noiseless():
    rng = np.random.default_rng(0)
    n = 400
    v = rng.normal(size=(n, 1))
    a = rng.integers(0, 2, size=n)
    e = rng.integers(0, 2, size=n)
    dataset = _dataset(v, e, np.zeros(n), a, 2.0 * v[:, 0])
    mu0, mu1 = fit_outcome(dataset, LearnerSpec())
    study = dataset.e == 1
    assert np.max(np.abs(mu1(v[study]) - 2.0 * v[study, 0])) < 1e-6
    assert np.max(np.abs(mu0(v[study]) - 2.0 * v[study, 0])) < 1e-6


def test_outcome_constant():
    dataset = random_dataset(n=200, y_fn=lambda v, a, w: np.full(len(a), 0.4))
    mu0, mu1 = fit_outcome(dataset, LearnerSpec())
    assert np.allclose(mu0(dataset.v), 0.4, atol=1e-10)
    assert np.allclose(mu1(dataset.v), 0.4, atol=1e-10)


def test_outcome_clipped_to_bounds():
    rng = np.random.default_rng(1)
    n = 300
    v = rng.uniform(0.0, 1.0, size=(n, 1))
    dataset = _dataset(v, rng.integers(0, 2, size=n), np.zeros(n), rng.integers(0, 2, size=n), v[:, 0], bounds=(0.0, 1.0))
    mu0, _ = fit_outcome(dataset, LearnerSpec())
    assert mu0(np.array([[5.0]]))[0] == 1.0


def test_single_arm():
    dataset = random_dataset(n=100)
    treated = Dataset(
        v=dataset.v,
        e=dataset.e,
        w=dataset.w,
        a=np.where(dataset.e == 1, 1, MISSING),
        y=dataset.y,
        bounds=dataset.bounds,
        w_support=dataset.w_support,
    )
    with pytest.raises(PositivityError):
        fit_outcome(treated, LearnerSpec())
    with pytest.raises(PositivityError):
        fit_propensities(treated, LearnerSpec(family=LOGISTIC))


def test_single_population():
    dataset = random_dataset(n=100)
    study = dataset.subset(np.flatnonzero(dataset.e == 1))
    with pytest.raises(OverlapError):
        fit_propensities(study, LearnerSpec(family=LOGISTIC))


def test_propensity_fair_coin():
    dataset = random_dataset(n=4000, seed=5)
    pi0, pi1, rho0 = fit_propensities(dataset, LearnerSpec(family=LOGISTIC))
    v = dataset.v
    assert np.max(np.abs(rho0(v) - 0.5)) < 0.05
    total = pi0(v) + pi1(v) + rho0(v)
    assert np.allclose(total, 1.0, atol=1e-8)
    for values in (pi0(v), pi1(v), rho0(v)):
        assert np.all(values >= EPS_P - 1e-12) and np.all(values <= 1.0 - EPS_P + 1e-12)


def test_w_model_uniform():
    rng = np.random.default_rng(6)
    n = 8000
    v = rng.normal(size=(n, 1))
    dataset = _dataset(v, np.zeros(n, dtype=int), rng.integers(0, 4, size=n), np.zeros(n), np.zeros(n), n_levels=4)
    nu = fit_w_model(dataset, LearnerSpec(family=MULTINOMIAL))(v)
    assert np.max(np.abs(nu - 0.25)) < 0.05


def test_w_model_deterministic_level():
    rng = np.random.default_rng(7)
    n = 2000
    v = rng.uniform(0.5, 2.0, size=(n, 1)) * np.where(rng.uniform(size=(n, 1)) < 0.5, -1.0, 1.0)
    w = (v[:, 0] > 0).astype(int)
    dataset = _dataset(v, np.zeros(n, dtype=int), w, np.zeros(n), np.zeros(n))
    nu = fit_w_model(dataset, LearnerSpec(family=MULTINOMIAL))(v)
    realized = nu[np.arange(n), w]
    assert np.all(realized >= 1.0 - EPS_P - 1e-12)


def test_w_model_missing_level():
    rng = np.random.default_rng(8)
    n = 500
    v = rng.normal(size=(n, 1))
    dataset = _dataset(v, np.zeros(n, dtype=int), rng.integers(0, 2, size=n), np.zeros(n), np.zeros(n), n_levels=3)
    nu = fit_w_model(dataset, LearnerSpec(family=MULTINOMIAL))(v)
    assert np.allclose(nu.sum(axis=1), 1.0)
    assert np.all(nu >= EPS_P - 1e-12)
    assert np.allclose(nu[:, 2], EPS_P)


def test_w_model_single_level():
    dataset = random_dataset(n=50, n_levels=1)
    nu = fit_w_model(dataset, LearnerSpec())(dataset.v)
    assert nu.tolist() == [[1.0]] * 50


def test_fit_nuisances():
    dataset = random_dataset(n=600, n_levels=3, seed=9)
    eta = fit_nuisances(dataset, LearnerSpec(family=LOGISTIC))
    values = eta.evaluate(dataset.v)
    assert values.nu.shape == (600, 3)
    assert np.all((values.mu0 >= 0.0) & (values.mu0 <= 1.0))
    assert np.allclose(values.pi0 + values.pi1 + values.rho0, 1.0)


def test_perturbation_spec_rejects():
    with pytest.raises(ConfigError):
        PerturbationSpec(("pi0", "pi1"), 0.1)
    with pytest.raises(ConfigError):
        PerturbationSpec(("sigma",), 0.1)
    with pytest.raises(ConfigError):
        PerturbationSpec(("mu0",), -0.1)


def test_perturb_zero_is_identity():
    eta = constant_eta(OutcomeBounds(0.0, 1.0), [0.5, 0.5])
    assert perturb(eta, PerturbationSpec(("mu1",), 0.0)) is eta


def test_perturb_constant_shift():
    eta = constant_eta(OutcomeBounds(0.0, 1.0), [0.5, 0.5])
    v = np.random.default_rng(10).normal(size=(100, 2))
    perturbed = perturb(eta, PerturbationSpec(("mu1",), 0.1, CONSTANT_SHIFT), v)
    assert perturbed.perturbation["realized"]["mu1"] == pytest.approx(0.1)
    assert np.allclose(perturbed.mu1(v), 0.7)
    assert np.allclose(perturbed.mu0(v), eta.mu0(v))
    assert eta.perturbation is None


def test_perturb_smooth_propensity():
    eta = constant_eta(OutcomeBounds(0.0, 1.0), [0.5, 0.5])
    v = np.random.default_rng(11).normal(size=(2000, 2))
    perturbed = perturb(eta, PerturbationSpec(("rho0",), 0.2, SMOOTH, seed=3), v)
    realized = perturbed.perturbation["realized"]["rho0"]
    assert realized == pytest.approx(0.2, rel=0.2)
    values = perturbed.evaluate(v)
    assert np.allclose(values.pi0 + values.pi1 + values.rho0, 1.0)


def test_perturb_nu_keeps_simplex():
    eta = constant_eta(OutcomeBounds(0.0, 1.0), [0.2, 0.3, 0.5])
    v = np.random.default_rng(12).normal(size=(500, 1))
    perturbed = perturb(eta, PerturbationSpec(("nu",), 0.05, SMOOTH, seed=1), v)
    nu = perturbed.nu(v)
    assert np.allclose(nu.sum(axis=1), 1.0)
    assert perturbed.perturbation["realized"]["nu"] > 0


def test_smooth_needs_reference():
    eta = constant_eta(OutcomeBounds(0.0, 1.0), [0.5, 0.5])
    with pytest.raises(ConfigError):
        perturb(eta, PerturbationSpec(("mu0",), 0.1, SMOOTH))
