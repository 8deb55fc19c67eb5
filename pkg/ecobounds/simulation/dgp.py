# ecobounds - treatment effect bounds for covariates unobserved in the study
# Copyright (C) 2026 CZ.NIC, z.s.p.o. <http://www.nic.cz>
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import itertools
import logging
import time
import typing

from dataclasses import asdict, dataclass

import numpy as np

from scipy.special import expit

from ecobounds.bounds import branches
from ecobounds.data_model import MISSING, Dataset, OutcomeBounds, WSupport
from ecobounds.errors import ConfigError
from ecobounds.estimator import POOLED
from ecobounds.nuisance import NuisanceSet
from ecobounds.utils.numeric import solve_with_ridge
from ecobounds.validators import FloatRange, PositiveInteger

logger = logging.getLogger("ecobounds.simulation.dgp")

ORACLE_EPS = 1e-9
BOUNDS_SLACK = 0.01
ORACLE_CHUNK = 50000


@dataclass(frozen=True)
class DgpConfig:
    """ Simulation design: continuous and binary V, binary W, logistic E and A.

    Coefficients are drawn from ``seed`` alone; ``replicate`` only changes the data
    stream, so replicates share one design. ``w_scale`` multiplies the W logistic
    coefficients (0 makes W independent fair coins) and ``w_effect_scale`` the effect
    coefficients of W (0 removes W from the treatment effect).
    """

    n: int = 10000
    seed: int = 0
    replicate: int = 0
    n_continuous: int = 3
    n_discrete: int = 3
    n_w: int = 3
    continuous_mean: float = 1.0
    continuous_sd: float = 0.5
    discrete_p: float = 0.5
    w_coef_range: typing.Tuple[float, float] = (-1.0, 1.0)
    e_coef_range: typing.Tuple[float, float] = (-1.0, 1.0)
    a_coef_range: typing.Tuple[float, float] = (-1.0, 1.0)
    effect_coef_range: typing.Tuple[float, float] = (0.0, 1.5)
    outcome_coef_range: typing.Tuple[float, float] = (1.0, 3.0)
    noise_sd: float = 1.0
    w_scale: float = 1.0
    w_effect_scale: float = 1.0

    def __post_init__(self):
        PositiveInteger(1).check(self.n, "simulation.n")
        PositiveInteger(0).check(self.seed, "simulation.seed")
        PositiveInteger(0).check(self.replicate, "simulation.replicate")
        PositiveInteger(1).check(self.n_w, "simulation.n_w")
        PositiveInteger(0).check(self.n_continuous, "simulation.n_continuous")
        PositiveInteger(0).check(self.n_discrete, "simulation.n_discrete")
        if self.n_continuous + self.n_discrete == 0:
            raise ConfigError("simulation needs at least one V column")
        FloatRange(0.0, 1.0).check(self.discrete_p, "simulation.discrete_p")
        FloatRange(0.0, float("inf")).check(self.continuous_sd, "simulation.continuous_sd")
        FloatRange(0.0, float("inf")).check(self.noise_sd, "simulation.noise_sd")
        FloatRange(0.0, float("inf")).check(self.w_scale, "simulation.w_scale")
        FloatRange(0.0, float("inf")).check(self.w_effect_scale, "simulation.w_effect_scale")
        for name in ("w_coef_range", "e_coef_range", "a_coef_range", "effect_coef_range", "outcome_coef_range"):
            low, high = getattr(self, name)
            if not low <= high:
                raise ConfigError("simulation.%s: low must not exceed high" % name)
            object.__setattr__(self, name, (float(low), float(high)))

    @classmethod
    def from_config(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError("unknown simulation settings", fields=sorted(unknown))
        return cls(**data)

    def as_config(self):
        return asdict(self)

    @property
    def p(self):
        return self.n_continuous + self.n_discrete

    def coefficients(self):
        """ Coefficient draws; a function of ``seed`` and the dimensions only. """
        rng = np.random.default_rng([self.seed, 0])
        p, q = self.p, self.n_w
        return Coefficients(
            w=rng.uniform(*self.w_coef_range, size=(p, q)) * self.w_scale,
            e=rng.uniform(*self.e_coef_range, size=p),
            a=rng.uniform(*self.a_coef_range, size=p),
            alpha_v=rng.uniform(*self.effect_coef_range, size=p),
            alpha_w=rng.uniform(*self.effect_coef_range, size=q) * self.w_effect_scale,
            beta_v=rng.uniform(*self.outcome_coef_range, size=p),
            beta_w=rng.uniform(*self.outcome_coef_range, size=q),
        )


@dataclass(frozen=True)
class Coefficients:
    w: np.ndarray
    e: np.ndarray
    a: np.ndarray
    alpha_v: np.ndarray
    alpha_w: np.ndarray
    beta_v: np.ndarray
    beta_w: np.ndarray

    def as_record(self):
        return {name: value.tolist() for name, value in asdict(self).items()}

    def w_probabilities(self, v):
        return expit(np.atleast_2d(v) @ self.w)

    def restricted_cate(self, v):
        return v @ self.alpha_v + self.w_probabilities(v) @ self.alpha_w


class OracleOutcome(object):
    """ True μ_a(v) = E[Y | V=v, A=a, E=1]; W is independent of (E, A) given V. """

    def __init__(self, coefficients, arm):
        self.coefficients = coefficients
        self.arm = arm

    def __call__(self, v):
        c = self.coefficients
        v = np.atleast_2d(v)
        base = self.coefficients.w_probabilities(v) @ c.beta_w + v @ c.beta_v
        return base + self.arm * c.restricted_cate(v)


class OracleRho(object):
    def __init__(self, coefficients):
        self.coefficients = coefficients

    def __call__(self, v):
        return 1.0 - expit(np.atleast_2d(v) @ self.coefficients.e)


class OracleArm(object):
    def __init__(self, coefficients):
        self.coefficients = coefficients

    def __call__(self, v):
        return expit(np.atleast_2d(v) @ self.coefficients.a)


class OracleNu(object):
    """ ν(v, w) as the product of the W coordinate Bernoulli probabilities. """

    def __init__(self, coefficients, w_support):
        self.coefficients = coefficients
        self.levels = np.array(w_support.levels)

    def __call__(self, v):
        p = self.coefficients.w_probabilities(v)
        ones = self.levels[None, :, :] == 1
        return np.prod(np.where(ones, p[:, None, :], 1.0 - p[:, None, :]), axis=2)


def full_support(n_w):
    levels = tuple(tuple(float(x) for x in level) for level in itertools.product((0, 1), repeat=n_w))
    return WSupport(levels=levels, names=tuple("w%d" % (j + 1) for j in range(n_w)))


def oracle_nuisances(coefficients, bounds, w_support, eps=ORACLE_EPS):
    return NuisanceSet(
        mu0=OracleOutcome(coefficients, 0),
        mu1=OracleOutcome(coefficients, 1),
        rho0=OracleRho(coefficients),
        arm=OracleArm(coefficients),
        nu=OracleNu(coefficients, w_support),
        bounds=bounds,
        n_levels=w_support.size,
        eps=eps,
    )


@dataclass
class GroundTruth:
    cate: np.ndarray
    restricted_cate: np.ndarray
    y1: np.ndarray
    y0: np.ndarray
    w: np.ndarray
    eta: NuisanceSet
    coefficients: Coefficients
    config: DgpConfig

    def _gaps(self, target):
        return np.abs(self.cate - self.restricted_cate)[target]

    def true_delta(self, target=None):
        """ Largest gap between the fully conditional and the restricted CATE. """
        target = slice(None) if target is None else target
        return float(np.max(self._gaps(target)))

    def mean_delta(self, target=None):
        target = slice(None) if target is None else target
        return float(np.mean(self._gaps(target)))


def _draw_v(config, rng, n):
    continuous = rng.normal(config.continuous_mean, config.continuous_sd, size=(n, config.n_continuous))
    discrete = (rng.uniform(size=(n, config.n_discrete)) < config.discrete_p).astype(float)
    return np.hstack([continuous, discrete])


def generate(config):
    """ Draw one dataset and everything true about it.

    The study keeps (V, A, Y) and the target keeps (V, W); outcome bounds are the
    range of both potential outcomes widened by 1% on each side.

    :rtype: (Dataset, GroundTruth)
    """
    start_time = time.time()
    c = config.coefficients()
    rng = np.random.default_rng([config.seed, 1, config.replicate])
    n = config.n
    v = _draw_v(config, rng, n)
    w_values = (rng.uniform(size=(n, config.n_w)) < c.w_probabilities(v)).astype(float)
    e = (rng.uniform(size=n) < expit(v @ c.e)).astype(int)
    a = (rng.uniform(size=n) < expit(v @ c.a)).astype(int)
    noise = rng.normal(0.0, config.noise_sd, size=n)
    cate = v @ c.alpha_v + w_values @ c.alpha_w
    y0 = w_values @ c.beta_w + v @ c.beta_v + noise
    y1 = y0 + cate
    y = np.where(a == 1, y1, y0)

    low, high = min(y0.min(), y1.min()), max(y0.max(), y1.max())
    slack = BOUNDS_SLACK * (high - low)
    bounds = OutcomeBounds(float(low - slack), float(high + slack))
    w_support = full_support(config.n_w)
    w_index = w_support.index_of(w_values)
    study = e == 1
    dataset = Dataset(
        v=v,
        e=e,
        w=np.where(study, MISSING, w_index),
        a=np.where(study, a, MISSING),
        y=np.where(study, y, np.nan),
        bounds=bounds,
        w_support=w_support,
        v_names=["v%d" % (j + 1) for j in range(config.p)],
        v_discrete=[False] * config.n_continuous + [True] * config.n_discrete,
    )
    truth = GroundTruth(
        cate=cate,
        restricted_cate=c.restricted_cate(v),
        y1=y1,
        y0=y0,
        w=w_index,
        eta=oracle_nuisances(c, bounds, w_support),
        coefficients=c,
        config=config,
    )
    logger.debug("Generate took %f: %r", time.time() - start_time, dataset)
    return dataset, truth


def oracle_beta(config, spec, n_oracle=10 ** 6, bounds=None):
    """ Projection of the true bound on the model class by brute force.

    Fresh V are drawn from the design and W is integrated out exactly with the true ν;
    target projections weight every draw by its true ρ₀(V).

    :param bounds: outcome bounds to use (those of ``generate(config)`` by default)
    """
    start_time = time.time()
    if not spec.is_linear:
        raise ConfigError("the oracle projection needs the linear model form")
    c = config.coefficients()
    if bounds is None:
        bounds = generate(config)[0].bounds
    w_support = full_support(config.n_w)
    eta = oracle_nuisances(c, bounds, w_support)
    rng = np.random.default_rng([config.seed, 2, config.replicate])
    k = w_support.size
    slope, intercept = 0.0, 0.0
    for start in range(0, n_oracle, ORACLE_CHUNK):
        size = min(ORACLE_CHUNK, n_oracle - start)
        v = _draw_v(config, rng, size)
        values = eta.evaluate(v)
        delta_mu = np.repeat(values.delta_mu[:, None], k, axis=1)
        gamma = branches(delta_mu, values.nu, bounds, spec.side, spec.delta).bound()
        raw_x = np.concatenate(
            [np.repeat(v[:, None, :], k, axis=1), np.broadcast_to(w_support.table[None], (size, k, w_support.dim))],
            axis=2,
        ).reshape(size * k, -1)
        basis = spec.basis(raw_x).reshape(size, k, -1)
        weight = values.nu if spec.population == POOLED else values.nu * values.rho0[:, None]
        if spec.weight is not None:
            weight = weight * np.asarray(spec.weight(spec.features(raw_x)), dtype=float).reshape(size, k)
        slope = slope + np.einsum("nk,nki,nkj->ij", weight, basis, basis)
        intercept = intercept + np.einsum("nk,nki->i", weight * gamma, basis)
    beta = solve_with_ridge(slope / n_oracle, intercept / n_oracle, what="oracle")
    logger.debug("Oracle projection took %f: %d draws", time.time() - start_time, n_oracle)
    return beta
