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

import logging
import time
import typing

from dataclasses import dataclass, field

import numpy as np

from scipy.stats import norm

from ecobounds.errors import ConfigError, DataError, NumericalError
from ecobounds.estimator import BIAS_CORRECTED, PLUGIN, TARGET, Design, crossfit, jacobian
from ecobounds.nuisance import EPS_P
from ecobounds.utils.numeric import inverse_with_ridge, symmetrize, tree_mean
from ecobounds.utils.parallel import WorkerPool

logger = logging.getLogger("ecobounds.inference")

SANDWICH = "sandwich"
BOOTSTRAP = "bootstrap"
MIN_REPLICATES = 100
MAX_RETRIES = 10
LEVEL = 0.95


@dataclass
class CovarianceEstimate:
    method: str
    covariance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    replicates: typing.Optional[int] = None
    retries: int = 0
    failures: int = 0
    warnings: typing.List[str] = field(default_factory=list)
    # replicate betas, one row per successful bootstrap draw
    draws: typing.Optional[np.ndarray] = None

    @property
    def standard_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def as_record(self):
        return {
            "method": self.method,
            "covariance": self.covariance.tolist(),
            "intervals": [[float(lo), float(hi)] for lo, hi in zip(self.lower, self.upper)],
            "B": self.replicates,
            "retries": self.retries,
            "failures": self.failures,
            "warnings": list(self.warnings),
        }


def _normal_intervals(beta, covariance):
    z = norm.ppf(0.5 + LEVEL / 2.0)
    se = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    return beta - z * se, beta + z * se


def _fold_covariance(dataset, beta, eta, spec, corrected, warnings):
    design = Design(dataset, eta, spec)
    rows = np.ones(len(dataset), dtype=bool)
    if not corrected and spec.population == TARGET:
        rows = dataset.e == 0
    phi = design.phi(beta, corrected)[rows]
    middle = tree_mean(phi[:, :, None] * phi[:, None, :], axis=0)
    bread = inverse_with_ridge(jacobian(design, beta, rows, corrected), warnings, what="sandwich")
    return symmetrize(bread @ middle @ bread.T / phi.shape[0])


def sandwich(dataset, beta_hat, eta, spec):
    """ M⁻¹ Σ M⁻ᵀ / n on the fold ``beta_hat`` was solved on.

    :rtype: CovarianceEstimate
    """
    warnings = []
    corrected = beta_hat.method != PLUGIN
    covariance = _fold_covariance(dataset, beta_hat.beta, eta, spec, corrected, warnings)
    lower, upper = _normal_intervals(beta_hat.beta, covariance)
    return CovarianceEstimate(method=SANDWICH, covariance=covariance, lower=lower, upper=upper, warnings=warnings)


def crossfit_sandwich(estimate, spec):
    """ Sandwich for a cross-fit β̂; two swapped folds average to (V₁ + V₂) / 4. """
    if not estimate.folds:
        raise ConfigError("estimate carries no fold fits")
    warnings = []
    covariances = []
    for fold in estimate.folds:
        corrected = fold.estimate.method != PLUGIN
        covariances.append(
            _fold_covariance(fold.evaluation, fold.estimate.beta, fold.eta, spec, corrected, warnings)
        )
    covariance = symmetrize(sum(covariances) / len(covariances) ** 2)
    lower, upper = _normal_intervals(estimate.beta, covariance)
    return CovarianceEstimate(method=SANDWICH, covariance=covariance, lower=lower, upper=upper, warnings=warnings)


class _Replicate(object):
    """ One bootstrap draw; picklable so the worker pool can ship it. """

    def __init__(self, dataset, spec, learners, seed, method, eps):
        self.dataset = dataset
        self.spec = spec
        self.learners = learners
        self.seed = seed
        self.method = method
        self.eps = eps

    def __call__(self, index):
        rng = np.random.default_rng((self.seed, index))
        n = len(self.dataset)
        for attempt in range(MAX_RETRIES + 1):
            resample = self.dataset.subset(rng.integers(0, n, size=n))
            split_seed = int(rng.integers(2 ** 31))
            try:
                estimate = crossfit(resample, self.spec, self.learners, split_seed, method=self.method, eps=self.eps)
                return estimate.beta, attempt
            except (DataError, NumericalError) as e:
                logger.warning("Bootstrap replicate %d redrawn (%s)", index, e.message)
        return None, MAX_RETRIES


def bootstrap(dataset, spec, learners, replicates, seed, method=BIAS_CORRECTED, eps=EPS_P, threads=None):
    """ Nonparametric bootstrap of the whole cross-fit pipeline, percentile intervals.

    Each replicate draws from its own stream seeded by (seed, replicate index).
    """
    if replicates < MIN_REPLICATES:
        raise ConfigError("bootstrap needs at least %d replicates" % MIN_REPLICATES, B=replicates)
    start_time = time.time()
    task = _Replicate(dataset, spec, learners, seed, method, eps)
    results = WorkerPool(threads).map(task, range(replicates), label="bootstrap")
    betas = np.array([beta for beta, _ in results if beta is not None])
    retries = sum(attempts for _, attempts in results)
    failures = sum(1 for beta, _ in results if beta is None)
    if len(betas) < 2:
        raise NumericalError("too few successful bootstrap replicates", failures=failures)
    alpha = (1.0 - LEVEL) / 2.0
    covariance = symmetrize(np.atleast_2d(np.cov(betas, rowvar=False)))
    logger.debug("Bootstrap took %f: %d replicates, %d failed", time.time() - start_time, replicates, failures)
    return CovarianceEstimate(
        method=BOOTSTRAP,
        covariance=covariance,
        lower=np.quantile(betas, alpha, axis=0),
        upper=np.quantile(betas, 1.0 - alpha, axis=0),
        replicates=replicates,
        retries=retries,
        failures=failures,
        draws=betas,
    )


def mean_bound(covariance, beta, basis):
    """ Mean of the fitted bound m(x; β̂) over the rows of ``basis``, with its interval.

    Bootstrap estimates give the percentile interval of the replicated mean; otherwise
    the normal interval from the covariance is used.

    :param covariance: CovarianceEstimate attached to ``beta``
    :param basis: linear basis rows of the units averaged over
    :return: (mean, (lower, upper))
    """
    center = tree_mean(basis, axis=0)
    value = float(center @ beta)
    if covariance.draws is not None:
        replicated = covariance.draws @ center
        alpha = (1.0 - LEVEL) / 2.0
        return value, (float(np.quantile(replicated, alpha)), float(np.quantile(replicated, 1.0 - alpha)))
    z = norm.ppf(0.5 + LEVEL / 2.0)
    se = float(np.sqrt(max(center @ covariance.covariance @ center, 0.0)))
    return value, (value - z * se, value + z * se)
