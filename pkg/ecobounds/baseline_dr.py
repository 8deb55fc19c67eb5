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

from dataclasses import dataclass

import numpy as np
import pandas as pd

from scipy.stats import norm

from ecobounds.errors import PositivityError
from ecobounds.learners import NuisanceLearners, fit_classifier
from ecobounds.nuisance import EPS_P, fit_outcome
from ecobounds.utils.numeric import inverse_with_ridge, symmetrize

logger = logging.getLogger("ecobounds.baseline_dr")

LEVEL = 0.95


def dr_pseudo_outcome(a, y, pi, mu0, mu1):
    """ (A - π)/(π(1 - π)) (Y - μ_A) + μ₁ - μ₀ """
    a = np.asarray(a, dtype=float)
    mu_a = np.where(a == 1, mu1, mu0)
    return (a - pi) / (pi * (1.0 - pi)) * (np.asarray(y, dtype=float) - mu_a) + mu1 - mu0


def _design(v):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    return np.hstack([v, np.ones((v.shape[0], 1))])


@dataclass
class RestrictedCateFit:
    """ Linear-in-V fit of E[Y¹ - Y⁰ | V] on the study population. """

    coef: np.ndarray
    covariance: np.ndarray
    pseudo_outcome: np.ndarray
    n_used: int

    def predict(self, v):
        """ :return: DataFrame with estimate, se, ci_lower, ci_upper per row of v """
        x = _design(v)
        estimate = x @ self.coef
        se = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", x, self.covariance, x), 0.0, None))
        z = norm.ppf(0.5 + LEVEL / 2.0)
        return pd.DataFrame(
            {"estimate": estimate, "se": se, "ci_lower": estimate - z * se, "ci_upper": estimate + z * se}
        )

    @property
    def ate(self):
        return float(np.mean(self.pseudo_outcome))


def fit_dr_restricted(dataset, learner, seed, eps=EPS_P):
    """ Cross-fit DR-learner on the study units with a linear second stage.

    Outcome regressions and P(A=1 | V, E=1) are fit on one half of the study units
    and evaluated on the other, then the halves swap.
    """
    start_time = time.time()
    learners = NuisanceLearners.coerce(learner)
    study = np.flatnonzero(dataset.e == 1)
    if study.size == 0 or np.unique(dataset.a[study]).size < 2:
        raise PositivityError()
    order = np.random.default_rng(seed).permutation(study)
    halves = (np.sort(order[: study.size // 2]), np.sort(order[study.size // 2 :]))
    psi = np.empty(len(dataset))
    for train, test in (halves, halves[::-1]):
        training = dataset.subset(train)
        mu0, mu1 = fit_outcome(training, learners.outcome)
        if np.unique(training.a).size < 2:
            raise PositivityError(fold_size=train.size)
        arm = fit_classifier(learners.propensity, training.v, training.a, 2)
        v = dataset.v[test]
        pi = np.clip(arm(v)[:, 1], eps, 1.0 - eps)
        psi[test] = dr_pseudo_outcome(dataset.a[test], dataset.y[test], pi, mu0(v), mu1(v))
    psi = psi[study]
    x = _design(dataset.v[study])
    coef = np.linalg.lstsq(x, psi, rcond=None)[0]
    residual = psi - x @ coef
    bread = inverse_with_ridge(x.T @ x, what="second stage")
    covariance = symmetrize(bread @ (x.T * residual ** 2) @ x @ bread)
    logger.debug("Fit took %f: DR baseline on %d study units", time.time() - start_time, study.size)
    return RestrictedCateFit(coef=coef, covariance=covariance, pseudo_outcome=psi, n_used=int(study.size))
