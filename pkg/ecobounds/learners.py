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

from dataclasses import dataclass, replace

import numpy as np

from scipy.spatial.distance import cdist
from scipy.special import logsumexp, softmax
from sklearn.preprocessing import PolynomialFeatures, StandardScaler

from ecobounds.errors import ConfigError
from ecobounds.validators import Choice, FloatRange, PositiveInteger

logger = logging.getLogger("ecobounds.learners")

LINEAR = "linear-least-squares"
LOGISTIC = "logistic"
MULTINOMIAL = "multinomial-logistic"
KERNEL = "kernel-smoother"
FAMILIES = (LINEAR, LOGISTIC, MULTINOMIAL, KERNEL)

NEWTON_RIDGE = 1e-6
NEWTON_TOLERANCE = 1e-8
NEWTON_MAX_ITERATIONS = 100
SILVERMAN = 1.06
KERNEL_CHUNK = 2048


@dataclass(frozen=True)
class LearnerSpec:
    family: str = LINEAR
    degree: int = 1
    regularization: float = 0.0
    bandwidth: typing.Optional[float] = None

    def __post_init__(self):
        Choice(FAMILIES).check(self.family, "learner.family")
        PositiveInteger(1).check(self.degree, "learner.degree")
        FloatRange(0.0, float("inf")).check(self.regularization, "learner.regularization")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError("learner.bandwidth: must be > 0", value=repr(self.bandwidth))

    @classmethod
    def from_config(cls, data):
        unknown = set(data) - {"family", "degree", "regularization", "bandwidth"}
        if unknown:
            raise ConfigError("unknown learner settings", fields=sorted(unknown))
        return cls(**data)

    def as_config(self):
        return {
            "family": self.family,
            "degree": self.degree,
            "regularization": self.regularization,
            "bandwidth": self.bandwidth,
        }


@dataclass(frozen=True)
class NuisanceLearners:
    """ Learner per nuisance group; outcome regressions need a regression family. """

    outcome: LearnerSpec
    propensity: LearnerSpec
    w_model: LearnerSpec

    @classmethod
    def coerce(cls, value):
        if isinstance(value, NuisanceLearners):
            return value
        if isinstance(value, LearnerSpec):
            outcome = value
            if value.family in (LOGISTIC, MULTINOMIAL):
                outcome = replace(value, family=LINEAR)
            return cls(outcome=outcome, propensity=value, w_model=value)
        if isinstance(value, dict):
            if set(value) & {"outcome", "propensity", "w_model"}:
                missing = {"outcome", "propensity", "w_model"} - set(value)
                if missing:
                    raise ConfigError("learner section is incomplete", missing=sorted(missing))
                return cls(
                    outcome=LearnerSpec.from_config(value["outcome"]),
                    propensity=LearnerSpec.from_config(value["propensity"]),
                    w_model=LearnerSpec.from_config(value["w_model"]),
                )
            return cls.coerce(LearnerSpec.from_config(value))
        raise ConfigError("cannot build learners from %r" % type(value).__name__)

    def as_config(self):
        return {
            "outcome": self.outcome.as_config(),
            "propensity": self.propensity.as_config(),
            "w_model": self.w_model.as_config(),
        }


class Basis(object):
    """ Standardized polynomial expansion with a constant column. """

    def __init__(self, degree):
        self.degree = degree
        self.scaler = StandardScaler()
        self.poly = PolynomialFeatures(degree=degree, include_bias=True)

    def fit(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        self.poly.fit(self.scaler.fit_transform(v))
        return self

    def transform(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return self.poly.transform(self.scaler.transform(v))


class LinearModel(object):
    def __init__(self, basis, coef):
        self.basis = basis
        self.coef = coef

    def __call__(self, v):
        return self.basis.transform(v) @ self.coef


class MultinomialModel(object):
    """ Class probabilities, one column per class, class 0 is the reference. """

    def __init__(self, basis, coef):
        self.basis = basis
        self.coef = coef

    def __call__(self, v):
        return _class_probabilities(self.basis.transform(v), self.coef)


class KernelSmoother(object):
    """ Nadaraya-Watson average of ``targets`` with a Gaussian product kernel. """

    def __init__(self, train_v, targets, bandwidth):
        self.train_v = np.asarray(train_v, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        self.bandwidth = np.asarray(bandwidth, dtype=float)

    def __call__(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        scaled_train = self.train_v / self.bandwidth
        out = np.empty((v.shape[0],) + self.targets.shape[1:])
        for start in range(0, v.shape[0], KERNEL_CHUNK):
            chunk = v[start : start + KERNEL_CHUNK] / self.bandwidth
            distances = cdist(chunk, scaled_train, "sqeuclidean")
            # shifting by the row minimum keeps the nearest weight at exp(0)
            distances -= distances.min(axis=1, keepdims=True)
            weights = np.exp(-0.5 * distances)
            weights /= weights.sum(axis=1, keepdims=True)
            out[start : start + KERNEL_CHUNK] = weights @ self.targets
        return out


def _class_probabilities(features, coef):
    eta = np.hstack([np.zeros((features.shape[0], 1)), features @ coef])
    return softmax(eta, axis=1)


def _unpack(theta, dim, n_classes):
    return np.asarray(theta, dtype=float).reshape(n_classes - 1, dim).T


def multinomial_loglik(theta, features, onehot, ridge=NEWTON_RIDGE):
    """ Mean penalized log-likelihood of the reference-class multinomial model.

    ``theta`` stacks the coefficient vectors of classes 1..K-1.
    """
    coef = _unpack(theta, features.shape[1], onehot.shape[1])
    eta = np.hstack([np.zeros((features.shape[0], 1)), features @ coef])
    loglik = np.mean(np.sum(onehot * eta, axis=1) - logsumexp(eta, axis=1))
    return loglik - 0.5 * ridge * float(np.sum(coef ** 2))


def multinomial_gradient(theta, features, onehot, ridge=NEWTON_RIDGE):
    coef = _unpack(theta, features.shape[1], onehot.shape[1])
    probabilities = _class_probabilities(features, coef)
    gradient = features.T @ (onehot[:, 1:] - probabilities[:, 1:]) / features.shape[0]
    return (gradient - ridge * coef).T.ravel()


def _multinomial_hessian(coef, features, ridge):
    probabilities = _class_probabilities(features, coef)[:, 1:]
    n, dim = features.shape
    classes = probabilities.shape[1]
    hessian = np.empty((classes * dim, classes * dim))
    for k in range(classes):
        for m in range(classes):
            weight = probabilities[:, k] * ((k == m) - probabilities[:, m])
            block = -(features.T * weight) @ features / n
            hessian[k * dim : (k + 1) * dim, m * dim : (m + 1) * dim] = block
    return hessian - ridge * np.eye(classes * dim)


def fit_multinomial(features, labels, n_classes, ridge=NEWTON_RIDGE):
    """ Damped Newton ascent on the mean penalized log-likelihood.

    Stops when the gradient max-norm drops below 1e-8 or after 100 iterations.

    :return: coefficient matrix (features x classes-1)
    """
    onehot = np.eye(n_classes)[np.asarray(labels, dtype=int)]
    dim = features.shape[1]
    theta = np.zeros(dim * (n_classes - 1))
    current = multinomial_loglik(theta, features, onehot, ridge)
    for iteration in range(NEWTON_MAX_ITERATIONS):
        gradient = multinomial_gradient(theta, features, onehot, ridge)
        if np.max(np.abs(gradient)) < NEWTON_TOLERANCE:
            break
        hessian = _multinomial_hessian(_unpack(theta, dim, n_classes), features, ridge)
        step = -np.linalg.solve(hessian, gradient)
        scale = 1.0
        while scale > 1e-10:
            candidate = theta + scale * step
            value = multinomial_loglik(candidate, features, onehot, ridge)
            if value >= current:
                break
            scale /= 2.0
        else:
            logger.debug("Newton line search stalled at iteration %d", iteration)
            break
        theta, current = candidate, value
    else:
        logger.debug("Newton stopped after %d iterations", NEWTON_MAX_ITERATIONS)
    return _unpack(theta, dim, n_classes)


def _bandwidth(spec, v):
    if spec.bandwidth is not None:
        return np.full(v.shape[1], float(spec.bandwidth))
    sd = np.std(v, axis=0)
    sd[sd <= 0] = 1.0
    return SILVERMAN * sd * v.shape[0] ** (-1.0 / 5.0)


def fit_regressor(spec, v, y):
    """ Conditional mean of ``y`` given ``v``; logistic families regress linearly. """
    start_time = time.time()
    v = np.atleast_2d(np.asarray(v, dtype=float))
    y = np.asarray(y, dtype=float)
    if spec.family == KERNEL:
        model = KernelSmoother(v, y, _bandwidth(spec, v))
    else:
        basis = Basis(spec.degree).fit(v)
        features = basis.transform(v)
        if spec.regularization > 0:
            penalty = np.sqrt(spec.regularization * features.shape[0]) * np.eye(features.shape[1])
            features = np.vstack([features, penalty])
            y = np.concatenate([y, np.zeros(features.shape[1])])
        coef = np.linalg.lstsq(features, y, rcond=None)[0]
        model = LinearModel(basis, coef)
    logger.debug("Fit took %f: regressor %s on %d rows", time.time() - start_time, spec.family, len(v))
    return model


class _OneHotLinear(object):
    def __init__(self, models):
        self.models = models

    def __call__(self, v):
        return np.column_stack([model(v) for model in self.models])


def fit_classifier(spec, v, labels, n_classes):
    """ Class probability model; returns a callable v -> (n, n_classes) array.

    Linear-least-squares gives a linear probability model, so callers must clip
    and renormalize its output.
    """
    start_time = time.time()
    v = np.atleast_2d(np.asarray(v, dtype=float))
    labels = np.asarray(labels, dtype=int)
    onehot = np.eye(n_classes)[labels]
    if spec.family == KERNEL:
        model = KernelSmoother(v, onehot, _bandwidth(spec, v))
    elif spec.family == LINEAR:
        model = _OneHotLinear([fit_regressor(spec, v, onehot[:, k]) for k in range(n_classes)])
    else:
        basis = Basis(spec.degree).fit(v)
        ridge = max(spec.regularization, NEWTON_RIDGE)
        model = MultinomialModel(basis, fit_multinomial(basis.transform(v), labels, n_classes, ridge))
    logger.debug(
        "Fit took %f: classifier %s on %d rows, %d classes",
        time.time() - start_time,
        spec.family,
        len(v),
        n_classes,
    )
    return model
