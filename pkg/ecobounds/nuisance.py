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

from ecobounds.errors import ConfigError, DataError, OverlapError, PositivityError
from ecobounds.learners import NuisanceLearners, fit_classifier, fit_regressor
from ecobounds.validators import Choice, FloatRange

logger = logging.getLogger("ecobounds.nuisance")

EPS_P = 0.01
TARGETS = ("mu0", "mu1", "pi0", "pi1", "rho0", "nu")
CONSTANT_SHIFT = "constant-shift"
SMOOTH = "smooth"
SHAPES = (CONSTANT_SHIFT, SMOOTH)


def clip_simplex(p, eps=EPS_P):
    """ Clip rows of probabilities to at least ``eps`` and renormalize to sum 1.

    Entries that fall below ``eps`` are fixed at ``eps`` and the remaining mass is
    rescaled over the free entries, repeated until no free entry is below ``eps``.
    """
    p = np.clip(np.atleast_2d(np.asarray(p, dtype=float)), 0.0, None)
    n, k = p.shape
    if k == 1:
        return np.ones_like(p)
    totals = p.sum(axis=1, keepdims=True)
    p = np.where(totals > 0, p / np.where(totals > 0, totals, 1.0), 1.0 / k)
    eps = min(eps, 1.0 / k)
    fixed = np.zeros_like(p, dtype=bool)
    for _ in range(k):
        low = (p < eps) & ~fixed
        if not low.any():
            break
        fixed |= low
        free_mass = 1.0 - eps * fixed.sum(axis=1, keepdims=True)
        free_sum = np.where(fixed, 0.0, p).sum(axis=1, keepdims=True)
        scale = np.where(free_sum > 0, free_mass / np.where(free_sum > 0, free_sum, 1.0), 1.0)
        p = np.where(fixed, eps, p * scale)
    return p


class Clipped(object):
    def __init__(self, func, low, high):
        self.func = func
        self.low = low
        self.high = high

    def __call__(self, v):
        return np.clip(np.asarray(self.func(v), dtype=float).reshape(-1), self.low, self.high)


class Column(object):
    def __init__(self, func, index):
        self.func = func
        self.index = index

    def __call__(self, v):
        return np.asarray(self.func(v), dtype=float)[:, self.index]


class Constant(object):
    def __init__(self, value):
        self.value = value

    def __call__(self, v):
        return np.full(np.atleast_2d(v).shape[0], float(self.value))


class SimplexModel(object):
    """ Wraps a class-probability model so its rows are clipped and renormalized. """

    def __init__(self, func, n_levels, eps=EPS_P):
        self.func = func
        self.n_levels = n_levels
        self.eps = eps

    def __call__(self, v):
        n = np.atleast_2d(v).shape[0]
        if self.n_levels == 1:
            return np.ones((n, 1))
        return clip_simplex(np.asarray(self.func(v), dtype=float).reshape(n, self.n_levels), self.eps)


class PropensityModel(object):
    """ ρ₀(v) = P(E=0|v) and π_a(v) = (1 - ρ₀(v)) P(A=a|v, E=1).

    ρ₀ is clipped to [eps, 1 - 2 eps] and the arm probability so that both π_a land in
    [eps, 1 - eps]; the three probabilities add to one by construction.
    """

    def __init__(self, rho0, arm, eps=EPS_P):
        self.raw_rho0 = rho0
        self.raw_arm = arm
        self.eps = eps

    def rho0(self, v):
        return np.clip(np.asarray(self.raw_rho0(v), dtype=float).reshape(-1), self.eps, 1.0 - 2 * self.eps)

    def _split(self, v):
        room = 1.0 - self.rho0(v)
        low = self.eps / room
        arm = np.clip(np.asarray(self.raw_arm(v), dtype=float).reshape(-1), low, 1.0 - low)
        pi1 = room * arm
        return room - pi1, pi1

    def pi0(self, v):
        return self._split(v)[0]

    def pi1(self, v):
        return self._split(v)[1]


@dataclass(frozen=True)
class NuisanceValues:
    mu0: np.ndarray
    mu1: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray
    rho0: np.ndarray
    nu: np.ndarray

    @property
    def delta_mu(self):
        return self.mu1 - self.mu0

    def mu(self, arm):
        return self.mu1 if arm == 1 else self.mu0

    def pi(self, arm):
        return self.pi1 if arm == 1 else self.pi0


class NuisanceSet(object):
    """ Evaluable nuisance functions η = (μ₀, μ₁, π₀, π₁, ρ₀, ν).

    Every evaluation re-applies the clipping rules, so any component (fitted, oracle or
    perturbed) yields values in range. Instances are never modified after creation.
    """

    def __init__(self, mu0, mu1, rho0, arm, nu, bounds, n_levels, eps=EPS_P):
        self.bounds = bounds
        self.n_levels = n_levels
        self.eps = eps
        self.raw_mu0 = mu0
        self.raw_mu1 = mu1
        self.propensity = PropensityModel(rho0, arm, eps)
        self.raw_nu = nu
        self._nu = SimplexModel(nu, n_levels, eps)
        self.perturbation = None

    def __repr__(self):
        return "%s(levels=%d, eps=%g, perturbed=%s)" % (
            type(self).__name__,
            self.n_levels,
            self.eps,
            self.perturbation is not None,
        )

    def mu0(self, v):
        return Clipped(self.raw_mu0, self.bounds.a, self.bounds.b)(v)

    def mu1(self, v):
        return Clipped(self.raw_mu1, self.bounds.a, self.bounds.b)(v)

    def delta_mu(self, v):
        return self.mu1(v) - self.mu0(v)

    def rho0(self, v):
        return self.propensity.rho0(v)

    def pi0(self, v):
        return self.propensity.pi0(v)

    def pi1(self, v):
        return self.propensity.pi1(v)

    def arm(self, v):
        """ Unclipped P(A=1 | v, E=1) as stored (used when perturbing π). """
        return np.asarray(self.propensity.raw_arm(v), dtype=float).reshape(-1)

    def nu(self, v):
        return self._nu(v)

    def nu_at(self, v, w_index):
        return self.nu(v)[np.arange(np.atleast_2d(v).shape[0]), np.asarray(w_index, dtype=int)]

    def evaluate(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        pi0, pi1 = self.propensity._split(v)
        return NuisanceValues(
            mu0=self.mu0(v),
            mu1=self.mu1(v),
            pi0=pi0,
            pi1=pi1,
            rho0=self.rho0(v),
            nu=self.nu(v),
        )

    def replace(self, **components):
        """ Copy with some raw components (mu0, mu1, rho0, arm, nu) swapped. """
        values = dict(
            mu0=self.raw_mu0,
            mu1=self.raw_mu1,
            rho0=self.propensity.raw_rho0,
            arm=self.propensity.raw_arm,
            nu=self.raw_nu,
            bounds=self.bounds,
            n_levels=self.n_levels,
            eps=self.eps,
        )
        values.update(components)
        return NuisanceSet(**values)


def _study(dataset):
    return dataset.e == 1


def fit_outcome(dataset, spec):
    """ Fit μ_a(v) = E(Y | V=v, A=a, E=1) separately per arm.

    :return: (mu0, mu1) callables clipped to the outcome bounds
    """
    models = []
    for arm in (0, 1):
        mask = _study(dataset) & (dataset.a == arm)
        if not mask.any():
            raise PositivityError(arm=arm)
        model = fit_regressor(spec, dataset.v[mask], dataset.y[mask])
        models.append(Clipped(model, dataset.bounds.a, dataset.bounds.b))
    return tuple(models)


def _fit_propensity_model(dataset, spec, eps):
    study = _study(dataset)
    if study.all() or not study.any():
        raise OverlapError(n_study=int(study.sum()), n=len(dataset))
    arms = dataset.a[study]
    if np.unique(arms).size < 2:
        raise PositivityError(arms=np.unique(arms))
    rho0 = Column(fit_classifier(spec, dataset.v, (~study).astype(int), 2), 1)
    arm = Column(fit_classifier(spec, dataset.v[study], arms, 2), 1)
    return PropensityModel(rho0, arm, eps)


def fit_propensities(dataset, spec, eps=EPS_P):
    """ Fit ρ₀ on all units and P(A=1|V,E=1) on study units.

    :return: (pi0, pi1, rho0) callables sharing one clipped propensity model
    """
    model = _fit_propensity_model(dataset, spec, eps)
    return model.pi0, model.pi1, model.rho0


def fit_w_model(dataset, spec, eps=EPS_P):
    """ Fit ν(v, ·) = P(W=· | V=v, E=0) on the target units.

    Levels missing from the fold keep the clipped minimum probability.
    """
    target = dataset.e == 0
    if not target.any():
        raise DataError("no E=0 samples to fit the W model")
    n_levels = dataset.w_support.size
    if n_levels == 1:
        return SimplexModel(None, 1, eps)
    model = fit_classifier(spec, dataset.v[target], dataset.w[target], n_levels)
    return SimplexModel(model, n_levels, eps)


def fit_nuisances(dataset, learners, eps=EPS_P):
    """ Fit the full nuisance set on one fold. """
    start_time = time.time()
    learners = NuisanceLearners.coerce(learners)
    mu0, mu1 = fit_outcome(dataset, learners.outcome)
    propensity = _fit_propensity_model(dataset, learners.propensity, eps)
    nu = fit_w_model(dataset, learners.w_model, eps)
    eta = NuisanceSet(
        mu0=mu0,
        mu1=mu1,
        rho0=propensity.raw_rho0,
        arm=propensity.raw_arm,
        nu=nu,
        bounds=dataset.bounds,
        n_levels=dataset.w_support.size,
        eps=eps,
    )
    logger.debug("Fit took %f: nuisances on %r", time.time() - start_time, dataset)
    return eta


@dataclass(frozen=True)
class PerturbationSpec:
    targets: typing.Tuple[str, ...]
    magnitude: float
    shape: str = CONSTANT_SHIFT
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.targets, str):
            object.__setattr__(self, "targets", (self.targets,))
        for target in self.targets:
            Choice(TARGETS).check(target, "perturbation.targets")
        if "pi0" in self.targets and "pi1" in self.targets:
            raise ConfigError("pi0 and pi1 cannot be perturbed together")
        Choice(SHAPES).check(self.shape, "perturbation.shape")
        FloatRange(0.0, float("inf")).check(self.magnitude, "perturbation.magnitude")


class ShapeFunction(object):
    """ s(v): 1 for constant shifts, cos(ωᵀv + φ) scaled to mean |s| = 1 otherwise. """

    def __init__(self, shape, seed, dim, reference_v=None):
        self.shape = shape
        rng = np.random.default_rng([seed, 17])
        self.omega = rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim)
        self.phase = rng.uniform(0.0, 2 * np.pi)
        self.scale = 1.0
        if shape == SMOOTH:
            if reference_v is None:
                raise ConfigError("smooth perturbation needs a reference sample")
            self.scale = 1.0 / np.mean(np.abs(self._raw(reference_v)))

    def _raw(self, v):
        return np.cos(np.atleast_2d(np.asarray(v, dtype=float)) @ self.omega + self.phase)

    def __call__(self, v):
        if self.shape == CONSTANT_SHIFT:
            return np.ones(np.atleast_2d(v).shape[0])
        return self.scale * self._raw(v)


class Shifted(object):
    def __init__(self, func, shape, magnitude):
        self.func = func
        self.shape = shape
        self.magnitude = magnitude

    def __call__(self, v):
        return np.asarray(self.func(v), dtype=float).reshape(-1) + self.magnitude * self.shape(v)


class ShiftedArm(object):
    """ Arm probability implied by shifting π_arm while ρ₀ stays fixed. """

    def __init__(self, eta, shape, magnitude, arm):
        self.eta = eta
        self.shape = shape
        self.magnitude = magnitude
        self.arm = arm

    def __call__(self, v):
        room = 1.0 - self.eta.rho0(v)
        pi = self.eta.pi1(v) if self.arm == 1 else self.eta.pi0(v)
        shifted = (pi + self.magnitude * self.shape(v)) / room
        return shifted if self.arm == 1 else 1.0 - shifted


class ShiftedSimplex(object):
    """ ν + ε s(v) c with c a level vector of mean zero and mean |c| = 1. """

    def __init__(self, func, shape, magnitude, levels):
        self.func = func
        self.shape = shape
        self.magnitude = magnitude
        self.levels = levels

    def __call__(self, v):
        return np.asarray(self.func(v), dtype=float) + self.magnitude * np.outer(self.shape(v), self.levels)


def _level_noise(n_levels, seed):
    if n_levels == 1:
        return np.zeros(1)
    rng = np.random.default_rng([seed, 29])
    levels = rng.normal(size=n_levels)
    levels -= levels.mean()
    return levels / np.mean(np.abs(levels))


def perturb(eta, spec, reference_v=None):
    """ Return a copy of ``eta`` with error injected into ``spec.targets``.

    The realized mean absolute deviation of every target on ``reference_v`` (after
    re-clipping) is stored in ``perturbation["realized"]`` of the returned set.
    """
    if spec.magnitude == 0:
        return eta
    dim = None
    if reference_v is not None:
        reference_v = np.atleast_2d(np.asarray(reference_v, dtype=float))
        dim = reference_v.shape[1]
    if dim is None:
        if spec.shape == SMOOTH:
            raise ConfigError("smooth perturbation needs a reference sample")
        dim = 1
    shape = ShapeFunction(spec.shape, spec.seed, dim, reference_v)
    components = {}
    for target in spec.targets:
        if target in ("mu0", "mu1"):
            components[target] = Shifted(getattr(eta, target), shape, spec.magnitude)
        elif target == "rho0":
            # the arm probability stays, so both π_a rescale with 1 - ρ₀
            components["rho0"] = Shifted(eta.rho0, shape, spec.magnitude)
        elif target in ("pi0", "pi1"):
            components["arm"] = ShiftedArm(eta, shape, spec.magnitude, 1 if target == "pi1" else 0)
        else:
            components["nu"] = ShiftedSimplex(eta.nu, shape, spec.magnitude, _level_noise(eta.n_levels, spec.seed))
    perturbed = eta.replace(**components)
    realized = None
    if reference_v is not None:
        realized = {
            target: float(np.mean(np.abs(getattr(perturbed, target)(reference_v) - getattr(eta, target)(reference_v))))
            for target in spec.targets
        }
        logger.debug("perturbation %r realized %r", spec, realized)
    perturbed.perturbation = {"spec": spec, "realized": realized}
    return perturbed

