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
import pandas as pd

from sklearn.preprocessing import PolynomialFeatures

from ecobounds.bounds import LOWER, SIDES, UPPER, SensitivityLevel, branches
from ecobounds.data_model import Dataset, split
from ecobounds.errors import ConfigError, DataError, SolverFailed
from ecobounds.learners import NuisanceLearners
from ecobounds.nuisance import EPS_P, fit_nuisances
from ecobounds.utils.numeric import solve_with_ridge, tree_mean
from ecobounds.utils.tables import fingerprint
from ecobounds.validators import Choice, PositiveInteger

logger = logging.getLogger("ecobounds.estimator")

TARGET = "target"
POOLED = "pooled"
POPULATIONS = (TARGET, POOLED)
PLUGIN = "plugin"
BIAS_CORRECTED = "bias-corrected"
METHODS = (PLUGIN, BIAS_CORRECTED)

GN_TOLERANCE = 1e-10
GN_MAX_ITERATIONS = 200


@dataclass(frozen=True)
class ModelSpec:
    """ Projection model m(x; β) of one side of the bound.

    The default form is linear in a polynomial basis of x (``degree``, ``intercept``).
    ``weight`` is h(x) (None means h = 1). A non-linear ``model`` is a callable
    ``model(x, beta)`` over rows of x and needs ``beta_dim``; it is solved by
    Gauss-Newton instead of in closed form.
    """

    side: str = LOWER
    delta: typing.Optional[float] = None
    degree: int = 1
    intercept: bool = True
    population: str = TARGET
    weight: typing.Optional[typing.Callable] = None
    model: typing.Optional[typing.Callable] = None
    beta_dim: typing.Optional[int] = None

    def __post_init__(self):
        Choice(SIDES).check(self.side, "model.side")
        Choice(POPULATIONS).check(self.population, "model.population")
        PositiveInteger(1).check(self.degree, "model.degree")
        if self.delta is not None:
            SensitivityLevel(self.delta)
        if self.model is not None and not self.beta_dim:
            raise ConfigError("a non-linear model needs beta_dim")

    @property
    def is_linear(self):
        return self.model is None

    def basis(self, raw_x):
        """ Basis of the linear form on x without its constant column. """
        raw_x = np.atleast_2d(raw_x)
        if self.degree > 1:
            raw_x = PolynomialFeatures(self.degree, include_bias=False).fit_transform(raw_x)
        if self.intercept:
            raw_x = np.hstack([raw_x, np.ones((raw_x.shape[0], 1))])
        return raw_x

    def features(self, raw_x):
        """ x handed to h and to a non-linear model. """
        raw_x = np.atleast_2d(raw_x)
        if self.intercept:
            return np.hstack([raw_x, np.ones((raw_x.shape[0], 1))])
        return raw_x

    def as_config(self):
        return {
            "side": self.side,
            "delta": self.delta,
            "degree": self.degree,
            "intercept": self.intercept,
            "population": self.population,
            "weighted": self.weight is not None,
            "linear": self.is_linear,
        }


@dataclass
class FoldFit:
    estimate: "BetaEstimate"
    eta: typing.Any
    evaluation: typing.Any
    training: typing.Any


@dataclass
class BetaEstimate:
    beta: np.ndarray
    side: str
    delta: typing.Optional[float]
    moment_residual: float
    n_used: int
    method: str = BIAS_CORRECTED
    population: str = TARGET
    warnings: typing.List[str] = field(default_factory=list)
    covariance: typing.Any = None
    seed: typing.Optional[int] = None
    learner: typing.Optional[str] = None
    folds: typing.List[FoldFit] = field(default_factory=list, repr=False)

    def as_record(self):
        record = {
            "side": self.side,
            "delta": self.delta,
            "beta": [float(b) for b in self.beta],
            "moment_residual": float(self.moment_residual),
            "n_used": int(self.n_used),
            "method": self.method,
            "population": self.population,
            "warnings": list(self.warnings),
            "seed": self.seed,
            "learner": self.learner,
        }
        if self.covariance is not None:
            record["covariance"] = self.covariance.as_record()
        return record


def indicator(tau_hat, side, bounds):
    """ Margin indicator of the moment: 1 when the τ branch of the bound is active.

    Lower side: τ + b - a >= 0. Upper side: τ + a - b <= 0. Both comparisons are closed.
    """
    if side == LOWER:
        return int(tau_hat + bounds.b - bounds.a >= 0)
    if side == UPPER:
        return int(tau_hat + bounds.a - bounds.b <= 0)
    raise ConfigError("unknown side", side=side)


class Design(object):
    """ Everything φ needs that does not depend on β, for one dataset and one η.

    Arrays are laid out (unit, W level, ...). ``omega`` weights the closing term: the
    observed level for target units, and for study units nothing (target population)
    or ν̂(V, ·) (pooled population).
    """

    def __init__(self, dataset, eta, spec, tau_shift=0.0):
        start_time = time.time()
        self.spec = spec
        self.n = len(dataset)
        self.n_levels = k = dataset.w_support.size
        values = eta.evaluate(dataset.v)
        self.nu = values.nu

        raw_v = np.repeat(dataset.v[:, None, :], k, axis=1)
        raw_w = np.broadcast_to(dataset.w_support.table[None, :, :], (self.n, k, dataset.w_support.dim))
        raw_x = np.concatenate([raw_v, raw_w], axis=2).reshape(self.n * k, -1)
        self.x = spec.features(raw_x).reshape(self.n, k, -1)
        self.basis = spec.basis(raw_x).reshape(self.n, k, -1) if spec.is_linear else None
        if spec.weight is None:
            self.h = np.ones((self.n, k))
        else:
            self.h = np.asarray(spec.weight(self.x.reshape(self.n * k, -1)), dtype=float).reshape(self.n, k)

        delta_mu = np.repeat(values.delta_mu[:, None], k, axis=1)
        pieces = branches(delta_mu, values.nu, dataset.bounds, spec.side, spec.delta)
        self.active = pieces.select(tau_shift)
        self.gamma = np.sum(self.active * pieces.values, axis=-1)
        # sensitivities of γ in Δμ and ν, each scaled by ν
        self.s_mu = np.sum(self.active * pieces.d_mu, axis=-1) * values.nu
        self.s_nu = np.sum(self.active * pieces.d_nu, axis=-1) * values.nu

        target = dataset.e == 0
        study = dataset.e == 1
        self.target = target
        self.observed = np.zeros((self.n, k))
        self.observed[np.flatnonzero(target), dataset.w[target]] = 1.0
        self.omega = self.observed.copy()
        if spec.population == POOLED:
            self.omega[study] = values.nu[study]

        arm = np.where(study, dataset.a, 0)
        y = np.where(study, dataset.y, 0.0)
        residual = np.where(
            arm == 1,
            (y - values.mu1) / values.pi1,
            -(y - values.mu0) / values.pi0,
        )
        self.residual = np.where(study, residual, 0.0)
        if spec.population == TARGET:
            self.residual = self.residual * values.rho0
            self.nu_weight = target.astype(float)
        else:
            self.nu_weight = target / values.rho0
        self.n_used = self.n
        logger.debug("Design took %f: %d units, %d levels", time.time() - start_time, self.n, k)

    def model_terms(self, beta):
        """ (g, m): g = h ∂m/∂β and m(x; β) at every unit and level. """
        beta = np.asarray(beta, dtype=float)
        if self.spec.is_linear:
            return self.h[..., None] * self.basis, self.basis @ beta
        flat_x = self.x.reshape(self.n * self.n_levels, -1)
        m = self._model(flat_x, beta)
        jacobian = np.empty(m.shape + beta.shape)
        for j in range(beta.size):
            step = 1e-6 * max(1.0, abs(beta[j]))
            shift = np.zeros_like(beta)
            shift[j] = step
            jacobian[:, j] = (self._model(flat_x, beta + shift) - self._model(flat_x, beta - shift)) / (2 * step)
        shape = (self.n, self.n_levels)
        return self.h[..., None] * jacobian.reshape(shape + beta.shape), m.reshape(shape)

    def _model(self, flat_x, beta):
        return np.asarray(self.spec.model(flat_x, beta), dtype=float).reshape(-1)

    def corrections(self, g):
        """ First-order corrections (residual and ν terms) per unit. """
        residual_term = self.residual[:, None] * np.sum(g * self.s_mu[..., None], axis=1)
        observed_g = np.sum(self.observed[..., None] * g * self.s_nu[..., None], axis=1)
        averaged_g = np.sum((self.nu * self.s_nu)[..., None] * g, axis=1)
        return residual_term + self.nu_weight[:, None] * (observed_g - averaged_g)

    def phi(self, beta, corrected=True):
        g, m = self.model_terms(beta)
        closing = np.sum((self.omega * (self.gamma - m))[..., None] * g, axis=1)
        if not corrected:
            return closing
        return closing + self.corrections(g)


def _check_populations(dataset, spec, corrected):
    if not np.any(dataset.e == 0):
        raise DataError("no E=0 samples to project on")
    if corrected and not np.any(dataset.e == 1):
        raise DataError("no E=1 samples for the bias correction")


def influence_matrix(dataset, beta, eta, spec, corrected=True, tau_shift=0.0):
    """ φ(Z_i; β, η) for every unit i, shape (n, dim β). """
    return Design(dataset, eta, spec, tau_shift).phi(beta, corrected)


def influence_phi(sample, beta, eta, spec, w_support):
    """ φ of a single observation. """
    dataset = Dataset.from_samples([sample], eta.bounds, w_support)
    return Design(dataset, eta, spec).phi(beta)[0]


def mean_influence(dataset, beta, eta, spec, tau_shift=0.0, corrected=True):
    """ P_n φ(β): the estimating equation at a fixed β. """
    phi = influence_matrix(dataset, beta, eta, spec, corrected, tau_shift)
    return tree_mean(_rows_used(phi, dataset, spec, corrected), axis=0)


def _rows_used(phi, dataset, spec, corrected):
    # without corrections a target projection only averages over target units
    if not corrected and spec.population == TARGET:
        return phi[dataset.e == 0]
    return phi


def _linear_solve(design, rows, corrected, warnings):
    g, _ = design.model_terms(np.zeros(design.basis.shape[-1]))
    slope = np.einsum("nk,nki,nkj->nij", design.omega, g, design.basis)
    intercept = np.sum((design.omega * design.gamma)[..., None] * g, axis=1)
    if corrected:
        intercept = intercept + design.corrections(g)
    slope_mean = tree_mean(slope[rows], axis=0)
    return solve_with_ridge(slope_mean, tree_mean(intercept[rows], axis=0), warnings, what="projection"), slope_mean


def jacobian(design, beta, rows, corrected=True):
    """ ∂ P_n φ / ∂β; exact for the linear form, central differences otherwise. """
    if design.spec.is_linear:
        g, _ = design.model_terms(beta)
        return -tree_mean(np.einsum("nk,nki,nkj->nij", design.omega, g, design.basis)[rows], axis=0)
    beta = np.asarray(beta, dtype=float)
    columns = []
    for j in range(beta.size):
        step = 1e-6 * max(1.0, abs(beta[j]))
        shift = np.zeros_like(beta)
        shift[j] = step
        upper = tree_mean(design.phi(beta + shift, corrected)[rows], axis=0)
        lower = tree_mean(design.phi(beta - shift, corrected)[rows], axis=0)
        columns.append((upper - lower) / (2 * step))
    return np.column_stack(columns)


def _gauss_newton(design, rows, corrected, start):
    beta = np.asarray(start, dtype=float)

    def residual(b):
        return tree_mean(design.phi(b, corrected)[rows], axis=0)

    current = residual(beta)
    iteration = 0
    for iteration in range(GN_MAX_ITERATIONS):
        jac = jacobian(design, beta, rows, corrected)
        if np.linalg.norm(jac.T @ current) < GN_TOLERANCE or np.max(np.abs(current)) < GN_TOLERANCE:
            return beta, iteration
        step = np.linalg.lstsq(jac, -current, rcond=None)[0]
        scale = 1.0
        while scale > 1e-8:
            candidate = beta + scale * step
            value = residual(candidate)
            if np.linalg.norm(value) < np.linalg.norm(current):
                break
            scale /= 2.0
        else:
            break
        beta, current = candidate, value
    raise SolverFailed(residual=float(np.max(np.abs(current))), iterations=iteration + 1)


def _solve(dataset, eta, spec, corrected, tau_shift=0.0, start=None):
    _check_populations(dataset, spec, corrected)
    start_time = time.time()
    design = Design(dataset, eta, spec, tau_shift)
    rows = np.ones(len(dataset), dtype=bool)
    if not corrected and spec.population == TARGET:
        rows = dataset.e == 0
    warnings = []
    if spec.is_linear:
        beta, _ = _linear_solve(design, rows, corrected, warnings)
    else:
        beta, iterations = _gauss_newton(
            design, rows, corrected, np.zeros(spec.beta_dim) if start is None else start
        )
        logger.debug("Gauss-Newton converged after %d iterations", iterations)
    residual = float(np.max(np.abs(tree_mean(design.phi(beta, corrected)[rows], axis=0))))
    estimate = BetaEstimate(
        beta=beta,
        side=spec.side,
        delta=spec.delta,
        moment_residual=residual,
        n_used=int(rows.sum()),
        method=BIAS_CORRECTED if corrected else PLUGIN,
        population=spec.population,
        warnings=warnings,
    )
    logger.debug(
        "Solve took %f: %s %s side on %d units (residual %g)",
        time.time() - start_time,
        estimate.method,
        spec.side,
        estimate.n_used,
        residual,
    )
    return estimate


def plugin_beta(dataset, eta, spec):
    """ Project the plug-in bound γ̂ on the model (no influence-function correction). """
    return _solve(dataset, eta, spec, corrected=False)


def solve_bias_corrected(dataset, eta, spec, tau_shift=0.0, start=None):
    """ Solve P_n φ(β) = 0 on ``dataset`` with nuisances fitted elsewhere.

    :param tau_shift: moves τ̂ inside the indicator only (margin experiments)
    :param start: Gauss-Newton starting point for a non-linear model
    """
    return _solve(dataset, eta, spec, corrected=True, tau_shift=tau_shift, start=start)


def _fold_estimate(training, evaluation, spec, learners, method, eps):
    eta = fit_nuisances(training, learners, eps)
    if method == PLUGIN:
        estimate = plugin_beta(evaluation, eta, spec)
    else:
        estimate = solve_bias_corrected(evaluation, eta, spec)
    return FoldFit(estimate=estimate, eta=eta, evaluation=evaluation, training=training)


def crossfit(dataset, spec, learners, seed, folds=2, swap=True, method=BIAS_CORRECTED, eps=EPS_P, fraction=0.5):
    """ Split, fit nuisances on one half, solve on the other.

    With ``swap`` the roles are exchanged and the two β̂ averaged.
    """
    if folds != 2:
        raise ConfigError("only two folds are supported", folds=folds)
    Choice(METHODS).check(method, "estimator.method")
    learners = NuisanceLearners.coerce(learners)
    first, second = split(dataset, fraction, seed)
    fits = [_fold_estimate(first, second, spec, learners, method, eps)]
    if swap:
        fits.append(_fold_estimate(second, first, spec, learners, method, eps))
    warnings = []
    for fit in fits:
        warnings.extend(w for w in fit.estimate.warnings if w not in warnings)
    return BetaEstimate(
        beta=np.mean([fit.estimate.beta for fit in fits], axis=0),
        side=spec.side,
        delta=spec.delta,
        moment_residual=max(fit.estimate.moment_residual for fit in fits),
        n_used=sum(fit.estimate.n_used for fit in fits),
        method=method,
        population=spec.population,
        warnings=warnings,
        seed=seed,
        learner=fingerprint(learners.as_config()),
        folds=fits,
    )


def margin_variable(dataset, eta, side):
    """ τ̂ + b - a (lower) or τ̂ + a - b (upper) at the target units' observed W. """
    target = dataset.e == 0
    v = dataset.v[target]
    nu = eta.nu_at(v, dataset.w[target])
    pieces = branches(eta.delta_mu(v), nu, dataset.bounds, side)
    tau = pieces.values[:, 0]
    return tau + dataset.bounds.b - dataset.bounds.a if side == LOWER else tau + dataset.bounds.a - dataset.bounds.b


def margin_table(values, t_grid):
    """ Fraction of ``values`` within t of zero for every t, and the log-log slope. """
    t_grid = np.asarray(list(t_grid), dtype=float)
    if t_grid.size == 0:
        raise ConfigError("empty t grid")
    values = np.abs(np.asarray(values, dtype=float))
    fractions = np.array([np.mean(values <= t) for t in t_grid])
    usable = (t_grid > 0) & (fractions > 0)
    alpha_hat = float("nan")
    if np.unique(t_grid[usable]).size >= 2:
        alpha_hat = float(np.polyfit(np.log(t_grid[usable]), np.log(fractions[usable]), 1)[0])
    return pd.DataFrame({"t": t_grid, "fraction": fractions}), alpha_hat


@dataclass
class MarginDiagnostic:
    table: pd.DataFrame
    alpha_hat: float
    side: str


def margin_diagnostic(dataset, eta, side, t_grid):
    table, alpha_hat = margin_table(margin_variable(dataset, eta, side), t_grid)
    return MarginDiagnostic(table=table, alpha_hat=alpha_hat, side=side)
