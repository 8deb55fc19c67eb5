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

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from scipy.special import entr
from scipy.stats import spearmanr

from ecobounds.baseline_dr import fit_dr_restricted
from ecobounds.bounds import LOWER, UPPER, SensitivityLevel, pointwise_bounds
from ecobounds.data_model import encode_profiles
from ecobounds.estimator import ModelSpec, crossfit, mean_influence, plugin_beta, solve_bias_corrected
from ecobounds.inference import BOOTSTRAP, bootstrap, crossfit_sandwich, mean_bound, sandwich
from ecobounds.learners import LearnerSpec
from ecobounds.nuisance import EPS_P, SMOOTH, PerturbationSpec, fit_nuisances, perturb
from ecobounds.simulation.dgp import generate, oracle_beta
from ecobounds.utils.parallel import WorkerPool

logger = logging.getLogger("ecobounds.simulation.experiments")

COLUMNS = ["experiment", "seed", "cell", "estimator", "metric", "value"]


@dataclass
class ExperimentResult:
    name: str
    table: pd.DataFrame
    metadata: typing.Dict[str, typing.Any] = field(default_factory=dict)

    def summary(self):
        """ Mean and Monte Carlo standard error of every metric per cell and estimator. """
        grouped = self.table.groupby(["cell", "estimator", "metric"], sort=True)["value"]
        frame = grouped.agg(["mean", "std", "count"]).reset_index()
        frame["se"] = frame["std"] / np.sqrt(frame["count"])
        return frame


def _row(experiment, seed, cell, estimator, metric, value, **extra):
    row = {
        "experiment": experiment,
        "seed": seed,
        "cell": cell,
        "estimator": estimator,
        "metric": metric,
        "value": float(value),
    }
    row.update(extra)
    return row


def _result(name, batches, metadata):
    rows = [row for batch in batches for row in batch]
    table = pd.DataFrame(rows)
    if table.empty:
        table = pd.DataFrame(columns=COLUMNS)
    return ExperimentResult(name=name, table=table, metadata=metadata)


def loglog_slope(eps, values):
    """ Least-squares slope of log |value| on log ε over the positive pairs. """
    eps = np.asarray(eps, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    usable = (eps > 0) & (values > 0)
    if usable.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[usable]), np.log(values[usable]), 1)[0])


def _spec(spec):
    return spec if spec is not None else ModelSpec()


class _ErrorGridTask(object):
    def __init__(self, config, grid, spec, shape, n_oracle):
        self.config = config
        self.grid = grid
        self.spec = spec
        self.shape = shape
        self.n_oracle = n_oracle

    def __call__(self, seed):
        config = replace(self.config, replicate=seed)
        dataset, truth = generate(config)
        beta_star = oracle_beta(config, self.spec, self.n_oracle, dataset.bounds)
        base = truth.eta.replace(eps=EPS_P)
        rows = []
        for eps_outcome, eps_propensity in self.grid:
            eta, realized = base, {}
            # each component gets its own error direction
            for offset, target, magnitude in (
                (0, "mu0", eps_outcome),
                (1, "mu1", eps_outcome),
                (2, "pi1", eps_propensity),
                (3, "rho0", eps_propensity),
            ):
                spec = PerturbationSpec((target,), magnitude, self.shape, seed=4 * seed + offset)
                eta = perturb(eta, spec, dataset.v)
                if eta.perturbation is not None and eta.perturbation["realized"]:
                    realized.update(eta.perturbation["realized"])
            cell = "%g:%g" % (eps_outcome, eps_propensity)
            extra = dict(
                eps_outcome=eps_outcome,
                eps_propensity=eps_propensity,
                realized_outcome=np.mean([realized.get("mu0", 0.0), realized.get("mu1", 0.0)]),
                realized_propensity=np.mean([realized.get("pi1", 0.0), realized.get("rho0", 0.0)]),
            )
            for name, estimate in (
                ("plugin", plugin_beta(dataset, eta, self.spec)),
                ("bias-corrected", solve_bias_corrected(dataset, eta, self.spec)),
            ):
                mad = np.mean(np.abs(estimate.beta - beta_star))
                rows.append(_row("error-grid", seed, cell, name, "mad", mad, **extra))
        return rows


def run_error_grid(config, grid, seeds, spec=None, shape=SMOOTH, n_oracle=10 ** 5, threads=None):
    """ Inject error into oracle outcome and propensity models, compare both estimators.

    :param grid: iterable of (ε_outcome, ε_propensity) cells
    :return: two rows (plug-in, bias-corrected) per cell and seed
    """
    start_time = time.time()
    grid = [(float(a), float(b)) for a, b in grid]
    task = _ErrorGridTask(config, grid, _spec(spec), shape, n_oracle)
    batches = WorkerPool(threads).map(task, seeds, label="error-grid")
    result = _result("error-grid", batches, {"config": config.as_config(), "grid": grid, "seeds": list(seeds)})
    logger.debug("Experiment took %f: error grid %d cells", time.time() - start_time, len(grid))
    return result


class _EntropyTask(object):
    def __init__(self, config):
        self.config = config

    def __call__(self, task):
        scale, seed = task
        dataset, truth = generate(replace(self.config, w_scale=scale, replicate=seed))
        target = dataset.e == 0
        entropy = np.mean(np.sum(entr(truth.eta.nu(dataset.v[target])), axis=1))
        frame = pointwise_bounds(dataset, truth.eta)
        observed = frame[frame["observed_w"]]
        width = np.mean(observed["gamma_upper"] - observed["gamma_lower"])
        return [
            _row("entropy", seed, scale, "oracle", "entropy", entropy),
            _row("entropy", seed, scale, "oracle", "width", width),
        ]


def run_entropy_sweep(config, scales, seeds, threads=None):
    """ Mean entropy of ν(v, ·) against mean worst-case width, per W-dependence scale. """
    tasks = [(float(scale), seed) for scale in scales for seed in seeds]
    batches = WorkerPool(threads).map(_EntropyTask(config), tasks, label="entropy")
    result = _result("entropy", batches, {"config": config.as_config(), "scales": list(scales), "seeds": list(seeds)})
    means = result.table.groupby(["cell", "metric"])["value"].mean().unstack("metric")
    correlation = float("nan")
    if len(means) >= 3:
        correlation = float(spearmanr(means["entropy"], means["width"]).correlation)
    result.metadata["spearman_entropy_width"] = correlation
    return result


class _DeltaTask(object):
    def __init__(self, config, deltas, learners, spec, inference, replicates):
        self.config = config
        self.deltas = deltas
        self.learners = learners
        self.spec = spec
        self.inference = inference
        self.replicates = replicates

    def __call__(self, seed):
        dataset, truth = generate(replace(self.config, replicate=seed))
        target = dataset.e == 0
        true_cate = truth.cate[target]
        raw_x = encode_profiles(dataset.v[target], dataset.w[target], dataset.w_support, intercept=False)
        basis = self.spec.basis(raw_x)
        baseline = fit_dr_restricted(dataset, self.learners, seed).predict(dataset.v[target])
        eta = fit_nuisances(dataset, self.learners)
        rows = []
        for delta in self.deltas:
            delta = min(float(delta), dataset.bounds.width)
            fitted, intervals = {}, {}
            for side in (LOWER, UPPER):
                spec = replace(self.spec, side=side, delta=delta)
                estimate = crossfit(dataset, spec, self.learners, seed)
                if self.inference == BOOTSTRAP:
                    estimate.covariance = bootstrap(dataset, spec, self.learners, self.replicates, seed, threads=1)
                else:
                    estimate.covariance = crossfit_sandwich(estimate, spec)
                fitted[side] = basis @ estimate.beta
                intervals[side] = mean_bound(estimate.covariance, estimate.beta, basis)[1]
            pointwise = pointwise_bounds(dataset, eta, SensitivityLevel(delta))
            pointwise = pointwise[pointwise["observed_w"]]
            inside = (pointwise["gamma_lower"].to_numpy() <= true_cate) & (true_cate <= pointwise["gamma_upper"].to_numpy())
            restricted = baseline["estimate"].to_numpy()
            metrics = [
                ("bounds", "mean_lower", np.mean(fitted[LOWER])),
                ("bounds", "mean_upper", np.mean(fitted[UPPER])),
                ("bounds", "mean_lower_ci_low", intervals[LOWER][0]),
                ("bounds", "mean_lower_ci_high", intervals[LOWER][1]),
                ("bounds", "mean_upper_ci_low", intervals[UPPER][0]),
                ("bounds", "mean_upper_ci_high", intervals[UPPER][1]),
                ("bounds", "mean_width", np.mean(fitted[UPPER] - fitted[LOWER])),
                ("bounds", "coverage", np.mean((fitted[LOWER] <= true_cate) & (true_cate <= fitted[UPPER]))),
                ("bounds", "coverage_pointwise", np.mean(inside)),
                ("bounds", "mean_width_pointwise", np.mean(pointwise["gamma_upper"] - pointwise["gamma_lower"])),
                ("naive", "mean_width", 2 * delta),
                ("naive", "coverage", np.mean(np.abs(true_cate - restricted) <= delta)),
                (
                    "dr-baseline",
                    "coverage",
                    np.mean((baseline["ci_lower"].to_numpy() <= true_cate) & (true_cate <= baseline["ci_upper"].to_numpy())),
                ),
            ]
            for estimator, metric, value in metrics:
                rows.append(_row("delta-sweep", seed, delta, estimator, metric, value))
        rows.append(_row("delta-sweep", seed, float("nan"), "truth", "true_delta", truth.true_delta(target)))
        rows.append(_row("delta-sweep", seed, float("nan"), "truth", "mean_delta", truth.mean_delta(target)))
        return rows


def run_delta_sweep(config, deltas, seeds, learners=None, spec=None, inference="sandwich", replicates=100, threads=None):
    """ Bounds in the sensitivity model across δ, with coverage of the true CATE.

    Also reports the ±δ band around the restricted CATE and the coverage of the
    DR baseline's intervals.
    """
    learners = learners if learners is not None else LearnerSpec()
    task = _DeltaTask(config, [float(d) for d in deltas], learners, _spec(spec), inference, replicates)
    batches = WorkerPool(threads).map(task, seeds, label="delta-sweep")
    return _result(
        "delta-sweep",
        batches,
        {"config": config.as_config(), "deltas": list(deltas), "seeds": list(seeds), "inference": inference},
    )


class _BiasTask(object):
    def __init__(self, config, targets, eps_grid, spec, shape, n_oracle, perturbation_seed, margin):
        self.config = config
        self.targets = targets
        self.eps_grid = eps_grid
        self.spec = spec
        self.shape = shape
        self.n_oracle = n_oracle
        self.perturbation_seed = perturbation_seed
        self.margin = margin

    def __call__(self, seed):
        config = replace(self.config, replicate=seed)
        dataset, truth = generate(config)
        beta_star = oracle_beta(config, self.spec, self.n_oracle, dataset.bounds)
        base_eta = truth.eta if self.margin else truth.eta.replace(eps=EPS_P)
        base = mean_influence(dataset, beta_star, base_eta, self.spec)
        rows = []
        for eps in self.eps_grid:
            if self.margin:
                moment = mean_influence(dataset, beta_star, base_eta, self.spec, tau_shift=eps)
            else:
                spec = PerturbationSpec(self.targets, eps, self.shape, self.perturbation_seed)
                moment = mean_influence(dataset, beta_star, perturb(base_eta, spec, dataset.v), self.spec)
            for j, shift in enumerate(moment - base):
                rows.append(_row(self.name, seed, eps, "bias-corrected", "shift_%d" % j, shift))
            rows.append(_row(self.name, seed, eps, "bias-corrected", "moment_norm", np.max(np.abs(moment))))
        return rows

    @property
    def name(self):
        return "margin-replacement" if self.margin else "bias-order"


def _bias_metadata(result, eps_grid):
    shifts = result.table[result.table["metric"].str.startswith("shift_")]
    bias, errors = [], []
    for eps in eps_grid:
        cell = shifts[shifts["cell"] == eps].pivot(index="seed", columns="metric", values="value")
        mean = cell.mean(axis=0).to_numpy()
        se = (cell.std(axis=0, ddof=1) / np.sqrt(len(cell))).to_numpy() if len(cell) > 1 else np.full_like(mean, np.nan)
        bias.append(float(np.linalg.norm(mean)))
        errors.append(float(np.max(np.abs(mean) / se)) if np.all(se > 0) else float("nan"))
    result.metadata.update(
        {
            "eps": list(eps_grid),
            "bias_norm": bias,
            "max_bias_in_se": errors,
            "loglog_slope": loglog_slope(eps_grid, bias),
        }
    )
    return result


def run_bias_order(config, targets, eps_grid, seeds, spec=None, shape=SMOOTH, n_oracle=10 ** 5, perturbation_seed=0, threads=None):
    """ Shift of P_n φ(β*) when ``targets`` carry error of size ε, paired per seed.

    Second-order behaviour shows up as a log-log slope near 2 in ε.
    """
    eps_grid = [float(e) for e in eps_grid]
    task = _BiasTask(config, tuple(targets), eps_grid, _spec(spec), shape, n_oracle, perturbation_seed, margin=False)
    batches = WorkerPool(threads).map(task, seeds, label="bias-order")
    result = _result("bias-order", batches, {"config": config.as_config(), "targets": list(targets), "seeds": list(seeds)})
    return _bias_metadata(result, eps_grid)


def run_margin_replacement(config, eps_grid, seeds, spec=None, n_oracle=10 ** 5, threads=None):
    """ Shift of P_n φ(β*) when only the indicator uses a τ off by ε. """
    eps_grid = [float(e) for e in eps_grid]
    task = _BiasTask(config, (), eps_grid, _spec(spec), SMOOTH, n_oracle, 0, margin=True)
    batches = WorkerPool(threads).map(task, seeds, label="margin-replacement")
    result = _result("margin-replacement", batches, {"config": config.as_config(), "seeds": list(seeds)})
    return _bias_metadata(result, eps_grid)


class _RateTask(object):
    def __init__(self, config, spec, n_oracle):
        self.config = config
        self.spec = spec
        self.n_oracle = n_oracle

    def __call__(self, task):
        n, seed = task
        config = replace(self.config, n=n, replicate=seed)
        dataset, truth = generate(config)
        beta_star = oracle_beta(config, self.spec, self.n_oracle, dataset.bounds)
        estimate = solve_bias_corrected(dataset, truth.eta, self.spec)
        covariance = sandwich(dataset, estimate, truth.eta, self.spec)
        covered = (covariance.lower <= beta_star) & (beta_star <= covariance.upper)
        return [
            _row("rate", seed, n, "bias-corrected", "error_norm", np.linalg.norm(estimate.beta - beta_star)),
            _row("rate", seed, n, "bias-corrected", "coverage", np.mean(covered)),
            _row("rate", seed, n, "bias-corrected", "moment_residual", estimate.moment_residual),
            _row("rate", seed, n, "bias-corrected", "trace", np.trace(covariance.covariance)),
        ]


def run_rate_study(config, n_grid, seeds, spec=None, n_oracle=10 ** 5, threads=None):
    """ Oracle-nuisance estimates over sample sizes: error, √n-scaled error, coverage. """
    tasks = [(int(n), seed) for n in n_grid for seed in seeds]
    batches = WorkerPool(threads).map(_RateTask(config, _spec(spec), n_oracle), tasks, label="rate")
    result = _result("rate", batches, {"config": config.as_config(), "n_grid": list(n_grid), "seeds": list(seeds)})
    means = result.table.groupby(["cell", "metric"])["value"].mean().unstack("metric")
    result.metadata["scaled_error"] = {
        str(n): float(np.sqrt(n) * means.loc[n, "error_norm"]) for n in means.index
    }
    result.metadata["coverage"] = {str(n): float(means.loc[n, "coverage"]) for n in means.index}
    return result
