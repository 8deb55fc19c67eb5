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

import pandas as pd

from ecobounds.bounds import SensitivityLevel, pointwise_bounds
from ecobounds.commands.base import BaseCommandHandler
from ecobounds.data_model import encode_profiles
from ecobounds.estimator import crossfit, margin_diagnostic
from ecobounds.inference import BOOTSTRAP, bootstrap, crossfit_sandwich, mean_bound
from ecobounds.nuisance import fit_nuisances

logger = logging.getLogger("ecobounds.commands.estimate")


def _level(delta):
    return None if delta is None else SensitivityLevel(delta)


def _bounds_table(dataset, eta, deltas):
    frames = []
    for delta in deltas:
        frame = pointwise_bounds(dataset, eta, _level(delta))
        frame.insert(0, "delta", delta)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


class EstimateCommand(BaseCommandHandler):
    """ Cross-fit every requested side, δ and estimator, then attach intervals. """

    name = "estimate"

    def execute(self, output):
        config = self.config
        dataset = self.load_dataset()
        target = dataset.e == 0
        raw_x = encode_profiles(dataset.v[target], dataset.w[target], dataset.w_support, intercept=False)
        estimates, intervals = [], []
        for delta in config.deltas:
            for side in config.sides:
                spec = config.model_spec(side, delta)
                for method in config.methods:
                    estimate = crossfit(
                        dataset,
                        spec,
                        config.learners,
                        config.seed,
                        swap=config.swap,
                        method=method,
                        eps=config.eps,
                        fraction=config.fraction,
                    )
                    if config.inference == BOOTSTRAP:
                        covariance = bootstrap(
                            dataset,
                            spec,
                            config.learners,
                            config.replicates,
                            config.seed,
                            method=method,
                            eps=config.eps,
                            threads=self.threads,
                        )
                    else:
                        covariance = crossfit_sandwich(estimate, spec)
                    estimate.covariance = covariance
                    estimates.append(estimate.as_record())
                    # mean over target units of the fitted bound m(x; β̂)
                    average, average_ci = mean_bound(covariance, estimate.beta, spec.basis(raw_x))
                    intervals.append(
                        {
                            "side": side,
                            "delta": delta,
                            "method": method,
                            "inference": covariance.method,
                            "lower": covariance.lower.tolist(),
                            "upper": covariance.upper.tolist(),
                            "mean_bound": average,
                            "mean_bound_ci": list(average_ci),
                        }
                    )
        output.write_json("beta.json", {"estimates": estimates, "n": len(dataset)})
        output.write_json("intervals.json", {"intervals": intervals})
        eta = fit_nuisances(dataset, config.learners, config.eps)
        output.write_csv("bounds.csv", _bounds_table(dataset, eta, config.deltas))


class BoundsCommand(BaseCommandHandler):
    """ Pointwise bounds from nuisances fitted on the whole dataset. """

    name = "bounds"

    def execute(self, output):
        dataset = self.load_dataset()
        eta = fit_nuisances(dataset, self.config.learners, self.config.eps)
        output.write_csv("bounds.csv", _bounds_table(dataset, eta, self.config.deltas))


class MarginCommand(BaseCommandHandler):
    name = "margin"

    def execute(self, output):
        dataset = self.load_dataset()
        eta = fit_nuisances(dataset, self.config.learners, self.config.eps)
        frames, slopes = [], {}
        for side in self.config.sides:
            diagnostic = margin_diagnostic(dataset, eta, side, self.config.t_grid)
            table = diagnostic.table
            table.insert(0, "side", side)
            frames.append(table)
            slopes[side] = diagnostic.alpha_hat
        output.write_csv("margin.csv", pd.concat(frames, ignore_index=True))
        output.write_json("margin.json", {"alpha_hat": slopes})
