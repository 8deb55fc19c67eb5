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

from ecobounds import __version__
from ecobounds.commands.base import BaseCommandHandler
from ecobounds.data_model import write_dataset
from ecobounds.simulation.dgp import generate
from ecobounds.simulation.experiments import run_delta_sweep, run_entropy_sweep, run_error_grid

logger = logging.getLogger("ecobounds.commands.simulate")


class SimulateCommand(BaseCommandHandler):
    """ One draw of the simulation design, written so ``estimate`` can read it back. """

    name = "simulate"

    def execute(self, output):
        dataset, truth = generate(self.config.dgp)
        write_dataset(dataset, output.file("dataset.csv"), {"config_fingerprint": output.fingerprint})
        output.written.extend(["dataset.csv", "dataset.csv.json"])
        target = dataset.e == 0
        output.write_csv(
            "truth.csv",
            pd.DataFrame(
                {
                    "unit_id": range(len(dataset)),
                    "e": dataset.e,
                    "w_level": truth.w,
                    "cate": truth.cate,
                    "restricted_cate": truth.restricted_cate,
                    "y1": truth.y1,
                    "y0": truth.y0,
                }
            ),
        )
        output.write_json(
            "metadata.json",
            {
                "dgp": self.config.dgp.as_config(),
                "coefficients": truth.coefficients.as_record(),
                "bounds": [dataset.bounds.a, dataset.bounds.b],
                "true_delta": truth.true_delta(target),
                "mean_delta": truth.mean_delta(target),
                "version": __version__,
            },
        )


class _ExperimentCommand(BaseCommandHandler):
    def experiment(self):
        raise NotImplementedError()

    def execute(self, output):
        result = self.experiment()
        output.write_csv("results.csv", result.table)
        output.write_csv("summary.csv", result.summary())
        metadata = dict(result.metadata)
        metadata.update({"experiment": result.name, "version": __version__})
        output.write_json("metadata.json", metadata)


class ErrorGridCommand(_ExperimentCommand):
    name = "error-grid"

    def experiment(self):
        config = self.config
        spec = config.model_spec(config.sides[0], config.deltas[0])
        return run_error_grid(
            config.dgp, config.grid, config.seeds, spec, config.shape, config.n_oracle, threads=self.threads
        )


class EntropyCommand(_ExperimentCommand):
    name = "entropy"

    def experiment(self):
        return run_entropy_sweep(self.config.dgp, self.config.scales, self.config.seeds, threads=self.threads)


class DeltaSweepCommand(_ExperimentCommand):
    name = "delta-sweep"

    def experiment(self):
        config = self.config
        return run_delta_sweep(
            config.dgp,
            config.sweep_deltas,
            config.seeds,
            learners=config.learners,
            spec=config.model_spec("lower"),
            inference=config.inference,
            replicates=config.replicates,
            threads=self.threads,
        )
