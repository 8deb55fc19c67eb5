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

from ecobounds.benchmarking import benchmark_delta
from ecobounds.commands.base import BaseCommandHandler
from ecobounds.simulation.dgp import generate

logger = logging.getLogger("ecobounds.commands.benchmark")


class BenchmarkCommand(BaseCommandHandler):
    """ δ calibration on the configured data (or a simulation draw without data). """

    name = "benchmark"

    def execute(self, output):
        config = self.config
        if config.data is not None:
            dataset = self.load_dataset()
        else:
            dataset = generate(config.dgp)[0]
        result = benchmark_delta(
            dataset,
            config.holdout_size,
            config.learners,
            config.seed,
            statistic=config.statistic,
            quantile=config.quantile,
            threads=self.threads,
        )
        output.write_csv("benchmark.csv", result.table)
        output.write_json("benchmark.json", result.as_record())
