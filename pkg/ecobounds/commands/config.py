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

import copy
import json
import logging
import os

from ecobounds.errors import ConfigError
from ecobounds.estimator import BIAS_CORRECTED, METHODS, POPULATIONS, TARGET, ModelSpec
from ecobounds.inference import BOOTSTRAP, MIN_REPLICATES, SANDWICH
from ecobounds.learners import LearnerSpec, NuisanceLearners
from ecobounds.nuisance import EPS_P, SHAPES, SMOOTH
from ecobounds.simulation.dgp import DgpConfig
from ecobounds.utils.tables import fingerprint
from ecobounds.validators import Choice, FloatRange, NotEmpty, OpenInterval, PositiveInteger

logger = logging.getLogger("ecobounds.commands.config")

DEFAULT_OUT = "ecobounds-out"
BOTH = "both"
SECTIONS = ("seed", "out", "data", "learner", "model", "estimator", "inference", "simulation", "benchmark", "margin")


class DataSection(object):
    """ Where the data comes from and which column plays which role. """

    def __init__(self, data, base_dir):
        self.dataset = None
        self.csv = None
        if "dataset" in data:
            self.dataset = _path(data["dataset"], base_dir)
            return
        self.csv = _path(NotEmpty().check(data.get("csv"), "data.csv"), base_dir)
        columns = data.get("columns") or {}
        self.v = list(NotEmpty().check(columns.get("v"), "data.columns.v"))
        self.w = list(NotEmpty().check(columns.get("w"), "data.columns.w"))
        self.a = NotEmpty().check(columns.get("a"), "data.columns.a")
        self.y = NotEmpty().check(columns.get("y"), "data.columns.y")
        self.e_random_fraction = data.get("e_random_fraction")
        if self.e_random_fraction is None:
            self.e = NotEmpty().check(columns.get("e"), "data.columns.e")
        else:
            OpenInterval(0.0, 1.0).check(self.e_random_fraction, "data.e_random_fraction")
            self.e = columns.get("e")
        roles = self.v + self.w + [self.a, self.y] + ([self.e] if self.e else [])
        duplicated = sorted({name for name in roles if roles.count(name) > 1})
        if duplicated:
            raise ConfigError("data.columns: roles must be disjoint", columns=duplicated)
        bounds = data.get("bounds")
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise ConfigError("data.bounds: expected [a, b]", value=repr(bounds))
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self.discrete = data.get("discrete")
        if self.discrete is not None:
            unknown = sorted(set(self.discrete) - set(self.v))
            if unknown:
                raise ConfigError("data.discrete: not V columns", columns=unknown)


def _path(value, base_dir):
    return value if os.path.isabs(value) else os.path.join(base_dir, value)


def _float_list(values, name):
    if not isinstance(values, (list, tuple)):
        raise ConfigError("%s: expected a list" % name, value=repr(values))
    return [float(x) for x in values]


class RunConfig(object):
    """ Effective run configuration (file plus command line overrides).

    ``fingerprint`` is taken over the effective configuration, so the same file run with
    another ``--seed`` writes outputs under another fingerprint.
    """

    def __init__(self, data, base_dir="."):
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError("unknown config sections", sections=sorted(unknown))
        self.raw = copy.deepcopy(data)
        self.seed = PositiveInteger(0).check(data.get("seed", 0), "seed")
        self.out = data.get("out", DEFAULT_OUT)
        self.data = DataSection(data["data"], base_dir) if "data" in data else None
        self.learners = NuisanceLearners.coerce(data.get("learner", LearnerSpec()))

        model = data.get("model", {})
        self.sides = list(model.get("sides", ["lower", "upper"]))
        for side in self.sides:
            Choice(("lower", "upper")).check(side, "model.sides")
        self.deltas = [None]
        if "deltas" in model:
            self.deltas = _float_list(model["deltas"], "model.deltas")
        elif model.get("delta") is not None:
            self.deltas = [float(model["delta"])]
        self.degree = PositiveInteger(1).check(model.get("degree", 1), "model.degree")
        self.intercept = bool(model.get("intercept", True))
        self.population = Choice(POPULATIONS).check(model.get("population", TARGET), "model.population")

        estimator = data.get("estimator", {})
        method = estimator.get("method", BIAS_CORRECTED)
        Choice(METHODS + (BOTH,)).check(method, "estimator.method")
        self.methods = list(METHODS) if method == BOTH else [method]
        self.swap = bool(estimator.get("swap", True))
        self.fraction = OpenInterval(0.0, 1.0).check(estimator.get("fraction", 0.5), "estimator.fraction")
        self.eps = OpenInterval(0.0, 1.0 / 3.0).check(estimator.get("eps", EPS_P), "estimator.eps")

        inference = data.get("inference", {})
        self.inference = Choice((SANDWICH, BOOTSTRAP)).check(inference.get("method", SANDWICH), "inference.method")
        self.replicates = PositiveInteger(MIN_REPLICATES).check(inference.get("B", 200), "inference.B")

        simulation = data.get("simulation", {})
        self.dgp = DgpConfig.from_config(dict(simulation.get("dgp", {}), seed=self.seed))
        seeds = simulation.get("seeds", 10)
        self.seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
        self.grid = [tuple(_float_list(cell, "simulation.grid")) for cell in simulation.get("grid", [[0, 0]])]
        self.scales = _float_list(simulation.get("scales", [0.0, 0.5, 1.0, 2.0, 4.0]), "simulation.scales")
        self.sweep_deltas = _float_list(
            simulation.get("deltas", [d for d in self.deltas if d is not None] or [0.0, 1.0, 2.0]),
            "simulation.deltas",
        )
        self.n_oracle = PositiveInteger(1).check(simulation.get("n_oracle", 100000), "simulation.n_oracle")
        self.shape = Choice(SHAPES).check(simulation.get("shape", SMOOTH), "simulation.shape")

        benchmark = data.get("benchmark", {})
        self.holdout_size = PositiveInteger(1).check(benchmark.get("holdout_size", 1), "benchmark.holdout_size")
        self.statistic = benchmark.get("statistic", "mean-abs")
        self.quantile = benchmark.get("quantile")
        if self.quantile is not None:
            FloatRange(0.0, 1.0).check(self.quantile, "benchmark.quantile")

        self.t_grid = _float_list(data.get("margin", {}).get("t_grid", [0.05, 0.1, 0.2, 0.5, 1.0, 2.0]), "margin.t_grid")
        self.fingerprint = fingerprint({k: v for k, v in self.raw.items() if k != "out"})

    @classmethod
    def from_file(cls, path, seed=None, out=None):
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError("cannot read config: %s" % e, path=path)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", path=path)
        if seed is not None:
            data["seed"] = seed
        if out is not None:
            data["out"] = out
        logger.debug("config %s loaded", path)
        return cls(data, base_dir=os.path.dirname(os.path.abspath(path)))

    def model_spec(self, side, delta=None):
        return ModelSpec(
            side=side,
            delta=delta,
            degree=self.degree,
            intercept=self.intercept,
            population=self.population,
        )
