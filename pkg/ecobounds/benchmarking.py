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

import itertools
import logging
import time
import typing

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ecobounds.errors import ConfigError, PositivityError
from ecobounds.learners import NuisanceLearners, fit_regressor
from ecobounds.utils.parallel import WorkerPool
from ecobounds.validators import FloatRange, PositiveInteger

logger = logging.getLogger("ecobounds.benchmarking")

MEAN_ABS = "mean-abs"
QUANTILE = "quantile"


@dataclass
class DeltaBenchmark:
    table: pd.DataFrame
    delta_hat: float
    statistic: str
    quantile: typing.Optional[float]
    holdout_size: int
    seed: int

    @property
    def summary(self):
        values = self.table["statistic"]
        return {
            "subsets": int(len(values)),
            "mean": float(values.mean()),
            "sd": float(values.std(ddof=0)),
            "min": float(values.min()),
            "median": float(values.median()),
            "max": float(values.max()),
        }

    def as_record(self):
        return {
            "delta_hat": self.delta_hat,
            "statistic": self.statistic,
            "quantile": self.quantile,
            "holdout_size": self.holdout_size,
            "seed": self.seed,
            "summary": self.summary,
        }


def _effect(spec, v_study, a, y, v_target):
    """ Plug-in CATE μ̂₁ - μ̂₀ fitted on study rows, evaluated on target rows. """
    models = []
    for arm in (0, 1):
        mask = a == arm
        if not mask.any():
            raise PositivityError(arm=arm)
        models.append(fit_regressor(spec, v_study[mask], y[mask]))
    return models[1](v_target) - models[0](v_target)


def _columns(v, columns):
    if not columns:
        return np.zeros((v.shape[0], 1))
    return v[:, list(columns)]


class _SubsetGap(object):
    def __init__(self, dataset, spec, statistic, quantile):
        self.dataset = dataset
        self.spec = spec
        self.statistic = statistic
        self.quantile = quantile

    def __call__(self, held_out):
        d = self.dataset
        kept = [j for j in range(d.v.shape[1]) if j not in held_out]
        study, target = d.e == 1, d.e == 0
        a, y = d.a[study], d.y[study]
        restricted = _effect(self.spec, _columns(d.v[study], kept), a, y, _columns(d.v[target], kept))
        full_columns = kept + list(held_out)
        conditional = _effect(self.spec, _columns(d.v[study], full_columns), a, y, _columns(d.v[target], full_columns))
        gaps = np.abs(conditional - restricted)
        if self.statistic == MEAN_ABS:
            return float(np.mean(gaps))
        return float(np.quantile(gaps, self.quantile))


def benchmark_delta(dataset, holdout_size, learner, seed, statistic=MEAN_ABS, quantile=None, threads=None):
    """ Calibrate δ by treating each subset of discrete V columns as a stand-in for W.

    For every subset the gap between the CATE given the remaining columns and the CATE
    given all columns is measured on the target units; δ̂ is the mean over subsets.
    """
    start_time = time.time()
    if statistic not in (MEAN_ABS, QUANTILE):
        raise ConfigError("unknown benchmark statistic", statistic=statistic)
    if statistic == QUANTILE:
        FloatRange(0.0, 1.0).check(quantile, "benchmark.quantile")
    PositiveInteger(1).check(holdout_size, "benchmark.holdout_size")
    eligible = [j for j, flag in enumerate(dataset.v_discrete) if flag]
    if not eligible:
        raise ConfigError("no discrete V columns to hold out")
    if holdout_size > len(eligible):
        raise ConfigError(
            "holdout size exceeds the number of discrete columns",
            holdout_size=holdout_size,
            eligible=len(eligible),
        )
    spec = NuisanceLearners.coerce(learner).outcome
    subsets = list(itertools.combinations(eligible, holdout_size))
    values = WorkerPool(threads).map(_SubsetGap(dataset, spec, statistic, quantile), subsets, label="benchmark")
    table = pd.DataFrame(
        {
            "subset_id": np.arange(len(subsets)),
            "held_out": ["+".join(dataset.v_names[j] for j in subset) for subset in subsets],
            "statistic": values,
        }
    )
    delta_hat = float(np.mean(values))
    logger.debug("Benchmark took %f: %d subsets, delta_hat=%g", time.time() - start_time, len(subsets), delta_hat)
    return DeltaBenchmark(
        table=table,
        delta_hat=delta_hat,
        statistic=statistic,
        quantile=quantile,
        holdout_size=holdout_size,
        seed=seed,
    )
