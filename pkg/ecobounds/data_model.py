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

import json
import logging
import typing

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from ecobounds.errors import ConfigError, DataError, DegenerateSplitError

logger = logging.getLogger("ecobounds.data_model")

MISSING = -1
# W value present but not one of the support levels
OUTSIDE_SUPPORT = -2
# integer columns with at most this many levels count as discrete
DISCRETE_MAX_LEVELS = 10
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class OutcomeBounds:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise ConfigError("outcome bounds need a < b", a=self.a, b=self.b)

    @property
    def width(self):
        return self.b - self.a

    @property
    def effect_range(self):
        """ Range of any treatment effect, [a - b, b - a]. """
        return self.a - self.b, self.b - self.a

    def contains(self, y):
        return (np.asarray(y) >= self.a) & (np.asarray(y) <= self.b)


@dataclass(frozen=True)
class WSupport:
    """ Ordered, enumerated support of the discrete covariates W.

    Levels are raw value-vectors in lexicographic order; ``encode`` maps a level to the
    numeric block that goes into X. Binary coordinates become a single 0/1 entry,
    coordinates with more values a one-hot block without the first value, and
    coordinates with a single value carry no information and encode to nothing.
    This is dummy coding rather than full one-hot: the first value of every coordinate
    is the all-zero row, so the block stays linearly independent of the intercept
    column ``encode_profiles`` appends.
    """

    levels: typing.Tuple[typing.Tuple[float, ...], ...]
    names: typing.Tuple[str, ...]

    def __post_init__(self):
        if not self.levels:
            raise DataError("W support is empty")
        if len(set(self.levels)) != len(self.levels):
            raise DataError("W support levels are not distinct")
        if any(len(level) != len(self.names) for level in self.levels):
            raise DataError("W support levels do not match W columns")
        if list(self.levels) != sorted(self.levels):
            raise DataError("W support levels are not in lexicographic order")

    @classmethod
    def from_values(cls, values, names):
        values = np.asarray(values, dtype=float).reshape(-1, len(names))
        levels = sorted({tuple(float(x) for x in row) for row in values})
        return cls(levels=tuple(levels), names=tuple(names))

    @property
    def size(self):
        return len(self.levels)

    @cached_property
    def _coordinate_values(self):
        return [sorted({level[j] for level in self.levels}) for j in range(len(self.names))]

    @cached_property
    def table(self):
        """ K x dim(encode) matrix, row k is encode(level k). """
        rows = []
        for level in self.levels:
            row = []
            for value, values in zip(level, self._coordinate_values):
                if len(values) == 2:
                    row.append(1.0 if value == values[1] else 0.0)
                elif len(values) > 2:
                    row.extend(1.0 if value == other else 0.0 for other in values[1:])
            rows.append(row)
        table = np.array(rows, dtype=float).reshape(len(self.levels), -1)
        table.flags.writeable = False
        return table

    @property
    def dim(self):
        return self.table.shape[1]

    def encode(self, level):
        return self.table[level]

    def index_of(self, values):
        """ Level index of each row of raw W values (OUTSIDE_SUPPORT when unknown). """
        lookup = {level: k for k, level in enumerate(self.levels)}
        values = np.asarray(values, dtype=float).reshape(-1, len(self.names))
        return np.array(
            [lookup.get(tuple(float(x) for x in row), OUTSIDE_SUPPORT) for row in values],
            dtype=int,
        )


@dataclass(frozen=True)
class ObservedSample:
    v: typing.Tuple[float, ...]
    e: int
    w: typing.Optional[int] = None
    a_treat: typing.Optional[int] = None
    y: typing.Optional[float] = None


@dataclass(frozen=True)
class CovariateProfile:
    v: typing.Tuple[float, ...]
    w_index: int
    x: typing.Tuple[float, ...]


def encode_profiles(v, w_index, w_support, intercept=True):
    """ X = [v; encode(w)] (plus a trailing constant when ``intercept``).

    ``v`` is n x p and ``w_index`` has n entries; a pure function of its inputs.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    blocks = [v, w_support.encode(np.asarray(w_index, dtype=int))]
    if intercept:
        blocks.append(np.ones((v.shape[0], 1)))
    return np.hstack(blocks)


def profile(v, w_index, w_support, intercept=True):
    x = encode_profiles(np.asarray(v, dtype=float)[None, :], [w_index], w_support, intercept)[0]
    return CovariateProfile(v=tuple(float(e) for e in v), w_index=int(w_index), x=tuple(x))


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


class Dataset(object):
    """ Coarsened observations Z = {V, E, W(1-E), E(A, Y)} in column form.

    Missing entries are ``MISSING`` for the integer columns ``w`` and ``a`` and NaN for
    ``y``. Arrays are read-only, so a Dataset can be shared by parallel workers.
    """

    def __init__(self, v, e, w, a, y, bounds, w_support, v_names=None, v_discrete=None):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        n = v.shape[0]
        self.v = _frozen(v, float)
        self.e = _frozen(e, int)
        self.w = _frozen(w, int)
        self.a = _frozen(a, int)
        self.y = _frozen(y, float)
        for name in ("e", "w", "a", "y"):
            if getattr(self, name).shape != (n,):
                raise DataError("column '%s' has wrong length" % name)
        self.bounds = bounds
        self.w_support = w_support
        self.v_names = tuple(v_names or ["v%d" % (j + 1) for j in range(v.shape[1])])
        if v_discrete is None:
            v_discrete = infer_discrete(v)
        self.v_discrete = tuple(bool(flag) for flag in v_discrete)
        if len(self.v_names) != v.shape[1] or len(self.v_discrete) != v.shape[1]:
            raise DataError("V column metadata does not match V")

    def __len__(self):
        return self.v.shape[0]

    def __repr__(self):
        return "%s(n=%d, study=%d, target=%d, levels=%d)" % (
            type(self).__name__,
            len(self),
            self.n_study,
            self.n_target,
            self.w_support.size,
        )

    @property
    def n(self):
        return len(self)

    @property
    def study(self):
        return self.e == 1

    @property
    def target(self):
        return self.e == 0

    @property
    def n_study(self):
        return int(np.sum(self.study))

    @property
    def n_target(self):
        return int(np.sum(self.target))

    @property
    def discrete_columns(self):
        return [name for name, flag in zip(self.v_names, self.v_discrete) if flag]

    @classmethod
    def from_samples(cls, samples, bounds, w_support, v_names=None, v_discrete=None):
        samples = list(samples)
        if not samples:
            raise DataError("no data rows")
        return cls(
            v=[s.v for s in samples],
            e=[s.e for s in samples],
            w=[MISSING if s.w is None else s.w for s in samples],
            a=[MISSING if s.a_treat is None else s.a_treat for s in samples],
            y=[np.nan if s.y is None else s.y for s in samples],
            bounds=bounds,
            w_support=w_support,
            v_names=v_names,
            v_discrete=v_discrete,
        )

    @property
    def samples(self):
        out = []
        for i in range(len(self)):
            out.append(
                ObservedSample(
                    v=tuple(float(x) for x in self.v[i]),
                    e=int(self.e[i]),
                    w=None if self.w[i] == MISSING else int(self.w[i]),
                    a_treat=None if self.a[i] == MISSING else int(self.a[i]),
                    y=None if np.isnan(self.y[i]) else float(self.y[i]),
                )
            )
        return out

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            v=self.v[indices],
            e=self.e[indices],
            w=self.w[indices],
            a=self.a[indices],
            y=self.y[indices],
            bounds=self.bounds,
            w_support=self.w_support,
            v_names=self.v_names,
            v_discrete=self.v_discrete,
        )

    def target_profiles(self, intercept=True):
        """ X of the target units (their W is observed). """
        mask = self.target
        return encode_profiles(self.v[mask], self.w[mask], self.w_support, intercept)

    def equals(self, other):
        same_arrays = all(
            np.array_equal(getattr(self, name), getattr(other, name), equal_nan=(name == "y"))
            for name in ("v", "e", "w", "a", "y")
        )
        return (
            same_arrays
            and self.bounds == other.bounds
            and self.w_support == other.w_support
            and self.v_names == other.v_names
            and self.v_discrete == other.v_discrete
        )

    def to_frame(self):
        frame = pd.DataFrame(self.v, columns=list(self.v_names))
        w_values = np.full((len(self), len(self.w_support.names)), np.nan)
        present = self.w >= 0
        if present.any():
            w_values[present] = np.array(self.w_support.levels)[self.w[present]]
        for j, name in enumerate(self.w_support.names):
            frame[name] = w_values[:, j]
        frame["e"] = self.e
        frame["a"] = pd.array(np.where(self.a == MISSING, None, self.a), dtype="Int64")
        frame["y"] = self.y
        return frame

    @classmethod
    def from_frame(
        cls, frame, v_cols, w_cols, e_col, a_col, y_col, bounds, levels=None, v_discrete=None
    ):
        """ Build a Dataset from an already numeric frame (NaN marks coarsened cells). """
        if len(frame) == 0:
            raise DataError("no data rows")
        w_raw = frame[list(w_cols)].to_numpy(dtype=float)
        w_present = ~np.isnan(w_raw).any(axis=1)
        if levels is None:
            if not w_present.any():
                raise DataError("no W values to build the support from")
            w_support = WSupport.from_values(w_raw[w_present], w_cols)
        else:
            w_support = WSupport(
                levels=tuple(tuple(float(x) for x in level) for level in levels),
                names=tuple(w_cols),
            )
        w_index = np.full(len(frame), MISSING, dtype=int)
        if w_present.any():
            w_index[w_present] = w_support.index_of(w_raw[w_present])
        a_raw = frame[a_col].to_numpy(dtype=float)
        return cls(
            v=frame[list(v_cols)].to_numpy(dtype=float),
            e=frame[e_col].to_numpy(dtype=float).astype(int),
            w=w_index,
            a=np.where(np.isnan(a_raw), MISSING, a_raw).astype(int),
            y=frame[y_col].to_numpy(dtype=float),
            bounds=bounds,
            w_support=w_support,
            v_names=v_cols,
            v_discrete=v_discrete,
        )


def infer_discrete(v):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    flags = []
    for column in v.T:
        finite = column[np.isfinite(column)]
        integral = finite.size > 0 and np.all(finite == np.round(finite))
        flags.append(bool(integral and np.unique(finite).size <= DISCRETE_MAX_LEVELS))
    return flags


def validate(dataset):
    """ Check the type invariants; returns a list of violations (empty when valid).

    Each violation is ``{"index": sample index or None, "rule": description}``.
    """
    violations = []

    def add(indices, rule):
        for i in np.flatnonzero(indices):
            violations.append({"index": int(i), "rule": rule})

    study, target = dataset.e == 1, dataset.e == 0
    y_present = ~np.isnan(dataset.y)
    add(~(study | target), "E not binary")
    add(~np.isfinite(dataset.v).all(axis=1), "V not finite")
    add(study & (dataset.w != MISSING), "W present under E=1")
    add(target & (dataset.w == MISSING), "W missing under E=0")
    add(dataset.w == OUTSIDE_SUPPORT, "W outside support")
    add(target & (dataset.a != MISSING), "A present under E=0")
    add(target & y_present, "Y present under E=0")
    add(study & (dataset.a == MISSING), "A missing under E=1")
    add(study & (dataset.a != MISSING) & ~np.isin(dataset.a, (0, 1)), "A not binary")
    add(study & ~y_present, "Y missing under E=1")
    with np.errstate(invalid="ignore"):
        outside = y_present & ~dataset.bounds.contains(np.nan_to_num(dataset.y, nan=dataset.bounds.a))
    add(outside, "Y outside [a,b]")
    if not target.any():
        violations.append({"index": None, "rule": "no E=0 samples"})
    if not study.any():
        violations.append({"index": None, "rule": "no E=1 samples"})
    if violations:
        logger.debug("dataset %r has %d violations", dataset, len(violations))
    return violations


def require_valid(dataset):
    violations = validate(dataset)
    if violations:
        raise DataError(
            "invalid dataset: %s" % violations[0]["rule"], violations=violations[:20]
        )
    return dataset


def split(dataset, fraction, seed):
    """ Uniform random partition into (D1, D2) with |D1| = round(n * fraction). """
    if not 0.0 < fraction < 1.0:
        raise ConfigError("split fraction must lie in (0, 1)", fraction=fraction)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    cut = int(round(len(dataset) * fraction))
    halves = (np.sort(order[:cut]), np.sort(order[cut:]))
    for indices in halves:
        e = dataset.e[indices]
        if not (np.any(e == 0) and np.any(e == 1)):
            raise DegenerateSplitError(fraction=fraction, seed=seed, size=len(indices))
    return dataset.subset(halves[0]), dataset.subset(halves[1])


def write_dataset(dataset, path, metadata=None):
    """ Write ``path`` (CSV) and ``path``.json (roles, bounds, support, ``metadata``). """
    frame = dataset.to_frame()
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    sidecar = {
        "columns": {
            "v": list(dataset.v_names),
            "w": list(dataset.w_support.names),
            "e": "e",
            "a": "a",
            "y": "y",
        },
        "bounds": [dataset.bounds.a, dataset.bounds.b],
        "w_levels": [list(level) for level in dataset.w_support.levels],
        "discrete": [n for n, flag in zip(dataset.v_names, dataset.v_discrete) if flag],
    }
    if metadata:
        sidecar["metadata"] = metadata
    with open(path + ".json", "w") as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)
        f.write("\n")
    logger.debug("dataset %r written to %s", dataset, path)
    return path


def read_dataset(path):
    with open(path + ".json", "r") as f:
        sidecar = json.load(f)
    frame = pd.read_csv(path, float_precision="round_trip")
    columns = sidecar["columns"]
    discrete = set(sidecar.get("discrete", []))
    return Dataset.from_frame(
        frame,
        v_cols=columns["v"],
        w_cols=columns["w"],
        e_col=columns["e"],
        a_col=columns["a"],
        y_col=columns["y"],
        bounds=OutcomeBounds(*sidecar["bounds"]),
        levels=sidecar["w_levels"],
        v_discrete=[name in discrete for name in columns["v"]],
    )
