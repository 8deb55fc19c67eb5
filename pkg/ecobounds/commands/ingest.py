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

import numpy as np
import pandas as pd

from ecobounds.data_model import Dataset, OutcomeBounds, require_valid
from ecobounds.errors import ConfigError, DataError

logger = logging.getLogger("ecobounds.commands.ingest")


def _numeric(frame, columns):
    for name in columns:
        converted = pd.to_numeric(frame[name], errors="coerce")
        bad = converted.isna() & frame[name].notna()
        if bad.any():
            raise DataError(
                "non-numeric cells in column '%s'" % name,
                column=name,
                rows=[int(i) for i in np.flatnonzero(bad.to_numpy())[:20]],
            )
        frame[name] = converted
    return frame


def ingest_csv(path, section, seed=0):
    """ Read a CSV into a validated Dataset.

    Rows missing a field their population needs are dropped and counted. With
    ``e_random_fraction`` the population is drawn at random (single-trial data): rows
    must be complete, study rows lose W and target rows lose A and Y.

    :return: (Dataset, report dict)
    """
    try:
        frame = pd.read_csv(path, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError("no data rows", path=path)
    except OSError as e:
        raise DataError("cannot read data: %s" % e, path=path)
    if frame.empty:
        raise DataError("no data rows", path=path)

    roles = section.v + section.w + [section.a, section.y] + ([section.e] if section.e else [])
    missing = [name for name in roles if name not in frame.columns]
    if missing:
        raise ConfigError("columns not in data: %s" % ", ".join(missing), columns=missing)
    frame = _numeric(frame[roles].copy(), roles)
    rows_read = len(frame)

    if section.e_random_fraction is not None:
        complete = frame[section.v + section.w + [section.a, section.y]].notna().all(axis=1)
        frame = frame[complete].reset_index(drop=True)
        rng = np.random.default_rng(seed)
        frame["e"] = (rng.uniform(size=len(frame)) < section.e_random_fraction).astype(int)
        e_col = "e"
    else:
        e_col = section.e
        study = frame[e_col] == 1
        needed = frame[section.v + [e_col]].notna().all(axis=1)
        needed &= np.where(study, frame[[section.a, section.y]].notna().all(axis=1), True)
        needed &= np.where(study, True, frame[section.w].notna().all(axis=1))
        frame = frame[needed].reset_index(drop=True)
    if frame.empty:
        raise DataError("no data rows left after dropping incomplete rows", path=path)

    study = (frame[e_col] == 1).to_numpy()
    masked_w = int((study & frame[section.w].notna().any(axis=1).to_numpy()).sum())
    masked_ay = int((~study & frame[[section.a, section.y]].notna().any(axis=1).to_numpy()).sum())
    if (masked_w or masked_ay) and section.e_random_fraction is None:
        logger.warning("masking %d study W values and %d target (A, Y) values", masked_w, masked_ay)
    frame.loc[study, section.w] = np.nan
    frame.loc[~study, [section.a, section.y]] = np.nan

    discrete = None
    if section.discrete is not None:
        discrete = [name in section.discrete for name in section.v]
    dataset = Dataset.from_frame(
        frame,
        v_cols=section.v,
        w_cols=section.w,
        e_col=e_col,
        a_col=section.a,
        y_col=section.y,
        bounds=OutcomeBounds(*section.bounds),
        v_discrete=discrete,
    )
    require_valid(dataset)
    report = {
        "rows_read": rows_read,
        "rows_dropped": rows_read - len(dataset),
        "n": len(dataset),
        "n_study": dataset.n_study,
        "n_target": dataset.n_target,
        "w_levels": dataset.w_support.size,
    }
    logger.debug("ingested %s: %r", path, report)
    return dataset, report
