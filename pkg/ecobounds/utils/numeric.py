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
import scipy.linalg

logger = logging.getLogger("ecobounds.utils.numeric")

RIDGE = 1e-10
RANK_WARNING = "rank-deficient projection"
# condition numbers above this are treated as singular
MAX_CONDITION = 1e12


def tree_sum(values, axis=0):
    """ Sum with a fixed association order.

    numpy reduces a contiguous last axis pairwise, so the summed axis is moved there
    first; the result does not depend on how the caller chunked or threaded the work.
    """
    values = np.asarray(values, dtype=float)
    moved = np.ascontiguousarray(np.moveaxis(values, axis, -1))
    return np.add.reduce(moved, axis=-1)


def tree_mean(values, axis=0):
    values = np.asarray(values, dtype=float)
    if values.shape[axis] == 0:
        raise ValueError("mean of an empty sample")
    return tree_sum(values, axis=axis) / values.shape[axis]


def solve_with_ridge(matrix, rhs, warnings=None, what="design"):
    """ Solve ``matrix @ x = rhs``; singular systems get a ridge of 1e-10.

    :param warnings: list the rank warning is appended to
    :return: solution
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rhs = np.asarray(rhs, dtype=float)
    singular = (
        not np.all(np.isfinite(matrix))
        or np.linalg.matrix_rank(matrix) < matrix.shape[0]
        or np.linalg.cond(matrix) > MAX_CONDITION
    )
    if singular:
        logger.warning("Singular %s matrix (%dx%d), adding ridge %g.", what, *matrix.shape, RIDGE)
        if warnings is not None and RANK_WARNING not in warnings:
            warnings.append(RANK_WARNING)
        matrix = matrix + RIDGE * np.eye(matrix.shape[0])
        return scipy.linalg.lstsq(matrix, rhs)[0]
    return scipy.linalg.solve(matrix, rhs)


def inverse_with_ridge(matrix, warnings=None, what="design"):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return solve_with_ridge(matrix, np.eye(matrix.shape[0]), warnings=warnings, what=what)


def symmetrize(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return (matrix + matrix.T) / 2.0
