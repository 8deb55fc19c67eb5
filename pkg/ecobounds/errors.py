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

logger = logging.getLogger("ecobounds.errors")


class EcoboundsError(Exception):
    """ Base of all errors raised on purpose by ecobounds.

    ``exit_code`` is what the command line returns when the error reaches ``main()``.
    """

    exit_code = 1

    def __init__(self, message, **details):
        super(EcoboundsError, self).__init__(message)
        self.message = message
        self.details = details

    def as_record(self):
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


class ConfigError(EcoboundsError):
    exit_code = 2


class DataError(EcoboundsError):
    exit_code = 3


class PositivityError(DataError):
    def __init__(self, message="positivity violation in sample", **details):
        super(PositivityError, self).__init__(message, **details)


class OverlapError(DataError):
    def __init__(self, message="population overlap violation", **details):
        super(OverlapError, self).__init__(message, **details)


class DegenerateSplitError(DataError):
    def __init__(self, message="degenerate split", **details):
        super(DegenerateSplitError, self).__init__(message, **details)


class EmptyCellError(DataError):
    def __init__(self, message="empty cell", **details):
        super(EmptyCellError, self).__init__(message, **details)


class NumericalError(EcoboundsError):
    exit_code = 4


class SolverFailed(NumericalError):
    def __init__(self, residual, iterations, message="solver failed"):
        super(SolverFailed, self).__init__(message, residual=residual, iterations=iterations)
        self.residual = residual
        self.iterations = iterations


def _plain(value):
    # numpy scalars and arrays into json friendly values
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(e) for e in value]
    return value
