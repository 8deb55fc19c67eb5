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
import os

from fnmatch import fnmatch
from traceback import format_exc

from ecobounds.errors import EcoboundsError
from ecobounds.state import current_state
from ecobounds.utils.tables import dumps

logger = logging.getLogger("ecobounds.reporting")

ERROR_FILE = "error.json"


def filter_sensitive_params(params_dict, sensitive_params):
    for k in list(params_dict):
        for pattern in sensitive_params:
            if fnmatch(k, pattern):
                params_dict[k] = "**********"
    return params_dict


class ErrorReporter(object):
    def __init__(self, out_dir=None, config=None, sensitive_params=None):
        """
        Catch errors of a command and leave a machine-readable record behind.

        :param out_dir: directory the record is written to (nothing written when None)
        :param config: effective config dict, copied into the record
        :param sensitive_params: config keys not to copy - supports shell-style wildcards
        """
        self.out_dir = out_dir
        self.config = config
        self.sensitive_params = sensitive_params or ("*dsn*", "*token*", "*password*")
        self.record = None

    def __call__(self, func, *args, **kwargs):
        """ Run ``func``; returns the process exit code. """
        try:
            func(*args, **kwargs)
            return 0
        except EcoboundsError as e:
            record = e.as_record()
        except Exception as e:
            record = {
                "error": type(e).__name__,
                "message": str(e),
                "exit_code": 1,
                "details": {},
            }
        record["trace"] = format_exc()
        record["version"] = current_state.ecobounds_version
        record["config_fingerprint"] = current_state.fingerprint
        if self.config is not None:
            record["config"] = filter_sensitive_params(dict(self.config), self.sensitive_params)
        logger.error("%s: %s", record["error"], record["message"])
        self.record = record
        if self.out_dir is not None:
            try:
                os.makedirs(self.out_dir, exist_ok=True)
                with open(os.path.join(self.out_dir, ERROR_FILE), "w") as f:
                    f.write(dumps(record))
            except OSError as e:
                logger.error("cannot write the error record: %s", e)
        return record["exit_code"]
