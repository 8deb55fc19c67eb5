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

import hashlib
import json
import logging
import os

import numpy as np

from ecobounds import __version__
from ecobounds.errors import ConfigError

logger = logging.getLogger("ecobounds.utils.tables")

MANIFEST = "ecobounds-run.json"
FLOAT_FORMAT = "%.17g"


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError("Object of type %s is not JSON serializable" % type(value).__name__)


def dumps(payload):
    """ Canonical json (sorted keys), so equal payloads give equal bytes. """
    return json.dumps(payload, sort_keys=True, indent=2, default=_default) + "\n"


def fingerprint(config):
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class OutputDirectory(object):
    """ Output directory bound to one config fingerprint.

    A directory already holding outputs of a different config is refused unless
    ``force`` is set; outputs are never silently mixed.
    """

    def __init__(self, path, config_fingerprint, force=False):
        self.path = path
        self.fingerprint = config_fingerprint
        os.makedirs(path, exist_ok=True)
        manifest_path = os.path.join(path, MANIFEST)
        if os.path.exists(manifest_path):
            with open(manifest_path, "r") as f:
                previous = json.load(f).get("config_fingerprint")
            if previous != config_fingerprint and not force:
                raise ConfigError(
                    "output directory holds results of a different config",
                    path=path,
                    existing=previous,
                    requested=config_fingerprint,
                )
        with open(manifest_path, "w") as f:
            f.write(dumps({"config_fingerprint": config_fingerprint, "version": __version__}))
        self.written = []

    def __repr__(self):
        return "%s('%s')" % (type(self).__name__, self.path)

    def file(self, name):
        return os.path.join(self.path, name)

    def write_csv(self, name, frame):
        frame = frame.copy()
        frame["config_fingerprint"] = self.fingerprint
        frame.to_csv(self.file(name), index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug("written %s (%d rows)", self.file(name), len(frame))
        self.written.append(name)
        return self.file(name)

    def write_json(self, name, payload):
        payload = dict(payload)
        payload["config_fingerprint"] = self.fingerprint
        with open(self.file(name), "w") as f:
            f.write(dumps(payload))
        logger.debug("written %s", self.file(name))
        self.written.append(name)
        return self.file(name)
