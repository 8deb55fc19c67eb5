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

from ecobounds import __version__ as version

logger = logging.getLogger("ecobounds.state")

THREADS_ENV = "ECOBOUNDS_THREADS"


class EcoboundsState(object):
    def __init__(self):
        self.ecobounds_version = version
        self.threads = 1
        self.sentry_running = False
        self.fingerprint = None

    def set_threads(self, threads=None):
        """ Sets the worker budget

        :param threads: explicit budget (``--threads``), ``ECOBOUNDS_THREADS`` otherwise
        :type threads: int or None
        """
        if threads is None:
            threads = int(os.environ.get(THREADS_ENV, "1") or 1)
        if threads < 1:
            threads = 1
        logger.debug(f"setting threads={threads}")
        self.threads = threads

    def set_sentry(self, running):
        logger.debug(f"setting sentry_running to '{running}'")
        self.sentry_running = running

    def set_fingerprint(self, fingerprint):
        logger.debug(f"setting config fingerprint to '{fingerprint}'")
        self.fingerprint = fingerprint

    def repr(self):
        return "%s (%s)" % (self.__class__, str(vars(self)))


current_state = EcoboundsState()
