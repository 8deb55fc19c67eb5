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
import time

from ecobounds.commands.ingest import ingest_csv
from ecobounds.data_model import read_dataset
from ecobounds.errors import ConfigError
from ecobounds.state import current_state
from ecobounds.utils.tables import OutputDirectory

logger = logging.getLogger("ecobounds.commands.base")


class BaseCommandHandler(object):
    """ One CLI command: owns the output directory, delegates the work to ``execute``. """

    name = None

    def __init__(self, config, force=False):
        self.config = config
        self.force = force
        self.__output = None

    @property
    def output(self):
        if self.__output is None:
            self.__output = OutputDirectory(self.config.out, self.config.fingerprint, self.force)
        return self.__output

    @property
    def threads(self):
        return current_state.threads

    def load_dataset(self):
        section = self.config.data
        if section is None:
            raise ConfigError("the '%s' command needs a data section" % self.name)
        if section.dataset is not None:
            return read_dataset(section.dataset)
        dataset, report = ingest_csv(section.csv, section, self.config.seed)
        logger.debug("ingest report: %r", report)
        return dataset

    def execute(self, output):
        """ Do the work and write the outputs

        :param output: output directory of this run
        :type output: ecobounds.utils.tables.OutputDirectory
        """
        raise NotImplementedError()

    def run(self):
        start_time = time.time()
        output = self.output
        self.execute(output)
        logger.debug("Command took %f: %s (%s)", time.time() - start_time, self.name, output.written)
        return output.written
