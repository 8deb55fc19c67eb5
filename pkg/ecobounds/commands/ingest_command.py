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

from ecobounds.commands.base import BaseCommandHandler
from ecobounds.commands.ingest import ingest_csv
from ecobounds.data_model import write_dataset
from ecobounds.errors import ConfigError


class IngestCommand(BaseCommandHandler):
    name = "ingest"

    def execute(self, output):
        section = self.config.data
        if section is None or section.csv is None:
            raise ConfigError("ingest needs data.csv and data.columns")
        dataset, report = ingest_csv(section.csv, section, self.config.seed)
        write_dataset(dataset, output.file("dataset.csv"), {"config_fingerprint": output.fingerprint})
        output.written.extend(["dataset.csv", "dataset.csv.json"])
        output.write_json("ingest.json", report)
