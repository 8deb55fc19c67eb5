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

from ecobounds.commands.benchmark import BenchmarkCommand
from ecobounds.commands.estimate import BoundsCommand, EstimateCommand, MarginCommand
from ecobounds.commands.ingest_command import IngestCommand
from ecobounds.commands.simulate import DeltaSweepCommand, EntropyCommand, ErrorGridCommand, SimulateCommand

COMMANDS = {
    handler.name: handler
    for handler in (
        IngestCommand,
        EstimateCommand,
        SimulateCommand,
        ErrorGridCommand,
        EntropyCommand,
        DeltaSweepCommand,
        BenchmarkCommand,
        BoundsCommand,
        MarginCommand,
    )
}
