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

from joblib import Parallel, delayed

from ecobounds.state import current_state

logger = logging.getLogger("ecobounds.utils.parallel")


class WorkerPool(object):
    """ Runs independent tasks (seeds, replicates, subsets) on the thread budget.

    Results come back in task order, so any later reduction is order-invariant by
    construction. A budget of one runs inline without spawning workers.
    """

    def __init__(self, threads=None):
        self.threads = threads or current_state.threads

    def __repr__(self):
        return "%s(threads=%d)" % (type(self).__name__, self.threads)

    def map(self, func, tasks, label=None):
        tasks = list(tasks)
        label = label or getattr(func, "__name__", "task")
        start_time = time.time()
        try:
            if self.threads == 1 or len(tasks) <= 1:
                return [func(task) for task in tasks]
            return Parallel(n_jobs=min(self.threads, len(tasks)))(
                delayed(func)(task) for task in tasks
            )
        except Exception as e:
            logger.error("Exception occured while running '%s' batch. (%s)", label, e)
            raise
        finally:
            logger.debug(
                "Batch took %f: %s (%d tasks, %r)", time.time() - start_time, label, len(tasks), self
            )
