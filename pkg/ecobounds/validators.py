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

import copy
import logging
import math

from ecobounds.errors import ConfigError

logger = logging.getLogger(__name__)


class Validator(object):
    def __deepcopy__(self, memo):
        return copy.copy(self)

    def __init__(self, msg):
        self.msg = msg

    def valid(self, value):
        raise NotImplementedError

    def check(self, value, name):
        """ Raise ConfigError naming the field when ``value`` is not valid.

        :param value: value to check
        :param name: config path of the value (used in the message)
        :return: value (unchanged)
        """
        try:
            ok = self.valid(value)
        except (TypeError, ValueError):
            ok = False
        if not ok:
            logger.debug("validation of '%s' failed: %r", name, value)
            raise ConfigError("%s: %s" % (name, self.msg), field=name, value=repr(value))
        return value


class NotEmpty(Validator):
    def __init__(self):
        super(NotEmpty, self).__init__("This field is required.")

    def valid(self, value):
        return bool(value)


class PositiveInteger(Validator):
    def __init__(self, minimum=1):
        super(PositiveInteger, self).__init__("Is not an integer >= %d." % minimum)
        self._minimum = minimum

    def valid(self, value):
        if isinstance(value, bool):
            return False
        return int(value) == value and int(value) >= self._minimum


class FloatRange(Validator):
    """
    Float range validator (closed interval)
    """

    def __init__(self, low, high):
        self._low = low
        self._high = high
        super(FloatRange, self).__init__(
            "This value should be between %(low)s and %(high)s." % dict(low=low, high=high)
        )

    def valid(self, value):
        value = float(value)
        return not math.isnan(value) and float(self._low) <= value <= float(self._high)


class OpenInterval(FloatRange):
    def __init__(self, low, high):
        super(OpenInterval, self).__init__(low, high)
        self.msg = "This value should lie strictly between %s and %s." % (low, high)

    def valid(self, value):
        value = float(value)
        return float(self._low) < value < float(self._high)


class Choice(Validator):
    def __init__(self, choices):
        self.choices = tuple(choices)
        super(Choice, self).__init__("Expected one of: %s." % ", ".join(self.choices))

    def valid(self, value):
        return value in self.choices
