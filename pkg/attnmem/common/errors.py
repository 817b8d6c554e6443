# Copyright 2025 The attnmem authors.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.


class AttnMemError(Exception):
    pass


class InvalidArgument(AttnMemError, ValueError):
    pass


class NumericDomainError(AttnMemError, ArithmeticError):
    pass


class NonConvergence(AttnMemError):

    def __init__(self, message, residual, iterations):
        super().__init__(
            "{} (residual {:.3e} after {} iterations)".format(
                message, residual, iterations))
        self.residual = residual
        self.iterations = iterations


class SolverBreakdown(AttnMemError):

    def __init__(self, message, condition):
        super().__init__("{} (condition estimate {:.3e})".format(
            message, condition))
        self.condition = condition


class ConfigError(AttnMemError):

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
