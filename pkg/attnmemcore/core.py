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

import logging

from attnmemcore.context import Context


class Application:
    """Owner of a root Context; turns context events into log records."""

    project = "attnmem"

    def __init__(self):
        self.context = Context.new(self)

    def report_start_event(self, context, description):
        log = logging.getLogger(context.full_name())
        level = getattr(logging, context.level)
        log.log(level, "start: %s", description)

    def report_finish_event(self, context, description, status):
        log = logging.getLogger(context.full_name())
        level = getattr(logging, context.level)
        if context.elapsed is not None:
            log.log(level, "finish: %s %s (%.3fs)",
                    description, status.name, context.elapsed)
        else:
            log.log(level, "finish: %s %s", description, status.name)
        for warning in context.warnings:
            log.warning("%s", warning)
