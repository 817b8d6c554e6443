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

import enum
import functools
import time


class Status(enum.Enum):
    SUCCESS = enum.auto()
    FAIL = enum.auto()
    WARN = enum.auto()


class Context:
    """Report when a computation starts and finishes.

    with somecontext.child("solve", "gamma={gamma}".format(gamma=g)):
        state = solve(params)

    start and finish events go to app.report_start_event and
    app.report_finish_event. A context that saw warnings finishes with
    Status.WARN unless it failed. Assign to description inside the block
    to change the message reported on exit:

    with somecontext.child("cell") as context:
        row = evaluate(cell)
        context.description = "e_theory={}".format(row.e_theory)
    """

    def __init__(self, app, name, description, parent, level):
        self.app = app
        self.name = name
        self.description = description
        self.parent = parent
        self.level = level
        self.warnings = []
        self.started = None
        self.elapsed = None

    @classmethod
    def new(cls, app):
        return cls(app, app.project, "", None, "INFO")

    def child(self, name, description=""):
        return type(self)(self.app, name, description, self, self.level)

    def full_name(self):
        c = self
        names = []
        while c is not None:
            names.append(c.name)
            c = c.parent
        return '/'.join(reversed(names))

    def warn(self, message):
        self.warnings.append(message)

    def enter(self, description=None):
        if description is None:
            description = self.description
        self.started = time.monotonic()
        self.app.report_start_event(self, description)

    def exit(self, description=None, result=Status.SUCCESS):
        if description is None:
            description = self.description
        if self.started is not None:
            self.elapsed = time.monotonic() - self.started
        if result is Status.SUCCESS and self.warnings:
            result = Status.WARN
        self.app.report_finish_event(self, description, result)

    def __enter__(self):
        self.enter()
        return self

    def __exit__(self, exc, value, tb):
        if exc is not None:
            result = Status.FAIL
            description = str(value)
        else:
            result = Status.SUCCESS
            description = None
        self.exit(description, result)


def with_context(name=None, description=""):
    """Run the decorated method inside a child of self.context.

    name and description are format strings over the keyword arguments.
    """
    def decorate(meth):
        nonlocal name
        if name is None:
            name = meth.__name__

        def convargs(self, kw):
            context = kw.get('context')
            if context is None:
                context = self.context
            kw['context'] = context.child(
                name=name.format(**kw),
                description=description.format(**kw))
            return kw

        @functools.wraps(meth)
        def decorated(self, **kw):
            kw = convargs(self, kw)
            with kw['context']:
                return meth(self, **kw)

        return decorated
    return decorate
