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

from unittest import mock

from attnmemcore.context import Status, with_context
from attnmemcore.core import Application
from attnmemcore.tests import AttnTestCase


class Worker(Application):

    def __init__(self):
        super().__init__()
        self.events = []

    def report_start_event(self, context, description):
        super().report_start_event(context, description)
        self.events.append(('start', context.full_name(), description))

    def report_finish_event(self, context, description, status):
        super().report_finish_event(context, description, status)
        self.events.append(
            ('finish', context.full_name(), description, status))

    @with_context(name="cell-{index}", description="value={value}")
    def evaluate(self, *, index, value, context):
        if value < 0:
            raise ValueError("negative")
        if value == 0:
            context.warn("zero")
        return value * 2


class TestContext(AttnTestCase):

    def setUp(self):
        self.app = Worker()

    def test_child_names(self):
        child = self.app.context.child("sweep").child("cell-0")
        self.assertEqual(child.full_name(), "attnmem/sweep/cell-0")

    def test_decorated_success(self):
        self.assertEqual(self.app.evaluate(index=3, value=2), 4)
        self.assertEqual(self.app.events, [
            ('start', 'attnmem/cell-3', 'value=2'),
            ('finish', 'attnmem/cell-3', 'value=2', Status.SUCCESS),
            ])

    def test_warning_downgrades_status(self):
        with self.assertLogs('attnmem/cell-0', 'WARNING'):
            self.app.evaluate(index=0, value=0)
        self.assertEqual(self.app.events[-1][-1], Status.WARN)

    def test_failure_reports_exception(self):
        with self.assertRaises(ValueError):
            self.app.evaluate(index=1, value=-1)
        self.assertEqual(
            self.app.events[-1],
            ('finish', 'attnmem/cell-1', 'negative', Status.FAIL))

    def test_elapsed_is_recorded(self):
        with mock.patch('attnmemcore.context.time.monotonic',
                        side_effect=[10.0, 12.5]):
            with self.assertLogs('attnmem/solve', 'INFO') as cm:
                with self.app.context.child("solve") as context:
                    pass
        self.assertEqual(context.elapsed, 2.5)
        self.assertIn('(2.500s)', cm.output[-1])
