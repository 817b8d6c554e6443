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
import os

from attnmemcore.log import setup_logger
from attnmemcore.tests import AttnTestCase


class TestSetupLogger(AttnTestCase):

    def tearDown(self):
        root = logging.getLogger("")
        for handler in list(root.handlers):
            if isinstance(handler, logging.FileHandler) and \
                    handler.baseFilename.startswith(self.dir):
                root.removeHandler(handler)
                handler.close()

    def test_files_and_links(self):
        self.dir = self.tmp_dir()
        files = setup_logger(self.dir, base='unit')
        self.assertEqual(set(files), {'info', 'debug'})
        logging.getLogger('attnmem.unit').debug("only in debug")
        for level, path in files.items():
            self.assertEqual(
                path, os.path.join(
                    self.dir, 'unit-{}.log.{}'.format(level, os.getpid())))
            link = os.path.join(self.dir, 'unit-{}.log'.format(level))
            self.assertEqual(os.readlink(link), os.path.basename(path))
        for handler in logging.getLogger("").handlers:
            handler.flush()
        with open(files['debug']) as fp:
            self.assertIn("only in debug", fp.read())
        with open(files['info']) as fp:
            self.assertNotIn("only in debug", fp.read())
