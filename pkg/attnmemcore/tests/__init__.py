import functools
import os
import shutil
import tempfile

from unittest import TestCase

import numpy as np


class AttnTestCase(TestCase):

    def tmp_dir(self, dir=None, cleanup=True):
        # return a full path to a temporary directory that will be cleaned up.
        if dir is None:
            tmpd = tempfile.mkdtemp(
                prefix="attnmem-%s." % self.__class__.__name__)
        else:
            tmpd = tempfile.mkdtemp(dir=dir)
        if cleanup:
            self.addCleanup(functools.partial(shutil.rmtree, tmpd))
        return tmpd

    def tmp_path(self, path, dir=None):
        # return an absolute path to 'path' under dir.
        # if dir is None, one will be created with tmp_dir()
        # the file is not created or modified.
        if dir is None:
            dir = self.tmp_dir()
        return os.path.normpath(os.path.abspath(os.path.join(dir, path)))

    def assertAllClose(self, actual, expected, rtol=0.0, atol=0.0, msg=None):
        actual = np.asarray(actual, dtype=float)
        expected = np.asarray(expected, dtype=float)
        self.assertEqual(actual.shape, expected.shape, msg)
        if not np.allclose(actual, expected, rtol=rtol, atol=atol):
            worst = np.max(np.abs(actual - expected))
            self.fail(msg or "arrays differ by up to {}:\n{}\n!=\n{}".format(
                worst, actual, expected))

    def assertSymmetric(self, matrix, atol=0.0):
        matrix = np.asarray(matrix)
        self.assertAllClose(matrix, matrix.T, atol=atol)


slow = os.environ.get('ATTNMEM_SLOW_TESTS') == '1'
