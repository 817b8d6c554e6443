#!/usr/bin/env python3
# -*- mode: python; -*-
#
# Copyright 2025 The attnmem authors.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This package is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program. If not, see <http://www.gnu.org/licenses/>.

"""
attnmem
=======
Asymptotic theory and Monte Carlo checks of in-context memorization by
nonlinear attention
"""

import os
import sys

from setuptools import setup, find_packages


with open(os.path.join(os.path.dirname(__file__),
                       'attnmemcore', '__init__.py')) as init:
    ns = {}
    exec(init.read(), ns)
    version = ns['__version__']


if sys.argv[-1] == 'clean':
    print("Cleaning up ...")
    os.system('rm -rf attnmem.egg-info build dist')
    sys.exit()

setup(name='attnmem',
      version=version,
      description="In-context memorization error of nonlinear attention",
      long_description=__doc__,
      author='The attnmem authors',
      license="AGPLv3+",
      packages=find_packages(exclude=["tests"]),
      python_requires='>=3.6',
      install_requires=[
          'attrs',
          'jsonschema',
          'numpy',
          'PyYAML',
          'scipy',
      ],
      entry_points={
          'console_scripts': [
              'attnmem = attnmem.cmd.cli:main',
          ],
      },
      )
