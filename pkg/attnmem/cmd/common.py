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

import os

LOGDIR = ".attnmem"


def add_run_args(parser):
    """The flags shared by every subcommand that evaluates a sweep."""
    parser.add_argument('--out', metavar='PATH',
                        help='write CSV here instead of standard output')
    parser.add_argument('--seed', type=int, dest='master_seed',
                        metavar='U64', help='master seed of the trials')
    parser.add_argument('--trials', type=int, metavar='K',
                        help='Monte Carlo trials per cell')
    parser.add_argument('--workers', type=int, metavar='K',
                        help='worker threads (default: available cores)')
    parser.add_argument('--config', metavar='PATH',
                        help='key=value or YAML sweep configuration')
    parser.add_argument('--set', action='append', default=[],
                        dest='overrides', metavar='KEY=VALUE',
                        help='override one configuration key')


def flag_overrides(opts):
    """--seed/--trials/--workers as configuration keys."""
    keys = {}
    for key in 'master_seed', 'trials', 'workers':
        value = getattr(opts, key, None)
        if value is not None:
            keys[key] = value
    return keys


def panel_path(out, label):
    stem, ext = os.path.splitext(out)
    return '{}-{}{}'.format(stem, label, ext or '.csv')
