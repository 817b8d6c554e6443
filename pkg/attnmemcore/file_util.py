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
import tempfile

_DEF_PERMS = 0o644


def write_file(filename, content, mode=None):
    """Atomically write content (str or bytes) to filename.

    The data goes to a temporary file in the target directory which is
    then renamed over filename, so readers never see a partial file.
    """
    if isinstance(content, str):
        content = content.encode('utf-8')
    if mode is None:
        mode = _DEF_PERMS

    dirname = os.path.dirname(os.path.abspath(filename))
    os.makedirs(dirname, exist_ok=True)
    tf = None
    try:
        tf = tempfile.NamedTemporaryFile(
            dir=dirname, prefix='.' + os.path.basename(filename) + '.',
            delete=False, mode='wb')
        tf.write(content)
        tf.close()
        os.chmod(tf.name, mode)
        os.replace(tf.name, filename)
    except OSError:
        if tf is not None and os.path.exists(tf.name):
            os.unlink(tf.name)
        raise
