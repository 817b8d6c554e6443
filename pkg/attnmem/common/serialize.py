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

# Flat attrs rows to and from CSV text. Field order is the column order;
# None is an empty field; reals carry 12 significant digits.

import csv
import enum
import io
import math
import typing

import attr

REAL_FORMAT = '{:.12g}'


class RowSerializer:

    def __init__(self, *, real_format=REAL_FORMAT):
        self.real_format = real_format
        self.typing_walkers = {
            typing.Union: self._walk_Union,
            }
        self.type_serializers = {
            float: self._serialize_float,
            int: self._serialize_int,
            str: self._scalar,
            bool: self._serialize_bool,
            }
        self.type_deserializers = {
            float: self._deserialize_float,
            int: self._deserialize_int,
            str: self._scalar,
            bool: self._deserialize_bool,
            }

    def _scalar(self, annotation, value, path):
        assert isinstance(value, str), "at {}, {!r} is not a str".format(
            path, value)
        return value

    def _walk_Union(self, meth, args, value, path):
        NoneType = type(None)
        assert NoneType in args, "at {}, can only serialize Optional".format(
            path)
        args = [a for a in args if a is not NoneType]
        assert len(args) == 1, "at {}, can only serialize Optional".format(
            path)
        if meth == self.serialize:
            if value is None:
                return ''
        elif value == '':
            return None
        return meth(args[0], value, path)

    def _serialize_float(self, annotation, value, path):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("at {}, {!r} is not finite".format(path, value))
        text = self.real_format.format(value)
        # '-0' would not survive a round trip through float comparisons
        return '0' if text == '-0' else text

    def _serialize_int(self, annotation, value, path):
        assert isinstance(value, int) and not isinstance(value, bool), \
            "at {}, {!r} is not an int".format(path, value)
        return str(value)

    def _serialize_bool(self, annotation, value, path):
        return 'true' if value else 'false'

    def _deserialize_float(self, annotation, value, path):
        return float(value)

    def _deserialize_int(self, annotation, value, path):
        return int(value)

    def _deserialize_bool(self, annotation, value, path):
        return value == 'true'

    def serialize(self, annotation, value, path=''):
        origin = getattr(annotation, '__origin__', None)
        if origin is not None:
            return self.typing_walkers[origin](
                self.serialize, annotation.__args__, value, path)
        if isinstance(annotation, type) and issubclass(annotation, enum.Enum):
            return value.value
        return self.type_serializers[annotation](annotation, value, path)

    def deserialize(self, annotation, value, path=''):
        origin = getattr(annotation, '__origin__', None)
        if origin is not None:
            return self.typing_walkers[origin](
                self.deserialize, annotation.__args__, value, path)
        if isinstance(annotation, type) and issubclass(annotation, enum.Enum):
            return annotation(value)
        return self.type_deserializers[annotation](annotation, value, path)

    def header(self, cls):
        return [field.name for field in attr.fields(cls)]

    def to_record(self, cls, row):
        return [
            self.serialize(field.type, getattr(row, field.name),
                           '{}.{}'.format(cls.__name__, field.name))
            for field in attr.fields(cls)
            ]

    def from_record(self, cls, record):
        fields = attr.fields(cls)
        if len(record) != len(fields):
            raise ValueError("{} expects {} fields, got {}".format(
                cls.__name__, len(fields), len(record)))
        return cls(**{
            field.name: self.deserialize(
                field.type, value, '{}.{}'.format(cls.__name__, field.name))
            for field, value in zip(fields, record)
            })

    def to_csv(self, cls, rows):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(self.header(cls))
        for row in rows:
            writer.writerow(self.to_record(cls, row))
        return out.getvalue()

    def from_csv(self, cls, text):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != self.header(cls):
            raise ValueError("unexpected columns {}".format(header))
        return [self.from_record(cls, record) for record in reader]


_serializer = RowSerializer()
to_csv = _serializer.to_csv
from_csv = _serializer.from_csv
