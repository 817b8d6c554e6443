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

from attnmem.common.errors import ConfigError
from attnmem.common.types import AlignmentMode, SweepAxis, SweepMode
from attnmem.experiments import config
from attnmemcore.tests import AttnTestCase


KEY_VALUES = """\
# null model, gamma axis
mode = theory-attention
f_name = tanh
axis = gamma
grid_start = 1e-2
grid_stop = 1e3
grid_num = 30
n = 1024
p = 4096

alignment = null
"""


class TestParsing(AttnTestCase):

    def test_values_are_typed(self):
        self.assertEqual(config.parse_value('1e-2'), 0.01)
        self.assertEqual(config.parse_value(' 30'), 30)
        self.assertEqual(config.parse_value('[0.1, 1e1]'), [0.1, 10.0])
        self.assertEqual(config.parse_value('tanh'), 'tanh')
        self.assertIs(config.parse_value('true'), True)

    def test_key_values(self):
        mapping = config.parse_key_values(KEY_VALUES)
        self.assertEqual(mapping['grid_start'], 0.01)
        self.assertEqual(mapping['n'], 1024)
        self.assertEqual(len(mapping), 9)

    def test_bad_line(self):
        with self.assertRaises(ConfigError):
            config.parse_key_values('gamma 1.0\n')

    def test_overrides(self):
        self.assertEqual(
            config.parse_overrides(['gamma=1', 'gamma=2', 'f_name=cos']),
            {'gamma': 2, 'f_name': 'cos'})

    def test_file_formats(self):
        path = self.tmp_path('sweep.conf')
        with open(path, 'w') as fp:
            fp.write(KEY_VALUES)
        self.assertEqual(config.load_config_file(path)['p'], 4096)
        path = self.tmp_path('sweep.yaml')
        with open(path, 'w') as fp:
            fp.write('mode: theory-ridge\ngrid: [1e-2, 1.0]\nsnr: 1\n')
        self.assertEqual(config.load_config_file(path), {
            'mode': 'theory-ridge', 'grid': [0.01, 1.0], 'snr': 1})

    def test_yaml_must_be_mapping(self):
        path = self.tmp_path('sweep.yml')
        with open(path, 'w') as fp:
            fp.write('- 1\n- 2\n')
        with self.assertRaises(ConfigError):
            config.load_config_file(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            config.load_config_file(self.tmp_path('absent.conf'))

    def test_enum_keys_stay_text(self):
        mapping = config.parse_key_values('alignment = null\nmode = true\n')
        self.assertEqual(mapping, {'alignment': 'null', 'mode': 'true'})
        self.assertEqual(config.parse_overrides(['alignment=null']),
                         {'alignment': 'null'})

    def test_yaml_null_alignment(self):
        path = self.tmp_path('null.yaml')
        with open(path, 'w') as fp:
            fp.write('alignment: null\ngrid: [1.0]\n')
        mapping = config.load_config_file(path)
        self.assertEqual(mapping['alignment'], 'null')
        built = config.build_config(mapping)
        self.assertIs(built.alignment, AlignmentMode.NULL)


class TestBuild(AttnTestCase):

    def test_from_key_values(self):
        built = config.build_config(config.parse_key_values(KEY_VALUES))
        self.assertIs(built.mode, SweepMode.THEORY_ATTENTION)
        self.assertIs(built.axis, SweepAxis.GAMMA)
        self.assertIs(built.alignment, AlignmentMode.NULL)
        self.assertEqual(len(built.axis_grid), 30)
        self.assertAlmostEqual(built.axis_grid[-1], 1e3)
        self.assertEqual(built.c, 4.0)

    def test_solver_keys(self):
        built = config.build_config(
            {'grid': [1.0], 'tol': 1e-10, 'damping': 0.25, 'max_iter': 50})
        self.assertEqual(
            (built.solver.tol, built.solver.damping, built.solver.max_iter),
            (1e-10, 0.25, 50))

    def test_c_sets_p(self):
        built = config.build_config({'grid': [1.0], 'n': 512, 'c': 0.25})
        self.assertEqual(built.p, 128.0)

    def test_c_and_p_must_agree(self):
        with self.assertRaises(ConfigError) as cm:
            config.build_config({'grid': [1.0], 'n': 512, 'c': 0.25,
                                 'p': 100})
        self.assertEqual(cm.exception.key, 'c')

    def test_f_params(self):
        built = config.build_config({
            'grid': [0.0, 0.5], 'axis': 'a1-mix', 'f_name': 'hermite-mix',
            'f_param_r': 1})
        self.assertEqual(built.f_params, {'r': 1.0})

    def test_linear_grid(self):
        built = config.build_config({
            'grid_start': 0, 'grid_stop': 1, 'grid_num': 5,
            'grid_scale': 'linear'})
        self.assertEqual(built.axis_grid, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_rejects(self):
        cases = [
            ({'grid': [1.0], 'colour': 'red'}, 'colour'),
            ({'grid': [1.0], 'mode': 'fast'}, 'mode'),
            ({'grid': [1.0], 'n': 1.5}, 'n'),
            ({'grid': []}, 'grid'),
            ({}, 'grid'),
            ({'grid': [1.0], 'grid_start': 1.0}, 'grid'),
            ({'grid_start': 0, 'grid_stop': 1}, 'grid_start'),
            ({'grid': [1.0], 'quad_nodes': 32}, 'quad_nodes'),
            ]
        for mapping, key in cases:
            with self.assertRaises(ConfigError, msg=str(mapping)) as cm:
                config.build_config(mapping)
            self.assertEqual(cm.exception.key, key, mapping)

    def test_semantic_rejects(self):
        for mapping in [
                {'grid': [1.0, 1.0]},
                {'grid': [1.0, 3.0, 2.0]},
                {'grid': [1.0], 'mode': 'empirical-ridge'},
                {'grid': [1.0], 'mode': 'empirical-ridge', 'trials': 0},
                ]:
            with self.assertRaises(ConfigError, msg=str(mapping)):
                config.build_config(mapping)

    def test_load_merges_in_order(self):
        path = self.tmp_path('sweep.conf')
        with open(path, 'w') as fp:
            fp.write(KEY_VALUES)
        built = config.load_config(
            path, ['n=2048', 'trials=3', 'mode=empirical-attention'],
            base={'mode': 'theory-ridge', 'snr': 2})
        self.assertIs(built.mode, SweepMode.EMPIRICAL_ATTENTION)
        self.assertEqual((built.n, built.trials, built.snr), (2048, 3, 2.0))
