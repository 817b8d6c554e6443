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

# Parameter cells of the published figures. Each figure is a list of
# panels; a panel is one curve (one nonlinearity, one alignment, one
# dimension ratio) over one axis.

import math

import attr
import numpy as np

from attnmem.common.errors import InvalidArgument
from attnmem.common.types import (
    AlignmentMode,
    SweepAxis,
    SweepConfig,
    SweepMode,
    )
from attnmem.nonlinearity import hermite_mix_a1_grid


def log_grid(start, stop, num=30):
    return [float(x) for x in np.logspace(
        math.log10(start), math.log10(stop), num)]


def linear_grid(start, stop, num=30):
    return [float(x) for x in np.linspace(start, stop, num)]


def ratio_p_grid(n, num=30):
    """p falling from n to n/3 with n/p evenly spaced."""
    return [n / (1 + 2 * k / (num - 1)) for k in range(num)]


def rounded_p_grid(start, stop, num=30):
    return [float(round(x)) for x in np.linspace(start, stop, num)]


GAMMA_GRID = log_grid(1e-2, 1e3)
SNR_GRID = log_grid(0.1, 10)
WIDE_SNR_GRID = log_grid(0.1, 100)


def _ridge(label, **kw):
    return SweepConfig(mode=SweepMode.THEORY_RIDGE, f_name='identity',
                       alignment=AlignmentMode.ALIGNED, label=label, **kw)


def _attention(label, f_name='tanh', **kw):
    return SweepConfig(mode=SweepMode.THEORY_ATTENTION, f_name=f_name,
                       label=label, **kw)


def _fig1a():
    return [_ridge('ridge', axis=SweepAxis.GAMMA, axis_grid=GAMMA_GRID,
                   n=512, p=2048, snr=1.0)]


def _fig1b():
    return [_ridge('ridge', axis=SweepAxis.P, axis_grid=ratio_p_grid(4096),
                   n=4096, p=4096, gamma=1e-5, snr=1.0)]


def _fig1c():
    return [_ridge('ridge', axis=SweepAxis.SNR, axis_grid=WIDE_SNR_GRID,
                   n=2048, p=512, gamma=1e-5)]


def _fig2a():
    return [_attention('tanh', axis=SweepAxis.GAMMA, axis_grid=GAMMA_GRID,
                       n=1024, p=4096, alignment=AlignmentMode.NULL)]


def _fig2b():
    return [_attention('tanh', axis=SweepAxis.P,
                       axis_grid=ratio_p_grid(4096), n=4096, p=4096,
                       gamma=1e-2, alignment=AlignmentMode.NULL)]


def _fig2c():
    return [_attention('tanh', axis=SweepAxis.SNR, axis_grid=SNR_GRID,
                       n=2048, p=512, gamma=1e-2,
                       alignment=AlignmentMode.SIGNAL)]


def _fig3a():
    return [_attention('hermite-mix', f_name='hermite-mix',
                       f_params={'r': 1.0}, axis=SweepAxis.A1_MIX,
                       axis_grid=hermite_mix_a1_grid(), n=4096, p=4096,
                       gamma=1.0, snr=1.0, alignment=AlignmentMode.ALIGNED)]


_LINEAR_COMPONENT = ('cos', 'tanh', 'clamped-linear')


def _fig3b():
    # |mu|^2 = c, w_K = w_Q = mu
    return [
        _attention(name, f_name=name, axis=SweepAxis.P,
                   axis_grid=rounded_p_grid(512, 4096), n=4096, p=4096,
                   gamma=1.0, snr=1.0, snr_scales_with_c=True,
                   alignment=AlignmentMode.SIGNAL)
        for name in _LINEAR_COMPONENT
        ]


def _fig3c():
    return [
        _attention(name, f_name=name, axis=SweepAxis.SNR,
                   axis_grid=SNR_GRID, n=2048, p=512, gamma=1.0,
                   alignment=AlignmentMode.SIGNAL)
        for name in _LINEAR_COMPONENT
        ]


def _ratio_label(ratio):
    return 'c{:g}'.format(ratio)


def _fig4():
    n = 2048
    return [
        _attention(_ratio_label(ratio), axis=SweepAxis.SNR,
                   axis_grid=SNR_GRID, n=n, p=ratio * n, gamma=1.0,
                   alignment=AlignmentMode.ALIGNED)
        for ratio in (0.25, 1.0, 4.0)
        ]


def _fig5():
    n = 2048
    panels = []
    for ratio in (1 / 2, 1 / 4, 1 / 8, 1 / 16):
        for gamma in (10.0, 1.0, 0.1):
            for name in ('tanh', 'clamped-linear'):
                panels.append(_attention(
                    '{}-g{:g}-{}'.format(_ratio_label(ratio), gamma, name),
                    f_name=name, axis=SweepAxis.SNR, axis_grid=SNR_GRID,
                    n=n, p=ratio * n, gamma=gamma,
                    alignment=AlignmentMode.ALIGNED))
    return panels


def _fig6():
    n = 2048
    panels = []
    for ratio in (0.25, 1.0, 4.0):
        for name in ('tanh', 'clamped-linear'):
            for alignment in (AlignmentMode.ALIGNED,
                              AlignmentMode.ORTHOGONAL):
                panels.append(_attention(
                    '{}-{}-{}'.format(
                        _ratio_label(ratio), name, alignment.value),
                    f_name=name, axis=SweepAxis.SNR, axis_grid=SNR_GRID,
                    n=n, p=ratio * n, gamma=1.0, alignment=alignment))
    return panels


PRESETS = {
    'fig1a': _fig1a,
    'fig1b': _fig1b,
    'fig1c': _fig1c,
    'fig2a': _fig2a,
    'fig2b': _fig2b,
    'fig2c': _fig2c,
    'fig3a': _fig3a,
    'fig3b': _fig3b,
    'fig3c': _fig3c,
    'fig4': _fig4,
    'fig5': _fig5,
    'fig6': _fig6,
    }


def figure_panels(name):
    try:
        make = PRESETS[name]
    except KeyError:
        raise InvalidArgument(
            "unknown figure {!r}; valid names are {}".format(
                name, ', '.join(PRESETS)))
    return make()


def figure_preset(name):
    return figure_panels(name)[0]


def with_trials(config, trials, master_seed=None):
    """The empirical counterpart of a theory config."""
    if trials <= 0:
        return config
    mode = {
        SweepMode.THEORY_ATTENTION: SweepMode.EMPIRICAL_ATTENTION,
        SweepMode.THEORY_RIDGE: SweepMode.EMPIRICAL_RIDGE,
        }.get(config.mode, config.mode)
    changes = {'mode': mode, 'trials': trials}
    if master_seed is not None:
        changes['master_seed'] = master_seed
    return attr.evolve(config, **changes)
