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

import argparse
import json
import logging
import sys

import attr

from attnmem import nonlinearity, simulate
from attnmem.common import serialize
from attnmem.common.errors import AttnMemError, ConfigError, InvalidArgument
from attnmem.common.types import AlignmentMode, DiagnosticRow, TRACE_NAMES
from attnmem.experiments import config as sweep_config
from attnmem.experiments import presets
from attnmem.experiments.sweep import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    SweepRunner,
    )
from attnmemcore import __version__
from attnmemcore.file_util import write_file
from attnmemcore.log import setup_logger

from .common import (
    LOGDIR,
    add_run_args,
    flag_overrides,
    panel_path,
    )

log = logging.getLogger('attnmem.cmd.cli')

_THEORY_MODES = ('theory-attention', 'theory-ridge')
_EMPIRICAL_MODES = ('empirical-attention', 'empirical-ridge')


def make_args_parser():
    parser = argparse.ArgumentParser(
        description='Theory and simulation of in-context memorization '
                    'by nonlinear attention',
        prog='attnmem')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('--log-dir', default=LOGDIR, dest='log_dir',
                        help='directory for the info and debug logs')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    for name, help in [
            ('theory', 'asymptotic error over one axis'),
            ('empirical', 'Monte Carlo error over one axis'),
            ('sweep', 'any sweep mode, as configured'),
            ]:
        add_run_args(sub.add_parser(name, help=help))

    figure = sub.add_parser('figure', help='the parameter cells of a figure')
    figure.add_argument('name', choices=sorted(presets.PRESETS))
    add_run_args(figure)

    diag = sub.add_parser('diag', help='single-sample diagnostics')
    diag.add_argument('kind', choices=['linearization', 'traces'])
    diag.add_argument('--n', type=int, default=512)
    diag.add_argument('--p', type=int, default=1024)
    diag.add_argument('--f', default='tanh', dest='f_name')
    diag.add_argument('--gamma', type=float, default=1.0)
    diag.add_argument('--snr', type=float, default=1.0)
    diag.add_argument('--alignment', default='aligned',
                      choices=[a.value for a in AlignmentMode])
    diag.add_argument('--seed', type=int, default=0)
    diag.add_argument('--out', metavar='PATH')

    sub.add_parser('schema', help='print the configuration schema')
    return parser


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        write_file(out, text)
        log.info("wrote %s", out)


def _run(config, opts, out):
    runner = SweepRunner(config, opts.workers)
    rows = runner.run()
    _emit(runner.to_csv(rows), out)
    return runner.exit_code


def _configured(opts, mode, allowed):
    base = {'mode': mode}
    overrides = list(opts.overrides)
    overrides.extend('{}={}'.format(k, v)
                     for k, v in flag_overrides(opts).items())
    config = sweep_config.load_config(opts.config, overrides, base)
    if allowed and config.mode.value not in allowed:
        raise ConfigError("mode {} is not valid for '{}'".format(
            config.mode.value, opts.command), 'mode')
    return config


def cmd_theory(opts):
    return _run(_configured(opts, 'theory-attention', _THEORY_MODES),
                opts, opts.out)


def cmd_empirical(opts):
    return _run(_configured(opts, 'empirical-attention', _EMPIRICAL_MODES),
                opts, opts.out)


def cmd_sweep(opts):
    return _run(_configured(opts, 'theory-attention', None), opts, opts.out)


_FIGURE_OVERRIDES = {
    'n': int,
    'p': float,
    'gamma': float,
    'snr': float,
    'quad_nodes': int,
    }


def _figure_changes(opts):
    mapping = {}
    if opts.config is not None:
        mapping.update(sweep_config.load_config_file(opts.config))
    mapping.update(sweep_config.parse_overrides(opts.overrides))
    sweep_config.validate_mapping(mapping)
    return mapping


def _apply_overrides(config, mapping, workers):
    changes = {}
    for key, value in mapping.items():
        if key not in _FIGURE_OVERRIDES or key == config.axis.value:
            raise ConfigError("cannot override {} on a figure".format(key),
                              key)
        changes[key] = _FIGURE_OVERRIDES[key](value)
    if workers is not None:
        changes['workers'] = workers
    return attr.evolve(config, **changes)


def cmd_figure(opts):
    panels = presets.figure_panels(opts.name)
    changes = _figure_changes(opts)
    out = opts.out
    if out is None and len(panels) > 1:
        out = '{}.csv'.format(opts.name)
    code = EXIT_OK
    for panel in panels:
        panel = presets.with_trials(
            panel, opts.trials or 0, opts.master_seed)
        panel = _apply_overrides(panel, changes, opts.workers)
        path = out
        if out is not None and len(panels) > 1:
            path = panel_path(out, panel.label)
        code = max(code, _run(panel, opts, path))
    return code


def cmd_diag(opts):
    f, m = nonlinearity.profile(opts.f_name)
    if opts.kind == 'traces':
        report = simulate.trace_diagnostics(
            opts.n, opts.p, f, opts.gamma, opts.seed, m)
        rows = [
            DiagnosticRow(
                axis_value=opts.gamma, n=opts.n, p=opts.p, gamma=opts.gamma,
                trial=0, seed=report.seed, quantity=name,
                empirical=float(report.empirical[i]),
                predicted=float(report.predicted[i]),
                relative_gap=float(report.relative_gap[i]),
                identity_defect=report.identity_defect)
            for i, name in enumerate(TRACE_NAMES)
            ]
        _emit(serialize.to_csv(DiagnosticRow, rows), opts.out)
        return EXIT_OK
    trial = simulate.TrialCell(
        n=opts.n, p=opts.p, gamma=opts.gamma, snr=opts.snr,
        alignment=AlignmentMode(opts.alignment), f=f)
    ds, w = trial.dataset(opts.seed)
    report = simulate.linearization_parts(ds, w, f, m.a1)
    text = ''.join('{}: {}\n'.format(k, v)
                   for k, v in attr.asdict(report).items())
    _emit(text, opts.out)
    return EXIT_OK


def cmd_schema(opts):
    sys.stdout.write(json.dumps(sweep_config.SCHEMA, indent=4) + '\n')
    return EXIT_OK


COMMANDS = {
    'theory': cmd_theory,
    'empirical': cmd_empirical,
    'sweep': cmd_sweep,
    'figure': cmd_figure,
    'diag': cmd_diag,
    'schema': cmd_schema,
    }


def main(argv=None):
    parser = make_args_parser()
    opts = parser.parse_args(sys.argv[1:] if argv is None else argv)
    setup_logger(dir=opts.log_dir, base='attnmem')
    log.info("Starting attnmem %s", __version__)
    log.info("Arguments passed: %s", sys.argv if argv is None else argv)
    try:
        return COMMANDS[opts.command](opts)
    except (ConfigError, InvalidArgument) as e:
        log.error("%s", e)
        print("attnmem: error: {}".format(e), file=sys.stderr)
        return EXIT_CONFIG
    except (AttnMemError, ArithmeticError) as e:
        log.exception("numerical failure")
        print("attnmem: numerical failure: {}".format(e), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == '__main__':
    sys.exit(main())
