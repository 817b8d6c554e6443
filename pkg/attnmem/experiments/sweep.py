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

import attr
import numpy as np
from scipy import linalg

from attnmem import nonlinearity, simulate, theory
from attnmem.common import serialize
from attnmem.common.errors import (
    AttnMemError,
    InvalidArgument,
    )
from attnmem.common.types import (
    Cell,
    DiagnosticRow,
    NoiseSystemParams,
    ResultRow,
    SoftmaxRow,
    SweepAxis,
    SweepMode,
    TRACE_NAMES,
    )
from attnmemcore.async_helpers import default_workers, map_in_pool
from attnmemcore.context import with_context
from attnmemcore.core import Application
from attnmemcore.file_util import write_file

log = logging.getLogger('attnmem.experiments.sweep')

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

DEFAULT_SOFTMAX_CAP = 5.0

_CELL_FAILURES = (AttnMemError, ArithmeticError, linalg.LinAlgError)


def validate(config):
    grid = list(config.axis_grid)
    if not grid:
        raise InvalidArgument("axis grid is empty")
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise InvalidArgument("axis grid must be strictly monotone")
    if config.mode.empirical and config.trials < 1:
        raise InvalidArgument(
            "mode {} needs trials >= 1, got {}".format(
                config.mode.value, config.trials))
    if config.n < 2:
        raise InvalidArgument("n must be at least 2")
    if config.axis is SweepAxis.A1_MIX and config.f_name != 'hermite-mix':
        raise InvalidArgument("the a1-mix axis sweeps hermite-mix only")


def _substituted(config, value):
    if config.axis is SweepAxis.GAMMA:
        return attr.evolve(config, gamma=value)
    if config.axis is SweepAxis.SNR:
        return attr.evolve(config, snr=value)
    if config.axis is SweepAxis.P:
        return attr.evolve(config, p=value)
    return attr.evolve(config, f_params=dict(config.f_params, r=value))


def cell_config(config, value):
    """config with the axis value substituted and snr made absolute."""
    cell = _substituted(config, value)
    if cell.snr_scales_with_c:
        cell = attr.evolve(
            cell, snr=cell.snr * cell.c, snr_scales_with_c=False)
    return cell


def cells(config):
    return [Cell(index=i, axis_value=float(x), config=cell_config(config, x))
            for i, x in enumerate(config.axis_grid)]


def _frozen(params):
    return tuple(sorted(params.items()))


def _canonical(cls, row):
    # what a reader of the CSV gets back
    codec = serialize.RowSerializer()
    return codec.from_record(cls, codec.to_record(cls, row))


class SweepRunner(Application):
    """Evaluates every cell of a sweep and collects one row type.

    Theory values are cached by cell parameters so that presets sharing
    a cell agree exactly. Cells of theory-only sweeps run on the worker
    pool; empirical and diagnostic sweeps run cells in order and spread
    the trials, so the pool is never entered twice.
    """

    def __init__(self, config, workers=None):
        super().__init__()
        validate(config)
        self.config = config
        if workers is None:
            workers = config.workers
        if workers is None:
            workers = default_workers()
        self.workers = workers
        self.failed_cells = []
        self._profiles = {}
        self._theory = {}

    @property
    def row_type(self):
        mode = self.config.mode
        if mode is SweepMode.DIAGNOSTICS:
            return DiagnosticRow
        if mode is SweepMode.COMPARE_SOFTMAX:
            return SoftmaxRow
        return ResultRow

    @property
    def sequential(self):
        mode = self.config.mode
        return mode.empirical or mode is SweepMode.DIAGNOSTICS

    @property
    def exit_code(self):
        return EXIT_NUMERIC if self.failed_cells else EXIT_OK

    def profile(self, config):
        key = (config.f_name, _frozen(config.f_params), config.quad_nodes)
        if key not in self._profiles:
            self._profiles[key] = nonlinearity.profile(
                config.f_name, config.f_params, config.quad_nodes)
        return self._profiles[key]

    def theory_values(self, config):
        key = (config.mode.ridge, config.f_name, _frozen(config.f_params),
               config.quad_nodes, config.n, config.p, config.gamma,
               config.snr, config.alignment, config.solver)
        if key in self._theory:
            return self._theory[key]
        values = {
            'e_ridge_theory': theory.ridge_error(
                config.c, config.gamma, config.snr),
            }
        if not config.mode.ridge:
            _, m = self.profile(config)
            params = NoiseSystemParams(
                c=config.c, gamma=config.gamma, a1=m.a1, nu=m.nu)
            align = theory.alignment_for_mode(config.alignment, config.snr)
            pred = theory.attention_error(params, align, config.solver)
            values.update(
                a1=m.a1, nu=m.nu, e_theory=pred.e_bar,
                solver_iterations=pred.state.iterations,
                residual=pred.state.residual)
        self._theory[key] = values
        return values

    def trial_cell(self, config, softmax_cap=None):
        f = None
        if not config.mode.ridge and softmax_cap is None:
            f = self.profile(config)[0]
        return simulate.TrialCell(
            n=config.n, p=int(round(config.p)), gamma=config.gamma,
            snr=config.snr, alignment=config.alignment, f=f,
            softmax_cap=softmax_cap)

    def _failed(self, cell, error, context):
        log.warning("cell %d (%s=%r) failed: %s", cell.index,
                    cell.config.axis.value, cell.axis_value, error)
        context.warn("{}: {}".format(type(error).__name__, error))
        self.failed_cells.append(cell.index)

    @with_context(name="cell-{cell.index}",
                  description="{cell.config.axis.value}={cell.axis_value}")
    def result_row(self, *, cell, context):
        config = cell.config
        row = ResultRow(
            axis_value=cell.axis_value, n=config.n, p=config.p, c=config.c,
            gamma=config.gamma, snr=config.snr)
        if config.mode.empirical:
            row.trials = config.trials
            row.master_seed = config.master_seed
        try:
            for key, value in self.theory_values(config).items():
                setattr(row, key, value)
        except _CELL_FAILURES as e:
            self._failed(cell, e, context)
        if config.mode.empirical:
            try:
                summary = simulate.monte_carlo(
                    self.trial_cell(config), config.trials,
                    config.master_seed, self.workers)
            except _CELL_FAILURES as e:
                self._failed(cell, e, context)
            else:
                row.e_emp_mean = summary.mean_e
                row.e_emp_std = summary.std_e
                row.e_emp_stderr = summary.stderr
                if summary.failures:
                    self._failed(cell, InvalidArgument(
                        "{} of {} trials failed".format(
                            summary.failures, config.trials)), context)
        return [row]

    @with_context(name="cell-{cell.index}",
                  description="{cell.config.axis.value}={cell.axis_value}")
    def diagnostic_rows(self, *, cell, context):
        config = cell.config
        trials = max(config.trials, 1)
        seeds = [simulate.mix64(config.master_seed, t)
                 for t in range(trials)]
        p = int(round(config.p))
        try:
            f, m = self.profile(config)
            reports = map_in_pool(
                lambda seed: simulate.trace_diagnostics(
                    config.n, p, f, config.gamma, seed, m, config.solver),
                seeds, self.workers)
        except _CELL_FAILURES as e:
            self._failed(cell, e, context)
            return []
        rows = []
        for t, report in enumerate(reports):
            gaps = report.relative_gap
            for i, name in enumerate(TRACE_NAMES):
                rows.append(DiagnosticRow(
                    axis_value=cell.axis_value, n=config.n, p=p,
                    gamma=config.gamma, trial=t, seed=report.seed,
                    quantity=name, empirical=float(report.empirical[i]),
                    predicted=float(report.predicted[i]),
                    relative_gap=float(gaps[i]),
                    identity_defect=report.identity_defect))
        return rows

    @with_context(name="cell-{cell.index}",
                  description="{cell.config.axis.value}={cell.axis_value}")
    def softmax_rows(self, *, cell, context):
        config = cell.config
        cap = float(config.f_params.get('C', DEFAULT_SOFTMAX_CAP))
        trial = self.trial_cell(config, softmax_cap=cap)
        row = SoftmaxRow(
            axis_value=cell.axis_value, n=trial.n, p=trial.p,
            gamma=config.gamma, snr=config.snr, cap=cap,
            trials=config.trials, master_seed=config.master_seed)
        seeds = [simulate.mix64(config.master_seed, t)
                 for t in range(config.trials)]
        try:
            pairs = np.array(map_in_pool(
                lambda seed: simulate.softmax_error_gap(trial, seed, cap),
                seeds, self.workers))
        except _CELL_FAILURES as e:
            self._failed(cell, e, context)
            return [row]
        gaps = pairs[:, 0] - pairs[:, 1]
        row.e_softmax_mean = float(pairs[:, 0].mean())
        row.e_entrywise_mean = float(pairs[:, 1].mean())
        row.gap_mean = float(gaps.mean())
        row.gap_std = float(gaps.std(ddof=1)) if len(gaps) > 1 else 0.0
        return [row]

    def _evaluate(self, cell):
        mode = self.config.mode
        if mode is SweepMode.DIAGNOSTICS:
            return self.diagnostic_rows(cell=cell)
        if mode is SweepMode.COMPARE_SOFTMAX:
            return self.softmax_rows(cell=cell)
        return self.result_row(cell=cell)

    def run(self):
        todo = cells(self.config)
        with self.context.child(
                "sweep", "{} over {} ({} cells)".format(
                    self.config.mode.value, self.config.axis.value,
                    len(todo))) as context:
            if self.sequential:
                batches = [self._evaluate(cell) for cell in todo]
            else:
                # theory cells are independent; rows keep cell order
                batches = map_in_pool(self._evaluate, todo, self.workers)
            rows = [_canonical(self.row_type, row)
                    for batch in batches for row in batch]
            if self.failed_cells:
                context.warn("{} cell(s) failed: {}".format(
                    len(self.failed_cells), sorted(self.failed_cells)))
        return rows

    def to_csv(self, rows):
        return serialize.to_csv(self.row_type, rows)


def run_sweep(config, out=None, workers=None):
    """Evaluate config; write the CSV to out if given.

    Returns (rows, exit_code).
    """
    runner = SweepRunner(config, workers)
    rows = runner.run()
    if out is not None:
        write_file(out, runner.to_csv(rows))
        log.info("wrote %d rows to %s", len(rows), out)
    return rows, runner.exit_code
