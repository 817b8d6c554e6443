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

# Value types shared by the theory, simulation and experiment layers.
# Everything here is immutable once built; matrices are numpy arrays and
# the classes holding them compare by identity.

import enum
import math
from typing import Any, Callable, Dict, List, Optional, Tuple

import attr
import numpy as np

from attnmem.common.errors import InvalidArgument


class DerivativeSource(enum.Enum):
    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite-difference"


class ErrorPath(enum.Enum):
    THEOREM_LITERAL = "theorem-literal"
    DERIVATIVE_OF_Q = "derivative-of-q"


class KernelKind(enum.Enum):
    ENTRYWISE = "entrywise"
    SOFTMAX = "softmax"


class SweepMode(enum.Enum):
    THEORY_ATTENTION = "theory-attention"
    THEORY_RIDGE = "theory-ridge"
    EMPIRICAL_ATTENTION = "empirical-attention"
    EMPIRICAL_RIDGE = "empirical-ridge"
    DIAGNOSTICS = "diagnostics"
    COMPARE_SOFTMAX = "compare-softmax"

    @property
    def empirical(self):
        return self in (
            SweepMode.EMPIRICAL_ATTENTION,
            SweepMode.EMPIRICAL_RIDGE,
            SweepMode.COMPARE_SOFTMAX,
            )

    @property
    def ridge(self):
        return self in (SweepMode.THEORY_RIDGE, SweepMode.EMPIRICAL_RIDGE)


class SweepAxis(enum.Enum):
    GAMMA = "gamma"
    SNR = "snr"
    P = "p"
    A1_MIX = "a1-mix"


class AlignmentMode(enum.Enum):
    # mu = w_K = w_Q = 0
    NULL = "null"
    # w_K = w_Q = mu
    SIGNAL = "signal"
    # w_K = w_Q = mu_base, mu = sqrt(snr) mu_base
    ALIGNED = "aligned"
    # w_K, w_Q orthogonal to mu_base and to each other
    ORTHOGONAL = "orthogonal"


@attr.s(auto_attribs=True, frozen=True, eq=False)
class Nonlinearity:
    name: str
    params: Dict[str, float]
    fn: Callable[[np.ndarray], np.ndarray]
    center_shift: float = 0.0
    # sup |f|, None for the unbounded linear reference
    bound: Optional[float] = None
    # points where f is not smooth
    kinks: Tuple[float, ...] = ()

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return self.fn(t) - self.center_shift

    def __call__(self, t):
        return self.eval(t)


@attr.s(auto_attribs=True, frozen=True)
class HermiteMoments:
    a0: float
    a1: float
    a2: float
    nu: float


@attr.s(auto_attribs=True, frozen=True)
class NoiseSystemParams:
    c: float
    gamma: float
    a1: float
    nu: float

    def __attrs_post_init__(self):
        if not self.c > 0:
            raise InvalidArgument("c must be positive, got {}".format(self.c))
        if not self.gamma > 0:
            raise InvalidArgument(
                "gamma must be positive, got {}".format(self.gamma))
        if self.nu < self.a1 ** 2 - 1e-10:
            raise InvalidArgument(
                "nu={} < a1^2={}".format(self.nu, self.a1 ** 2))

    def with_gamma(self, gamma):
        return attr.evolve(self, gamma=gamma)


@attr.s(auto_attribs=True, frozen=True)
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 10000
    damping: float = 0.5
    fd_step_rel: float = 1e-5
    min_damping: float = 1 / 16
    # consecutive residual increases before the damping is halved
    patience: int = 20
    fd_gate: float = 1e-4

    def __attrs_post_init__(self):
        if not self.tol > 0:
            raise InvalidArgument("tol must be positive")
        if not 0 < self.damping <= 1:
            raise InvalidArgument(
                "damping must lie in (0, 1], got {}".format(self.damping))
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be at least 1")
        if not self.fd_step_rel > 0:
            raise InvalidArgument("fd_step_rel must be positive")


@attr.s(auto_attribs=True, frozen=True, eq=False)
class SelfConsistentState:
    params: NoiseSystemParams
    m: float
    # delta_1 .. delta_7, stored 0-based
    delta: np.ndarray
    Delta0: np.ndarray
    Lambda0: np.ndarray
    T: np.ndarray
    v: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v4: np.ndarray
    v7: np.ndarray
    residual: float
    iterations: int
    converged: bool

    @property
    def core(self):
        return np.concatenate([[self.m], self.delta[:4]])

    def d(self, i):
        """delta_i with the 1-based numbering of the equations."""
        return float(self.delta[i - 1])


@attr.s(auto_attribs=True, frozen=True, eq=False)
class DerivativeState:
    mp: float
    deltap: np.ndarray
    Delta0p: np.ndarray
    Tp: np.ndarray
    source: DerivativeSource
    # max relative deviation from the finite-difference oracle
    gate_error: Optional[float] = None
    # delta_5' .. delta_7' from the grouped closed forms
    lemma_deltap: Optional[np.ndarray] = None

    def d(self, i):
        return float(self.deltap[i - 1])


@attr.s(auto_attribs=True, frozen=True)
class SignalAlignment:
    mu2: float = 0.0
    muwk: float = 0.0
    muwq: float = 0.0
    wk2: float = 0.0
    wq2: float = 0.0
    wkwq: float = 0.0
    t1: float = attr.ib(init=False)

    @t1.default
    def _t1(self):
        return self.mu2 + self.muwk * self.muwq

    def __attrs_post_init__(self):
        if self.mu2 < 0 or self.wk2 < 0 or self.wq2 < 0:
            raise InvalidArgument("squared norms must be non-negative")
        slack = 1e-9
        for ip, a, b in ((self.muwk, self.mu2, self.wk2),
                         (self.muwq, self.mu2, self.wq2),
                         (self.wkwq, self.wk2, self.wq2)):
            if ip * ip > a * b * (1 + slack) + slack:
                raise InvalidArgument(
                    "inner product {} violates Cauchy-Schwarz for norms "
                    "{}, {}".format(ip, a, b))


@attr.s(auto_attribs=True, frozen=True, eq=False)
class TheoryBlocks:
    Lambda: np.ndarray
    Delta: np.ndarray
    DeltaPrime: np.ndarray
    e7: np.ndarray


@attr.s(auto_attribs=True, frozen=True, eq=False)
class ErrorPrediction:
    e_bar: float
    q_value: float
    path: ErrorPath
    diagnostics: Dict[str, Any] = attr.Factory(dict)
    state: Optional[SelfConsistentState] = None


@attr.s(auto_attribs=True, frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    mu: np.ndarray
    seed: int
    n: int
    p: int

    @property
    def Z(self):
        return self.X - np.outer(self.mu, self.y)


@attr.s(auto_attribs=True, frozen=True, eq=False)
class AttentionWeights:
    w_k: np.ndarray
    w_q: np.ndarray

    @property
    def norms(self):
        return (float(np.linalg.norm(self.w_k)),
                float(np.linalg.norm(self.w_q)))

    @classmethod
    def zeros(cls, p):
        return cls(w_k=np.zeros(p), w_q=np.zeros(p))


@attr.s(auto_attribs=True, frozen=True, eq=False)
class KernelMatrix:
    K: np.ndarray
    kind: KernelKind
    f_name: str
    center_shift: float = 0.0


@attr.s(auto_attribs=True, frozen=True)
class LinearizationReport:
    residual: float
    kn_norm: float
    uk_norm: float
    vq_norm: float
    sigmak_norm: float
    n: int
    p: int


@attr.s(auto_attribs=True, frozen=True)
class EmpiricalError:
    value: float
    condition: float
    warnings: List[str] = attr.Factory(list)


@attr.s(auto_attribs=True, frozen=True)
class MonteCarloSummary:
    mean_e: float
    std_e: float
    stderr: float
    trials: int
    per_trial: List[Tuple[int, float]]
    failures: int = 0

    @classmethod
    def from_trials(cls, per_trial, failures=0):
        if not per_trial:
            raise InvalidArgument("no successful trials to summarize")
        values = np.array([e for _, e in per_trial], dtype=float)
        trials = len(values)
        std = float(np.std(values, ddof=1)) if trials > 1 else 0.0
        return cls(
            mean_e=float(np.mean(values)),
            std_e=std,
            stderr=std / math.sqrt(trials),
            trials=trials,
            per_trial=list(per_trial),
            failures=failures)


TRACE_NAMES = ('m', 'delta1', 'delta2', 'delta3', 'delta4',
               'delta5', 'delta6', 'delta7')


@attr.s(auto_attribs=True, frozen=True, eq=False)
class TraceReport:
    # (m, delta_1 .. delta_7) estimated from one sampled resolvent
    empirical: np.ndarray
    # the same quantities from the fixed point
    predicted: np.ndarray
    n: int
    p: int
    gamma: float
    seed: int
    # n - (gamma/c) tr Q0 against tr(Q0 (Q0^{-1} - (gamma/c) I))
    identity_defect: float

    @property
    def relative_gap(self):
        return np.abs(self.empirical - self.predicted) / np.maximum(
            np.abs(self.predicted), 1e-300)

    def as_dict(self):
        return {
            name: (float(e), float(p))
            for name, e, p in zip(TRACE_NAMES, self.empirical, self.predicted)
            }


@attr.s(auto_attribs=True, frozen=True)
class SweepConfig:
    mode: SweepMode
    f_name: str = "tanh"
    f_params: Dict[str, float] = attr.Factory(dict)
    axis: SweepAxis = SweepAxis.GAMMA
    axis_grid: List[float] = attr.Factory(list)
    n: int = 1024
    # p may be fractional on theory-only grids (p = c n)
    p: float = 4096
    gamma: float = 1.0
    snr: float = 0.0
    # cells use snr * c, as for mu drawn with entry variance snr / n
    snr_scales_with_c: bool = False
    alignment: AlignmentMode = AlignmentMode.NULL
    trials: int = 0
    master_seed: int = 0
    label: str = ""
    quad_nodes: int = 200
    solver: SolverOptions = attr.Factory(SolverOptions)
    workers: Optional[int] = None

    @property
    def c(self):
        return self.p / self.n


@attr.s(auto_attribs=True, frozen=True)
class Cell:
    """One point of a sweep: the config with its axis value substituted."""
    index: int
    axis_value: float
    config: SweepConfig


@attr.s(auto_attribs=True)
class ResultRow:
    axis_value: float
    n: int
    p: float
    c: float
    gamma: float
    snr: float
    a1: Optional[float] = None
    nu: Optional[float] = None
    e_theory: Optional[float] = None
    e_ridge_theory: Optional[float] = None
    e_emp_mean: Optional[float] = None
    e_emp_std: Optional[float] = None
    e_emp_stderr: Optional[float] = None
    # empty on theory-only rows
    trials: Optional[int] = None
    master_seed: Optional[int] = None
    solver_iterations: Optional[int] = None
    residual: Optional[float] = None


@attr.s(auto_attribs=True)
class DiagnosticRow:
    """One normalized trace of one sampled resolvent."""
    axis_value: float
    n: int
    p: int
    gamma: float
    trial: int
    seed: int
    quantity: str
    empirical: float
    predicted: float
    relative_gap: float
    identity_defect: float


@attr.s(auto_attribs=True)
class SoftmaxRow:
    axis_value: float
    n: int
    p: int
    gamma: float
    snr: float
    cap: float
    trials: int
    master_seed: int
    e_softmax_mean: Optional[float] = None
    e_entrywise_mean: Optional[float] = None
    gap_mean: Optional[float] = None
    gap_std: Optional[float] = None
