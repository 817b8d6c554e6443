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

# The noise-only fixed point for m and delta_1 .. delta_7.
#
# Everything here is in the penalty-over-c normalization: the resolvent
# being approximated is (K_N Z^T Z K_N / p + (gamma / c) I_n)^{-1}, which is
# c times (K_N Z^T Z K_N / n + gamma I_n)^{-1}. All public functions take
# the plain gamma.

import logging

import numpy as np
from scipy import linalg, optimize

from attnmem.common.errors import (
    NonConvergence,
    NumericDomainError,
    SolverBreakdown,
    )
from attnmem.common.types import (
    DerivativeSource,
    DerivativeState,
    SelfConsistentState,
    SolverOptions,
    )

log = logging.getLogger('attnmem.selfconsistent')

_EPS = np.finfo(float).eps
_MAX_CONDITION = 1e13
# accepted residual of a polished root stalled by rounding
_POLISH_FLOOR = 1e-10


def to_penalty_normalization(gamma, c):
    """The shift of the p-normalized resolvent for penalty gamma."""
    return gamma / c


def from_penalty_normalization(shift, c):
    return shift * c


def base_vectors(c, a1):
    v = np.array([a1 * a1 * (1 + c) / c ** 2, a1 / c, a1 / c, 0, 0, 1.0])
    v1 = np.eye(6)[1]
    v2 = np.eye(6)[0]
    v4 = np.array([a1 / c, 1.0, 1.0, 0, 0, 0])
    v7 = np.array([2 * a1 / c + a1 / c ** 2, 1 / c + 1, 1 / c + 1, 0, 1, 0])
    return v, v1, v2, v4, v7


def lambda0(c, a1):
    L = np.zeros((6, 6))
    L[0, 0] = a1 * a1 * (c + 1) / c ** 2
    L[0, 1] = L[1, 0] = a1 / c
    L[0, 2] = L[2, 0] = a1 / c
    L[0, 4] = L[4, 0] = a1
    L[1:3, 1:3] = 1.0
    return L


def _moment_block(a1, nu):
    return np.array([[1.0, a1], [a1, nu]])


def _delta0(m_over_c, d1, d2, d3, d4, s, a1, nu):
    # Delta_0 is the Kronecker product of a 3x3 trace block with the
    # 2x2 block of Hermite moments.
    M = np.array([
        [m_over_c, d1, d2],
        [d1, d3, s],
        [d2, s, d4],
        ])
    return np.kron(M, _moment_block(a1, nu))


def delta0_matrix(m, d1, d2, d3, d4, params):
    c = params.c
    s = (1 - params.gamma * m / c) / c
    return _delta0(m / c, d1, d2, d3, d4, s, params.a1, params.nu)


def delta0_prime_matrix(m, mp, d1p, d2p, d3p, d4p, params):
    """Delta_0 differentiated in gamma, given the primed unknowns."""
    c = params.c
    sp = -(m + params.gamma * mp) / c ** 2
    return _delta0(mp / c, d1p, d2p, d3p, d4p, sp, params.a1, params.nu)


def _shifted(Delta0, Lambda0):
    return np.eye(6) + Lambda0 @ Delta0


def t_matrix(Delta0, Lambda0):
    A = _shifted(Delta0, Lambda0)
    try:
        cond = np.linalg.cond(A)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise SolverBreakdown("I + Lambda0 Delta0 is singular", cond)
    # T = Delta0 A^{-1}, so T^T = (I + Delta0 Lambda0)^{-1} Delta0
    T = linalg.solve(A.T, Delta0).T
    scale = max(1.0, np.max(np.abs(T)))
    asym = np.max(np.abs(T - T.T))
    if asym > 1e-8 * scale:
        raise SolverBreakdown(
            "T is not symmetric (defect {:.3e})".format(asym), cond)
    return (T + T.T) / 2


class _System:
    """The update map of the five core unknowns at fixed parameters."""

    def __init__(self, params):
        self.params = params
        c, a1 = params.c, params.a1
        self.vectors = base_vectors(c, a1)
        self.Lambda0 = lambda0(c, a1)
        self.base = params.gamma / c + params.nu / c + a1 * a1 / c ** 2

    def t_of(self, s):
        m, d1, d2, d3, d4 = s
        Delta0 = delta0_matrix(m, d1, d2, d3, d4, self.params)
        return Delta0, t_matrix(Delta0, self.Lambda0)

    def update(self, s):
        c, a1 = self.params.c, self.params.a1
        v, v1, v2, v4, v7 = self.vectors
        m, d1 = s[0], s[1]
        _, T = self.t_of(s)
        Tv = T @ v
        m_new = 1 / (self.base - v @ Tv)
        cd1 = -m * (v1 @ Tv)
        cd2 = v2 @ T @ v1 + c * d1 * (1 - v2 @ Tv)
        cd3 = v1 @ T @ v1 + c * c * d1 * d1 / m
        cd4 = v4 @ T @ v4 + m * (v4 @ Tv - a1 / c) ** 2
        new = np.array([m_new, cd1 / c, cd2 / c, cd3 / c, cd4 / c])
        if not np.all(np.isfinite(new)):
            raise NumericDomainError(
                "non-finite fixed-point update at {}".format(self.params))
        return new

    def initial(self):
        return np.array([1 / self.base, 0.0, 0.0, 0.0, 0.0])

    def threshold(self, s, tol):
        # Small-scale solutions (large gamma) are resolved to the same
        # relative accuracy as order-one ones.
        scale = np.max(np.abs(s))
        return max(tol * min(1.0, scale), 8 * _EPS * scale)

    def rounding_floor(self, s):
        """Smallest residual the update map can resolve near s."""
        scale = max(1.0, np.max(np.abs(s)))
        Delta0, _ = self.t_of(s)
        cond = np.linalg.cond(_shifted(Delta0, self.Lambda0))
        return max(_POLISH_FLOOR * scale, 64 * _EPS * scale * cond)

    def residual(self, s):
        try:
            return float(np.max(np.abs(self.update(s) - s)))
        except (NumericDomainError, SolverBreakdown):
            return np.inf

    def tail(self, m, T):
        """delta_5, delta_6, delta_7 from the converged T and m."""
        c, a1 = self.params.c, self.params.a1
        v, v1, v2, v4, v7 = self.vectors
        Tv = T @ v
        P = v2 @ Tv - 1
        Q = v4 @ Tv - a1 / c
        R = v7 @ Tv - (a1 / c) * (2 + 1 / c)
        return np.array([
            -m * P,
            v4 @ T @ v2 + m * P * Q,
            v4 @ T @ v7 + m * Q * R,
            ]) / c


def _iterate(system, s, opts):
    damping = opts.damping
    residual = np.inf
    increases = 0
    budget = max(1, opts.max_iter // 2)
    for it in range(1, budget + 1):
        g = system.update(s)
        new_residual = np.max(np.abs(g - s))
        if new_residual < system.threshold(s, opts.tol):
            return s, new_residual, it, True
        if new_residual > residual:
            increases += 1
            if increases >= opts.patience and damping > opts.min_damping:
                damping = max(damping / 2, opts.min_damping)
                increases = 0
                log.debug("damping halved to %s at iteration %d (%s)",
                          damping, it, system.params)
        else:
            increases = 0
        residual = new_residual
        s = (1 - damping) * s + damping * g
    return s, residual, budget, False


def _polish(system, s, opts, iterations):
    """Hand a stalled iteration to a quasi-Newton root finder."""
    log.info("damped iteration stalled at %s; trying hybr", system.params)
    try:
        sol = optimize.root(
            lambda x: system.update(x) - x, s, method='hybr',
            options={'xtol': 1e-15,
                     'maxfev': max(100, opts.max_iter - iterations)})
    except (NumericDomainError, SolverBreakdown) as e:
        log.debug("hybr failed: %s", e)
        return s, False
    if not np.all(np.isfinite(sol.x)):
        return s, False
    return sol.x, True


def redelta(state):
    """Max change of the core unknowns under one undamped update."""
    system = _System(state.params)
    return float(np.max(np.abs(system.update(state.core) - state.core)))


def solve(params, opts=None, initial=None):
    if opts is None:
        opts = SolverOptions()
    system = _System(params)
    s = system.initial() if initial is None else np.array(initial, float)
    s, residual, iterations, converged = _iterate(system, s, opts)
    if not converged:
        polished, ok = _polish(system, s, opts, iterations)
        if ok and system.residual(polished) <= system.residual(s):
            s = polished
        residual = system.residual(s)
        iterations = opts.max_iter
        converged = residual < system.threshold(s, opts.tol)
        if (not converged and np.isfinite(residual)
                and residual < system.rounding_floor(s)):
            log.info("accepting residual %.3e at the rounding floor of %s",
                     residual, params)
            converged = True
    if not converged:
        raise NonConvergence(
            "fixed point did not converge at {}".format(params),
            residual, iterations)
    m = float(s[0])
    if not m > 0:
        raise NumericDomainError("converged to m={} <= 0 at {}".format(
            m, params))
    Delta0, T = system.t_of(s)
    delta = np.concatenate([s[1:], system.tail(m, T)])
    v, v1, v2, v4, v7 = system.vectors
    log.debug("solved %s in %d iterations, residual %.3e",
              params, iterations, residual)
    return SelfConsistentState(
        params=params, m=m, delta=delta, Delta0=Delta0,
        Lambda0=system.Lambda0, T=T, v=v, v1=v1, v2=v2, v4=v4, v7=v7,
        residual=float(residual), iterations=iterations, converged=True)


def _primed_core(state, x, Bt):
    """One application of the derivative equations.

    x holds the current guess for (m', delta_1', .., delta_4'); the map is
    affine in x.
    """
    params = state.params
    c, a1 = params.c, params.a1
    m, d1 = state.m, state.d(1)
    v, v1, v2, v4 = state.v, state.v1, state.v2, state.v4
    T = state.T
    mp, d1p = x[0], x[1]
    Delta0p = delta0_prime_matrix(m, *x, params)
    Tp = Bt.T @ Delta0p @ Bt
    Tv = T @ v
    Tpv = Tp @ v
    Q = v4 @ Tv - a1 / c
    return np.array([
        (v @ Tpv - 1 / c) * m * m,
        (-mp * (v1 @ Tv) - m * (v1 @ Tpv)) / c,
        (v2 @ Tp @ (v1 - c * d1 * v) + c * d1p * (1 - v2 @ Tv)) / c,
        (v1 @ Tp @ v1 + c * c * d1 * (2 * d1p * m - d1 * mp) / m ** 2) / c,
        (v4 @ Tp @ v4 + mp * Q * Q + 2 * m * Q * (v4 @ Tpv)) / c,
        ]), Delta0p, Tp


def _tail_prime(state, mp, Tp, lemma=False):
    params = state.params
    c, a1 = params.c, params.a1
    m, T = state.m, state.T
    v, v2, v4, v7 = state.v, state.v2, state.v4, state.v7
    Tv = T @ v
    Tpv = Tp @ v
    P = v2 @ Tv - 1
    Q = v4 @ Tv - a1 / c
    if lemma:
        R = v7 @ Tv - (a1 / c) * (1 + 1 / c)
    else:
        R = v7 @ Tv - (a1 / c) * (2 + 1 / c)
    return np.array([
        -mp * P - m * (v2 @ Tpv),
        (v4 @ Tp @ v2 + mp * P * Q + m * (v2 @ Tpv) * Q
         + m * P * (v4 @ Tpv)),
        (v4 @ Tp @ v7 + mp * Q * R + m * (v4 @ Tpv) * R
         + m * Q * (v7 @ Tpv)),
        ]) / c


def analytic_derivatives(state):
    """Solve the derivative equations as a 5x5 linear system."""
    # (I + Lambda0 Delta0)^{-1}; its transpose is (I + Delta0 Lambda0)^{-1}
    Bt = linalg.inv(_shifted(state.Delta0, state.Lambda0))
    b, _, _ = _primed_core(state, np.zeros(5), Bt)
    A = np.empty((5, 5))
    for j in range(5):
        A[:, j] = _primed_core(state, np.eye(5)[j], Bt)[0] - b
    system = np.eye(5) - A
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise SolverBreakdown("derivative system is singular", cond)
    x = linalg.solve(system, b)
    _, Delta0p, Tp = _primed_core(state, x, Bt)
    mp = float(x[0])
    deltap = np.concatenate([x[1:], _tail_prime(state, mp, Tp)])
    return DerivativeState(
        mp=mp, deltap=deltap, Delta0p=Delta0p, Tp=(Tp + Tp.T) / 2,
        source=DerivativeSource.ANALYTIC,
        lemma_deltap=_tail_prime(state, mp, Tp, lemma=True))


def fd_derivatives(params, opts=None, h=None, state=None):
    """Central differences of two full solves at gamma (1 +- h)."""
    if opts is None:
        opts = SolverOptions()
    if h is None:
        h = opts.fd_step_rel
    gamma = params.gamma
    initial = None if state is None else state.core
    hi = solve(params.with_gamma(gamma * (1 + h)), opts, initial)
    lo = solve(params.with_gamma(gamma * (1 - h)), opts, initial)
    step = 2 * gamma * h
    return DerivativeState(
        mp=(hi.m - lo.m) / step,
        deltap=(hi.delta - lo.delta) / step,
        Delta0p=(hi.Delta0 - lo.Delta0) / step,
        Tp=(hi.T - lo.T) / step,
        source=DerivativeSource.FINITE_DIFFERENCE)


def _flatten(deriv):
    return np.concatenate([[deriv.mp], deriv.deltap])


def gate_error(analytic, fd):
    """Largest relative deviation over m', delta_1' .. delta_7'."""
    a = _flatten(analytic)
    f = _flatten(fd)
    # components that vanish identically (a1 = 0) are compared absolutely
    floor = 1e-8 * max(1.0, np.max(np.abs(f)))
    return float(np.max(np.abs(a - f) / np.maximum(np.abs(f), floor)))


def derivatives(state, params=None, opts=None, gate=True):
    if params is None:
        params = state.params
    if opts is None:
        opts = SolverOptions()
    analytic = analytic_derivatives(state)
    if analytic.mp >= 0:
        log.warning("m' = %r is not negative at %s", analytic.mp, params)
    if not gate:
        return analytic
    fd = fd_derivatives(params, opts, state=state)
    err = gate_error(analytic, fd)
    if err > opts.fd_gate:
        log.warning(
            "analytic derivatives deviate from finite differences by %.3e "
            "at %s; using finite differences", err, params)
        return DerivativeState(
            mp=fd.mp, deltap=fd.deltap, Delta0p=fd.Delta0p, Tp=fd.Tp,
            source=DerivativeSource.FINITE_DIFFERENCE, gate_error=err,
            lemma_deltap=analytic.lemma_deltap)
    return DerivativeState(
        mp=analytic.mp, deltap=analytic.deltap, Delta0p=analytic.Delta0p,
        Tp=analytic.Tp, source=DerivativeSource.ANALYTIC, gate_error=err,
        lemma_deltap=analytic.lemma_deltap)
