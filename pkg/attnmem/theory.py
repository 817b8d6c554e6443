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

# Deterministic equivalents of the memorization error: the 9x9 block
# assembly for nonlinear attention and the closed form for ridge.

import logging
import math

import numpy as np
from scipy import linalg

from attnmem.common.errors import InvalidArgument, SolverBreakdown
from attnmem.common.types import (
    AlignmentMode,
    ErrorPath,
    ErrorPrediction,
    SignalAlignment,
    SolverOptions,
    TheoryBlocks,
    )
from attnmem import selfconsistent

log = logging.getLogger('attnmem.theory')

_MAX_CONDITION = 1e13

# 0-based position of e_7, the label column of U
LABEL_INDEX = 6


def e7():
    return np.eye(9)[LABEL_INDEX]


def alignment_for_mode(mode, snr):
    """Inner products of mu, w_K, w_Q in the large-p limit.

    mu_base is a unit direction; the finite-sample fluctuation of its
    norm vanishes with p.
    """
    mode = AlignmentMode(mode)
    if snr < 0:
        raise InvalidArgument("snr must be non-negative, got {}".format(snr))
    if mode is AlignmentMode.NULL:
        return SignalAlignment()
    if mode is AlignmentMode.SIGNAL:
        return SignalAlignment(mu2=snr, muwk=snr, muwq=snr, wk2=snr,
                               wq2=snr, wkwq=snr)
    if mode is AlignmentMode.ALIGNED:
        r = math.sqrt(snr)
        return SignalAlignment(mu2=snr, muwk=r, muwq=r, wk2=1.0, wq2=1.0,
                               wkwq=1.0)
    return SignalAlignment(mu2=snr, wk2=1.0, wq2=1.0)


def alignment_from_vectors(mu, w_k, w_q):
    return SignalAlignment(
        mu2=float(mu @ mu), muwk=float(mu @ w_k), muwq=float(mu @ w_q),
        wk2=float(w_k @ w_k), wq2=float(w_q @ w_q), wkwq=float(w_k @ w_q))


def sigma_k(align, a1):
    return a1 * np.array([
        [align.t1, 1.0, align.muwk],
        [1.0, 0.0, 0.0],
        [align.muwq, 0.0, 1.0],
        ])


def sigma_x(align, c):
    return c * np.array([
        [align.mu2, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        ])


def _blocks(b11, b12, b13, b22, b23, b33):
    return np.block([
        [b11, b12, b13],
        [b12.T, b22, b23],
        [b13.T, b23.T, b33],
        ])


def lambda9(align, c, a1):
    mu2, muwk, muwq, wk2 = align.mu2, align.muwk, align.muwq, align.wk2
    t1 = align.t1
    l23 = a1 * np.array([
        [(mu2 + 1) * t1, mu2, muwk * (mu2 + 1)],
        [t1, 1.0, muwk],
        [0.0, 0.0, 0.0],
        ])
    big = (2 + c + mu2) / c
    mid = (1 + c + mu2) / c
    small = (1 + c) / c
    cross = muwk + muwq * wk2
    x11 = big * t1 * t1 + small * t1 + small * muwq * cross
    x21 = mid * t1
    x31 = big * muwk * t1 + small * cross
    x32 = mid * muwk
    l33 = a1 * a1 * np.array([
        [x11, x21, x31],
        [x21, 1 + mu2 / c, x32],
        [x31, x32, big * muwk * muwk + small * wk2],
        ])
    zero = np.zeros((3, 3))
    return _blocks(zero, zero, sigma_k(align, a1), sigma_x(align, c), l23,
                   l33)


def _delta9(m_over_c, d, s1, align, c):
    # entries are linear in (m/c, delta_1..delta_7, 1 - gamma m / c), so
    # the same assembly serves Delta and its gamma-derivative
    mu2, muwk, muwq = align.mu2, align.muwk, align.muwq
    wk2, wq2, wkwq = align.wk2, align.wq2, align.wkwq
    d1, d2, d3, d4, d5, d6, d7 = d

    def block(corner, a, b, b_t, e):
        return np.array([[corner, 0, 0], [0, a, b], [0, b_t, e]])

    b11 = c * c * block(d4, mu2 * d7, muwk * d7, muwk * d7, wk2 * d7)
    b12 = block(s1, c * mu2 * d4, c * muwk * d4, c * muwk * d4,
                c * wk2 * d4)
    b13 = c * block(d2, mu2 * d6, muwq * d6, muwk * d6, wkwq * d6)
    b22 = block(d3, mu2 * s1 / c, muwk * s1 / c, muwk * s1 / c,
                wk2 * s1 / c)
    b23 = block(d1, mu2 * d2, muwq * d2, muwk * d2, wkwq * d2)
    b33 = block(m_over_c, mu2 * d5, muwq * d5, muwq * d5, wq2 * d5)
    return _blocks(b11, b12, b13, b22, b23, b33)


def delta9(state, align, c, gamma):
    s1 = 1 - gamma * state.m / c
    return _delta9(state.m / c, state.delta, s1, align, c)


def delta9_prime(state, deriv, align, c, gamma):
    s1p = -(state.m + gamma * deriv.mp) / c
    return _delta9(deriv.mp / c, deriv.deltap, s1p, align, c)


def theory_blocks(state, deriv, align):
    params = state.params
    c, gamma = params.c, params.gamma
    return TheoryBlocks(
        Lambda=lambda9(align, c, params.a1),
        Delta=delta9(state, align, c, gamma),
        DeltaPrime=delta9_prime(state, deriv, align, c, gamma),
        e7=e7())


def _checked_cond(A, what):
    try:
        cond = np.linalg.cond(A)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise SolverBreakdown("{} is singular".format(what), cond)
    return float(cond)


def _quadratic_forms(blocks, shift, gamma, c):
    """q and the error for the shifted inverse (shift I + Lambda Delta)."""
    L, D, Dp, e = blocks.Lambda, blocks.Delta, blocks.DeltaPrime, blocks.e7
    right = shift * np.eye(9) + L @ D
    left = shift * np.eye(9) + D @ L
    cond_r = _checked_cond(right, "shift I + Lambda Delta")
    cond_l = _checked_cond(left, "shift I + Delta Lambda")
    # (shift I + Lambda Delta)^{-1} e and e^T (shift I + Delta Lambda)^{-1}
    r = linalg.solve(right, e)
    l_ = linalg.solve(left.T, e)
    q = c * float(e @ D @ r)
    e_bar = -gamma * gamma * c * shift * float(l_ @ Dp @ r)
    return e_bar, q, (cond_l, cond_r)


def error_from_blocks(blocks, gamma, c):
    """Both readings of the error formula.

    The theorem form uses c I shifts and a -gamma^2 c^2 prefactor; it is
    -gamma^2 dq/dgamma for q = c e7^T Delta (c I + Lambda Delta)^{-1} e7.
    The alternate form uses I shifts with a -gamma^2 c prefactor.
    """
    e_lit, q_lit, cond_lit = _quadratic_forms(blocks, c, gamma, c)
    e_alt, q_alt, cond_alt = _quadratic_forms(blocks, 1.0, gamma, c)
    return (e_lit, q_lit, cond_lit), (e_alt, q_alt, cond_alt)


def attention_error(params, align, opts=None, path=ErrorPath.THEOREM_LITERAL,
                    state=None, gate=True):
    if opts is None:
        opts = SolverOptions()
    if state is None:
        state = selfconsistent.solve(params, opts)
    deriv = selfconsistent.derivatives(state, params, opts, gate=gate)
    blocks = theory_blocks(state, deriv, align)
    literal, alternate = error_from_blocks(blocks, params.gamma, params.c)
    diagnostics = {
        'theorem_literal': literal[0],
        'derivative_of_q': alternate[0],
        'q_theorem_literal': literal[1],
        'q_derivative_of_q': alternate[1],
        'condition_left': literal[2][0],
        'condition_right': literal[2][1],
        'condition_left_alternate': alternate[2][0],
        'condition_right_alternate': alternate[2][1],
        'derivative_source': deriv.source.value,
        'gate_error': deriv.gate_error,
        'iterations': state.iterations,
        'residual': state.residual,
        }
    e_bar, q, _ = literal if path is ErrorPath.THEOREM_LITERAL else alternate
    if not -1e-6 <= e_bar <= 1 + 1e-6:
        log.warning("error prediction %r outside [0, 1] at %s, %s",
                    e_bar, params, align)
    return ErrorPrediction(
        e_bar=e_bar, q_value=q, path=ErrorPath(path),
        diagnostics=diagnostics, state=state)


def mp_stieltjes(c, gamma):
    """Positive root of c gamma m^2 + (1 - c + gamma) m - 1 = 0 and m'."""
    if not c > 0 or not gamma > 0:
        raise InvalidArgument("c and gamma must be positive")
    b = 1 - c + gamma
    disc = math.sqrt(b * b + 4 * c * gamma)
    if b >= 0:
        # rationalized root, no cancellation when b > 0
        m = 2 / (b + disc)
    else:
        m = (-b + disc) / (2 * c * gamma)
    mp = -(c * m * m + m) / (2 * c * gamma * m + b)
    return m, mp


def ridge_error(c, gamma, snr):
    if snr < 0:
        raise InvalidArgument("snr must be non-negative, got {}".format(snr))
    m, mp = mp_stieltjes(c, gamma)
    g2 = gamma * gamma
    num = c * g2 * mp + c - 1 + snr * (
        g2 * mp + (1 - c - gamma) * (gamma * m - 1))
    den = (1 + snr - snr * gamma * m) ** 2
    return -num / den


def ridge_error_limit_ridgeless(c, snr):
    """Ridge error as gamma -> 0."""
    if c >= 1:
        return 0.0
    return (1 - c) / (1 + snr)
