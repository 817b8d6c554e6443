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
import math

import attr
import numpy as np
from numpy.polynomial import hermite_e, legendre

from attnmem.common.errors import InvalidArgument, NumericDomainError
from attnmem.common.types import HermiteMoments, Nonlinearity

log = logging.getLogger('attnmem.nonlinearity')

DEFAULT_NODES = 200
MIN_MOMENT_NODES = 64

# Piecewise functions are integrated on [-L, L]; the standard normal mass
# outside is below 1e-32.
_HALF_WIDTH = 12.0

CATALOG = ('tanh', 'clamped-linear', 'clamped-exp', 'cos', 'hermite-mix',
           'identity')


def gauss_hermite_rule(k):
    """Nodes and weights for E[g(xi)], xi ~ N(0, 1).

    Exact for polynomials of degree up to 2k - 1; the weights sum to 1.
    """
    if k < 2:
        raise InvalidArgument("need at least 2 nodes, got {}".format(k))
    nodes, weights = hermite_e.hermegauss(k)
    return nodes, weights / weights.sum()


def _segment_rule(breakpoints, k):
    base_nodes, base_weights = legendre.leggauss(k)
    nodes = []
    weights = []
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        half = (hi - lo) / 2
        t = lo + half * (base_nodes + 1)
        density = np.exp(-t * t / 2) / math.sqrt(2 * math.pi)
        nodes.append(t)
        weights.append(half * base_weights * density)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    return nodes, weights / weights.sum()


def quadrature_rule(f, k):
    """The rule moments() uses for f.

    Smooth functions get the k-node Gauss-Hermite rule. Functions with
    kinks get k Gauss-Legendre nodes on every segment between kinks,
    weighted by the normal density, so that no node straddles a kink.
    """
    inner = sorted(x for x in f.kinks if -_HALF_WIDTH < x < _HALF_WIDTH)
    if not inner:
        return gauss_hermite_rule(k)
    return _segment_rule([-_HALF_WIDTH] + inner + [_HALF_WIDTH], k)


def moments(f, k=DEFAULT_NODES):
    if k < MIN_MOMENT_NODES:
        raise InvalidArgument(
            "moments need at least {} nodes, got {}".format(
                MIN_MOMENT_NODES, k))
    nodes, weights = quadrature_rule(f, k)
    values = f.eval(nodes)
    if not np.all(np.isfinite(values)):
        bad = nodes[~np.isfinite(values)][0]
        raise NumericDomainError(
            "{} is not finite at t={}".format(f.name, bad))
    a0 = float(weights @ values)
    a1 = float(weights @ (nodes * values))
    a2 = float(weights @ (nodes * nodes * values)) / math.sqrt(2)
    nu = float(weights @ (values - a0) ** 2)
    if abs(a2) > 1e-6:
        log.warning(
            "%s has a2=%.3g; the fixed point assumes a2 = 0", f.name, a2)
    log.debug("moments of %s (k=%d): a0=%r a1=%r a2=%r nu=%r",
              f.name, k, a0, a1, a2, nu)
    return HermiteMoments(a0=a0, a1=a1, a2=a2, nu=nu)


def centered(f, m):
    return attr.evolve(f, center_shift=f.center_shift + m.a0)


def _clamp(bound):
    return lambda t: np.clip(t, -bound, bound)


def _hermite_mix(r):
    s = math.sqrt(1 - r * r)

    def raw(t):
        return r * t + s * (t ** 3 - 3 * t) / math.sqrt(6)

    def fn(t):
        return np.clip(raw(t), -5.0, 5.0)

    # the clamp is active beyond the real roots of raw(t) = +-5
    kinks = []
    for level in (5.0, -5.0):
        roots = np.roots([s / math.sqrt(6), 0.0, r - 3 * s / math.sqrt(6),
                          -level])
        kinks.extend(
            float(x.real) for x in roots if abs(x.imag) < 1e-12)
    return fn, tuple(sorted(set(kinks)))


def _positive(params, key, default):
    value = float(params.get(key, default))
    if not value > 0:
        raise InvalidArgument("{} must be positive, got {}".format(key, value))
    return value


def catalog(name, params=None):
    """Build a named activation.

    tanh, cos: no parameters. clamped-linear: bound B (default 5).
    clamped-exp: cap C (default 5). hermite-mix: mixing r in [0, 1].
    identity is the linear reference and is not bounded.
    """
    params = dict(params or {})
    if name == 'tanh':
        return Nonlinearity(name=name, params=params, fn=np.tanh, bound=1.0)
    if name == 'cos':
        return Nonlinearity(name=name, params=params, fn=np.cos, bound=1.0)
    if name == 'identity':
        return Nonlinearity(
            name=name, params=params, fn=lambda t: np.array(t, dtype=float))
    if name == 'clamped-linear':
        B = _positive(params, 'B', 5.0)
        params['B'] = B
        return Nonlinearity(
            name=name, params=params, fn=_clamp(B), bound=B, kinks=(-B, B))
    if name == 'clamped-exp':
        C = _positive(params, 'C', 5.0)
        params['C'] = C

        def capped_exp(t):
            # exp is only taken below the cap so it cannot overflow
            return np.where(t < math.log(C),
                            np.exp(np.minimum(t, math.log(C))), C)
        return Nonlinearity(
            name=name, params=params, fn=capped_exp, bound=C,
            kinks=(math.log(C),))
    if name == 'hermite-mix':
        if 'r' not in params:
            raise InvalidArgument("hermite-mix needs the mixing parameter r")
        r = float(params['r'])
        if not 0 <= r <= 1:
            raise InvalidArgument("r must lie in [0, 1], got {}".format(r))
        params['r'] = r
        fn, kinks = _hermite_mix(r)
        return Nonlinearity(
            name=name, params=params, fn=fn, bound=5.0, kinks=kinks)
    if name == 'relu':
        raise InvalidArgument(
            "relu is unbounded; use clamped-linear instead")
    raise InvalidArgument(
        "unknown nonlinearity {!r}, expected one of {}".format(
            name, ', '.join(CATALOG)))


def hermite_mix_a1_grid(points=20):
    """The r values swept when studying the linear component."""
    return [float(r) for r in np.linspace(0.0, 1.0, points)]


def profile(name, params=None, k=DEFAULT_NODES):
    """The centered catalog entry and its raw moments."""
    f = catalog(name, params)
    m = moments(f, k)
    return centered(f, m), m
