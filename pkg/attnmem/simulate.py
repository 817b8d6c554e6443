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

# Monte Carlo ground truth for the theory: sampled signal-plus-noise
# tokens, attention kernels built from them, and the memorization error of
# the optimal ridge-regularized linear probe.

import logging
import math
from typing import Optional

import attr
import numpy as np
from scipy import linalg

from attnmem.common.errors import AttnMemError, InvalidArgument
from attnmem.common.errors import NumericDomainError
from attnmem.common.types import (
    AlignmentMode,
    AttentionWeights,
    Dataset,
    EmpiricalError,
    KernelKind,
    KernelMatrix,
    LinearizationReport,
    MonteCarloSummary,
    Nonlinearity,
    NoiseSystemParams,
    TraceReport,
    )
from attnmem import nonlinearity, selfconsistent, theory
from attnmemcore.async_helpers import map_in_pool

log = logging.getLogger('attnmem.simulate')

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15
_ILL_CONDITIONED = 1e12


def mix64(master_seed, t):
    """Seed of trial t: the SplitMix64 finalizer of master ^ (t * golden)."""
    z = (int(master_seed) ^ (int(t) * GOLDEN64)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def sample_dataset(n, p, mu=None, seed=0):
    if n < 2 or p < 2:
        raise InvalidArgument("need n, p >= 2, got n={} p={}".format(n, p))
    if mu is None:
        mu = np.zeros(p)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (p,):
        raise InvalidArgument("mu must have length p={}".format(p))
    rng = np.random.default_rng(seed)
    y = 2.0 * rng.integers(0, 2, size=n) - 1.0
    Z = rng.standard_normal((p, n))
    X = Z + np.outer(mu, y)
    return Dataset(X=X, y=y, mu=mu, seed=int(seed), n=n, p=p)


def _unit(rng, p):
    u = rng.standard_normal(p)
    return u / np.linalg.norm(u)


def sample_weights(p, mode, mu_base, seed):
    """Key and query vectors for an alignment mode around mu_base.

    Orthogonal weights are Gram-Schmidt reduced against mu_base and
    against each other. The signal mode is handled by sample_signal,
    which knows the snr.
    """
    mode = AlignmentMode(mode)
    if mode is AlignmentMode.NULL:
        return AttentionWeights.zeros(p)
    if mode is AlignmentMode.ALIGNED:
        return AttentionWeights(w_k=mu_base.copy(), w_q=mu_base.copy())
    if mode is AlignmentMode.SIGNAL:
        raise InvalidArgument("signal weights depend on snr")
    rng = np.random.default_rng([int(seed), 2])
    w_k = rng.standard_normal(p)
    w_k -= (w_k @ mu_base) * mu_base
    w_k /= np.linalg.norm(w_k)
    w_q = rng.standard_normal(p)
    w_q -= (w_q @ mu_base) * mu_base + (w_q @ w_k) * w_k
    w_q /= np.linalg.norm(w_q)
    return AttentionWeights(w_k=w_k, w_q=w_q)


def sample_signal(p, mode, snr, seed):
    """mu and the key/query vectors for one trial.

    mu_base is an isotropic unit direction and mu = sqrt(snr) mu_base.
    """
    mode = AlignmentMode(mode)
    if snr < 0:
        raise InvalidArgument("snr must be non-negative, got {}".format(snr))
    if mode is AlignmentMode.NULL:
        return np.zeros(p), AttentionWeights.zeros(p)
    rng = np.random.default_rng([int(seed), 1])
    base = _unit(rng, p)
    mu = math.sqrt(snr) * base
    if mode is AlignmentMode.SIGNAL:
        return mu, AttentionWeights(w_k=mu.copy(), w_q=mu.copy())
    return mu, sample_weights(p, mode, base, seed)


def _scores(ds, w):
    # X^T (I + w_K w_Q^T) X / sqrt(p) without forming the p x p product
    G = ds.X.T @ ds.X + np.outer(ds.X.T @ w.w_k, ds.X.T @ w.w_q)
    return G / math.sqrt(ds.p)


def attention_kernel(ds, w, f, center_diagonal=True):
    """K = f(X^T W_K^T W_Q X / sqrt(p)) / sqrt(p), f applied entrywise.

    With center_diagonal=False the centering shift is left out on the
    diagonal.
    """
    values = f.fn(_scores(ds, w))
    if center_diagonal:
        values = values - f.center_shift
    else:
        values = values - f.center_shift * (1 - np.eye(ds.n))
    return KernelMatrix(
        K=values / math.sqrt(ds.p), kind=KernelKind.ENTRYWISE,
        f_name=f.name, center_shift=f.center_shift)


def softmax_kernel(ds, w, cap=5.0):
    if not cap > 0:
        raise InvalidArgument("cap must be positive, got {}".format(cap))
    S = np.exp(np.minimum(_scores(ds, w), math.log(cap)))
    return KernelMatrix(
        K=S / S.sum(axis=0, keepdims=True), kind=KernelKind.SOFTMAX,
        f_name='softmax')


def _factor_matrix(M, shift):
    """Cholesky factor of M + shift I and a condition estimate."""
    M = M.copy()
    M[np.diag_indices_from(M)] += shift
    try:
        factor = linalg.cho_factor(M, lower=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericDomainError("resolvent solve failed: {}".format(e))
    diag = np.abs(np.diag(factor[0]))
    return factor, float((diag.max() / diag.min()) ** 2)


def _factor(features, gamma):
    n = features.shape[1]
    return _factor_matrix(features.T @ features / n, gamma)


def resolvent(features, gamma):
    """(F^T F / n + gamma I)^{-1} for the n columns of F."""
    factor, _ = _factor(features, gamma)
    return linalg.cho_solve(factor, np.eye(features.shape[1]))


def _memorization_error(features, y, gamma, direct=False):
    if not gamma > 0:
        raise InvalidArgument("gamma must be positive, got {}".format(gamma))
    n = len(y)
    factor, condition = _factor(features, gamma)
    Qy = linalg.cho_solve(factor, y)
    warnings = []
    if condition > _ILL_CONDITIONED:
        warnings.append(
            "resolvent condition estimate {:.3e}".format(condition))
        log.warning("ill-conditioned resolvent (%.3e) at gamma=%r",
                    condition, gamma)
    if direct:
        # w* = F (F^T F + n gamma I)^{-1} y, residual y - F^T w*
        w_star = features @ Qy / n
        value = float(np.sum((y - features.T @ w_star) ** 2) / n)
    else:
        # -dQ/dgamma = Q^2, so gamma^2/n y^T Q^2 y = gamma^2/n |Q y|^2
        value = float(gamma * gamma * (Qy @ Qy) / n)
    return EmpiricalError(value=value, condition=condition,
                          warnings=warnings)


def attention_features(ds, K):
    return ds.X @ K.K


def empirical_error(ds, K, gamma):
    return _memorization_error(attention_features(ds, K), ds.y, gamma)


def direct_probe_error(ds, K, gamma):
    return _memorization_error(
        attention_features(ds, K), ds.y, gamma, direct=True)


def ridge_empirical(ds, gamma):
    return _memorization_error(ds.X, ds.y, gamma)


def spectral_norm(A, iterations=50, tol=1e-6, seed=0):
    """Largest singular value by power iteration on A^T A."""
    A = np.asarray(A)
    if not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iterations):
        Ax = A @ x
        new_sigma = float(np.linalg.norm(Ax))
        x = A.T @ Ax
        norm = np.linalg.norm(x)
        if norm == 0:
            return new_sigma
        x /= norm
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return new_sigma
        sigma = new_sigma
    return sigma


def noise_kernel(Z, f):
    """K_N: f applied to Z^T Z / sqrt(p), scaled, with zero diagonal."""
    p = Z.shape[0]
    K = f.eval(Z.T @ Z / math.sqrt(p)) / math.sqrt(p)
    K[np.diag_indices_from(K)] = 0.0
    return K


def linearization_parts(ds, w, f, a1=None):
    if a1 is None:
        a1 = nonlinearity.moments(f).a1
    Z = ds.Z
    sqrt_p = math.sqrt(ds.p)
    K_N = noise_kernel(Z, f)
    U_K = np.column_stack([ds.y, Z.T @ ds.mu, Z.T @ w.w_k]) / sqrt_p
    V_Q = np.column_stack([ds.y, Z.T @ ds.mu, Z.T @ w.w_q]) / sqrt_p
    align = theory.alignment_from_vectors(ds.mu, w.w_k, w.w_q)
    S_K = theory.sigma_k(align, a1)
    K_tilde = K_N + U_K @ S_K @ V_Q.T
    K_X = attention_kernel(ds, w, f).K
    return LinearizationReport(
        residual=spectral_norm(K_X - K_tilde),
        kn_norm=spectral_norm(K_N),
        uk_norm=float(np.linalg.norm(U_K, 2)),
        vq_norm=float(np.linalg.norm(V_Q, 2)),
        sigmak_norm=float(np.linalg.norm(S_K, 2)),
        n=ds.n, p=ds.p)


def _trace_estimates(Z, K, gamma):
    p, n = Z.shape
    c = p / n
    Zc = Z.T @ Z / p
    W = K @ Zc
    M = W @ K
    factor, _ = _factor_matrix(M, gamma / c)
    Q0 = linalg.cho_solve(factor, np.eye(n))
    A = Q0 @ K
    Q0W = Q0 @ W
    WZ = W @ Zc
    estimates = np.array([
        np.trace(Q0) / n,
        np.trace(A) / p,
        np.sum(A * Zc) / p,
        np.sum(A * K) / p,
        np.sum(W * Q0W) / p,
        np.sum(Q0 * Zc) / p,
        np.sum(Q0 * WZ) / p,
        np.sum((Q0W @ Zc) * W) / p,
        ])
    lhs = np.sum(Q0 * M)
    rhs = n - (gamma / c) * np.trace(Q0)
    return estimates, abs(lhs - rhs) / n


def trace_diagnostics(n, p, f, gamma, seed, m=None, opts=None):
    """Normalized traces of the noise-only resolvent next to the fixed point.

    f must already be centered. Q0 = (K_N Zc K_N + (gamma/c) I)^{-1} with
    Zc = Z^T Z / p.
    """
    if m is None:
        m = nonlinearity.moments(f)
    ds = sample_dataset(n, p, seed=seed)
    estimates, defect = _trace_estimates(ds.Z, noise_kernel(ds.Z, f), gamma)
    state = selfconsistent.solve(
        NoiseSystemParams(c=p / n, gamma=gamma, a1=m.a1, nu=m.nu), opts)
    predicted = np.concatenate([[state.m], state.delta])
    return TraceReport(
        empirical=estimates, predicted=predicted, n=n, p=p, gamma=gamma,
        seed=int(seed), identity_defect=float(defect))


@attr.s(auto_attribs=True, frozen=True)
class TrialCell:
    """Everything one Monte Carlo trial needs apart from its seed."""
    n: int
    p: int
    gamma: float
    snr: float = 0.0
    alignment: AlignmentMode = AlignmentMode.NULL
    # None selects ridge regression on the raw tokens
    f: Optional[Nonlinearity] = None
    softmax_cap: Optional[float] = None

    def dataset(self, seed):
        mu, w = sample_signal(self.p, self.alignment, self.snr, seed)
        return sample_dataset(self.n, self.p, mu, seed), w

    def __call__(self, seed):
        ds, w = self.dataset(seed)
        if self.softmax_cap is not None:
            K = softmax_kernel(ds, w, self.softmax_cap)
            return empirical_error(ds, K, self.gamma).value
        if self.f is None:
            return ridge_empirical(ds, self.gamma).value
        return empirical_error(
            ds, attention_kernel(ds, w, self.f), self.gamma).value


def softmax_error_gap(cell, seed, cap=5.0):
    """Errors of the softmax kernel and the entrywise capped exponential.

    Both kernels come from the same tokens and weights. The gap is
    reported, not asserted.
    """
    ds, w = cell.dataset(seed)
    capped = nonlinearity.profile('clamped-exp', {'C': cap})[0]
    soft = empirical_error(ds, softmax_kernel(ds, w, cap), cell.gamma)
    entry = empirical_error(ds, attention_kernel(ds, w, capped), cell.gamma)
    return soft.value, entry.value


def _run_trial(trial, seed):
    try:
        return seed, trial(seed), None
    except (AttnMemError, ArithmeticError, linalg.LinAlgError) as e:
        log.warning("trial with seed %d failed: %s", seed, e)
        return seed, None, e


def monte_carlo(trial, trials, master_seed, workers=1, order=None):
    """Run trial(seed) for seeds mix64(master_seed, t), t < trials.

    The summary depends only on (master_seed, trials): results are put
    back in trial order whatever order they ran in.
    """
    if trials < 1:
        raise InvalidArgument("trials must be at least 1, got {}".format(
            trials))
    seeds = [mix64(master_seed, t) for t in range(trials)]
    if order is None:
        order = range(trials)
    order = list(order)
    if sorted(order) != list(range(trials)):
        raise InvalidArgument("order must be a permutation of the trials")
    outcomes = map_in_pool(
        lambda t: _run_trial(trial, seeds[t]), order, workers)
    by_index = dict(zip(order, outcomes))
    per_trial = []
    failures = 0
    for t in range(trials):
        seed, value, error = by_index[t]
        if error is None:
            per_trial.append((seed, value))
        else:
            failures += 1
    return MonteCarloSummary.from_trials(per_trial, failures)