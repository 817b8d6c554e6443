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

import unittest

import attr
import numpy as np

from attnmem import nonlinearity, simulate, theory
from attnmem.common.errors import InvalidArgument
from attnmem.common.types import (
    AlignmentMode,
    NoiseSystemParams,
    Nonlinearity,
    )
from attnmemcore.tests import AttnTestCase, slow


class TestSampling(AttnTestCase):

    def test_mix64(self):
        self.assertEqual(simulate.mix64(0, 0), 0)
        seeds = {simulate.mix64(42, t) for t in range(1000)}
        self.assertEqual(len(seeds), 1000)
        self.assertTrue(all(0 <= s < 2 ** 64 for s in seeds))
        self.assertEqual(simulate.mix64(42, 7), simulate.mix64(42, 7))
        self.assertNotEqual(simulate.mix64(42, 7), simulate.mix64(43, 7))

    def test_dataset(self):
        mu = np.full(20, 0.5)
        ds = simulate.sample_dataset(30, 20, mu, seed=3)
        self.assertEqual(ds.X.shape, (20, 30))
        self.assertEqual(set(ds.y), {-1.0, 1.0})
        self.assertAllClose(ds.Z, ds.X - np.outer(mu, ds.y))
        again = simulate.sample_dataset(30, 20, mu, seed=3)
        self.assertAllClose(again.X, ds.X)

    def test_dataset_rejects(self):
        with self.assertRaises(InvalidArgument):
            simulate.sample_dataset(1, 10)
        with self.assertRaises(InvalidArgument):
            simulate.sample_dataset(10, 10, np.zeros(3))

    def test_signal_modes(self):
        p = 64
        mu, w = simulate.sample_signal(p, AlignmentMode.ALIGNED, 2.5, 1)
        self.assertAlmostEqual(mu @ mu, 2.5)
        self.assertAlmostEqual(w.w_k @ w.w_k, 1.0)
        self.assertAlmostEqual(w.w_k @ mu, np.sqrt(2.5))
        mu, w = simulate.sample_signal(p, 'orthogonal', 2.5, 1)
        self.assertAlmostEqual(mu @ w.w_k, 0.0, delta=1e-12)
        self.assertAlmostEqual(mu @ w.w_q, 0.0, delta=1e-12)
        self.assertAlmostEqual(w.w_k @ w.w_q, 0.0, delta=1e-12)
        self.assertAllClose(w.norms, [1.0, 1.0])
        mu, w = simulate.sample_signal(p, 'signal', 2.5, 1)
        self.assertAllClose(w.w_q, mu)
        mu, w = simulate.sample_signal(p, 'null', 2.5, 1)
        self.assertFalse(np.any(mu) or np.any(w.w_k))

    def test_weights_need_snr_for_signal(self):
        with self.assertRaises(InvalidArgument):
            simulate.sample_weights(8, 'signal', np.eye(8)[0], 0)


class TestKernels(AttnTestCase):

    def setUp(self):
        self.f, self.m = nonlinearity.profile('tanh')
        mu, self.w = simulate.sample_signal(96, 'aligned', 1.0, 5)
        self.ds = simulate.sample_dataset(64, 96, mu, seed=5)

    def test_attention_kernel_is_symmetric_for_equal_weights(self):
        K = simulate.attention_kernel(self.ds, self.w, self.f)
        self.assertEqual(K.K.shape, (64, 64))
        self.assertSymmetric(K.K, atol=1e-12)

    def test_softmax_columns_sum_to_one(self):
        K = simulate.softmax_kernel(self.ds, self.w, cap=3.0)
        self.assertAllClose(K.K.sum(axis=0), np.ones(64), atol=1e-12)
        with self.assertRaises(InvalidArgument):
            simulate.softmax_kernel(self.ds, self.w, cap=0.0)

    def test_resolvent(self):
        F = simulate.attention_features(
            self.ds, simulate.attention_kernel(self.ds, self.w, self.f))
        Q = simulate.resolvent(F, 0.5)
        M = F.T @ F / F.shape[1] + 0.5 * np.eye(64)
        self.assertAllClose(Q @ M, np.eye(64), atol=1e-9)

    def test_error_forms_agree(self):
        K = simulate.attention_kernel(self.ds, self.w, self.f)
        for gamma in 1e-2, 1.0, 10.0:
            a = simulate.empirical_error(self.ds, K, gamma).value
            b = simulate.direct_probe_error(self.ds, K, gamma).value
            self.assertAlmostEqual(a, b, delta=1e-10)

    def test_sign_flip_invariance(self):
        neg = Nonlinearity(name='neg-tanh', params={},
                           fn=lambda t: -np.tanh(t))
        a = simulate.empirical_error(
            self.ds, simulate.attention_kernel(self.ds, self.w, self.f), 1.0)
        b = simulate.empirical_error(
            self.ds, simulate.attention_kernel(self.ds, self.w, neg), 1.0)
        self.assertAlmostEqual(a.value, b.value, delta=1e-10)

    def test_token_permutation_invariance(self):
        perm = np.random.default_rng(0).permutation(64)
        shuffled = attr.evolve(self.ds, X=self.ds.X[:, perm],
                               y=self.ds.y[perm])
        a = simulate.empirical_error(
            self.ds, simulate.attention_kernel(self.ds, self.w, self.f), 1.0)
        b = simulate.empirical_error(
            shuffled, simulate.attention_kernel(shuffled, self.w, self.f),
            1.0)
        self.assertAlmostEqual(a.value, b.value, delta=1e-10)

    def test_large_gamma_saturates(self):
        K = simulate.attention_kernel(self.ds, self.w, self.f)
        self.assertGreater(
            simulate.empirical_error(self.ds, K, 1e8).value, 0.999)

    def test_gamma_must_be_positive(self):
        with self.assertRaises(InvalidArgument):
            simulate.ridge_empirical(self.ds, 0.0)

    def test_spectral_norm(self):
        A = np.random.default_rng(1).standard_normal((40, 30))
        self.assertAlmostEqual(
            simulate.spectral_norm(A, iterations=500, tol=1e-12),
            np.linalg.norm(A, 2), delta=1e-6)
        self.assertEqual(simulate.spectral_norm(np.zeros((3, 3))), 0.0)

    def test_noise_kernel_has_zero_diagonal(self):
        K = simulate.noise_kernel(self.ds.Z, self.f)
        self.assertFalse(np.any(np.diag(K)))

    def test_linearization_report(self):
        report = simulate.linearization_parts(
            self.ds, self.w, self.f, self.m.a1)
        self.assertEqual((report.n, report.p), (64, 96))
        self.assertGreater(report.kn_norm, 0)
        self.assertGreaterEqual(report.residual, 0)


class TestMonteCarlo(AttnTestCase):

    def setUp(self):
        self.cell = simulate.TrialCell(
            n=48, p=96, gamma=1.0, snr=1.0,
            alignment=AlignmentMode.ALIGNED,
            f=nonlinearity.profile('tanh')[0])

    def test_order_and_workers_do_not_matter(self):
        a = simulate.monte_carlo(self.cell, 6, master_seed=11)
        b = simulate.monte_carlo(self.cell, 6, master_seed=11,
                                 workers=3, order=[5, 3, 1, 0, 2, 4])
        self.assertEqual(a.per_trial, b.per_trial)
        self.assertEqual((a.mean_e, a.std_e), (b.mean_e, b.std_e))
        self.assertEqual(a.trials, 6)
        self.assertAlmostEqual(a.stderr, a.std_e / np.sqrt(6))

    def test_seeds_follow_mix64(self):
        summary = simulate.monte_carlo(self.cell, 3, master_seed=2)
        self.assertEqual([s for s, _ in summary.per_trial],
                         [simulate.mix64(2, t) for t in range(3)])

    def test_rejects(self):
        with self.assertRaises(InvalidArgument):
            simulate.monte_carlo(self.cell, 0, master_seed=0)
        with self.assertRaises(InvalidArgument):
            simulate.monte_carlo(self.cell, 2, 0, order=[0, 0])

    def test_single_trial_has_zero_spread(self):
        summary = simulate.monte_carlo(self.cell, 1, master_seed=0)
        self.assertEqual((summary.std_e, summary.stderr), (0.0, 0.0))

    def test_ridge_matches_theory(self):
        cell = simulate.TrialCell(n=256, p=1024, gamma=1.0, snr=1.0,
                                  alignment=AlignmentMode.ALIGNED)
        summary = simulate.monte_carlo(cell, 4, master_seed=0)
        self.assertAlmostEqual(
            summary.mean_e, theory.ridge_error(4.0, 1.0, 1.0), delta=0.03)

    def test_softmax_gap(self):
        soft, entry = simulate.softmax_error_gap(self.cell, seed=1)
        self.assertTrue(0 <= soft <= 1 and 0 <= entry <= 1)


class TestTraces(AttnTestCase):

    def test_small_sample(self):
        f, m = nonlinearity.profile('tanh')
        report = simulate.trace_diagnostics(400, 800, f, 1.0, seed=0, m=m)
        self.assertEqual(report.empirical.shape, (8,))
        self.assertLess(report.identity_defect, 1e-8)
        self.assertLess(report.relative_gap[0], 0.05)
        self.assertEqual(set(report.as_dict()), {
            'm', 'delta1', 'delta2', 'delta3', 'delta4', 'delta5', 'delta6',
            'delta7'})


def theory_params(m, c, gamma):
    return NoiseSystemParams(c=c, gamma=gamma, a1=m.a1, nu=m.nu)


@unittest.skipUnless(slow, "set ATTNMEM_SLOW_TESTS=1 for full-size runs")
class TestFullSize(AttnTestCase):

    def assertAgrees(self, cell, e_bar, trials=10):
        summary = simulate.monte_carlo(cell, trials, master_seed=0,
                                       workers=None)
        self.assertLessEqual(abs(summary.mean_e - e_bar),
                             max(3 * summary.stderr, 0.03 * e_bar))

    def test_null_model(self):
        f, m = nonlinearity.profile('tanh')
        cell = simulate.TrialCell(n=1024, p=4096, gamma=1.0, f=f)
        self.assertAgrees(cell, theory.attention_error(
            theory_params(m, 4.0, 1.0),
            theory.alignment_for_mode('null', 0.0)).e_bar)

    def test_signal(self):
        f, m = nonlinearity.profile('tanh')
        cell = simulate.TrialCell(n=2048, p=512, gamma=0.01, snr=1.082637,
                                  alignment=AlignmentMode.SIGNAL, f=f)
        self.assertAgrees(cell, theory.attention_error(
            theory_params(m, 0.25, 0.01),
            theory.alignment_for_mode('signal', 1.082637)).e_bar)

    def test_aligned_small_ratio(self):
        f, m = nonlinearity.profile('tanh')
        cell = simulate.TrialCell(n=1024, p=128, gamma=1.0, snr=1.0,
                                  alignment=AlignmentMode.ALIGNED, f=f)
        self.assertAgrees(cell, theory.attention_error(
            theory_params(m, 0.125, 1.0),
            theory.alignment_for_mode('aligned', 1.0)).e_bar)

    def test_ridge(self):
        cell = simulate.TrialCell(n=512, p=2048, gamma=1.0, snr=1.0,
                                  alignment=AlignmentMode.ALIGNED)
        self.assertAgrees(cell, theory.ridge_error(4.0, 1.0, 1.0))

    def test_traces(self):
        f, m = nonlinearity.profile('tanh')
        gaps = np.array([
            simulate.trace_diagnostics(
                2048, 4096, f, 1.0, simulate.mix64(0, t), m).relative_gap
            for t in range(10)])
        self.assertTrue(np.all(np.median(gaps, axis=0)[1:] < 0.03))

    def test_linearization_scaling(self):
        f, m = nonlinearity.profile('tanh')
        residuals = []
        for n in 512, 2048:
            mu, w = simulate.sample_signal(n, 'aligned', 1.0, 0)
            ds = simulate.sample_dataset(n, n, mu, seed=0)
            residuals.append(
                simulate.linearization_parts(ds, w, f, m.a1).residual)
        self.assertTrue(1.3 <= residuals[0] / residuals[1] <= 3.0)