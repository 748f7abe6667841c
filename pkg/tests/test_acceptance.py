"""
Full-size training runs on the synthetic benchmark. These take minutes, so
they only run with ESCL_SLOW_TESTS=1.
"""
import os
import unittest

import numpy as np

from escl_lab.encoder import init_params
from escl_lab.evaluation.ablation import run_ablation
from escl_lab.evaluation.sts import evaluate_sts
from escl_lab.evaluation.synthetic import generate_synthetic_corpus
from escl_lab.losses import LossConfig
from escl_lab.numerics import RngStream
from escl_lab.training import TrainConfig, loss_gap, train


slow = unittest.skipUnless(os.environ.get('ESCL_SLOW_TESTS') == '1',
                           "set ESCL_SLOW_TESTS=1 to run full-size training")

# medians closer than this count as a tie
TIE_BAND = 0.01


@slow
class BenchmarkTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data = generate_synthetic_corpus(0, 512, 256, 200)
        cls.base = TrainConfig(checkpoint_path='', trace_path='')

    def _median(self, r_high, variant, seeds, **loss):
        base = self.base.replace(loss=LossConfig(**loss)) if loss else self.base
        report = run_ablation(base, [r_high], [variant], seeds,
                              self.data.corpus, self.data.vocab,
                              self.data.pairs, workers=os.cpu_count() or 1)
        return report.rows[0].median_rho

    def test_full_objective_against_info_nce_only(self):
        seeds = range(10)
        escl = self._median(0.45, 'rd', seeds)
        info_nce_only = self._median(0.45, 'none', seeds, lam=0.0)
        untrained = np.median([
            evaluate_sts(init_params(len(self.data.vocab), 32, 32,
                                     RngStream(seed, (0,))),
                         self.data.pairs).rho
            for seed in seeds])
        self.assertGreaterEqual(escl, info_nce_only - TIE_BAND)
        self.assertGreaterEqual(escl - untrained, 0.2)
        self.assertGreaterEqual(info_nce_only - untrained, 0.2)

    def test_rd_against_cossim(self):
        seeds = range(5)
        self.assertGreaterEqual(self._median(0.45, 'rd', seeds),
                                self._median(0.45, 'cossim', seeds) - TIE_BAND)

    def test_distance_gap_widens(self):
        for seed in (0, 1, 2):
            with self.subTest(seed=seed):
                _, trace = train(self.base.replace(seed=seed),
                                 self.data.corpus, self.data.vocab)
                first, last = loss_gap(trace)
                self.assertEqual(first, trace.records[0].breakdown.gap)
                self.assertEqual(last, trace.records[-1].breakdown.gap)
                self.assertGreater(last, first)
